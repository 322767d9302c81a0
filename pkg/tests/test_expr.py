import math

import numpy as np
import pytest

from reebkit import expr as ex
from reebkit.expr import BumpSpec, DomainError, ParseError

from conftest import LAM, LN_LAM

t, x, y, r = (ex.coord(n) for n in "txyr")
lam = ex.param("lam")


# -- differentiate ------------------------------------------------------------


def test_derivative_of_exponential_in_t():
    de = ex.differentiate(ex.power(lam, t), "t")
    for tv in (0.0, 0.3, 1.0):
        got = ex.evaluate(de, {"t": tv}, {"lam": LAM})
        assert got == pytest.approx(LN_LAM * LAM**tv, rel=1e-14)


def test_derivative_of_constant_is_zero():
    assert ex.is_zero(ex.differentiate(ex.const(3.5), "x"))
    assert ex.is_zero(ex.differentiate(ex.mul(lam, y), "x"))


@pytest.mark.parametrize("eps", [0.1, 0.25, 0.4])
def test_polynomial_bump_derivative_vanishes_at_flat_ends(eps):
    spec = BumpSpec(eps=eps)
    de = ex.differentiate(ex.bump(spec, r), "r")
    for rv in (eps, 1 - eps):
        assert ex.evaluate(de, {"r": rv}) == pytest.approx(0.0, abs=1e-12)
    # second derivative also vanishes there (C2 smoothstep)
    d2 = ex.differentiate(de, "r")
    for rv in (eps, 1 - eps):
        assert ex.evaluate(d2, {"r": rv}) == pytest.approx(0.0, abs=1e-9)


def test_smoothstep_matches_closed_form():
    spec = BumpSpec(eps=0.25)
    u = np.linspace(0.25, 0.75, 11)
    s = (u - 0.25) / 0.5
    expect = 6 * s**5 - 15 * s**4 + 10 * s**3
    assert np.allclose(ex.evaluate(ex.bump(spec, r), {"r": u}), expect, atol=1e-15)


def test_differentiate_rejects_unknown_names():
    with pytest.raises(KeyError):
        ex.differentiate(ex.mul(x, y), "q", coords=("x", "y"))
    with pytest.raises(KeyError):
        ex.differentiate(ex.mul(x, lam), "lam")


# -- evaluate -----------------------------------------------------------------


def test_evaluate_eigenvalue_power():
    e = ex.power(lam, t)
    assert ex.evaluate(e, {"t": 0.0}, {"lam": LAM}) == 1.0
    assert ex.evaluate(e, {"t": 1.0}, {"lam": LAM}) == pytest.approx(2.6180339887, abs=1e-10)
    assert ex.evaluate(ex.mul(ex.ln(lam), e), {"t": 0.0}, {"lam": LAM}) == pytest.approx(0.9624236501, abs=1e-10)


def test_evaluate_errors():
    with pytest.raises(KeyError):
        ex.evaluate(ex.add(x, y), {"x": 1.0})
    with pytest.raises(KeyError):
        ex.evaluate(ex.mul(lam, x), {"x": 1.0})
    with pytest.raises(DomainError):
        ex.evaluate(ex.ln(x), {"x": -1.0})
    with pytest.raises(DomainError):
        ex.evaluate(ex.ln(x), {"x": 0.0})


def test_evaluate_vectorizes():
    pts = {"x": np.linspace(0, 1, 5), "y": np.ones(5)}
    assert np.allclose(ex.evaluate(ex.add(x, y), pts), pts["x"] + 1)


# -- simplify -----------------------------------------------------------------


def test_simplify_annihilates():
    e = ex.add(ex.mul(ex.power(lam, t), 0.0), 0.0)
    assert ex.simplify(e) == ex.ZERO


def test_simplify_structural_cancellation():
    for e in (ex.sin(ex.mul(x, y)), ex.mul(ex.ln(lam), ex.power(lam, t)), ex.bump(BumpSpec(), r)):
        assert ex.simplify(e - e) == ex.ZERO


def test_simplify_unit_exponent_and_zero_power():
    assert ex.simplify(ex.power(x, 0.0)) == ex.ONE
    assert ex.simplify(ex.power(x, 1.0)) == x


# -- random trees -----------------------------------------------------------


def _tree(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        return ex.coord(str(rng.choice(["x", "y", "t"]))) if rng.random() < 0.7 else ex.const(
            float(np.round(rng.uniform(-2, 2), 2)))
    k = rng.integers(0, 6)
    a = _tree(rng, depth - 1)
    if k == 0:
        return ex.add(a, _tree(rng, depth - 1))
    if k == 1:
        return ex.mul(a, _tree(rng, depth - 1))
    if k == 2:
        return ex.sin(a)
    if k == 3:
        return ex.cos(a)
    if k == 4:
        return ex.power(a, float(rng.integers(0, 4)))
    return ex.add(a, ex.mul(-1.0, a)) if rng.random() < 0.3 else ex.mul(a, a)


def _points(rng, n):
    return {c: rng.uniform(0.1, 0.9, n) for c in ("x", "y", "t")}


def test_simplify_preserves_values_on_random_trees(rng):
    for _ in range(200):
        e = _tree(rng, 6)
        pts = _points(rng, 100)
        a = np.broadcast_to(ex.evaluate(e, pts), (100,))
        b = np.broadcast_to(ex.evaluate(ex.simplify(e), pts), (100,))
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(a).max()))


def test_derivative_matches_central_difference(rng):
    h = 1e-5
    for _ in range(100):
        e = _tree(rng, 4)
        c = str(rng.choice(["x", "y", "t"]))
        p = _points(rng, 1)
        de = ex.evaluate(ex.differentiate(e, c), p)
        up, dn = dict(p), dict(p)
        up[c] = p[c] + h
        dn[c] = p[c] - h
        fd = (ex.evaluate(e, up) - ex.evaluate(e, dn)) / (2 * h)
        assert np.allclose(de, fd, atol=1e-6, rtol=1e-7)


def test_free_coordinates_are_union_of_children():
    e = ex.add(ex.mul(x, lam), ex.sin(y))
    assert e.coords == {"x", "y"}
    assert e.params == {"lam"}


def test_expr_is_immutable():
    with pytest.raises(AttributeError):
        x.name = "z"


# -- bumps --------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["polynomial", "exponential"])
@pytest.mark.parametrize("eps", [0.05, 0.25, 0.45])
def test_bump_interval_and_monotonicity(kind, eps):
    spec = BumpSpec(eps=eps, kind=kind)
    u = np.linspace(0, 1, 10_000)
    v = spec(u)
    assert np.all(v[u <= eps] == 0.0)
    assert np.all(v[u >= 1 - eps] == 1.0)
    assert np.all(np.diff(v) >= -1e-15)
    assert np.all(spec(u, 1) >= -1e-12)


def test_exponential_bump_derivative_matches_difference():
    spec = BumpSpec(eps=0.2, kind="exponential")
    e = ex.bump(spec, r)
    de = ex.differentiate(e, "r")
    u = np.linspace(0.21, 0.79, 17)
    h = 1e-6
    fd = (ex.evaluate(e, {"r": u + h}) - ex.evaluate(e, {"r": u - h})) / (2 * h)
    assert np.allclose(ex.evaluate(de, {"r": u}), fd, atol=1e-6)


def test_bumpspec_validation():
    with pytest.raises(ValueError):
        BumpSpec(eps=0.5)
    with pytest.raises(ValueError):
        BumpSpec(kind="cubic")


# -- parsing ------------------------------------------------------------------


def test_parse_round_trip_value():
    e = ex.parse("2*x^2 - sin(pi*y)/3 + exp(-t) + sqrt(lam)", coords=("x", "y", "t"))
    pts = {"x": 0.3, "y": 0.2, "t": 0.7}
    expect = 2 * 0.09 - math.sin(math.pi * 0.2) / 3 + math.exp(-0.7) + math.sqrt(LAM)
    assert ex.evaluate(e, pts, {"lam": LAM}) == pytest.approx(expect, rel=1e-14)
    again = ex.parse(ex.to_text(e), coords=("x", "y", "t"))
    assert ex.evaluate(again, pts, {"lam": LAM}) == pytest.approx(expect, rel=1e-14)


def test_parse_power_is_right_associative():
    assert ex.evaluate(ex.parse("2^3^2"), {}) == 512.0
    assert ex.evaluate(ex.parse("-2^2"), {}) == -4.0


def test_parse_bump_reference():
    spec = BumpSpec(name="f", var="r")
    e = ex.parse("bump(f)", coords=("r",), bumps={"f": spec})
    assert ex.evaluate(e, {"r": 0.5}) == pytest.approx(0.5)


@pytest.mark.parametrize("text", ["x +", "foo(x)", "(x", "x $ y", "bump(g)"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        ex.parse(text, coords=("x",))
