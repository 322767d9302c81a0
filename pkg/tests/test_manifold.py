import math

import numpy as np
import pytest

from reebkit import expr as ex
from reebkit.exterior import coordinate_form, field_values, form_values
from reebkit.manifold import (
    ChartComplex,
    Grid,
    HyperbolicityError,
    builtin_carriere,
    builtin_local_chart,
    check_descends,
    default_grid_size,
)

from conftest import LAM


def _eig_oracle():
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    w, vecs = np.linalg.eig(A)
    order = np.argsort(w)  # small (1/lam) first
    return A, w[order], vecs[:, order]


# -- Carriere -----------------------------------------------------------------


def test_carriere_eigenvalue(carriere):
    _, w, _ = _eig_oracle()
    assert carriere.lam_value == pytest.approx(w[1], rel=1e-15)
    assert carriere.lam_value == pytest.approx(2.6180339887, abs=1e-10)


def test_carriere_eigendirections(carriere):
    m = carriere
    mu1 = field_values(m.mu1, {"x": np.zeros(1), "y": np.zeros(1), "t": np.zeros(1)}, m.params)[0, :2]
    mu2 = field_values(m.mu2, {"x": np.zeros(1), "y": np.zeros(1), "t": np.zeros(1)}, m.params)[0, :2]
    # directions (1, 1/lam - 2) and (1, lam - 2)
    assert mu1[1] / mu1[0] == pytest.approx(1 / LAM - 2, rel=1e-14)
    assert mu2[1] / mu2[0] == pytest.approx(LAM - 2, rel=1e-14)
    A, w, vecs = _eig_oracle()
    assert np.allclose(A @ mu1, mu1 / LAM) and np.allclose(A @ mu2, mu2 * LAM)
    assert np.linalg.det(np.column_stack([mu1, mu2])) > 0


def test_carriere_duality(carriere, rng):
    m = carriere
    pts = {c: rng.uniform(0, 1, 50) for c in "xyt"}
    V = np.stack([field_values(f, pts, m.params) for f in (m.mu1, m.mu2)])
    W = np.stack([form_values(f, pts, m.params) for f in (m.v1, m.v2)])
    pair = np.einsum("ipk,jpk->pij", W, V)
    assert np.allclose(pair, np.eye(2)[None], atol=1e-14)


def test_alpha1_annihilates_mu2(carriere, rng):
    m = carriere
    pts = {c: rng.uniform(0, 1, 1000) for c in "xyt"}
    vals = np.einsum("pi,pi->p", form_values(m.alpha1, pts, m.params), field_values(m.mu2, pts, m.params))
    assert np.abs(vals).max() < 1e-14


@pytest.mark.parametrize("A", [((1, 1), (0, 1)), ((2, 0), (0, 1)), ((0, 1), (-1, 0)), ((-3, 1), (-1, 0))])
def test_carriere_rejects_non_hyperbolic(A):
    with pytest.raises(HyperbolicityError):
        builtin_carriere(A)


def test_carriere_other_hyperbolic_matrix():
    m = builtin_carriere(((3, 1), (2, 1)))
    assert check_descends(m.alpha1, m).passed
    assert check_descends(m.alpha2, m).passed
    assert m.lam_value == pytest.approx((4 + math.sqrt(12)) / 2)


# -- descent ------------------------------------------------------------------


@pytest.mark.parametrize("name", ["alpha1", "alpha2", "dt", "R", "S"])
def test_carriere_declared_objects_descend(carriere, name):
    rep = check_descends(carriere.complex.declared[name], carriere)
    assert rep.passed
    assert max(rep.residuals.values()) < 1e-9


def test_raw_covector_does_not_descend(carriere):
    A, w, vecs = _eig_oracle()
    m = carriere
    mu = np.column_stack([[1.0, 1 / LAM - 2], [1.0, LAM - 2]])
    v1 = np.linalg.inv(mu)[0]
    expected = np.abs(v1 @ A - v1).max()  # = (1 - 1/lam) max|v1|
    assert expected == pytest.approx((1 - 1 / LAM) * np.abs(v1).max())
    rep = check_descends(m.v1, m)
    assert not rep.passed
    assert rep.residuals["monodromy"] == pytest.approx(expected, rel=1e-12)
    assert rep.witness_points


def test_constant_mu2_does_not_descend(carriere):
    assert not check_descends(carriere.mu2, carriere).passed


def test_descends_unknown_chart(carriere, box3):
    cc, ch = box3
    with pytest.raises(KeyError):
        check_descends(coordinate_form(ch, "x"), carriere)


# -- open book ------------------------------------------------------------------


def test_open_book_declared_objects_descend(open_book):
    for name, obj in open_book.complex.declared.items():
        rep = check_descends(obj, open_book)
        assert rep.passed, name
    assert "collar" in check_descends(open_book.complex.declared["dphi"], open_book).residuals


def test_collar_mismatch_detected(open_book):
    bad = {"tube": coordinate_form(open_book.tube, "phi"), "page": coordinate_form(open_book.page, "theta")}
    rep = check_descends(bad, open_book)
    assert not rep.passed and rep.residuals["collar"] > 0.5


def test_collar_radius_relation(open_book):
    out = open_book.collar.apply({"s": np.array([1.0, 1.1]), "theta": np.zeros(2), "phi": np.zeros(2)})
    assert np.allclose(np.asarray(out["r"]) ** 2 + np.array([1.0, 1.21]), 2.0)


def test_tube_grid_avoids_axis(open_book):
    g = open_book.complex.grid("tube", n=8)
    assert g.points()["r"].min() == pytest.approx(0.05)


# -- local charts, grids --------------------------------------------------------


def test_local_charts():
    assert builtin_local_chart(3).chart("box3").coords == ("x", "y", "z")
    assert builtin_local_chart(5).chart("box5").coords == tuple(f"x{i}" for i in range(1, 6))
    for dim in (4, 1, 2):
        with pytest.raises(ValueError):
            builtin_local_chart(dim)


def test_local_chart_orientation():
    cc = builtin_local_chart(3)
    o = cc.orientation(cc.chart("box3"))
    assert o.degree == 3 and o.coefficient("x", "y", "z") == ex.ONE


def test_t3_contact_wedge(t3, rng):
    from reebkit.exterior import d, wedge
    cc, alpha = t3
    top = wedge(alpha, d(alpha))
    pts = {c: rng.uniform(0, 1, 200) for c in "xyz"}
    assert np.allclose(form_values(top, pts), 2 * math.pi, atol=1e-12)
    assert check_descends(alpha, cc).passed


def test_grid_rules(box3):
    cc, ch = box3
    with pytest.raises(ValueError):
        Grid.for_chart(ch, n=1)
    g = Grid.for_chart(ch, n=4)
    assert g.size == 64
    assert g.points()["x"].max() == 1.0


def test_periodic_axis_is_half_open(carriere):
    g = carriere.grid(n=4)
    assert sorted(set(g.points()["x"])) == [0.0, 0.25, 0.5, 0.75]
    assert sorted(set(g.points()["t"])) == pytest.approx([0.0, 1 / 3, 2 / 3, 1.0])


def test_default_grid_env(monkeypatch):
    assert default_grid_size(3) == 32 and default_grid_size(5) == 8
    monkeypatch.setenv("REEBKIT_GRID", "6")
    assert default_grid_size(3) == 6


def test_identification_needs_declared_chart(box3, carriere):
    cc, ch = box3
    with pytest.raises(ValueError):
        ChartComplex(charts={ch.name: ch}, identifications=carriere.complex.identifications)
