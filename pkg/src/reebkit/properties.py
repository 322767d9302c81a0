"""Random instances and identity residuals for the exterior-calculus property suites.

Every suite draws its instances from a ``numpy.random.Generator`` so a seed
reproduces the run exactly. Residuals are sup-norms of coefficient
differences at random sample points of the chart.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from . import expr as ex
from .exterior import (
    Chart,
    KForm,
    SmoothMap,
    VecField,
    contract,
    d,
    field_values,
    form_values,
    lie_derivative,
    pullback,
    wedge,
)

__all__ = [
    "random_expr",
    "random_form",
    "random_field",
    "random_map",
    "sample_points",
    "SuiteResult",
    "dd_residual",
    "leibniz_residual",
    "antiderivation_residual",
    "naturality_residual",
    "cartan_flow_residual",
    "pullback_linear",
    "run_suite",
    "SUITES",
    "confoliation_instance",
]


def random_expr(rng: np.random.Generator, coords, depth: int = 2) -> ex.Expr:
    """A smooth, moderately sized expression in ``coords``."""
    c = lambda: float(np.round(rng.uniform(-1.5, 1.5), 3))  # noqa: E731
    x = lambda: ex.coord(str(rng.choice(coords)))  # noqa: E731
    if depth <= 0:
        return ex.add(c(), ex.mul(c(), x()))
    kind = rng.integers(0, 5)
    if kind == 0:
        return ex.add(random_expr(rng, coords, depth - 1), random_expr(rng, coords, depth - 1))
    if kind == 1:
        return ex.mul(random_expr(rng, coords, depth - 1), random_expr(rng, coords, depth - 1))
    if kind == 2:
        return ex.sin(random_expr(rng, coords, depth - 1))
    if kind == 3:
        return ex.cos(random_expr(rng, coords, depth - 1))
    return ex.exp(ex.mul(0.5, random_expr(rng,
    coords, 0)))


def random_form(rng: np.random.Generator, chart: Chart, degree: int, terms: int = 2, depth: int = 1) -> KForm:
    idx = list(combinations(range(chart.dim), degree))
    if degree == 0:
        return KForm(chart, 0, {(): random_expr(rng, chart.coords, depth)})
    picks = rng.choice(len(idx), size=min(terms, len(idx)), replace=False)
    return KForm(chart, degree, {idx[int(p)]: random_expr(rng, chart.coords, depth) for p in picks})


def random_field(rng: np.random.Generator, chart: Chart, depth: int = 1) -> VecField:
    return VecField(chart, {c: random_expr(rng, chart.coords, depth) for c in chart.coords})


def random_map(rng: np.random.Generator, source: Chart, target: Chart, depth: int = 1) -> SmoothMap:
    return SmoothMap(source, target, {c: random_expr(rng, source.coords, depth) for c in target.coords})


def sample_points(rng: np.random.Generator, chart: Chart, n: int = 1000) -> dict[str, np.ndarray]:
    return {c: rng.uniform(lo, hi, n) for c, (lo, hi) in zip(chart.coords, chart.domain)}


def _sup(form: KForm, pts) -> float:
    if not form.coeffs:
        return 0.0
    return float(np.abs(form_values(form, pts)).max())


# -- identities ---------------------------------------------------------------


def dd_residual(a: KForm, pts) -> float:
    return _sup(d(d(a)), pts)


def leibniz_residual(a: KForm, b: KForm, pts) -> float:
    """``d(a ^ b) - (da ^ b + (-1)^k a ^ db)``."""
    sign = -1.0 if a.degree % 2 else 1.0
    return _sup(d(wedge(a, b)) - (wedge(d(a), b) + wedge(a, d(b)) * sign), pts)


def antiderivation_residual(V: VecField, a: KForm, b: KForm, pts) -> float:
    """``i_V(a ^ b) - (i_V a ^ b + (-1)^k a ^ i_V b)``; 0-form contractions vanish."""
    sign = -1.0 if a.degree % 2 else 1.0
    ia = contract(V, a) if a.degree else None
    ib = contract(V, b) if b.degree else None
    rhs = None
    if ia is not None:
        rhs = wedge(ia, b)
    if ib is not None:
        term = wedge(a, ib) * sign
        rhs = term if rhs is None else rhs + term
    lhs = contract(V, wedge(a, b))
    return _sup(lhs if rhs is None else lhs - rhs, pts)


def naturality_residual(F: SmoothMap, a: KForm, pts) -> float:
    """``F^* da - d F^* a`` on the source chart."""
    return _sup(pullback(F, d(a)) - d(pullback(F, a)), pts)


def pullback_linear(values: np.ndarray, jac: np.ndarray, n: int, k: int) -> np.ndarray:
    """Pull back constant k-form coefficients ``values`` (combinations order) by ``jac``.

    ``(J^* a)_I = sum_S a_S det(J[S, I])`` -- the Cauchy-Binet form, written
    independently of the symbolic pullback.
    """
    idx = list(combinations(range(n), k))
    out = np.zeros(len(idx))
    for col, I in enumerate(idx):
        for row, S in enumerate(idx):
            out[col] += values[row] * (np.linalg.det(jac[np.ix_(S, I)]) if k else 1.0)
    return out


def _flow(V: VecField, p: np.ndarray, h: float, steps: int = 1) -> np.ndarray:
    names = V.chart.coords

    def f(y):
        return field_values(V, {c: np.array([y[i]]) for i, c in enumerate(names)})[0]

    y = np.array(p, dtype=float)
    dt = h / steps
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _transported(V: VecField, a: KForm, p: np.ndarray, h: float, delta: float) -> np.ndarray:
    """Coefficients of ``(Phi_h^* a)_p`` via a finite-difference Jacobian of the flow."""
    n = V.chart.dim
    q = _flow(V, p, h)
    jac = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = delta
        jac[:, j] = (_flow(V, p + e, h) - _flow(V, p - e, h)) / (2 * delta)
    vals = form_values(a, {c: np.array([q[i]]) for i, c in enumerate(V.chart.coords)})[0]
    return pullback_linear(vals, jac, n, a.degree)


def cartan_flow_residual(V: VecField, a: KForm, pts, h: float = 1e-4, delta: float = 1e-4) -> float:
    """``L_V a`` (Cartan) against the central difference ``(Phi_h^* a - Phi_-h^* a) / 2h``."""
    lie = form_values(lie_derivative(V, a), pts)
    names = V.chart.coords
    P = len(next(iter(pts.values())))
    worst = 0.0
    for i in range(P):
        p = np.array([pts[c][i] for c in names])
        fd = (_transported(V, a, p, h, delta) - _transported(V, a, p, -h, delta)) / (2 * h)
        worst = max(worst, float(np.abs(fd - lie[i]).max()))
    return worst


# -- suites -------------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    instances: int
    max_residual: float
    tol: float
    worst_instance: int

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol

    def to_dict(self) -> dict:
        return {"suite": self.name, "instances": self.instances, "max_residual": self.max_residual,
                "tol": self.tol, "worst_instance": self.worst_instance, "passed": self.passed}


def _chart(rng) -> Chart:
    dim = int(rng.choice([3, 4, 5]))
    coords = tuple(f"x{i}" for i in range(1, dim + 1))
    return Chart(f"R{dim}", coords, ((-1.0, 1.0),) * dim)


def _case_dd(rng):
    ch = _chart(rng)
    a = random_form(rng, ch, int(rng.integers(0, ch.dim - 1)), depth=2)
    return dd_residual(a, sample_points(rng, ch))


def _case_leibniz(rng):
    ch = _chart(rng)
    k = int(rng.integers(0, ch.dim))
    l = int(rng.integers(0, ch.dim - k))
    return leibniz_residual(random_form(rng, ch, k), random_form(rng, ch, l), sample_points(rng, ch))


def _case_antiderivation(rng):
    ch = _chart(rng)
    k = int(rng.integers(1, ch.dim))
    l = int(rng.integers(0, ch.dim - k + 1))
    return antiderivation_residual(random_field(rng, ch), random_form(rng, ch, k), random_form(rng, ch, l),
                                   sample_points(rng, ch))


def _case_naturality(rng):
    src, tgt = _chart(rng), _chart(rng)
    a = random_form(rng, tgt, int(rng.integers(0, min(src.dim, tgt.dim))))
    return naturality_residual(random_map(rng, src, tgt), a, sample_points(rng, src))


def _case_cartan(rng):
    ch = Chart("R3", ("x", "y", "z"), ((-0.5, 0.5),) * 3)
    V = random_field(rng, ch, depth=0)
    a = random_form(rng, ch, int(rng.integers(0, 3)), depth=1)
    return cartan_flow_residual(V, a, sample_points(rng, ch, 2))  # each point costs ~30 flows


SUITES: dict[str, tuple[Callable, int, float]] = {
    "d_squared": (_case_dd, 100, 1e-8),
    "leibniz": (_case_leibniz, 100, 1e-8),
    "antiderivation": (_case_antiderivation, 100, 1e-8),
    "naturality": (_case_naturality, 100, 1e-8),
    "cartan_flow": (_case_cartan, 50, 1e-5),
}


def run_suite(name: str, seed: int = 0, instances: int | None = None) -> SuiteResult:
    case, default_n, tol = SUITES[name]
    rng = np.random.default_rng(seed)
    n = default_n if instances is None else instances
    residuals = [case(rng) for _ in range(n)]
    worst = int(np.argmax(residuals)) if residuals else 0
    return SuiteResult(name, n, float(max(residuals, default=0.0)), tol, worst)


def confoliation_instance(rng: np.random.Generator, dim: int = 3) -> KForm:
    """Random 1-form on the unit box whose ``d`` is constant and of maximal rank.

    ``alpha = sum c_ij x_i dx_j + b dx_n + s df`` with random constants and a
    random smooth ``f``; depending on ``b`` and ``s`` the pairing with the
    kernel is positive, negative or changes sign.
    """
    coords = ("x", "y", "z") if dim == 3 else tuple(f"x{i}" for i in range(1, dim + 1))
    chart = Chart(f"box{dim}", coords)
    while True:
        C = np.triu(rng.normal(size=(dim, dim)), 1)
        W = C - C.T
        if np.linalg.matrix_rank(W, tol=1e-3) == dim - 1:
            break
    table: dict = {}
    for i in range(dim):
        for j in range(i + 1, dim):
            table[(j,)] = ex.add(table.get((j,), ex.ZERO), ex.mul(float(C[i, j]), ex.coord(coords[i])))
    b = float(rng.uniform(-1, 1))
    table[(dim - 1,)] = ex.add(table.get((dim - 1,), ex.ZERO), b)
    alpha = KForm(chart, 1, table)
    f = random_expr(rng, coords, 1)
    df = d(KForm(chart, 0, {(): f}))
    return alpha + df * float(rng.uniform(0, 1.5))
