"""Chart complexes, sampling grids and the built-in manifold models.

A quotient is represented by one fundamental-domain chart plus explicit
identification maps; no overlapping atlas is built. An object "descends"
when pulling it back along every identification reproduces it.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from . import expr as ex
from .exterior import (
    Chart,
    KForm,
    SmoothMap,
    VecField,
    coordinate_field,
    coordinate_form,
    field_values,
    forms_close,
    pullback,
    top_form,
)
from .report import FAIL, PASS, VerificationReport

__all__ = [
    "Grid",
    "Identification",
    "ChartComplex",
    "CarriereModel",
    "OpenBookModel",
    "HyperbolicityError",
    "as_complex",
    "default_grid_size",
    "check_descends",
    "periodic_identifications",
    "builtin_carriere",
    "builtin_trivial_open_book",
    "builtin_local_chart",
    "builtin_t3_contact",
    "t3_contact_reeb",
]

GRID_ENV = "REEBKIT_GRID"
TWO_PI = 2.0 * math.pi


def default_grid_size(dim: int) -> int:
    env = os.environ.get(GRID_ENV)
    if env:
        return int(env)
    return 32 if dim <= 3 else 8


@dataclass(frozen=True)
class Grid:
    """Tensor-product sample of a chart box.

    Periodic coordinates are sampled on a half-open period; other coordinates
    on the closed box shrunk by their avoidance margin.
    """

    chart: Chart
    counts: tuple[int, ...]
    domain: tuple[tuple[float, float], ...]
    margins: tuple[float, ...]

    def __post_init__(self):
        if any(c < 2 for c in self.counts):
            raise ValueError("every grid count must be at least 2")

    @classmethod
    def for_chart(cls, chart: Chart, n=None, margins: Mapping[str, float] | None = None,
                  domain: Mapping[str, tuple[float, float]] | None = None) -> "Grid":
        if n is None:
            n = default_grid_size(chart.dim)
        counts = tuple(n.get(c, default_grid_size(chart.dim)) for c in chart.coords) if isinstance(n, Mapping) \
            else (int(n),) * chart.dim
        dom = tuple(tuple((domain or {}).get(c, chart.bounds(c))) for c in chart.coords)
        marg = tuple(float((margins or {}).get(c, 0.0)) for c in chart.coords)
        return cls(chart, counts, dom, marg)

    def axes(self) -> list[np.ndarray]:
        out = []
        for name, n, (lo, hi), m in zip(self.chart.coords, self.counts, self.domain, self.margins):
            per = self.chart.period(name)
            if per is not None and math.isclose(hi - lo, per):
                out.append(lo + (hi - lo) * np.arange(n) / n)
            else:
                out.append(np.linspace(lo + m, hi - m, n))
        return out

    def points(self) -> dict[str, np.ndarray]:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return {name: m.ravel() for name, m in zip(self.chart.coords, mesh)}

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def metadata(self) -> dict:
        return {
            "chart": self.chart.name,
            "counts": list(self.counts),
            "domain": [list(b) for b in self.domain],
            "margins": list(self.margins),
        }


@dataclass(frozen=True)
class Identification:
    """Gluing map ``source point ~ map(source point)``, optionally on a sub-box."""

    name: str
    map: SmoothMap
    domain: tuple[tuple[str, tuple[float, float]], ...] = ()

    @property
    def source(self) -> Chart:
        return self.map.source

    @property
    def target(self) -> Chart:
        return self.map.target


def periodic_identifications(chart: Chart) -> list[Identification]:
    out = []
    for name, per in chart.periods:
        comps = {c: ex.coord(c) for c in chart.coords}
        comps[name] = ex.add(ex.coord(name), per)
        out.append(Identification(f"{chart.name}:period-{name}", SmoothMap(chart, chart, comps)))
    return out


@dataclass
class ChartComplex:
    """Charts, identification maps, orientation forms and parameter values."""

    charts: dict[str, Chart]
    identifications: list[Identification] = field(default_factory=list)
    orientations: dict[str, KForm] = field(default_factory=dict)
    params: dict[str, float] = field(default_factory=dict)
    margins: dict[str, dict[str, float]] = field(default_factory=dict)
    declared: dict[str, object] = field(default_factory=dict)
    name: str = "complex"

    def __post_init__(self):
        for ident in self.identifications:
            for ch in (ident.source, ident.target):
                if self.charts.get(ch.name) != ch:
                    raise ValueError(f"identification {ident.name!r} uses undeclared chart {ch.name!r}")
        for name, chart in self.charts.items():
            self.orientations.setdefault(name, top_form(chart))

    def chart(self, name: str) -> Chart:
        try:
            return self.charts[name]
        except KeyError:
            raise KeyError(f"unknown chart {name!r}") from None

    def orientation(self, chart: Chart) -> KForm:
        self._own(chart)
        return self.orientations[chart.name]

    def _own(self, chart: Chart):
        if self.charts.get(chart.name) != chart:
            raise KeyError(f"chart {chart.name!r} is not part of {self.name!r}")

    def grid(self, chart: Chart | str | None = None, n=None, domain=None) -> Grid:
        if chart is None:
            chart = next(iter(self.charts.values()))
        if isinstance(chart, str):
            chart = self.chart(chart)
        self._own(chart)
        return Grid.for_chart(chart, n=n, margins=self.margins.get(chart.name), domain=domain)


def as_complex(model) -> ChartComplex:
    if isinstance(model, ChartComplex):
        return model
    cc = getattr(model, "complex", None)
    if isinstance(cc, ChartComplex):
        return cc
    raise TypeError(f"expected a ChartComplex or built-in model, got {type(model).__name__}")


# ---------------------------------------------------------------------------
# well-definedness on quotients

Representable = Union[KForm, VecField, Mapping[str, Union[KForm, VecField]]]


def _representatives(obj, cc: ChartComplex) -> dict[str, KForm | VecField]:
    reps = dict(obj) if isinstance(obj, Mapping) else {obj.chart.name: obj}
    for name, rep in reps.items():
        if name not in cc.charts or cc.charts[name] != rep.chart:
            raise KeyError(f"object lives on chart {name!r}, which is not in {cc.name!r}")
    kinds = {type(r) for r in reps.values()}
    if len(kinds) != 1:
        raise TypeError("representatives must all be forms or all be vector fields")
    return reps


def _field_mismatch(F: SmoothMap, V_src: VecField, V_tgt: VecField, pts, params) -> np.ndarray:
    """Per-point max |DF(p) V_src(p) - V_tgt(F(p))|."""
    jac = F.jacobian()
    vs = field_values(V_src, pts, params)
    env = {**params, **pts}
    shape = vs.shape[:-1]
    pushed = np.zeros(shape + (F.target.dim,))
    for i, row in enumerate(jac):
        for j, entry in enumerate(row):
            if entry.kind == "const" and entry.value == 0.0:
                continue
            pushed[..., i] += np.broadcast_to(ex.evaluate(entry, env), shape) * vs[..., j]
    sub = dict(F.components)
    at_image = np.zeros_like(pushed)
    for i, name in enumerate(F.target.coords):
        c = V_tgt.comps.get(name)
        if c is not None:
            at_image[..., i] = np.broadcast_to(ex.evaluate(ex.substitute(c, sub), env), shape)
    return np.abs(pushed - at_image).max(axis=-1)


def check_descends(obj: Representable, model, grid: Grid | int | None = None, tol: float = 1e-9,
                   params: Mapping[str, float] | None = None) -> VerificationReport:
    """Does ``obj`` agree with itself across every identification of ``model``?

    For forms the residual is ``pullback(F, obj) - obj``; for vector fields the
    pushforward ``DF . V`` is compared with ``V`` at the image point.
    """
    cc = as_complex(model)
    reps = _representatives(obj, cc)
    params = {**cc.params, **dict(params or {})}
    residuals: dict[str, float] = {}
    worst_val, worst_pt = 0.0, None
    checked = []
    for ident in cc.identifications:
        src, tgt = ident.source.name, ident.target.name
        if src not in reps or tgt not in reps:
            continue
        if isinstance(grid, Grid) and grid.chart == ident.source and not ident.domain:
            g = grid
        else:
            n = grid.counts[0] if isinstance(grid, Grid) else grid
            g = cc.grid(ident.source, n=n, domain=dict(ident.domain))
        pts = g.points()
        if isinstance(reps[src], KForm):
            _, res, idx = forms_close(pullback(ident.map, reps[tgt]), reps[src], pts, params, tol)
        else:
            per_point = _field_mismatch(ident.map, reps[src], reps[tgt], pts, params)
            idx = int(np.argmax(per_point))
            res = float(per_point[idx])
        residuals[ident.name] = res
        checked.append(ident.name)
        if res >= worst_val:
            worst_val = res
            worst_pt = {k: float(v[idx]) for k, v in pts.items()} if idx is not None else None
    verdict = PASS if worst_val < tol else FAIL
    return VerificationReport(
        verdict=verdict,
        condition="descends",
        margin=tol - worst_val,
        residuals=residuals,
        witness_points=[worst_pt] if worst_pt else [],
        grid={"tol": tol},
        details={"identifications": checked},
    )


# ---------------------------------------------------------------------------
# Carriere mapping torus


class HyperbolicityError(ValueError):
    pass


@dataclass
class CarriereModel:
    """The mapping torus of a hyperbolic ``A`` in SL(2, Z).

    ``lam`` is the parameter node for the larger eigenvalue. ``mu1`` spans the
    ``1/lam`` eigendirection and ``mu2`` the ``lam`` eigendirection; ``v1, v2``
    are the dual covectors, ``alpha1 = lam^t v1`` and ``alpha2 = lam^-t v2``.
    These are the pairings that make both forms invariant under the monodromy
    ``(x, t) -> (Ax, t + 1)``. ``R = lam^t mu2`` spans the kernel of
    ``d alpha1`` and, unlike the constant field ``mu2``, descends.
    """

    A: tuple[tuple[int, int], tuple[int, int]]
    lam: ex.Expr
    lam_value: float
    chart: Chart
    mu1: VecField
    mu2: VecField
    v1: KForm
    v2: KForm
    alpha1: KForm
    alpha2: KForm
    R: VecField
    dt: KForm
    monodromy: SmoothMap
    complex: ChartComplex
    convention: str

    def grid(self, n=None) -> Grid:
        return self.complex.grid(self.chart, n=n)

    @property
    def params(self) -> dict[str, float]:
        return self.complex.params


def _eigvec(A, mu: ex.Expr) -> tuple[ex.Expr, ex.Expr]:
    (a, b), (c, d) = A
    if b != 0:
        return ex.const(b), ex.add(mu, -a)
    return ex.add(mu, -d), ex.const(c)


def builtin_carriere(A=((2, 1), (1, 1))) -> CarriereModel:
    A = tuple(tuple(int(v) for v in row) for row in A)
    if len(A) != 2 or any(len(r) != 2 for r in A):
        raise ValueError("A must be a 2x2 integer matrix")
    (a, b), (c, d) = A
    det, tr = a * d - b * c, a + d
    if det != 1:
        raise HyperbolicityError(f"det A = {det}, need 1")
    if tr <= 2:
        raise HyperbolicityError(f"trace A = {tr}, need > 2 for a hyperbolic monodromy")
    lam_value = (tr + math.sqrt(tr * tr - 4)) / 2.0
    lam = ex.param("lam")
    params = {"lam": lam_value}

    m1 = _eigvec(A, ex.power(lam, -1.0))
    m2 = _eigvec(A, lam)
    det_m = ex.add(ex.mul(m1[0], m2[1]), ex.mul(-1.0, m2[0], m1[1]))
    flip = ex.evaluate(det_m, {}, params) < 0
    if flip:
        m2 = (ex.mul(-1.0, m2[0]), ex.mul(-1.0, m2[1]))
        det_m = ex.mul(-1.0, det_m)
    inv = ex.power(det_m, -1.0)
    # rows of [mu1 mu2]^-1
    v1c = (ex.mul(inv, m2[1]), ex.mul(-1.0, inv, m2[0]))
    v2c = (ex.mul(-1.0, inv, m1[1]), ex.mul(inv, m1[0]))

    chart = Chart("T2xI", ("x", "y", "t"), ((0, 1), (0, 1), (0, 1)), {"x": 1.0, "y": 1.0})
    t = ex.coord("t")
    grow, shrink = ex.power(lam, t), ex.power(lam, ex.mul(-1.0, t))
    mu1 = VecField(chart, {"x": m1[0], "y": m1[1]})
    mu2 = VecField(chart, {"x": m2[0], "y": m2[1]})
    v1 = KForm(chart, 1, {"x": v1c[0], "y": v1c[1]})
    v2 = KForm(chart, 1, {"x": v2c[0], "y": v2c[1]})
    alpha1 = v1 * grow
    alpha2 = v2 * shrink
    R = mu2 * grow
    dt = coordinate_form(chart, "t")
    x, y = ex.coord("x"), ex.coord("y")
    monodromy = SmoothMap(chart, chart, {
        "x": ex.add(ex.mul(a, x), ex.mul(b, y)),
        "y": ex.add(ex.mul(c, x), ex.mul(d, y)),
        "t": ex.add(t, 1.0),
    })
    idents = periodic_identifications(chart) + [Identification("monodromy", monodromy)]
    cc = ChartComplex(
        charts={chart.name: chart},
        identifications=idents,
        orientations={chart.name: top_form(chart)},
        params=params,
        declared={"alpha1": alpha1, "alpha2": alpha2, "dt": dt, "R": R, "S": mu1 * shrink},
        name=f"carriere{A}",
    )
    convention = (
        "mu1: eigenvalue 1/lam, mu2: eigenvalue lam; alpha1 = lam^t v1, alpha2 = lam^-t v2"
        + ("; mu2 sign flipped for a positive eigenbasis" if flip else "")
    )
    return CarriereModel(A, lam, lam_value, chart, mu1, mu2, v1, v2, alpha1, alpha2, R, dt,
                         monodromy, cc, convention)


# ---------------------------------------------------------------------------
# trivial open book of the 3-sphere


@dataclass
class OpenBookModel:
    """S^3 as the trivial open book with binding S^1.

    The tube ``B x D^2`` has coordinates ``(theta, r, phi)``; the page bundle
    ``D^2 x S^1`` has ``(s, theta, phi)`` with ``s`` radial in the page disk.
    On the overlap ``r^2 + s^2 = 2`` (the page chart runs to ``s = 1.1`` so the
    overlap is a collar ``r`` in roughly [0.89, 1]).
    """

    binding: Chart
    X_B: VecField
    alpha: KForm
    tube: Chart
    page: Chart
    circle: Chart
    to_binding: SmoothMap
    projection: SmoothMap
    collar: SmoothMap
    complex: ChartComplex

    @property
    def params(self) -> dict[str, float]:
        return self.complex.params


R_MARGIN = 0.05
PAGE_OUTER = 1.1


def builtin_trivial_open_book() -> OpenBookModel:
    binding = Chart("binding", ("theta",), ((0, TWO_PI),), {"theta": TWO_PI})
    tube = Chart("tube", ("theta", "r", "phi"), ((0, TWO_PI), (0, 1), (0, TWO_PI)),
                 {"theta": TWO_PI, "phi": TWO_PI})
    page = Chart("page", ("s", "theta", "phi"), ((0, PAGE_OUTER), (0, TWO_PI), (0, TWO_PI)),
                 {"theta": TWO_PI, "phi": TWO_PI})
    circle = Chart("circle", ("phi",), ((0, TWO_PI),), {"phi": TWO_PI})
    theta, phi, s = ex.coord("theta"), ex.coord("phi"), ex.coord("s")
    X_B = coordinate_field(binding, "theta")
    alpha = coordinate_form(binding, "theta")
    to_binding = SmoothMap(tube, binding, {"theta": theta})
    projection = SmoothMap(tube, circle, {"phi": phi})
    r_of_s = ex.power(ex.add(2.0, ex.mul(-1.0, ex.power(s, 2.0))), 0.5)
    collar = SmoothMap(page, tube, {"theta": theta, "r": r_of_s, "phi": phi})
    idents = []
    for ch in (binding, tube, page, circle):
        idents += periodic_identifications(ch)
    idents.append(Identification("collar", collar, (("s", (1.0, PAGE_OUTER)),)))
    dphi = {"tube": coordinate_form(tube, "phi"), "page": coordinate_form(page, "phi")}
    dphi_field = {"tube": coordinate_field(tube, "phi"), "page": coordinate_field(page, "phi")}
    cc = ChartComplex(
        charts={c.name: c for c in (binding, tube, page, circle)},
        identifications=idents,
        margins={"tube": {"r": R_MARGIN}},
        declared={"alpha": alpha, "X_B": X_B, "dphi": dphi, "d_dphi": dphi_field},
        name="trivial-open-book",
    )
    return OpenBookModel(binding, X_B, alpha, tube, page, circle, to_binding, projection, collar, cc)


# ---------------------------------------------------------------------------
# plain charts


def builtin_local_chart(dim: int) -> ChartComplex:
    if dim < 3 or dim % 2 == 0:
        raise ValueError(f"local chart dimension must be odd and >= 3, got {dim}")
    coords = ("x", "y", "z") if dim == 3 else tuple(f"x{i}" for i in range(1, dim + 1))
    chart = Chart(f"box{dim}", coords)
    return ChartComplex(charts={chart.name: chart}, name=f"local-chart-{dim}")


def builtin_t3_contact() -> tuple[ChartComplex, KForm]:
    """The 3-torus with ``cos(2 pi z) dx - sin(2 pi z) dy``."""
    chart = Chart("T3", ("x", "y", "z"), periods={"x": 1.0, "y": 1.0, "z": 1.0})
    z = ex.mul(TWO_PI, ex.coord("z"))
    alpha = KForm(chart, 1, {"x": ex.cos(z), "y": ex.mul(-1.0, ex.sin(z))})
    reeb = VecField(chart, {"x": ex.cos(z), "y": ex.mul(-1.0, ex.sin(z))})
    cc = ChartComplex(
        charts={chart.name: chart},
        identifications=periodic_identifications(chart),
        declared={"alpha": alpha, "R": reeb},
        name="t3-contact",
    )
    return cc, alpha


def t3_contact_reeb(cc: ChartComplex) -> VecField:
    return cc.declared["R"]
