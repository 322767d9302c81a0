"""Differential forms and vector fields on a single coordinate chart.

A :class:`KForm` stores its coefficients sparsely, keyed by strictly
increasing tuples of coordinate indices; every sign is computed from
permutation parity when an operator runs. Dimensions here are tiny (at most
about 7), so nothing is packed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import expr as ex
from .expr import Expr

__all__ = [
    "Chart",
    "KForm",
    "VecField",
    "SmoothMap",
    "ChartMismatch",
    "wedge",
    "wedge_power",
    "exterior_derivative",
    "d",
    "contract",
    "lie_derivative",
    "pullback",
    "coordinate_form",
    "top_form",
    "coordinate_field",
    "identity_map",
    "form_values",
    "field_values",
    "skew_matrices",
    "forms_close",
]


class ChartMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """A coordinate box. ``periods`` lists coordinates that wrap around."""

    name: str
    coords: tuple[str, ...]
    domain: tuple[tuple[float, float], ...] = ()
    periods: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(set(self.coords)) != len(self.coords):
            raise ValueError(f"duplicate coordinates in chart {self.name!r}")
        dom = tuple(tuple(map(float, b)) for b in self.domain) or ((0.0, 1.0),) * len(self.coords)
        if len(dom) != len(self.coords):
            raise ValueError("domain needs one interval per coordinate")
        object.__setattr__(self, "domain", dom)
        per = self.periods.items() if isinstance(self.periods, Mapping) else self.periods
        per = tuple((str(k), float(v)) for k, v in per)
        for k, _ in per:
            if k not in self.coords:
                raise ValueError(f"period given for unknown coordinate {k!r}")
        object.__setattr__(self, "periods", per)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def index(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is not a coordinate of chart {self.name!r}") from None

    def period(self, name: str) -> float | None:
        return dict(self.periods).get(name)

    def bounds(self, name: str) -> tuple[float, float]:
        return self.domain[self.index(name)]

    def parse(self, text: str, bumps=None) -> Expr:
        return ex.parse(text, coords=self.coords, bumps=bumps)


def _same_chart(a: Chart, b: Chart):
    if a != b:
        raise ChartMismatch(f"chart mismatch: {a.name!r} vs {b.name!r}")


def _perm_sign(seq) -> int:
    """Parity of the permutation sorting ``seq`` (0 if it has repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _coerce(c) -> Expr:
    return c if isinstance(c, Expr) else ex.const(float(c))


class KForm:
    """A degree-k form on ``chart`` with coefficient table ``coeffs``.

    Keys may be given as index tuples or coordinate-name tuples in any order;
    they are sorted with the matching sign. Zero coefficients are dropped.
    """

    __slots__ = ("chart", "degree", "_coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping | None = None):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        table: dict[tuple[int, ...], Expr] = {}
        if degree <= chart.dim:
            for key, c in (coeffs or {}).items():
                if isinstance(key, (str, int)):
                    key = (key,)
                idx = tuple(chart.index(k) if isinstance(k, str) else int(k) for k in key)
                if len(idx) != degree:
                    raise ValueError(f"key {key!r} does not have length {degree}")
                s = _perm_sign(idx)
                if s == 0:
                    continue
                srt = tuple(sorted(idx))
                val = _coerce(c) if s > 0 else ex.mul(-1.0, _coerce(c))
                table[srt] = ex.add(table[srt], val) if srt in table else val
        table = {k: v for k, v in table.items() if not (v.kind == "const" and v.value == 0.0)}
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "_coeffs", MappingProxyType(dict(sorted(table.items()))))

    def __setattr__(self, key, value):
        raise AttributeError("KForm is immutable")

    @property
    def coeffs(self) -> Mapping[tuple[int, ...], Expr]:
        return self._coeffs

    def coefficient(self, *names) -> Expr:
        idx = tuple(self.chart.index(n) if isinstance(n, str) else n for n in names)
        s = _perm_sign(idx)
        c = self._coeffs.get(tuple(sorted(idx)), ex.ZERO)
        return c if s > 0 else ex.mul(-1.0, c) if s < 0 else ex.ZERO

    def scalar(self) -> Expr:
        if self.degree != 0:
            raise ValueError("only 0-forms have a scalar value")
        return self._coeffs.get((), ex.ZERO)

    def map_coeffs(self, fn) -> "KForm":
        return KForm(self.chart, self.degree, {k: fn(v) for k, v in self._coeffs.items()})

    def simplify(self) -> "KForm":
        return self.map_coeffs(ex.simplify)

    def is_zero(self) -> bool:
        return all(ex.is_zero(c) for c in self._coeffs.values())

    def __add__(self, other: "KForm") -> "KForm":
        _same_chart(self.chart, other.chart)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        table = dict(self._coeffs)
        for k, v in other._coeffs.items():
            table[k] = ex.add(table[k], v) if k in table else v
        return KForm(self.chart, self.degree, table)

    def __neg__(self) -> "KForm":
        return self.map_coeffs(lambda c: ex.mul(-1.0, c))

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def __mul__(self, scalar) -> "KForm":
        if isinstance(scalar, KForm):
            return wedge(self, scalar)
        s = _coerce(scalar)
        return self.map_coeffs(lambda c: ex.mul(s, c))

    __rmul__ = __mul__

    def __xor__(self, other: "KForm") -> "KForm":
        return wedge(self, other)

    def __repr__(self):
        names = self.chart.coords
        terms = [f"({c})*{'^'.join('d' + names[i] for i in k) or '1'}" for k, c in self._coeffs.items()]
        return f"KForm[{self.degree}]({' + '.join(terms) or '0'})"

    def to_dict(self) -> dict:
        names = self.chart.coords
        return {
            "chart": self.chart.name,
            "degree": self.degree,
            "coefficients": {",".join(names[i] for i in k): ex.to_text(c) for k, c in self._coeffs.items()},
        }


class VecField:
    """Vector field given by its components along the chart coordinates."""

    __slots__ = ("chart", "_comps")

    def __init__(self, chart: Chart, comps: Mapping[str, object] | None = None):
        table = {}
        for name, c in (comps or {}).items():
            chart.index(name)
            c = _coerce(c)
            if not (c.kind == "const" and c.value == 0.0):
                table[name] = c
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "_comps", MappingProxyType(table))

    def __setattr__(self, key, value):
        raise AttributeError("VecField is immutable")

    @property
    def comps(self) -> Mapping[str, Expr]:
        return self._comps

    def component(self, name: str) -> Expr:
        self.chart.index(name)
        return self._comps.get(name, ex.ZERO)

    def __add__(self, other: "VecField") -> "VecField":
        _same_chart(self.chart, other.chart)
        names = set(self._comps) | set(other._comps)
        return VecField(self.chart, {n: ex.add(self.component(n), other.component(n)) for n in names})

    def __neg__(self) -> "VecField":
        return self * -1.0

    def __sub__(self, other: "VecField") -> "VecField":
        return self + (-other)

    def __mul__(self, scalar) -> "VecField":
        s = _coerce(scalar)
        return VecField(self.chart, {n: ex.mul(s, c) for n, c in self._comps.items()})

    __rmul__ = __mul__

    def __repr__(self):
        terms = [f"({c})*d/d{n}" for n, c in self._comps.items()]
        return f"VecField({' + '.join(terms) or '0'})"

    def to_dict(self) -> dict:
        return {"chart": self.chart.name, "components": {n: ex.to_text(c) for n, c in self._comps.items()}}


@dataclass(frozen=True)
class SmoothMap:
    """Map ``source -> target``; one source-coordinate expression per target coordinate."""

    source: Chart
    target: Chart
    components: Mapping[str, Expr] = field(default_factory=dict)

    def __post_init__(self):
        comps = {k: _coerce(v) for k, v in dict(self.components).items()}
        if set(comps) != set(self.target.coords):
            raise ValueError("SmoothMap needs exactly one component per target coordinate")
        stray = set().union(*(c.coords for c in comps.values())) - set(self.source.coords)
        if stray:
            raise ValueError(f"components use non-source coordinates {sorted(stray)}")
        object.__setattr__(self, "components", MappingProxyType(comps))

    def __hash__(self):
        return hash((self.source, self.target, tuple(sorted(self.components.items()))))

    def jacobian(self) -> list[list[Expr]]:
        """Rows indexed by target coordinate, columns by source coordinate."""
        return [[ex.differentiate(self.components[t], s) for s in self.source.coords] for t in self.target.coords]

    def apply(self, point: Mapping[str, object], params=None) -> dict:
        env = {**dict(params or {}), **point}
        shape = np.shape(next(iter(point.values()))) if point else ()
        return {t: np.broadcast_to(ex.evaluate(c, env), shape) + 0.0 for t, c in self.components.items()}


def identity_map(chart: Chart) -> SmoothMap:
    return SmoothMap(chart, chart, {c: ex.coord(c) for c in chart.coords})


# ---------------------------------------------------------------------------
# construction helpers


def coordinate_form(chart: Chart, *names: str) -> KForm:
    """``dx_{i1} ^ ... ^ dx_{ik}`` for the named coordinates."""
    return KForm(chart, len(names), {tuple(names): ex.ONE})


def top_form(chart: Chart, coefficient=1.0) -> KForm:
    return KForm(chart, chart.dim, {tuple(range(chart.dim)): coefficient})


def coordinate_field(chart: Chart, name: str) -> VecField:
    return VecField(chart, {name: ex.ONE})


# ---------------------------------------------------------------------------
# operators


def wedge(a: KForm, b: KForm) -> KForm:
    _same_chart(a.chart, b.chart)
    deg = a.degree + b.degree
    if deg > a.chart.dim:
        return KForm(a.chart, deg)
    table: dict[tuple[int, ...], list[Expr]] = {}
    for I, ca in a.coeffs.items():
        for J, cb in b.coeffs.items():
            s = _perm_sign(I + J)
            if s == 0:
                continue
            term = ex.mul(ca, cb) if s > 0 else ex.mul(-1.0, ca, cb)
            table.setdefault(tuple(sorted(I + J)), []).append(term)
    return KForm(a.chart, deg, {k: ex.add(*v) for k, v in table.items()})


def wedge_power(a: KForm, n: int) -> KForm:
    """``a ^ a ^ ... ^ a`` (n factors); n = 0 gives the constant 0-form 1."""
    out = KForm(a.chart, 0, {(): 1.0})
    for _ in range(n):
        out = wedge(out, a)
    return out


def exterior_derivative(a: KForm) -> KForm:
    chart = a.chart
    if a.degree >= chart.dim:
        return KForm(chart, a.degree + 1)
    table: dict[tuple[int, ...], list[Expr]] = {}
    for I, c in a.coeffs.items():
        for j, name in enumerate(chart.coords):
            if j in I or name not in c.coords:
                continue
            dc = ex.differentiate(c, name)
            if dc.kind == "const" and dc.value == 0.0:
                continue
            before = sum(1 for i in I if i < j)
            term = dc if before % 2 == 0 else ex.mul(-1.0, dc)
            table.setdefault(tuple(sorted(I + (j,))), []).append(term)
    return KForm(chart, a.degree + 1, {k: ex.add(*v) for k, v in table.items()})


d = exterior_derivative


def contract(V: VecField, a: KForm) -> KForm:
    """Interior product: ``iota_V a`` of degree k - 1."""
    _same_chart(V.chart, a.chart)
    if a.degree == 0:
        raise ValueError("cannot contract a vector field into a 0-form")
    names = a.chart.coords
    table: dict[tuple[int, ...], list[Expr]] = {}
    for I, c in a.coeffs.items():
        for m, i in enumerate(I):
            v = V.comps.get(names[i])
            if v is None:
                continue
            term = ex.mul(v, c) if m % 2 == 0 else ex.mul(-1.0, v, c)
            table.setdefault(I[:m] + I[m + 1:], []).append(term)
    return KForm(a.chart, a.degree - 1, {k: ex.add(*v) for k, v in table.items()})


def lie_derivative(V: VecField, a: KForm) -> KForm:
    """Cartan's formula ``iota_V d a + d iota_V a``."""
    _same_chart(V.chart, a.chart)
    first = contract(V, d(a)) if a.degree < a.chart.dim else KForm(a.chart, a.degree)
    if a.degree == 0:
        return first
    return first + d(contract(V, a))


def pullback(F: SmoothMap, a: KForm) -> KForm:
    _same_chart(F.target, a.chart)
    src = F.source
    names = a.chart.coords
    sub = dict(F.components)
    differentials = {
        t: KForm(src, 1, {(j,): ex.differentiate(F.components[t], s) for j, s in enumerate(src.coords)})
        for t in names
    }
    out = KForm(src, a.degree)
    for I, c in a.coeffs.items():
        piece = KForm(src, 0, {(): ex.substitute(c, sub)})
        for i in I:
            piece = wedge(piece, differentials[names[i]])
        out = out + piece
    return out


# ---------------------------------------------------------------------------
# numeric evaluation


def _point_shape(points: Mapping[str, np.ndarray]) -> tuple[int, ...]:
    return np.shape(next(iter(points.values()))) if points else ()


def form_values(a: KForm, points: Mapping[str, object], params=None) -> np.ndarray:
    """Coefficients at ``points``: array of shape ``(P, C(n, k))``.

    Columns follow ``itertools.combinations(range(n), k)`` order.
    """
    shape = _point_shape(points)
    n = a.chart.dim
    keys = list(itertools.combinations(range(n), a.degree))
    out = np.zeros(shape + (len(keys),))
    env = {**dict(params or {}), **points}
    for col, key in enumerate(keys):
        c = a.coeffs.get(key)
        if c is not None:
            out[..., col] = ex.evaluate(c, env)
    return out


def field_values(V, points: Mapping[str, object], params=None, chart: Chart | None = None) -> np.ndarray:
    """Components at ``points``: array ``(P, n)``.

    ``V`` may be a :class:`VecField` or a callable ``(points, params) -> (P, n)``.
    """
    if callable(V) and not isinstance(V, VecField):
        return np.asarray(V(points, params), dtype=float)
    shape = _point_shape(points)
    env = {**dict(params or {}), **points}
    out = np.zeros(shape + (V.chart.dim,))
    for j, name in enumerate(V.chart.coords):
        c = V.comps.get(name)
        if c is not None:
            out[..., j] = ex.evaluate(c, env)
    return out


def skew_matrices(omega: KForm, points: Mapping[str, object], params=None) -> np.ndarray:
    """The 2-form as antisymmetric matrices ``omega(d_i, d_j)``, shape ``(P, n, n)``."""
    if omega.degree != 2:
        raise ValueError("skew_matrices needs a 2-form")
    shape = _point_shape(points)
    n = omega.chart.dim
    out = np.zeros(shape + (n, n))
    env = {**dict(params or {}), **points}
    for (i, j), c in omega.coeffs.items():
        v = ex.evaluate(c, env)
        out[..., i, j] = v
        out[..., j, i] = -np.asarray(v)
    return out


def forms_close(a: KForm, b: KForm, points: Mapping[str, object], params=None, tol: float = 1e-9):
    """Compare two forms: symbolic zero fast path, then grid residual.

    Returns ``(ok, max_residual, worst_index)``; ``worst_index`` is None when
    the difference simplified to zero.
    """
    _same_chart(a.chart, b.chart)
    if a.degree != b.degree:
        raise ValueError("forms of different degree")
    diff = (a - b).simplify()
    if not diff.coeffs:
        return True, 0.0, None
    vals = np.abs(form_values(diff, points, params))
    per_point = vals.reshape(vals.shape[0] if vals.ndim > 1 else 1, -1).max(axis=1)
    worst = int(np.argmax(per_point))
    res = float(per_point[worst])
    return res < tol, res, worst
