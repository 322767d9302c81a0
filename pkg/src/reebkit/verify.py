"""Grid checkers for contact, presymplectic, confoliation and connection
conditions, plus closed-orbit witnesses for nontrivial basic classes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as ex
from .exterior import (
    KForm,
    forms_close,
    VecField,
    contract,
    d,
    field_values,
    form_values,
    lie_derivative,
    skew_matrices,
    wedge,
    wedge_power,
)
from .manifold import Grid, as_complex
from .pointwise import RANK_TOL, DegenerateKernelError, NotContactError, kernel_field, reeb_field
from .report import FAIL, PASS, VerificationReport

__all__ = [
    "POSITIVITY_TOL",
    "RESIDUAL_TOL",
    "OrbitResult",
    "top_ratio",
    "is_contact",
    "is_presymplectic",
    "is_confoliation",
    "is_presymplectic_confoliation",
    "is_connection",
    "basic_exactness_witness",
    "kernel_alignment",
    "forms_agree",
    "reeb_agrees",
    "orbit_integral",
    "nontriviality_witness",
]

POSITIVITY_TOL = 1e-10
RESIDUAL_TOL = 1e-9

FieldLike = VecField | Callable


def _resolve(obj, model, grid, params):
    cc = as_complex(model)
    chart = obj.chart
    if isinstance(grid, Grid):
        g = grid
    else:
        g = cc.grid(chart, n=grid)
    return cc, g, g.points(), {**cc.params, **dict(params or {})}


def _point(pts, i) -> dict[str, float]:
    return {k: float(np.asarray(v)[i]) for k, v in pts.items()}


def _odd_dim(chart) -> int:
    if chart.dim % 2 == 0:
        raise ValueError(f"need an odd-dimensional chart, {chart.name!r} has dimension {chart.dim}")
    return (chart.dim - 1) // 2


def top_ratio(alpha: KForm, model, grid=None, params=None) -> tuple[np.ndarray, dict]:
    """``alpha ^ (d alpha)^n`` divided by the orientation form, per grid point."""
    n = _odd_dim(alpha.chart)
    cc, g, pts, params = _resolve(alpha, model, grid, params)
    top = wedge(alpha, wedge_power(d(alpha), n))
    num = form_values(top, pts, params)[:, 0]
    vol = form_values(cc.orientation(alpha.chart), pts, params)[:, 0]
    return num / vol, {"grid": g, "points": pts}


def _ratio_report(alpha, model, grid, params, tol, condition, strict) -> VerificationReport:
    ratio, ctx = top_ratio(alpha, model, grid, params)
    i = int(np.argmin(ratio))
    margin = float(ratio[i])
    ok = margin > tol if strict else margin > -tol
    return VerificationReport(
        verdict=PASS if ok else FAIL,
        condition=condition,
        margin=margin,
        residuals={},
        witness_points=[_point(ctx["points"], i)],
        grid=ctx["grid"].metadata(),
        details={"min_ratio": margin, "max_ratio": float(ratio.max()), "tol": tol},
    )


def is_contact(alpha: KForm, model, grid=None, tol: float = POSITIVITY_TOL, params=None) -> VerificationReport:
    """Strict positivity of ``alpha ^ (d alpha)^n`` against the orientation."""
    return _ratio_report(alpha, model, grid, params, tol, "contact", strict=True)


def is_confoliation(alpha: KForm, model, grid=None, tol: float = POSITIVITY_TOL, params=None) -> VerificationReport:
    return _ratio_report(alpha, model, grid, params, tol, "confoliation", strict=False)


def _max_abs(form: KForm, pts, params) -> tuple[float, int | None]:
    form = form.simplify()
    if not form.coeffs:
        return 0.0, None
    vals = np.abs(form_values(form, pts, params)).max(axis=1)
    i = int(np.argmax(vals))
    return float(vals[i]), i


def is_presymplectic(omega: KForm, model, grid=None, tol: float = RESIDUAL_TOL,
                     rank_tol: float = RANK_TOL, params=None) -> VerificationReport:
    """Closed and of rank ``2n`` at every grid point."""
    n = _odd_dim(omega.chart)
    cc, g, pts, params = _resolve(omega, model, grid, params)
    closed_res, ci = _max_abs(d(omega), pts, params)
    mats = skew_matrices(omega, pts, params)
    s = np.linalg.svd(mats, compute_uv=False)
    scale = np.maximum(s[:, 0], 1.0)
    rank = (s > rank_tol * scale[:, None]).sum(axis=1)
    rank = rank - rank % 2
    weakest = s[:, 2 * n - 1] / scale
    j = int(np.argmin(weakest))
    bad_rank = np.flatnonzero(rank != 2 * n)
    ok = closed_res < tol and bad_rank.size == 0
    if bad_rank.size:
        witness = _point(pts, int(bad_rank[0]))
    elif closed_res >= tol and ci is not None:
        witness = _point(pts, ci)
    else:
        witness = _point(pts, j)
    return VerificationReport(
        verdict=PASS if ok else FAIL,
        condition="presymplectic",
        margin=float(weakest[j]) if closed_res < tol else tol - closed_res,
        residuals={"d_omega": closed_res},
        witness_points=[witness],
        grid=g.metadata(),
        details={
            "expected_rank": 2 * n,
            "min_rank": int(rank.min()),
            "max_rank": int(rank.max()),
            "points_with_wrong_rank": int(bad_rank.size),
        },
    )


def is_presymplectic_confoliation(alpha: KForm, model, grid=None, tol: float = POSITIVITY_TOL,
                                  params=None) -> VerificationReport:
    """``d alpha`` presymplectic and ``alpha(R) >= 0`` on its co-oriented kernel ``R``.

    The confoliation inequality is evaluated alongside and the agreement of
    the two characterizations is recorded in ``details["agree"]``.
    """
    cc, g, pts, params = _resolve(alpha, model, grid, params)
    pre = is_presymplectic(d(alpha), model, g, params=params)
    confol = is_confoliation(alpha, model, g, tol, params)
    details = {"presymplectic": pre.verdict, "confoliation": confol.verdict}
    if not pre.passed:
        details["agree"] = None
        return VerificationReport(FAIL, "presymplectic-confoliation", pre.margin, dict(pre.residuals),
                                  pre.witness_points, g.metadata(), details)
    R = kernel_field(d(alpha), pts, params, orientation=cc.orientation(alpha.chart))
    pairing = np.einsum("pi,pi->p", form_values(alpha, pts, params), R)
    i = int(np.argmin(pairing))
    margin = float(pairing[i])
    ok = margin > -tol
    details.update({"reeb_pairing_min": margin, "agree": ok == confol.passed})
    return VerificationReport(
        verdict=PASS if ok else FAIL,
        condition="presymplectic-confoliation",
        margin=margin,
        residuals=dict(pre.residuals),
        witness_points=[_point(pts, i)],
        grid=g.metadata(),
        details=details,
    )


def _contract_values(V: FieldLike, form: KForm, pts, params) -> np.ndarray:
    """``iota_V form`` at the points, for 1- and 2-forms; ``(P,)`` or ``(P, n)``."""
    if isinstance(V, VecField):
        vals = form_values(contract(V, form), pts, params)
        return vals[:, 0] if form.degree == 1 else vals
    vec = field_values(V, pts, params)
    if form.degree == 1:
        return np.einsum("pi,pi->p", form_values(form, pts, params), vec)
    return np.einsum("pi,pij->pj", vec, skew_matrices(form, pts, params))


def is_connection(eta: KForm, V: FieldLike, model, grid=None, tol: float = RESIDUAL_TOL,
                  params=None) -> VerificationReport:
    """``iota_V d eta = 0`` and ``eta(V) = 1`` on the grid.

    ``V`` may be a :class:`VecField` or a callable returning sampled vectors.
    For symbolic fields the Lie derivative residual is reported too.
    """
    cc, g, pts, params = _resolve(eta, model, grid, params)
    de = d(eta)
    if de.degree <= eta.chart.dim and de.simplify().coeffs:
        iv = np.abs(np.atleast_2d(_contract_values(V, de, pts, params))).max(axis=-1)
    else:
        iv = np.zeros(g.size)
    norm = np.abs(_contract_values(V, eta, pts, params) - 1.0)
    worst = np.maximum(iv, norm)
    i = int(np.argmax(worst))
    res_iv, res_norm = float(iv.max()), float(norm.max())
    residuals = {"iota_V_d_eta": res_iv, "eta_V_minus_1": res_norm}
    if isinstance(V, VecField):
        residuals["lie_V_eta"] = _max_abs(lie_derivative(V, eta), pts, params)[0]
    ok = res_iv < tol and res_norm < tol
    return VerificationReport(
        verdict=PASS if ok else FAIL,
        condition="connection",
        margin=tol - float(worst[i]),
        residuals=residuals,
        witness_points=[_point(pts, i)],
        grid=g.metadata(),
        details={"tol": tol},
    )


def basic_exactness_witness(omega: KForm, primitive: KForm, R: FieldLike, model, grid=None,
                            tol: float = RESIDUAL_TOL, params=None) -> VerificationReport:
    """Exhibit ``[omega]_b = 0``: ``d primitive = omega`` with ``primitive`` basic.

    Basic means ``primitive(R) = 0`` and ``iota_R d primitive = 0``.
    """
    cc, g, pts, params = _resolve(omega, model, grid, params)
    dp = d(primitive)
    diff_res, di = _max_abs(dp - omega, pts, params)
    on_R = np.abs(_contract_values(R, primitive, pts, params))
    if dp.simplify().coeffs:
        iota = np.abs(np.atleast_2d(_contract_values(R, dp, pts, params))).max(axis=-1)
    else:
        iota = np.zeros(g.size)
    residuals = {"d_primitive_minus_omega": diff_res, "primitive_on_R": float(on_R.max()),
                 "iota_R_d_primitive": float(iota.max())}
    worst = max(residuals.values())
    per_point = np.maximum(on_R, iota)
    i = di if diff_res >= per_point.max() and di is not None else int(np.argmax(per_point))
    return VerificationReport(
        verdict=PASS if worst < tol else FAIL,
        condition="basic-exactness",
        margin=tol - worst,
        residuals=residuals,
        witness_points=[_point(pts, i)],
        grid=g.metadata(),
        details={"tol": tol},
    )


def kernel_alignment(omega: KForm, V: FieldLike, model, grid=None, tol: float = 1e-8,
                     params=None) -> VerificationReport:
    """Kernel of the 2-form ``omega`` is a line spanned by ``V`` with the same co-orientation.

    Residual is ``|sin|`` of the angle between the unit kernel vector and ``V``;
    a kernel pointing against ``V`` counts as ``1 + |cos|``.
    """
    cc, g, pts, params = _resolve(omega, model, grid, params)
    try:
        k = kernel_field(omega, pts, params, orientation=cc.orientation(omega.chart))
    except DegenerateKernelError as err:
        return VerificationReport(FAIL, "kernel-alignment", -1.0, witness_points=[err.point or {}],
                                  grid=g.metadata(), details={"error": str(err)})
    v = field_values(V, pts, params)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    cos = np.einsum("pi,pi->p", k, v)
    sine = np.linalg.norm(k - cos[:, None] * v, axis=1)
    bad = np.where(cos < 0, 1.0 + np.abs(cos), sine)
    i = int(np.argmax(bad))
    return VerificationReport(
        verdict=PASS if bad[i] < tol else FAIL,
        condition="kernel-alignment",
        margin=tol - float(bad[i]),
        residuals={"angle_sine": float(sine.max()), "min_cos": float(cos.min())},
        witness_points=[_point(pts, i)],
        grid=g.metadata(),
        details={"tol": tol},
    )


def forms_agree(a: KForm, b: KForm, model, grid=None, tol: float = RESIDUAL_TOL, params=None) -> VerificationReport:
    """Coefficientwise identity ``a = b`` on the grid (symbolic zero short-circuits)."""
    cc, g, pts, params = _resolve(a, model, grid, params)
    ok, res, worst = forms_close(a, b, pts, params, tol)
    return VerificationReport(
        verdict=PASS if ok else FAIL,
        condition="identity",
        margin=tol - res,
        residuals={"max_coefficient": res},
        witness_points=[_point(pts, worst if worst is not None else 0)],
        grid=g.metadata(),
        details={"tol": tol, "symbolic_zero": worst is None},
    )


def reeb_agrees(alpha: KForm, R: FieldLike, model, grid=None, tol: float = 1e-8, params=None) -> VerificationReport:
    """Reeb field of the contact form ``alpha`` equals ``R`` componentwise within ``tol``."""
    cc, g, pts, params = _resolve(alpha, model, grid, params)
    try:
        got = reeb_field(alpha, pts, params)
    except NotContactError as err:
        return VerificationReport(FAIL, "reeb-field", -1.0, witness_points=[err.point or {}],
                                  grid=g.metadata(), details={"error": str(err)})
    res = np.abs(got - field_values(R, pts, params)).max(axis=1)
    i = int(np.argmax(res))
    return VerificationReport(
        verdict=PASS if res[i] < tol else FAIL,
        condition="reeb-field",
        margin=tol - float(res[i]),
        residuals={"max_component": float(res[i])},
        witness_points=[_point(pts, i)],
        grid=g.metadata(),
        details={"tol": tol},
    )


# ---------------------------------------------------------------------------
# closed orbits


@dataclass
class OrbitResult:
    closed: bool
    closure_residual: float
    period: float | None
    integral: float | None
    steps: int
    seed: dict[str, float]
    closure_tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "closed" if self.closed else "inconclusive"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "closure_residual": self.closure_residual,
            "period": self.period,
            "integral": self.integral,
            "steps": self.steps,
            "seed": self.seed,
            "closure_tol": self.closure_tol,
            "notes": list(self.notes),
        }


def _compile_field(V: VecField, eta: KForm, params):
    names = V.chart.coords
    comps = [V.component(n) for n in names]
    pairing = contract(V, eta).scalar()

    def rhs(y):
        env = {**params, **dict(zip(names, y))}
        v = np.array([ex.evaluate(c, env) for c in comps])
        return np.append(v, ex.evaluate(pairing, env))

    return rhs


def _rk4(f, z, h):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def orbit_integral(V: VecField, eta: KForm, seed: Mapping[str, float], model, max_time: float = 100.0,
                   closure_tol: float = 1e-6, local_tol: float = 1e-9, h0: float = 1e-2,
                   h_max: float = 0.1, params=None) -> OrbitResult:
    """Follow the flow of ``V`` from ``seed`` until it first returns.

    Classical RK4 with step doubling controls the local error. The line
    integral of ``eta`` is carried as an extra state variable. A return is a
    sign change of ``(y - seed) . V`` from negative to positive once the
    orbit has moved away; the crossing is located with a root finder on the
    step length and accepted when the distance to the seed is below
    ``closure_tol`` (periodic coordinates are wrapped).
    """
    cc = as_complex(model)
    params = {**cc.params, **dict(params or {})}
    chart = V.chart
    names = chart.coords
    periods = np.array([chart.period(n) or 0.0 for n in names])
    y0 = np.array([float(seed[n]) for n in names])
    f = _compile_field(V, eta, params)

    def offset(z):
        diff = z[:-1] - y0
        wrap = periods > 0
        diff[wrap] = (diff[wrap] + periods[wrap] / 2) % periods[wrap] - periods[wrap] / 2
        return diff

    def approach(z):
        return float(offset(z) @ f(z)[:-1])

    z = np.append(y0, 0.0)
    t, h, steps = 0.0, h0, 0
    g_prev = approach(z)
    left = False
    best = math.inf
    speed = float(np.linalg.norm(f(z)[:-1]))
    if speed == 0.0:
        return OrbitResult(False, 0.0, None, None, 0, dict(seed), closure_tol, ["field vanishes at seed"])
    leave_radius = max(1e3 * closure_tol, 1e-3)
    while t < max_time:
        h = min(h, h_max, max_time - t)
        full = _rk4(f, z, h)
        half = _rk4(f, _rk4(f, z, h / 2), h / 2)
        err = float(np.max(np.abs(half - full))) / 15.0
        scale = max(1.0, float(np.max(np.abs(half))))
        if err > local_tol * scale and h > 1e-12:
            h *= max(0.2, 0.9 * (local_tol * scale / err) ** 0.2)
            continue
        z_new, t_new = half, t + h
        steps += 1
        g_new = approach(z_new)
        if not left and np.linalg.norm(offset(z_new)) > leave_radius:
            left = True
        if left and g_prev < 0.0 <= g_new:
            z_prev = z

            def g_of(s):
                return approach(_rk4(f, _rk4(f, z_prev, s / 2), s / 2)) if s > 0 else g_prev

            s_star = brentq(g_of, 0.0, h, xtol=1e-15, rtol=1e-15, maxiter=200)
            z_star = _rk4(f, _rk4(f, z_prev, s_star / 2), s_star / 2)
            dist = float(np.linalg.norm(offset(z_star)))
            best = min(best, dist)
            if dist < closure_tol:
                return OrbitResult(True, dist, t + s_star, float(z_star[-1]), steps, dict(seed), closure_tol)
        z, t, g_prev = z_new, t_new, g_new
        if err > 0:
            h *= min(4.0, max(0.2, 0.9 * (local_tol * scale / err) ** 0.2))
        else:
            h *= 4.0
    best = best if math.isfinite(best) else float(np.linalg.norm(offset(z)))
    return OrbitResult(False, best, None, None, steps, dict(seed), closure_tol,
                       [f"no return within {closure_tol:g} before t = {max_time:g}"])


def nontriviality_witness(orbits: Sequence[OrbitResult], assertions: Sequence[Mapping],
                          threshold: float = 1e-6) -> VerificationReport:
    """Certify ``[d eta]_b != 0`` from closed orbits and caller-supplied homology facts.

    Each assertion is ``{"null_homologous": i}`` or ``{"homologous": [i, j]}``,
    optionally with a ``"justification"`` string. Homology is never computed.
    """
    findings = []
    certified = False
    for a in assertions:
        if "null_homologous" in a:
            idx = [int(a["null_homologous"])]
        elif "homologous" in a:
            idx = [int(i) for i in a["homologous"]]
            if len(idx) != 2:
                raise ValueError("a homologous assertion names exactly two orbits")
        else:
            raise ValueError(f"unknown homology assertion {dict(a)!r}")
        obs = [orbits[i] for i in idx]
        if not all(o.closed for o in obs):
            findings.append({"assertion": dict(a), "usable": False, "reason": "orbit not closed"})
            continue
        gap = abs(obs[0].integral) if len(obs) == 1 else abs(obs[0].integral - obs[1].integral)
        hit = gap > threshold
        certified |= hit
        findings.append({"assertion": dict(a), "usable": True, "gap": gap, "certifies": hit})
    gaps = [f["gap"] for f in findings if f.get("usable")]
    return VerificationReport(
        verdict=PASS if certified else FAIL,
        condition="basic-class-nontrivial",
        margin=(max(gaps) if gaps else 0.0) - threshold,
        details={"findings": findings, "threshold": threshold,
                 "orbits": [o.to_dict() for o in orbits]},
    )
