"""Pointwise linear algebra of evaluated forms: rank, kernel line, Reeb vector.

Every function has a batched form working on ``(P, ...)`` arrays of grid
points and a single-point wrapper taking a coordinate assignment.
"""
from __future__ import annotations

import warnings
from typing import Mapping

import numpy as np

from .exterior import KForm, d, form_values, skew_matrices, wedge_power

__all__ = [
    "DegenerateKernelError",
    "NotContactError",
    "RANK_TOL",
    "form_rank",
    "ranks",
    "kernel_direction",
    "kernel_field",
    "coorientation_sign",
    "reeb_of_contact",
    "reeb_field",
]

RANK_TOL = 1e-9


class DegenerateKernelError(ValueError):
    """The 2-form's kernel is more than one-dimensional at some point."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class NotContactError(ValueError):
    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


def _as_batch(point: Mapping[str, object]) -> dict[str, np.ndarray]:
    return {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in point.items()}


def _rank_from_singular(s: np.ndarray, tol: float) -> np.ndarray:
    scale = np.maximum(s.max(axis=-1, initial=0.0), 1.0)
    return (s > tol * scale[..., None]).sum(axis=-1)


def ranks(omega: KForm, points, params=None, tol: float = RANK_TOL) -> np.ndarray:
    """Rank of the skew matrix of ``omega`` at each point (even by construction)."""
    mats = skew_matrices(omega, points, params)
    s = np.linalg.svd(mats, compute_uv=False)
    r = _rank_from_singular(s, tol)
    odd = r % 2 == 1
    if np.any(odd):
        warnings.warn("rank tolerance split a singular-value pair; rounding rank down", RuntimeWarning)
        r = r - odd
    return r


def form_rank(omega: KForm, point: Mapping[str, float], tol: float = RANK_TOL, params=None) -> int:
    return int(ranks(omega, _as_batch(point), params, tol)[0])


def coorientation_sign(omega: KForm, vectors: np.ndarray, points, params=None,
                       orientation: KForm | None = None) -> np.ndarray:
    """+1/-1 per point: does ``orientation(v, e)`` have the sign of ``omega^n(e)``?

    With ``g = (v^flat wedge omega^n) / orientation`` the sign of ``g`` decides;
    without an orientation the first clearly nonzero component is made positive.
    """
    n_c = omega.chart.dim
    if orientation is None:
        sign = np.ones(vectors.shape[0])
        for i, v in enumerate(vectors):
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            if nz.size and v[nz[0]] < 0:
                sign[i] = -1.0
        return sign
    top = wedge_power(omega, (n_c - 1) // 2)
    coeffs = form_values(top, points, params)  # columns: all indices but one, omitted index descending
    g = np.zeros(vectors.shape[0])
    for col in range(n_c):
        omitted = n_c - 1 - col
        g += (-1) ** omitted * vectors[:, omitted] * coeffs[:, col]
    vol = form_values(orientation, points, params)[:, 0]
    return np.where(g / vol < 0, -1.0, 1.0)


def kernel_field(omega: KForm, points, params=None, tol: float = RANK_TOL,
                 orientation: KForm | None = None) -> np.ndarray:
    """Unit kernel vectors of ``omega`` at every point, shape ``(P, n)``.

    Raises :class:`DegenerateKernelError` at the first point where the rank
    is below ``n - 1``.
    """
    n_c = omega.chart.dim
    mats = skew_matrices(omega, points, params)
    _, s, vh = np.linalg.svd(mats)
    r = _rank_from_singular(s, tol)
    bad = np.flatnonzero(r < n_c - 1)
    if bad.size:
        i = int(bad[0])
        pt = {k: float(np.asarray(v)[i]) for k, v in points.items()}
        raise DegenerateKernelError(f"rank {int(r[i])} < {n_c - 1}: kernel is not a line at {pt}", pt)
    vecs = vh[:, -1, :]
    vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs * coorientation_sign(omega, vecs, points, params, orientation)[:, None]


def kernel_direction(omega: KForm, point: Mapping[str, float], tol: float = RANK_TOL,
                     orientation: KForm | None = None, params=None) -> np.ndarray:
    return kernel_field(omega, _as_batch(point), params, tol, orientation)[0]


def reeb_field(alpha: KForm, points, params=None, tol: float = RANK_TOL) -> np.ndarray:
    """Solve ``[d alpha; alpha] R = (0, ..., 0, 1)`` at every point."""
    n_c = alpha.chart.dim
    mats = skew_matrices(d(alpha), points, params)
    row = form_values(alpha, points, params)
    P = row.shape[0]
    system = np.concatenate([mats, row[:, None, :]], axis=1)
    rhs = np.zeros((P, n_c + 1))
    rhs[:, -1] = 1.0
    u, s, vh = np.linalg.svd(system, full_matrices=False)
    scale = np.maximum(s[:, 0], 1.0)
    bad = np.flatnonzero(s[:, -1] <= tol * scale)
    if bad.size:
        i = int(bad[0])
        pt = {k: float(np.asarray(v)[i]) for k, v in points.items()}
        raise NotContactError(f"Reeb system is singular at {pt}", pt)
    coef = np.einsum("pij,pi->pj", u, rhs) / s
    sol = np.einsum("pji,pj->pi", vh, coef)
    resid = np.abs(np.einsum("pij,pj->pi", system, sol) - rhs).max(axis=1)
    worst = int(np.argmax(resid))
    if resid[worst] > 1e-6 * scale[worst]:
        pt = {k: float(np.asarray(v)[worst]) for k, v in points.items()}
        raise NotContactError(f"Reeb system is inconsistent at {pt}", pt)
    return sol


def reeb_of_contact(alpha: KForm, point: Mapping[str, float], params=None, tol: float = RANK_TOL) -> np.ndarray:
    return reeb_field(alpha, _as_batch(point), params, tol)[0]
