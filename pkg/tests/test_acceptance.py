"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines. Oracles are
independent of the library where the value is derived (eigenvalue from the
characteristic polynomial, explicit kernel and Reeb fields, numpy ratios).
"""
import math
import time

import numpy as np
import pytest

from reebkit import expr as ex
from reebkit.construct import (
    RejectedInput,
    assemble_geodesible_demo,
    carriere_contact,
    contactize,
    glue_open_book,
)
from reebkit.exterior import coordinate_form, d, form_values, wedge
from reebkit.manifold import builtin_local_chart, check_descends
from reebkit.pointwise import kernel_field, ranks, reeb_of_contact
from reebkit.properties import SUITES, confoliation_instance, run_suite
from reebkit.verify import (
    basic_exactness_witness,
    is_confoliation,
    is_connection,
    is_contact,
    is_presymplectic,
    kernel_alignment,
)

from conftest import LN_LAM


def verdict(n, ok, detail):
    print(f"\nAC{n} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def _sup(form, pts, params):
    return float(np.abs(form_values(form, pts, params)).max())


def test_ac1_structure_identity(carriere):
    m = carriere
    t0 = time.perf_counter()
    pts = m.grid(32).points()
    r1 = _sup(d(m.alpha1) - wedge(m.dt, m.alpha1) * LN_LAM, pts, m.params)
    r2 = _sup(d(m.alpha2) + wedge(m.dt, m.alpha2) * LN_LAM, pts, m.params)
    elapsed = time.perf_counter() - t0
    assert verdict(1, r1 < 1e-9 and r2 < 1e-9 and elapsed < 10,
                   f"d alpha residuals {r1:.1e}, {r2:.1e} on 32^3; {elapsed:.2f}s")


def test_ac2_reeb_alignment(carriere):
    m = carriere
    rep = kernel_alignment(d(m.alpha1), m.mu2, m, 32)
    rk = set(ranks(d(m.alpha1), m.grid(32).points(), m.params).tolist())
    assert verdict(2, rep.passed and rep.residuals["angle_sine"] < 1e-8 and rk == {2},
                   f"max |sin| {rep.residuals['angle_sine']:.1e}, ranks {sorted(rk)}")


def test_ac3_descends(carriere):
    m = carriere
    reps = [check_descends(m.alpha1, m), check_descends(m.alpha2, m)]
    worst = max(max(r.residuals.values(), default=0.0) for r in reps)
    assert verdict(3, all(r.passed for r in reps) and worst < 1e-9, f"max residual {worst:.1e}")


def test_ac4_basic_exactness(carriere):
    m = carriere
    rep = basic_exactness_witness(d(m.alpha1), m.alpha1, m.mu2, m)
    assert verdict(4, rep.passed, f"residuals {rep.residuals}")


def test_ac5_carriere_contact(carriere):
    m = carriere
    phi, rep = carriere_contact(m, 0.1)
    pts = m.grid().points()
    num = form_values(wedge(phi, d(phi)), pts, m.params)[:, 0]
    den = form_values(wedge(wedge(m.alpha1, m.alpha2), m.dt), pts, m.params)[:, 0]
    ratio = num / den
    expected = 2 * 0.1 * LN_LAM
    _, rep0 = carriere_contact(m, 0.0)
    ok = (rep.passed and is_contact(phi, m).passed and abs(ratio.mean() - expected) < 1e-6
          and abs(expected - 0.1924847) < 1e-6 and ratio.std() < 1e-9
          and not rep0.passed and abs(rep0.margin) < 1e-10)
    assert verdict(5, ok, f"ratio {ratio.mean():.9f} (expected {expected:.9f}), std {ratio.std():.1e}; "
                          f"eps=0 {rep0.verdict} margin {rep0.margin:.1e}")


@pytest.fixture(scope="module")
def glued(open_book):
    return glue_open_book(open_book)


def test_ac6_gluing(glued, open_book):
    st = glued.report.details["stages"]
    iota = st["iota_V_d_eta"]["residuals"]["iota_V_d_eta"]
    min_ev = glued.report.details["min_eta_V"]
    flat = max(st["flat_bands"]["residuals"].values())
    conn = is_connection(glued.eta["tube"], glued.V_hat["tube"], open_book, tol=1e-8)
    ok = (glued.report.passed and iota < 1e-9 and abs(min_ev - 0.5) < 1e-12 and flat == 0.0
          and conn.passed)
    assert verdict(6, ok, f"i_V d eta {iota:.1e}, min eta(V) {min_ev}, flat bands {flat}; "
                          f"(V/eta(V), eta) connection residual {max(conn.residuals.values()):.1e}")


@pytest.mark.xfail(strict=True, reason="eta/eta(V) has i_V d = (h'/h) dr, nonzero where h varies; "
                                       "see the decisions ledger")
def test_ac6_normalized_eta_is_connection(glued):
    rep = glued.eta_hat_report
    worst = max(rep.residuals.values())
    assert verdict("6b", rep.passed and worst < 1e-8,
                   f"eta/eta(V) as connection for V: residual {worst:.2f} (unattainable)")


def test_ac7_geodesible_pipeline():
    rep = assemble_geodesible_demo()
    I = rep.details["orbit_integral"]
    witness = rep.details["stages"]["nontrivial_basic_class"]["verdict"]
    ok = rep.passed and abs(I - 2 * math.pi) < 1e-6 and witness == "pass"
    assert verdict(7, ok, f"orbit integral {I:.12f}, [d eta]_b != 0 witness {witness}")


def test_ac8_contactize(box3, carriere):
    cc, ch = box3
    x = ex.coord("x")
    dy, dz = coordinate_form(ch, "y"), coordinate_form(ch, "z")
    res = contactize(dy * x, dz, cc)
    top = wedge(res.form, d(res.form)).simplify()
    coeff = ex.evaluate(top.coefficient("x", "y", "z"), {})
    R = reeb_of_contact(res.form, {"x": 0.3, "y": -0.2, "z": 0.7})
    pts = cc.grid(ch, n=8).points()
    err = max(float(np.abs(reeb_of_contact(res.form, {c: pts[c][i] for c in ch.coords}) - [0, 0, 1]).max())
              for i in range(0, len(pts["x"]), 37))
    try:
        contactize(carriere.alpha1, carriere.alpha2, carriere)
        rejected = None
    except RejectedInput as e:
        rejected = e.check
    ok = (res.parameter == 1.0 and coeff == res.parameter and np.allclose(R, [0, 0, 1], atol=1e-8)
          and err < 1e-8 and rejected == "is_connection(eta, R)")
    assert verdict(8, ok, f"K={res.parameter}, top coefficient {coeff}, Reeb error {err:.1e}, "
                          f"Carriere rejected at {rejected}")


def test_ac9_property_suites():
    t0 = time.perf_counter()
    results = [run_suite(name, seed=0) for name in SUITES]
    elapsed = time.perf_counter() - t0
    counts = {r.name: r.instances for r in results}
    ok = (all(r.passed for r in results) and elapsed < 60 and counts["cartan_flow"] == 50
          and all(n == 100 for k, n in counts.items() if k != "cartan_flow"))
    summary = ", ".join(f"{r.name} {r.max_residual:.1e}" for r in results)
    assert verdict(9, ok, f"{summary}; {elapsed:.1f}s")


def test_ac10_confoliation_cross_check(rng):
    agree, outcomes = 0, []
    for i in range(20):
        dim = 3 if i % 2 == 0 else 5
        cc = builtin_local_chart(dim)
        alpha = confoliation_instance(rng, dim)
        g = cc.grid(alpha.chart, n=8 if dim == 3 else 4)
        pts = g.points()
        k = kernel_field(d(alpha), pts, orientation=cc.orientation(alpha.chart))
        pairing = np.einsum("pi,pi->p", form_values(alpha, pts), k)
        expected = is_presymplectic(d(alpha), cc, g).passed and pairing.min() >= -1e-10
        got = is_confoliation(alpha, cc, g).passed
        agree += got == expected
        outcomes.append(got)
    assert verdict(10, agree == 20,
                   f"{agree}/20 agree ({sum(outcomes)} confoliations, {20 - sum(outcomes)} not)")
