import dataclasses
import math

import numpy as np
import pytest

from reebkit import expr as ex
from reebkit.construct import (
    GlueConfig,
    GlueConfigError,
    RejectedInput,
    assemble_geodesible_demo,
    carriere_contact,
    confoliation_contactize,
    contactize,
    glue_open_book,
)
from reebkit.expr import BumpSpec
from reebkit.exterior import coordinate_form, d, wedge
from reebkit.pointwise import reeb_field
from reebkit.verify import is_connection, is_contact

from conftest import LN_LAM

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def local(box3):
    cc, ch = box3
    x, y, z = (ex.coord(c) for c in "xyz")
    dx, dy, dz = (coordinate_form(ch, c) for c in "xyz")
    return cc, ch, (x, y, z), (dx, dy, dz)


# -- contactize ---------------------------------------------------------------


def test_contactize_x_dy_plus_dz(local):
    cc, ch, (x, y, z), (dx, dy, dz) = local
    res = contactize(dy * x, dz, cc, 8)
    assert res.parameter == 1.0 and res.report.passed and not res.failed
    top = wedge(res.form, d(res.form)).simplify()
    assert top.coefficient("x", "y", "z") == ex.ONE  # = K exactly
    pts = cc.grid(ch, n=6).points()
    assert np.abs(reeb_field(res.form, pts) - [0, 0, 1]).max() < 1e-8
    stage = res.report.details["stages"]["reeb_identity"]
    assert stage["verdict"] == "pass"
    assert res.report.details["monotone"]
    assert 0 < res.threshold <= 1.0


def test_contactize_general_reeb_identity(local):
    """phi = x dy + (1 + y^2) dz: kernel R = 2y d/dx + d/dz, phi(R) = 1 + y^2 > 0."""
    cc, ch, (x, y, z), (dx, dy, dz) = local
    phi = dy * x + dz * ex.add(1.0, ex.power(y, 2.0))
    res = contactize(phi, dz, cc, 8)
    assert res.report.passed
    K = res.parameter
    pts = cc.grid(ch, n=6).points()
    R = np.stack([2 * pts["y"], np.zeros_like(pts["y"]), np.ones_like(pts["y"])], axis=1)
    expected = R / (K * (1 + pts["y"] ** 2) + 1)[:, None]
    assert np.abs(reeb_field(res.form, pts) - expected).max() < 1e-8


def test_contactize_search_and_threshold(local):
    """beta = K x dy + dz + 5 y dx has beta ^ d beta = (K - 5) vol."""
    cc, ch, (x, y, z), (dx, dy, dz) = local
    res = contactize(dy * x, dz + dx * ex.mul(5.0, y), cc, 6)
    assert res.parameter == 8.0
    assert 5.0 < res.threshold < 5.0 + 4.0 / 2**10 + 1e-12
    searched = [t for t in res.trace if t["stage"] == "search"]
    assert [t["value"] for t in searched] == [1.0, 2.0, 4.0, 8.0]
    assert all(t["verdict"] == "pass" for t in res.trace if t["value"] >= res.parameter)


def test_contactize_rejections(carriere, local):
    with pytest.raises(RejectedInput) as info:
        contactize(carriere.alpha1, carriere.alpha2, carriere, 8)
    assert info.value.check == "is_connection(eta, R)"
    cc, ch, (x, y, z), (dx, dy, dz) = local
    with pytest.raises(RejectedInput) as info:
        contactize(dz, dx, cc, 6)
    assert info.value.check.startswith("is_presymplectic")
    with pytest.raises(RejectedInput) as info:
        contactize(dy * x - dz, dz, cc, 6)
    assert info.value.check == "phi(R) >= 0"


# -- confoliation_contactize --------------------------------------------------


def test_confoliation_contactize_local(local):
    cc, ch, (x, y, z), (dx, dy, dz) = local
    res = confoliation_contactize(dy * ex.add(x, 1.0), dz, cc, 8)
    assert res.parameter == 1.0 and res.report.passed
    top = wedge(res.form, d(res.form)).simplify()
    assert ex.evaluate(top.coefficient("x", "y", "z"), {"x": 0.3}) == pytest.approx(1.0)  # = eps


def test_confoliation_contactize_top_coefficient_is_eps(local):
    cc, ch, (x, y, z), (dx, dy, dz) = local
    alpha = dy * ex.add(x, 1.0)
    for eps in (0.5, 0.125):
        form = alpha + dz * eps
        top = wedge(form, d(form)).simplify()
        assert ex.evaluate(top.coefficient("x", "y", "z"), {"x": 0.7}) == pytest.approx(eps)
    assert not is_contact(alpha, cc, 6).passed


def test_confoliation_contactize_halving(local):
    """alpha + eps (dz + 5 y dx) has top coefficient eps (1 - 5 eps)."""
    cc, ch, (x, y, z), (dx, dy, dz) = local
    res = confoliation_contactize(dy * ex.add(x, 1.0), dz + dx * ex.mul(5.0, y), cc, 6)
    assert res.parameter == 0.125
    assert 0.125 <= res.threshold < 0.2
    assert res.threshold == pytest.approx(0.2, abs=0.125 / 2**10 + 1e-12)


def test_confoliation_contactize_rejects_carriere(carriere):
    m = carriere
    for eta in (m.alpha2, m.dt, m.alpha2 + m.dt):
        with pytest.raises(RejectedInput):
            confoliation_contactize(m.alpha1, eta, m, 8)


# -- carriere_contact ---------------------------------------------------------


@pytest.mark.parametrize("eps", [0.1, 1.0, 0.01])
def test_carriere_contact_ratio(carriere, eps):
    phi, rep = carriere_contact(carriere, eps)
    assert rep.passed
    assert rep.details["ratio_mean"] == pytest.approx(2 * eps * LN_LAM, abs=1e-6)
    assert rep.details["ratio_std"] < 1e-9


def test_carriere_contact_value(carriere):
    _, rep = carriere_contact(carriere, 0.1)
    assert rep.details["ratio_mean"] == pytest.approx(0.1924847, abs=1e-6)


def test_carriere_contact_eps_zero_and_negative(carriere):
    _, rep = carriere_contact(carriere, 0.0)
    assert not rep.passed and abs(rep.margin) < 1e-10
    with pytest.raises(ValueError):
        carriere_contact(carriere, -0.1)


def test_carriere_contact_picks_labeling(carriere):
    flipped = dataclasses.replace(carriere, alpha2=-carriere.alpha2)
    assert not is_contact(flipped.alpha1 + flipped.alpha2 * 0.1, flipped, 8).passed
    phi, rep = carriere_contact(flipped, 0.1, 8)
    assert rep.passed and "mu2 -> -mu2" in rep.details["labeling"]


# -- gluing -------------------------------------------------------------------


@pytest.fixture(scope="module")
def glued(open_book):
    return glue_open_book(open_book)


def test_glue_config_profiles():
    cfg = GlueConfig()
    cfg.validate()
    r = ex.coord("r")
    f, g = cfg.profiles(r)
    rs = np.linspace(0, 1, 2001)
    fv, gv = ex.evaluate(f, {"r": rs}), ex.evaluate(g, {"r": rs})
    assert np.all(fv[rs < 0.25] == 0) and np.all(gv[rs < 0.25] == 0)
    assert np.all(fv[rs > 0.75] == 1) and np.all(gv[rs > 0.75] == 1)
    moving = ex.evaluate(ex.differentiate(f, "r"), {"r": rs}) != 0
    assert moving.any() and np.all(gv[moving] == 0.5)


def test_glue_config_errors():
    with pytest.raises(GlueConfigError):
        GlueConfig(layout="shared").validate()
    with pytest.raises(GlueConfigError):
        GlueConfig(band=(0.5, 0.4)).validate()
    with pytest.raises(GlueConfigError):
        GlueConfig(layout="spiral").validate()
    GlueConfig(f_spec=BumpSpec(kind="exponential"), g_spec=BumpSpec(eps=0.1, kind="exponential"),
               band=(0.2, 0.9)).validate()


def test_glue_pairing(glued, open_book):
    rep = glued.report
    assert rep.passed
    assert rep.details["min_eta_V"] == pytest.approx(0.5, abs=1e-12)
    r = np.linspace(0.0, 1.0, 4001)
    pv = ex.evaluate(glued.pairing, {"r": r, "theta": 0 * r, "phi": 0 * r})
    assert pv.min() == pytest.approx(0.5, abs=1e-12)
    assert np.all(pv[(r < 0.25) | (r > 0.75)] == 1.0)
    # transition point of f: g = 1/2 there, any f
    assert ex.evaluate(glued.pairing, {"r": 0.5, "theta": 0.0, "phi": 0.0}) == 0.5


def test_glue_stages(glued):
    stages = glued.report.details["stages"]
    assert stages["iota_V_d_eta"]["residuals"]["iota_V_d_eta"] < 1e-9
    assert stages["iota_V_d_eta"]["residuals"]["formula"] < 1e-9
    flat = stages["flat_bands"]["residuals"]
    assert all(v == 0.0 for v in flat.values())
    for name in ("collar_eta", "collar_V", "collar_V_hat", "connection_tube", "connection_page"):
        assert stages[name]["verdict"] == "pass", name


def test_glue_normalizations(glued, open_book):
    assert is_connection(glued.eta["tube"], glued.V_hat["tube"], open_book).passed
    assert not is_connection(glued.eta["tube"], glued.V["tube"], open_book).passed
    # eta / eta(V) is not a connection where g moves with f flat: i_V d(eta/h) = (h'/h) dr
    rep = glued.eta_hat_report
    assert not rep.passed
    assert rep.residuals["eta_V_minus_1"] < 1e-12
    assert rep.residuals["iota_V_d_eta"] > 1.0


def test_glue_rejects_bad_binding(open_book):
    bad = dataclasses.replace(open_book, X_B=open_book.X_B * 2.0)
    with pytest.raises(RejectedInput) as info:
        glue_open_book(bad)
    assert "binding" in info.value.check


def test_glue_rejects_bad_config(open_book):
    with pytest.raises(GlueConfigError):
        glue_open_book(open_book, GlueConfig(layout="shared"))


# -- demo ---------------------------------------------------------------------


def test_geodesible_demo():
    rep = assemble_geodesible_demo()
    assert rep.passed
    assert rep.details["orbit_integral"] == pytest.approx(TWO_PI, abs=1e-6)
    assert rep.details["min_eta_V"] == pytest.approx(0.5, abs=1e-12)
    assert set(rep.details["stages"]) == {"glue", "orbit", "nontrivial_basic_class"}
    assert all(s["verdict"] == "pass" for s in rep.details["stages"].values())
