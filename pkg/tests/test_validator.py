import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tubekernels import config as cfgmod
from tubekernels.errors import DomainError
from tubekernels.geometry import GroupAction, TorusModel, torus_shear
from tubekernels.spectra import Cutoff, Isotype
from tubekernels.symplectic import complexify, psi2, psi_A
from tubekernels.validator import (Report, gaussian_form, loglog_fit, off_locus_point, predict_diag_P,
                                   predict_diag_Pi, predict_gaussian_decay, predict_near_graph, predict_trace,
                                   predict_weyl, experiment_qsymbol, experiment_symplectic_check)

TAU = 0.5
# (2 pi)^{-1/2} (400 / pi) (800 / pi)^{-1/2} chi(0) / 3 with chi(0) = 0.05323444833799889
DIAG_P_Z3_AT_400 = 0.05648350397175103


@pytest.fixture
def z3():
    m = TorusModel(2, TAU, GroupAction.cyclic(2, 3))
    pt = m.point_on_sphere([0.1, 0.2], [math.cos(0.37), math.sin(0.37)])
    return m, Isotype(m.action, 0), pt, Cutoff()


def test_diag_P_frozen_value(z3):
    m, iso, pt, cut = z3
    pred = predict_diag_P(m, iso, pt, 400.0, cut)
    assert pred.modulus == pytest.approx(DIAG_P_Z3_AT_400, rel=1e-13)
    assert pred.lambda_exponent == Fraction(1, 2)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_exponent_gap_and_ratio(d):
    m = TorusModel(d, TAU)
    pt = m.point_on_sphere(np.zeros(d), np.eye(d)[0])
    iso = Isotype(m.action, 0)
    cut = Cutoff()
    for lam in (100.0, 400.0):
        pi = predict_diag_Pi(m, iso, pt, lam, cut)
        p = predict_diag_P(m, iso, pt, lam, cut)
        assert pi.lambda_exponent - p.lambda_exponent == Fraction(d - 1, 2)
        assert p.modulus / pi.modulus == pytest.approx((lam / (math.pi * TAU)) ** (-(d - 1) / 2), rel=1e-13)


def test_trivial_group_reduces_to_action_free_law():
    m = TorusModel(3, TAU)
    pt = m.point_on_sphere([0, 0, 0], [1, 2, 3])
    cut = Cutoff()
    pred = predict_diag_Pi(m, Isotype(m.action, 0), pt, 250.0, cut)
    expected = (2 * math.pi) ** -0.5 * (250.0 / (2 * math.pi * TAU)) ** 2 * cut.chi_center
    assert pred.modulus == pytest.approx(expected, rel=1e-13)
    assert pred.extras == {"r_x": 1, "V_eff": 1.0}


def test_diagonal_predictions_need_zero_locus_and_centered_cutoff():
    m = TorusModel(2, TAU, GroupAction.circle(2, 0))
    off = m.point_on_sphere([0, 0], [1, 1])
    with pytest.raises(DomainError):
        predict_diag_P(m, Isotype(m.action, (0,)), off, 100.0, Cutoff())
    on = m.point_on_sphere([0, 0], [0, 1])
    with pytest.raises(DomainError):
        predict_diag_P(m, Isotype(m.action, (0,)), on, 100.0, Cutoff(t0=0.1))


def test_gaussian_form_examples():
    m = TorusModel(3, TAU, GroupAction.circle(3, 0))
    z = np.zeros(4)
    assert gaussian_form(m, 400.0, 0.0, z, 0.0, z) == 0
    h = np.array([0.0, 0.3, 0.0, -0.7])
    assert abs(gaussian_form(m, 400.0, 0.0, h, 0.0, h)) < 1e-15
    v = np.array([0.0, 0.0, 0.8, 0.0])
    assert gaussian_form(m, 400.0, 0.0, v, 0.0, v) == pytest.approx(-2 * 0.64 / TAU)
    assert gaussian_form(m, 400.0, 0.1, z, 0.0, z) == pytest.approx(1j * 20 * 0.1 / TAU)


def test_gaussian_decay_validity_window():
    m = TorusModel(2, TAU, GroupAction.circle(2, 0))
    pt = m.point_on_sphere([0, 0], [0, 1])
    iso = Isotype(m.action, (0,))
    z = np.zeros(2)
    pred = predict_gaussian_decay(m, iso, pt, (0.0, z, 0.0, z), 400.0, Cutoff())
    assert pred.modulus == pytest.approx(predict_diag_P(m, iso, pt, 400.0, Cutoff()).modulus)
    big = np.array([0.0, 50.0])
    with pytest.raises(DomainError):
        predict_gaussian_decay(m, iso, pt, (0.0, big, 0.0, big), 400.0, Cutoff())
    with pytest.raises(DomainError):
        predict_gaussian_decay(m, iso, pt, (0.0, z, 0.0, z), 400.0, Cutoff(), eps_prime=0.2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_near_graph_at_zero_time_is_diagonal(seed):
    rng = np.random.default_rng(seed)
    m = TorusModel(2, TAU)
    pt = m.point_on_sphere([0.1, 0.2], [0.6, 0.8])
    cut = Cutoff()
    v1, v2 = rng.uniform(-1, 1, size=(2, 2))
    ng = predict_near_graph(m, pt, 0.0, 400.0, (0.0, v1, 0.0, v2), cut, B=np.eye(2))
    gd = predict_gaussian_decay(m, Isotype(m.action, 0), pt, (0.0, v1, 0.0, v2), 400.0, cut)
    assert ng.modulus == pytest.approx(gd.modulus, rel=1e-12)
    assert ng.extras["det_factor"] == pytest.approx(1.0)
    # conjugate-swap symmetry in modulus
    swapped = predict_gaussian_decay(m, Isotype(m.action, 0), pt, (0.0, v2, 0.0, v1), 400.0, cut)
    assert swapped.modulus == pytest.approx(gd.modulus, rel=1e-12)


def test_near_graph_shear_exponent():
    m = TorusModel(2, TAU)
    pt2 = m.point_on_sphere([0.1, 0.2], [0.6, 0.8])
    B = torus_shear(1, 0.3, TAU)
    v1, v2 = np.array([0.5, -0.2]), np.array([0.1, 0.4])
    pred = predict_near_graph(m, pt2, 0.3, 400.0, (0.0, v1, 0.0, v2), Cutoff())
    blocks = complexify(np.linalg.inv(B))
    # hand value of the complexified blocks of B^{-1} = [[1, 0.6], [0, 1]]
    assert blocks.P[0, 0] == pytest.approx(1 - 0.3j)
    assert blocks.Q[0, 0] == pytest.approx(0.3j)
    assert pred.gaussian == pytest.approx(psi_A(blocks, v1, v2) / TAU)
    assert pred.extras["det_factor"] == pytest.approx(abs(1 - 0.3j) ** -0.5)
    with pytest.raises(DomainError):
        predict_near_graph(m, pt2, 0.9, 400.0, (0.0, v1, 0.0, v2), Cutoff())
    with pytest.raises(DomainError):
        predict_near_graph(TorusModel(2, TAU, GroupAction.circle(2)), pt2, 0.3, 400.0, (0.0, v1, 0.0, v2), Cutoff())


def test_psi_identity_matches_gaussian_form_horizontal():
    m = TorusModel(2, TAU)
    v1, v2 = np.array([0.3, 0.1]), np.array([-0.2, 0.5])
    assert gaussian_form(m, 400.0, 0.0, v1, 0.0, v2) == pytest.approx(psi2(v1, v2) / TAU)


def test_weyl_prediction_d3():
    m = TorusModel(3, TAU, GroupAction.circle(3, 0))
    iso = Isotype(m.action, (0,))
    assert predict_weyl(m, iso, 100.0) == pytest.approx(2 * math.pi ** 2 * TAU * 100.0, rel=1e-12)
    assert predict_trace(m, iso, 100.0, Cutoff()) > 0
    with pytest.raises(DomainError):
        predict_weyl(TorusModel(2, TAU, GroupAction("subtorus", ((1, 0), (0, 1)))), iso, 100.0)


def test_off_locus_point_distance():
    m = TorusModel(2, TAU, GroupAction.circle(2, 0))
    base = m.point_on_sphere([0.3, 0.1], [0, 1])
    for dist in (0.01, 0.1, 0.3):
        q = off_locus_point(m, base, dist)
        assert m.z_locus_distance(q, "tilde") == pytest.approx(dist, rel=1e-12)


def test_loglog_fit_recovers_power():
    x = np.array([100.0, 200.0, 400.0])
    fit = loglog_fit(x, 3 * x ** -1.5)
    assert fit["slope"] == pytest.approx(-1.5)
    assert fit["stderr"] < 1e-12


def test_report_round_trips_through_json():
    rep = Report("demo", {"a": 1})
    rep.check("ok", True, np.float64(1.5), "any")
    rep.fits["frac"] = Fraction(1, 2)
    doc = rep.to_dict()
    assert doc["passed"] and doc["checks"][0]["value"] == 1.5 and doc["fits"]["frac"] == "1/2"
    assert '"experiment": "demo"' in rep.to_json()


def test_symplectic_experiment_passes_and_is_deterministic():
    cfg = cfgmod.SymplecticCheckConfig(n_matrices=20)
    a = experiment_symplectic_check(cfg, 7)
    b = experiment_symplectic_check(cfg, 7)
    assert a.passed
    assert a.tables["matrices"].rows == b.tables["matrices"].rows


def test_qsymbol_experiment():
    rep = experiment_qsymbol(cfgmod.QSymbolConfig())
    assert rep.passed
