"""Generator spectroscopy, Fisher information, and precision bounds.

Oracles:

* the finite-difference generator of a pure rotation family must be the
  diagonal 2*m*k (checked against the definition, not the implementation),
* a sympy-differentiated closed-form fringe for the classical Fisher
  information,
* closed-form generator spreads 2*m*sqrt(var + l**2) on control
  superpositions.
"""

import numpy as np
import pytest
import sympy

from oamswitch.errors import (
    ConfigError,
    DegenerateOperatingPoint,
    DimensionMismatch,
    NonConvergence,
    NonPositiveInput,
    StepTooSmall,
)
from oamswitch.hilbert import CIRCULAR, OamWindow, default_window, rotation_op
from oamswitch.metrology import (
    OperatorFamily,
    classical_fi,
    crb,
    fisher_report,
    generator_numeric,
    hup_check,
    multipass_family,
    multipass_generator_sd,
    qfi_from_sd,
    resource_count,
    switch_family,
    switch_generator_sd,
)
from oamswitch.montecarlo import quadrature_phi0
from oamswitch.switch import SwitchParams, fringe_probability

PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)

UNIFORM_TRIPLET = {0: 1.0, 1: 1.0, 2: 1.0}           # mean 1, sd sqrt(2/3)
BALANCED_HIGH = {128: 1.0, -128: 1.0}                # sd 128


# ---------------------------------------------------------------------------
# generator extraction


def test_rotation_family_generator_is_diagonal_in_k():
    m = 3
    report = generator_numeric(multipass_family(m), default_window(0, extent=4))
    lo, hi = report.domain
    ks = np.arange(lo, hi + 1, dtype=float)
    expected = np.concatenate([2.0 * m * ks, 2.0 * m * ks])  # both control rows
    assert np.max(np.abs(report.diagonal() - expected)) < 1e-6
    assert report.offdiag_max() < 1e-9
    assert report.hermiticity_residual < 1e-9


def test_switch_generator_spectrum_shifts_by_arm():
    # the raising arm sees 2m(k + l), the lowering arm 2m(k - l)
    m, l = 2, 1
    report = generator_numeric(switch_family(m, l), default_window(l, extent=2))
    lo, hi = report.domain
    ks = np.arange(lo, hi + 1, dtype=float)
    expected = np.concatenate([2.0 * m * (ks + l), 2.0 * m * (ks - l)])
    assert np.max(np.abs(report.diagonal() - expected)) < 1e-6
    assert report.offdiag_max() < 1e-9


def test_identity_family_has_zero_generator():
    fam = OperatorFamily(
        label="static",
        at=lambda theta: rotation_op(0.0),
        at_dagger=lambda theta: rotation_op(0.0),
    )
    report = generator_numeric(fam, OamWindow(-6, 6, guard=2))
    assert np.max(np.abs(report.matrix)) < 1e-9


def test_generator_domain_excludes_shift_extent():
    w = default_window(3, extent=0)
    report = generator_numeric(switch_family(2, 3), w)
    assert report.domain == (w.interior_min + 3, w.interior_max - 3)
    assert report.domain_size == report.matrix.shape[0] // 2


def test_generator_step_guards():
    fam = multipass_family(1)
    w = OamWindow(-4, 4, guard=1)
    with pytest.raises(StepTooSmall):
        generator_numeric(fam, w, step=1e-8)
    with pytest.raises(ConfigError):
        generator_numeric(fam, w, step=1e-2)


def test_generator_window_too_small_for_shifts():
    with pytest.raises(DimensionMismatch):
        generator_numeric(switch_family(1, 4), OamWindow(-5, 5, guard=2))


def test_generator_detects_inconsistent_inverse():
    # a family whose claimed inverse is wrong cannot produce a Hermitian
    # generator away from theta = 0
    bad = OperatorFamily(
        label="mismatched",
        at=lambda theta: rotation_op(theta),
        at_dagger=lambda theta: rotation_op(-0.5 * theta),
    )
    with pytest.raises(NonConvergence):
        generator_numeric(bad, OamWindow(-6, 6, guard=2), theta0=0.5)


def test_sd_on_rejects_support_outside_domain():
    report = generator_numeric(switch_family(2, 1), default_window(1, extent=0))
    lo, hi = report.domain
    with pytest.raises(DimensionMismatch):
        report.sd_on(PLUS, {hi + 1: 1.0}, basis=CIRCULAR)


# ---------------------------------------------------------------------------
# generator spreads


@pytest.mark.parametrize("m,l,expected", [(2, 1, 4.0), (3, 2, 12.0), (8, 128, 2048.0)])
def test_switch_spread_on_fundamental_probe(m, l, expected):
    report = switch_generator_sd(m, l)
    assert report.exact_sd == expected
    assert abs(report.numeric_sd - expected) / expected < 1e-4
    # an OAM eigenstate probe saturates the additive budget exactly
    assert report.triangle_sd == expected
    assert report.exact_rel_dev < 1e-4


def test_switch_spread_on_structured_probe():
    # var = 2/3, so the true spread is 2m sqrt(2/3 + l^2), strictly below the
    # additive budget 2m(sd + l)
    report = switch_generator_sd(2, 1, probe_dist=UNIFORM_TRIPLET)
    exact = 4.0 * np.sqrt(2.0 / 3.0 + 1.0)
    triangle = 4.0 * np.sqrt(2.0 / 3.0) + 4.0
    assert abs(report.exact_sd - exact) < 1e-12
    assert abs(report.triangle_sd - triangle) < 1e-12
    assert abs(report.numeric_sd - exact) / exact < 1e-6
    assert report.numeric_sd < report.triangle_sd - 1.0  # budget is not tight here
    assert abs(report.oam_mean - 1.0) < 1e-12
    assert abs(report.oam_sd - np.sqrt(2.0 / 3.0)) < 1e-12


def test_switch_spread_both_forms_agree():
    nested = switch_generator_sd(2, 2, probe_dist={0: 1.0, 1: 1.0}, form="nested")
    canonical = switch_generator_sd(2, 2, probe_dist={0: 1.0, 1: 1.0}, form="canonical")
    assert abs(nested.numeric_sd - canonical.numeric_sd) < 1e-6
    with pytest.raises(ConfigError):
        switch_family(2, 2, form="spiral")


def test_multipass_spread_is_probe_limited():
    # without the control coupling the spread collapses to 2 m sd(Lz)
    eigen = multipass_generator_sd(3)
    assert eigen.exact_sd == 0.0
    assert abs(eigen.numeric_sd) < 1e-9
    spread = multipass_generator_sd(3, probe_dist=UNIFORM_TRIPLET)
    expected = 6.0 * np.sqrt(2.0 / 3.0)
    assert abs(spread.exact_sd - expected) < 1e-12
    assert abs(spread.numeric_sd - expected) / expected < 1e-4


def test_multipass_matches_switch_only_with_macroscopic_probe():
    # a balanced +-128 superposition hands the baseline the same spread the
    # switch gets from the fundamental mode
    big = multipass_generator_sd(8, probe_dist=BALANCED_HIGH)
    assert abs(big.exact_sd - 2048.0) < 1e-12
    assert abs(big.numeric_sd - 2048.0) / 2048.0 < 1e-4
    assert multipass_family(8).shift_extent == 0
    with pytest.raises(ConfigError):
        multipass_family(0)


def test_report_serialization_round_trip():
    report = switch_generator_sd(2, 1, probe_dist=UNIFORM_TRIPLET)
    d = report.to_dict()
    assert d["exact_rel_dev"] == report.exact_rel_dev
    assert d["generator"]["domain"] == list(report.generator.domain)
    md = multipass_generator_sd(2, probe_dist=UNIFORM_TRIPLET).to_dict()
    assert md["exact_rel_dev"] < 1e-4


# ---------------------------------------------------------------------------
# Fisher information


def test_classical_fi_against_sympy_oracle():
    th, w, v, phi = sympy.symbols("theta w v phi", real=True)
    p_expr = sympy.Rational(1, 2) * (1 - v * sympy.cos(w * th + phi))
    fi_expr = sympy.diff(p_expr, th) ** 2 / (p_expr * (1 - p_expr))
    subs = {w: 8.0, v: 0.9, phi: 0.3}
    theta_star = 0.0123
    oracle = float(fi_expr.subs(subs).subs(th, theta_star))

    def prob(theta):
        return 0.5 * (1.0 - 0.9 * np.cos(8.0 * theta + 0.3))

    got = classical_fi(prob, theta_star)
    assert abs(got - oracle) / oracle < 1e-6


def test_pipeline_fi_at_quadrature_reaches_ideal():
    m, l = 2, 1
    phi0 = quadrature_phi0(m, l, 0.0)

    def prob(theta):
        return fringe_probability(SwitchParams(m=m, l=l, theta=theta, phi0=phi0))

    fi = classical_fi(prob, 0.0)
    assert abs(fi - 16.0 * m * m * l * l) / (16.0 * m * m * l * l) < 1e-4


def test_fi_is_angle_independent_at_unit_visibility():
    # at V = 1 the binomial variance exactly tracks the slope, so the
    # information is 16 m^2 l^2 at every non-degenerate operating point
    m, l = 3, 2

    def prob(theta):
        return 0.5 * (1.0 - np.cos(4.0 * m * l * theta + 0.2))

    vals = [classical_fi(prob, t) for t in (0.01, 0.05, -0.03, 0.11)]
    for fi in vals:
        assert abs(fi - 16.0 * m * m * l * l) / (16.0 * m * m * l * l) < 1e-6


def test_classical_fi_rejects_extrema():
    def prob(theta):
        return 0.5 * (1.0 - np.cos(8.0 * theta))

    with pytest.raises(DegenerateOperatingPoint):
        classical_fi(prob, 0.0)
    with pytest.raises(NonPositiveInput):
        classical_fi(prob, 0.1, step=0.0)


def test_fi_quadruples_when_l_doubles():
    r1 = fisher_report(4, 8, 1e6)
    r2 = fisher_report(4, 16, 1e6)
    assert abs(r2.fi_single / r1.fi_single - 4.0) < 1e-12


# ---------------------------------------------------------------------------
# bounds and budgets


def test_crb_values():
    assert abs(crb(8, 128, 7.16e7) - 2.885e-8) < 5e-12
    arcsec = crb(8, 128, 7.16e7) * (180.0 * 3600.0 / np.pi)
    assert abs(arcsec - 0.00595) < 5e-6
    assert abs(crb(2, 1, 7e7) - 1.0 / (8.0 * np.sqrt(7e7))) < 1e-20
    with pytest.raises(NonPositiveInput):
        crb(0, 1, 100)


def test_quantum_and_classical_bounds_coincide_on_eigenstates():
    for m, l, nu in ((2, 1, 7e7), (8, 128, 7.16e7)):
        sd = 2.0 * m * l
        quantum = 1.0 / np.sqrt(qfi_from_sd(sd) * nu)
        assert abs(quantum - crb(m, l, nu)) / crb(m, l, nu) < 1e-12
    with pytest.raises(NonPositiveInput):
        qfi_from_sd(-1.0)


def test_fisher_report_consistency():
    rep = fisher_report(8, 128, 7.16e7)
    assert rep.fi_single == 16.0 * (8 * 128) ** 2
    assert abs(rep.crb_rad - crb(8, 128, 7.16e7)) < 1e-20
    assert rep.resources == 272
    dimmed = fisher_report(8, 128, 7.16e7, visibility=0.5)
    assert abs(dimmed.crb_rad - 2.0 * rep.crb_rad) < 1e-20
    with pytest.raises(NonPositiveInput):
        fisher_report(8, 128, 7.16e7, visibility=1.5)


def test_resource_count_examples():
    assert resource_count(1, 1) == 4
    assert resource_count(2, 1) == 6
    assert resource_count(8, 128) == 272
    with pytest.raises(NonPositiveInput):
        resource_count(0, 1)


def test_resource_cost_grows_slower_than_information():
    # doubling l doubles the element budget but quadruples the information
    fi_ratio = fisher_report(4, 16, 1e6).fi_single / fisher_report(4, 8, 1e6).fi_single
    res_ratio = resource_count(4, 16) / resource_count(4, 8)
    assert fi_ratio > res_ratio


# ---------------------------------------------------------------------------
# uncertainty product


def test_hup_check_saturation_and_threshold():
    rep = hup_check(0.5 / 4.0, 4.0)
    assert rep.satisfied and abs(rep.product - 0.5) < 1e-15
    slack = hup_check(0.49 / 4.0, 4.0, threshold=0.49)
    assert slack.satisfied
    tight = hup_check(0.49 / 4.0, 4.0)
    assert not tight.satisfied  # default threshold sits at 1/2
    assert tight.to_dict()["product"] == tight.product


def test_hup_check_rejects_nonpositive_inputs():
    with pytest.raises(NonPositiveInput):
        hup_check(0.0, 1.0)
    with pytest.raises(NonPositiveInput):
        hup_check(1.0, -2.0)
