import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import outcome_from, tiny_spec
from oracle import brute_phi, brute_psi, brute_states, cond_mean, y_of
from spillsense.errors import EstimationError, InputDomainError, UndefinedStratumError
from spillsense.estimate import (
    ObservedSample,
    effect_tables,
    inverse_odds_summary,
    ipw_identify,
    mew_scores,
    naive_functional_psi,
    naive_ipw_estimate,
    naive_ipw_summary,
    oracle_estimands,
    pseudo_propensity,
)
from spillsense.scenario import SizeCaps, enumeration_measure, random_scenario
from spillsense.simulate import sample_observations

SMALL = SizeCaps(2, 2)


# ---------------------------------------------------------------- weighting scores

def test_mew_scores_without_confounding_are_one():
    spec = random_scenario(4, no_confounding=True)
    m = enumeration_measure(spec)
    eps0, eps1 = mew_scores(m, spec)
    ref = m.event(s=1)
    np.testing.assert_allclose(eps0[ref], 1.0, atol=1e-14)
    np.testing.assert_allclose(eps1[ref], 1.0, atol=1e-14)
    assert np.all(np.isnan(eps1[~ref]))


def test_mew_scores_hidden_binary_confounder():
    # 0.2 / 0.4 and 0.6 / 0.4
    spec = tiny_spec(blocks={"U_AY": [0.5, 0.5]}, propensity_table=np.array([[0.2, 0.6], [0.2, 0.6]]))
    m = enumeration_measure(spec)
    _, eps1 = mew_scores(m, spec)
    assert sorted(set(np.round(eps1[m.event(s=1)], 14))) == [0.5, 1.5]


@pytest.mark.parametrize("seed", range(25))
def test_mew_scores_have_unit_mean(seed):
    spec = random_scenario(seed)
    m = enumeration_measure(spec)
    eps0, eps1 = mew_scores(m, spec)
    ref = m.event(s=1)
    assert abs(m.expect(np.nan_to_num(eps1), ref) - 1.0) <= 1e-12
    assert abs(m.expect(np.nan_to_num(eps0), ref) - 1.0) <= 1e-12


def test_pseudo_propensity_matches_table():
    spec = random_scenario(6)
    m = enumeration_measure(spec)
    p = pseudo_propensity(m)
    ref = m.event(s=1)
    table = spec.pseudo_propensity_table(1)
    np.testing.assert_allclose(p[ref], table[m["X_AY"][ref]], atol=1e-14)


# ---------------------------------------------------------------- naive functional

@pytest.mark.parametrize("seed", range(15))
def test_psi_matches_brute_force(seed):
    spec = random_scenario(seed, SMALL, undefined_po=seed % 3 == 0)
    states = brute_states(spec)
    assert naive_functional_psi(enumeration_measure(spec), spec) == pytest.approx(brute_psi(spec, states),
                                                                                   abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_psi_equals_phi_without_confounding(seed):
    spec = random_scenario(seed, no_confounding=True)
    m = enumeration_measure(spec)
    assert naive_functional_psi(m) == pytest.approx(oracle_estimands(m).phi1, abs=1e-12)


def test_psi_equals_phi_randomized_no_interference():
    spec = tiny_spec(g_max=0, blocks={"U_AY": [0.3, 0.7]}, propensity_table=np.full((2, 2), 0.4),
                     exposure=np.ones((2, 1)), outcome=np.array([[0.0, 1.0], [2.0, 5.0]]).reshape(2, 1, 2))
    m = enumeration_measure(spec)
    assert naive_functional_psi(m) == pytest.approx(oracle_estimands(m).phi1, abs=1e-14)


# ---------------------------------------------------------------- identification

def test_ipw_reduces_to_difference_in_means_when_randomized():
    spec = tiny_spec(blocks={"X_GY": [0.5, 0.5]}, propensity=(0.3, 0.7),
                     outcome=np.random.default_rng(0).uniform(size=(2, 2, 1, 1, 2, 1)))
    m = enumeration_measure(spec)
    y = m.observed_outcome()
    ref = m.event(s=1)
    diff = m.expect(y, ref & (m["a"] == 1)) - m.expect(y, ref & (m["a"] == 0))
    assert ipw_identify(m, spec, 1) == pytest.approx(diff, abs=1e-14)


@pytest.mark.parametrize("seed", range(15))
@pytest.mark.parametrize("undefined", [False, True])
def test_ipw_identifies_phi_against_brute_force(seed, undefined):
    spec = random_scenario(seed, SMALL, undefined_po=undefined)
    m = enumeration_measure(spec)
    states = brute_states(spec)
    for s in (1, 2):
        phi = oracle_estimands(m).phi[s]
        assert ipw_identify(m, spec, s) == pytest.approx(phi, abs=1e-10)
        if not undefined:
            assert phi == pytest.approx(brute_phi(spec, s, states), abs=1e-12)


def test_undefined_phi_against_brute_force():
    # sum over g of E[1(G=g) tau(g) | S, V_g] p(V_g | S), walked state by state
    spec = random_scenario(12, SMALL, undefined_po=True, g_max=2)
    m = enumeration_measure(spec)
    states = brute_states(spec)
    for s in (1, 2):
        total = 0.0
        pop = [(x, w) for x, w in states if x["s"] == s]
        mass = sum(w for _, w in pop)
        for g in range(spec.levels):
            defined = [(x, w) for x, w in pop if x["n"] >= g]
            p_v = sum(w for _, w in defined) / mass
            if p_v == 0:
                continue
            term = cond_mean(defined, lambda x: (x["g"] == g) * (y_of(spec, x, 1, g) - y_of(spec, x, 0, g)),
                             lambda x: True)
            total += term * p_v
        assert oracle_estimands(m).phi[s] == pytest.approx(total, abs=1e-12)


# ---------------------------------------------------------------- oracle estimands

def test_oracle_no_main_effect():
    est = oracle_estimands(enumeration_measure(outcome_from(lambda a, g: g)))
    assert est.phi1 == pytest.approx(0.0, abs=1e-15)
    assert est.phi2 == pytest.approx(0.0, abs=1e-15)
    assert est.theta == pytest.approx(0.0, abs=1e-15)


def test_oracle_constant_unit_effect():
    est = oracle_estimands(enumeration_measure(outcome_from(lambda a, g: a)))
    assert (est.phi1, est.phi2, est.theta) == pytest.approx((1.0, 1.0, 1.0), abs=1e-15)


def test_oracle_effect_linear_in_exposure():
    # sum_g p(g) E[tau(g)] = 0.5 * 0 + 0.5 * 1
    est = oracle_estimands(enumeration_measure(outcome_from(lambda a, g: a * g)))
    assert est.phi1 == pytest.approx(0.5, abs=1e-15)
    np.testing.assert_allclose(est.exposure_marginals[1], [0.5, 0.5])
    np.testing.assert_allclose(est.mean_tau[1], [0.0, 1.0])


@pytest.mark.parametrize("seed", range(10))
def test_theta_equals_phi_when_exposure_ignores_covariates(seed):
    m = enumeration_measure(random_scenario(seed, exposure_form="randomized"))
    est = oracle_estimands(m)
    assert est.theta == pytest.approx(est.phi1, abs=1e-12)


def test_oracle_marginals_sum_to_one():
    est = oracle_estimands(enumeration_measure(random_scenario(31)))
    for s in (1, 2):
        assert est.exposure_marginals[s].sum() == pytest.approx(1.0, abs=1e-12)
    d = est.to_dict()
    assert set(d) == {"phi", "theta", "mean_tau", "mean_tau_all", "exposure_marginals"}


# ---------------------------------------------------------------- effect tables

def test_effect_tables_without_interference():
    spec = random_scenario(2, g_max=0)
    eff = effect_tables(enumeration_measure(spec))
    assert np.all(eff.gamma == 0.0)
    np.testing.assert_array_equal(eff.kappa, eff.tau[:, 0])


def test_effect_tables_additive_outcome():
    m = enumeration_measure(outcome_from(lambda a, g: a + g, g_max=2, exposure=np.full((2, 3), 1 / 3)))
    eff = effect_tables(m)
    np.testing.assert_allclose(eff.tau, 1.0)
    np.testing.assert_allclose(eff.gamma, np.column_stack([m["g"], m["g"]]))


@pytest.mark.parametrize("seed", range(10))
def test_kappa_picks_realized_exposure(seed):
    m = enumeration_measure(random_scenario(seed, undefined_po=seed % 2 == 0))
    eff = effect_tables(m)
    picked = eff.tau[np.arange(len(m)), m["g"]]
    np.testing.assert_allclose(eff.kappa, picked, atol=1e-15)
    np.testing.assert_allclose(eff.total, eff.kappa + eff.gamma[:, 0], atol=1e-15)


# ---------------------------------------------------------------- plug-in estimator

def test_estimate_difference_in_means():
    sample = ObservedSample(np.array([1, 1, 0, 0]), np.array([1.0, 1.0, 0.0, 0.0]), np.zeros(4, int))
    assert naive_ipw_estimate(sample) == pytest.approx(1.0)


def test_estimate_single_arm_error_names_stratum():
    sample = ObservedSample(np.array([1, 1, 1, 0]), np.ones(4), np.array([7, 7, 3, 3]))
    with pytest.raises(EstimationError, match="7"):
        naive_ipw_estimate(sample)
    with pytest.raises(EstimationError):
        naive_ipw_estimate(ObservedSample(np.ones(5, int), np.ones(5), np.zeros(5, int)))


def test_estimate_needs_reference_units():
    sample = ObservedSample(np.array([1, 0]), np.ones(2), np.zeros(2, int), s=np.array([2, 2]))
    with pytest.raises(EstimationError):
        naive_ipw_estimate(sample)


def test_sample_validation():
    with pytest.raises(InputDomainError):
        ObservedSample(np.array([0, 2]), np.ones(2), np.zeros(2, int))
    with pytest.raises(InputDomainError):
        ObservedSample(np.array([0, 1]), np.ones(3), np.zeros(2, int))
    with pytest.raises(InputDomainError):
        ObservedSample(np.array([0, 1]), np.array([1.0, np.nan]), np.zeros(2, int))


def test_estimate_ignores_target_units_except_scaling():
    a = np.array([1, 0, 1, 0, 1, 1])
    y = np.array([2.0, 1.0, 3.0, 0.0, 100.0, -50.0])
    s = np.array([1, 1, 1, 1, 2, 2])
    full = naive_ipw_estimate(ObservedSample(a, y, np.zeros(6, int), s=s))
    ref = naive_ipw_estimate(ObservedSample(a[:4], y[:4], np.zeros(4, int)))
    assert full == pytest.approx(ref)


def test_supplied_scores_are_used():
    a = np.array([1, 0, 1, 0])
    y = np.array([1.0, 0.0, 1.0, 0.0])
    sample = ObservedSample(a, y, np.zeros(4, int), pscore_pseudo=np.full(4, 0.25))
    # mean of (a y / 0.25 - (1-a) y / 0.75)
    assert naive_ipw_estimate(sample) == pytest.approx(2.0)
    with pytest.raises(EstimationError):
        naive_ipw_estimate(ObservedSample(a, y, np.zeros(4, int), pscore_pseudo=np.ones(4)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_estimate_is_order_invariant(seed):
    rng = np.random.default_rng(seed)
    n = 60
    strata = rng.integers(0, 3, n)
    a = np.tile([0, 1], n // 2)
    y = rng.normal(size=n)
    perm = rng.permutation(n)
    one = naive_ipw_estimate(ObservedSample(a, y, strata))
    two = naive_ipw_estimate(ObservedSample(a[perm], y[perm], strata[perm]))
    assert one == pytest.approx(two, abs=1e-12)


def test_estimate_converges_to_psi():
    spec = random_scenario(21, SMALL)
    psi = naive_functional_psi(enumeration_measure(spec))
    est = naive_ipw_summary(sample_observations(spec, 100_000, 5).observed_sample())
    assert est.n == 100_000 and 0 < est.n_reference < est.n
    assert abs(est.value - psi) <= 4 * est.std_error


def test_inverse_odds_summary():
    # arm 1: mean of 3 and 1/3; arm 0: the mirror image
    odds0, odds1 = inverse_odds_summary([0.25, 0.75])
    assert odds1 == pytest.approx(5.0 / 3.0)
    assert odds0 == pytest.approx(5.0 / 3.0)
    with pytest.raises(EstimationError):
        inverse_odds_summary([0.0, 0.5])


def test_zero_mass_reference_population():
    spec = random_scenario(3)
    m = enumeration_measure(spec)
    from spillsense.measure import PopulationMeasure

    keep = m.event(s=2)
    cols = {k: v[keep] for k, v in m.columns.items()}
    w = m.weights[keep] / m.weights[keep].sum()
    only_target = PopulationMeasure(cols, w, m.prop_true[keep], m.po_table, m.po_row[keep], m.g_max,
                                    "enumeration", m.supports, g_mode=m.g_mode)
    with pytest.raises(UndefinedStratumError):
        naive_functional_psi(only_target)
