import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import tiny_spec
from oracle import brute_states
from spillsense import fileio
from spillsense.errors import (
    EnumerationSizeError,
    InputDomainError,
    ScenarioValidationError,
    StructuralError,
    UndefinedStratumError,
)
from spillsense.measure import ROLES
from spillsense.scenario import (
    SizeCaps,
    enumerate_joint,
    enumeration_measure,
    exposure_given_outcome_covariates,
    joint_cardinality,
    joint_total,
    pseudo_propensity_table,
    random_scenario,
    require_transportable,
    validate_scenario,
    with_degree,
)


# ---------------------------------------------------------------- build and layout

def test_build_reinserts_absent_axes():
    spec = tiny_spec()
    assert spec.selection.shape == (1, 1, 1, 1)
    assert spec.propensity.shape == (2, 1, 1, 1, 1, 1, 1)
    assert spec.exposure.shape == (2, 1, 1, 1, 1, 1, 1, 2)
    assert spec.outcome.shape == (2, 2, 1, 1, 1, 1)
    assert validate_scenario(spec).ok


def test_build_rejects_unknown_role():
    with pytest.raises(InputDomainError):
        tiny_spec(blocks={"Z": [1.0]})


def test_tables_are_read_only():
    spec = random_scenario(0)
    with pytest.raises(ValueError):
        spec.outcome[(0,) * spec.outcome.ndim] = 1.0


# ---------------------------------------------------------------- validation

def test_zero_propensity_names_cell():
    spec = tiny_spec(propensity=(0.0, 0.6))
    report = validate_scenario(spec)
    assert not report.ok
    assert report.kinds() == {"positivity"}
    v = report.violations[0]
    assert v.table == "propensity" and "S=1" in v.location
    assert "positivity" in str(v)


def test_row_sum_violation():
    exposure = np.array([[0.5, 0.5001], [0.5, 0.5]])
    report = validate_scenario(tiny_spec(exposure=exposure))
    assert "row_sum" in report.kinds()
    assert any(v.table == "exposure" and "S=1" in v.location for v in report.violations)


def test_shape_and_range_violations():
    report = validate_scenario(tiny_spec(exposure=np.ones((2, 3)) / 3))
    assert "shape" in report.kinds()
    report = validate_scenario(tiny_spec(selection=1.0))
    assert "positivity" in report.kinds()
    report = validate_scenario(tiny_spec(outcome=np.array([[0.0, np.nan], [1.0, 1.0]])))
    assert "finite" in report.kinds()
    report = validate_scenario(tiny_spec(blocks={"X_AY": [0.5, 0.6]}, propensity_table=np.full((2, 2), 0.5)))
    assert "row_sum" in report.kinds()


def test_undefined_support_violation():
    degree = np.array([[0.5, 0.5], [0.5, 0.5]])
    exposure = np.full((2, 2, 2), 0.5)  # n = 0 rows put mass on g = 1
    report = validate_scenario(tiny_spec(exposure=exposure, degree=degree))
    assert "support" in report.kinds()


def test_propensity_with_n_axis_is_rejected():
    degree = np.array([[0.5, 0.5], [0.5, 0.5]])
    exposure = np.array([[[1.0, 0.0], [0.5, 0.5]]] * 2)
    spec = tiny_spec(exposure=exposure, degree=degree, propensity_table=np.full((2, 2, 1, 1, 1, 1, 1, 1), 0.5))
    assert "n_dependence" in validate_scenario(spec).kinds()


def test_alias_validation():
    bad = tiny_spec(blocks={"X_AY": [0.5, 0.5], "X_GY": [0.2, 0.3, 0.5]}, aliases={"X_GY": "X_AY"},
                    propensity_table=np.full((2, 2), 0.5))
    assert "alias" in validate_scenario(bad).kinds()
    chained = tiny_spec(aliases={"X_GY": "X_AY", "U_GY": "X_GY"})
    assert "alias" in validate_scenario(chained).kinds()


def test_alias_shares_values():
    spec = tiny_spec(blocks={"X_AY": [0.3, 0.7], "X_GS": [0.3, 0.7]}, aliases={"X_GS": "X_AY"},
                     propensity_table=np.array([[0.2, 0.6], [0.4, 0.5]]), selection=np.array([0.3, 0.8]),
                     exposure=np.array([[[0.5, 0.5], [0.2, 0.8]]] * 2), outcome=np.ones((2, 2, 2)))
    assert validate_scenario(spec).ok
    enum = enumerate_joint(spec)
    assert np.array_equal(enum.columns["X_GS"], enum.columns["X_AY"])
    with pytest.raises(StructuralError):
        require_transportable(spec)


@pytest.mark.parametrize("seed", range(1000))
def test_random_scenarios_validate(seed):
    assert validate_scenario(random_scenario(seed)).ok


@pytest.mark.parametrize("form", ["additive", "separable"])
@pytest.mark.parametrize("exposure_form", ["identical", "randomized", "equal_marginals"])
def test_random_forms_validate(form, exposure_form):
    for seed in range(10):
        for undefined in (False, True):
            spec = random_scenario(seed, outcome_form=form, exposure_form=exposure_form, undefined_po=undefined)
            assert validate_scenario(spec).ok


def test_random_scenario_rejects_bad_forms():
    with pytest.raises(InputDomainError):
        random_scenario(0, outcome_form="cubic")
    with pytest.raises(InputDomainError):
        random_scenario(0, exposure_form="weird")
    with pytest.raises(InputDomainError):
        SizeCaps(max_support=0)


def test_random_scenario_determinism():
    a, b = random_scenario(42), random_scenario(42)
    assert fileio.scenario_hash(a) == fileio.scenario_hash(b)
    assert fileio.scenario_hash(random_scenario(43)) != fileio.scenario_hash(a)


def test_random_scenario_respects_caps():
    caps = SizeCaps(max_support=2, max_g=1)
    for seed in range(30):
        spec = random_scenario(seed, caps)
        assert spec.g_max <= 1
        assert all(spec.support(r) <= 2 for r in ROLES)


# ---------------------------------------------------------------- enumeration

def test_cardinality_examples():
    spec = tiny_spec()
    assert len(enumerate_joint(spec)) == 8
    spec = tiny_spec(g_max=0, blocks={"X_AY": [0.4, 0.6]}, propensity_table=np.full((2, 2), 0.5),
                     exposure=np.ones((2, 1)), outcome=np.zeros((2, 1, 2)))
    assert len(enumerate_joint(spec)) == 8


@pytest.mark.parametrize("seed", range(20))
def test_enumeration_matches_brute_force(seed):
    spec = random_scenario(seed, SizeCaps(2, 2), undefined_po=seed % 2 == 1)
    enum = enumerate_joint(spec)
    assert abs(joint_total(enum) - 1.0) <= 1e-12
    got = {}
    for state in enum:
        key = tuple(state.values[r] for r in ROLES) + (state.s, state.a, state.g, state.n)
        got[key] = state.weight
    expected = {}
    for st_, w in brute_states(spec):
        key = tuple(st_[r] for r in ROLES) + (st_["s"], st_["a"], st_["g"], st_["n"])
        expected[key] = w
    assert got.keys() == expected.keys()
    for key, w in expected.items():
        assert got[key] == pytest.approx(w, rel=1e-12, abs=1e-15)


def test_enumeration_cap(monkeypatch):
    spec = random_scenario(3)
    card = joint_cardinality(spec)
    with pytest.raises(EnumerationSizeError) as info:
        enumerate_joint(spec, cap=card - 1)
    assert str(card) in str(info.value)
    monkeypatch.setenv("SPILLSENSE_MAX_STATES", str(card - 1))
    with pytest.raises(EnumerationSizeError):
        enumerate_joint(spec)


def test_enumeration_rejects_invalid_spec():
    with pytest.raises(ScenarioValidationError):
        enumerate_joint(tiny_spec(propensity=(0.0, 0.5)))


def test_measure_weights_sum_to_one():
    for seed in range(10):
        m = enumeration_measure(random_scenario(seed))
        assert abs(m.weights.sum() - 1.0) <= 1e-12


# ---------------------------------------------------------------- pseudo-propensity

def test_pseudo_equals_true_without_extra_parents():
    spec = tiny_spec(blocks={"X_AY": [0.3, 0.7]}, propensity_table=np.array([[0.2, 0.8], [0.4, 0.5]]))
    np.testing.assert_allclose(pseudo_propensity_table(spec, 1), [0.2, 0.8], atol=1e-15)
    np.testing.assert_allclose(pseudo_propensity_table(spec, 2), [0.4, 0.5], atol=1e-15)


def test_pseudo_marginalizes_hidden_confounder():
    # hand marginalization: 0.5 * 0.2 + 0.5 * 0.6 = 0.4
    spec = tiny_spec(blocks={"U_AY": [0.5, 0.5]}, propensity_table=np.array([[0.2, 0.6], [0.2, 0.6]]))
    np.testing.assert_allclose(pseudo_propensity_table(spec, 1), [0.4], atol=1e-15)


@pytest.mark.parametrize("seed", range(30))
def test_pseudo_is_within_marginalized_range(seed):
    spec = random_scenario(seed)
    table = pseudo_propensity_table(spec, 1)
    prop = spec.propensity[0]
    for x in range(spec.support("X_AY")):
        assert prop[x].min() - 1e-15 <= table[x] <= prop[x].max() + 1e-15


@pytest.mark.parametrize("seed", range(10))
def test_no_confounding_flag(seed):
    spec = random_scenario(seed, no_confounding=True)
    table = pseudo_propensity_table(spec, 1)
    np.testing.assert_allclose(table, spec.propensity[0].reshape(spec.support("X_AY"), -1)[:, 0], atol=1e-15)


def test_pseudo_zero_mass_stratum():
    spec = tiny_spec(blocks={"X_AY": [1.0, 0.0]}, propensity_table=np.full((2, 2), 0.5))
    with pytest.raises(UndefinedStratumError):
        pseudo_propensity_table(spec, 1)


def test_exposure_given_outcome_covariates_rows():
    spec = random_scenario(5, undefined_po=True)
    for s in (1, 2):
        rows = exposure_given_outcome_covariates(spec, s)
        np.testing.assert_allclose(rows.sum(axis=-1), 1.0, atol=1e-12)


# ---------------------------------------------------------------- degree variant

def test_with_degree_full_neighbors_keeps_rows():
    spec = random_scenario(8, g_max=2)
    degree = np.zeros((2, 3))
    degree[:, -1] = 1.0
    su = with_degree(spec, degree)
    assert validate_scenario(su).ok
    np.testing.assert_array_equal(su.exposure[:, -1], spec.exposure)
    with pytest.raises(InputDomainError):
        with_degree(su, degree)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_property_random_specs_enumerate_to_unit_mass(seed, undefined):
    spec = random_scenario(seed, SizeCaps(2, 2), undefined_po=undefined)
    enum = enumerate_joint(spec)
    assert abs(joint_total(enum) - 1.0) <= 1e-12
    assert np.all(enum.weights > 0)
    if undefined:
        assert np.all(enum.columns["g"] <= enum.columns["n"])
