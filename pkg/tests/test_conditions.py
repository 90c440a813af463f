import numpy as np
import pytest

from chernoff_mehler.levy import (
    apriori_bound_check, build_cutoff, check_condition_M, check_condition_M_prime, check_condition_M_star,
    check_condition_T, check_condition_T_prime, estimate_triplet, lp_apriori_check, testfunctions as tf,
)
from chernoff_mehler.levy.conditions import lemma_constants
from chernoff_mehler.measures import MeasureFamily
from chernoff_mehler.reports import ConditionReport

LADDER = [2.0 ** -j for j in range(4, 13)]
THREE = MeasureFamily.three_atom_counterexample()


def test_M_dirac():
    rep = check_condition_M(MeasureFamily.dirac_zero(1), LADDER)
    assert rep.passed and all(r["functional"] == 0 for r in rep.table)


def test_M_three_atom_functional():
    rep = check_condition_M(THREE, LADDER)
    assert rep.passed
    for row in rep.table:
        h = row["h"]
        assert row["functional"] == pytest.approx(1 + h * (1 - h), rel=1e-13)


def test_M_brownian_tends_to_one():
    rep = check_condition_M(MeasureFamily.brownian(), LADDER)
    assert rep.passed and rep.table[-1]["functional"] == pytest.approx(1.0, abs=1e-12)


def test_M_fails_for_too_heavy_scaling():
    # increments of size h^(1/4): (1/h) int 1 ^ |y|^2 grows like h^(-1/2)
    samples = {h: np.array([[-h ** 0.25], [h ** 0.25]]) for h in LADDER}
    fam = MeasureFamily.custom_sampler(samples)
    assert check_condition_M(fam, LADDER).verdict == "fail"


def test_M_monte_carlo_uses_upper_bounds():
    fam = MeasureFamily.compound_poisson(1.0, [[0.5]], cov=[[0.2]])
    rep = check_condition_M(fam, LADDER[:4], mode="monte_carlo", n=20_000, seed=1)
    for row in rep.table:
        assert row["functional"] >= row["point_estimate"]
    assert rep.provenance == "monte_carlo"


def test_M_prime_equivalent_form():
    rep = check_condition_M_prime(THREE, LADDER, [tf.bump([0.0], 0.5, 1), tf.bump([0.1], 1.0, 1)])
    assert rep.passed


def test_T_dirac():
    assert check_condition_T(MeasureFamily.dirac_zero(1), LADDER).passed


def test_T_three_atom_fails_with_unit_ratio():
    rep = check_condition_T(THREE, LADDER)
    assert rep.verdict == "fail"
    for row in rep.table:
        assert np.allclose(row["tail_ratios"], 1.0, rtol=1e-13)
    assert check_condition_T_prime(THREE, LADDER).verdict == "fail"


def test_T_scaled_iid_with_markov_bound():
    fam = MeasureFamily.scaled_iid("two_point")
    rep = check_condition_T(fam, LADDER)
    assert rep.passed
    for eps in (0.5, 0.1, 0.01):
        assert rep.constants[f"M_eps[{eps:g}]"] <= rep.constants[f"M_markov[{eps:g}]"]
    for h in LADDER:
        for M in (0.5, 1.0, 2.0):
            assert fam.tail(h, M) / h <= 1.0 / M ** 2 + 1e-15
    assert check_condition_T_prime(fam, LADDER).passed


def test_M_star_examples():
    b = tf.bump([0.0], 1.0, 1)
    assert check_condition_M_star(MeasureFamily.dirac_zero(1), LADDER, [b]).constants["limits"] == [0.0]
    rep = check_condition_M_star(MeasureFamily.brownian(), LADDER, [b])
    half_trace = 0.5 * b.hess(np.zeros((1, 1)))[0, 0, 0]
    assert rep.passed and rep.constants["limits"][0] == pytest.approx(half_trace, abs=1e-5)
    b2 = tf.bump([0.0], 2.0, 1)
    cp = MeasureFamily.levy_increment(rate=1.0, jumps=[[1.0]], jump_weights=[1.0])
    rep = check_condition_M_star(cp, LADDER, [b2])
    expected = b2.value(np.array([[1.0]]))[0] - b2.value(np.zeros((1, 1)))[0]
    assert rep.passed and rep.constants["limits"][0] == pytest.approx(expected, abs=1e-6)


def test_triplet_brownian():
    est = estimate_triplet(MeasureFamily.brownian(), LADDER)
    T = est.triplet
    assert abs(T.b[0]) < 1e-10 and T.sigma[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert T.nu.intensity < 1e-10 and T.killing_c < 1e-10


def test_triplet_compound_poisson():
    est = estimate_triplet(MeasureFamily.compound_poisson(1.0, [[2.0]]), LADDER)
    T = est.triplet
    near = np.abs(T.nu.atoms[:, 0] - 2.0) < 0.1
    assert T.nu.masses[near].sum() == pytest.approx(1.0, abs=1e-3)
    assert abs(T.b[0]) < 1e-3 and T.sigma[0, 0] < 1e-3 and T.killing_c < 1e-3


def test_triplet_three_atom_killing():
    est = estimate_triplet(THREE, LADDER)
    T = est.triplet
    assert T.sigma[0, 0] < 1e-3 and T.nu.intensity < 1e-10
    assert abs(T.killing_c - 1.0) < 0.05


def test_triplet_round_trip_on_known_family():
    fam = MeasureFamily.levy_increment(drift=0.3, cov=0.5, rate=2.0, jumps=[[-1.5], [0.7], [2.0]],
                                       jump_weights=[0.2, 0.5, 0.3])
    known = fam.limit_triplet()
    est = estimate_triplet(fam, LADDER)
    T, err = est.triplet, est.errors
    assert abs(T.b[0] - known.b[0]) <= 3 * err["b"] + 1e-12
    assert np.linalg.norm(T.sigma - known.sigma) <= 3 * err["sigma"] + 1e-12
    assert T.nu.intensity == pytest.approx(known.nu.intensity, rel=0.05)
    assert T.killing_c <= 3 * err["c"] + 1e-12
    assert est.diagnostics["generator_gap"] < 1e-2


def test_triplet_needs_wide_cutoff():
    from chernoff_mehler.errors import DomainError

    with pytest.raises(DomainError):
        estimate_triplet(THREE, LADDER, cutoff=build_cutoff(0.5, 1.0, "constant"))


def test_killing_emerges_exactly_when_T_fails():
    est = estimate_triplet(THREE, LADDER)
    assert est.triplet.killing_c > 0.9 and check_condition_T(THREE, LADDER).verdict == "fail"
    est2 = estimate_triplet(MeasureFamily.brownian(), LADDER)
    assert est2.triplet.killing_c < 1e-10 and check_condition_T(MeasureFamily.brownian(), LADDER).passed


@pytest.mark.parametrize("fam", [MeasureFamily.dirac_zero(1), MeasureFamily.brownian(), THREE,
                                 MeasureFamily.compound_poisson(1.0, [[0.8], [-3.0]], cov=[[0.2]])])
def test_apriori_pointwise_bound(fam):
    f = tf.bump([0.0], 0.5 if fam is THREE else 1.0, 1)
    rep = apriori_bound_check(fam, LADDER, 1.0, f, np.linspace(-2, 2, 17))
    assert rep.constants["violations"] == 0


def test_apriori_three_atom_dominated_by_jump_term():
    f = tf.bump([0.0], 0.5, 1)
    cM, CM = lemma_constants(THREE, LADDER, 1.0)
    assert cM == pytest.approx(1.0) and CM < 0.1
    rep = apriori_bound_check(THREE, LADDER, 1.0, f, [0.0])
    row = rep.table[-1]
    assert row["rhs"] >= row["lhs"]


@pytest.mark.parametrize("fam", [MeasureFamily.brownian(), THREE, MeasureFamily.compound_poisson(1.0, [[2.0]])])
def test_apriori_L2_bound(fam):
    rep = lp_apriori_check(fam, LADDER, 1.0, tf.bump([0.0], 1.0, 1))
    assert rep.constants["violations"] == 0


def test_report_serialization_sorted():
    rep = check_condition_M(MeasureFamily.brownian(), LADDER[:3])
    assert isinstance(rep, ConditionReport)
    text = rep.to_json()
    assert '"condition": "M"' in text or '"condition":"M"' in text


def test_lp_check_needs_compact_support():
    from chernoff_mehler.errors import DomainError

    with pytest.raises(DomainError):
        lp_apriori_check(MeasureFamily.brownian(), LADDER, 1.0, tf.gaussian_bell([0.0], 1.0, 1))
