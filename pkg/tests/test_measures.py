import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from chernoff_mehler.atomic import convolution_power_atoms, merge_atoms, tv_distance
from chernoff_mehler.errors import DomainError, UnsupportedModeError
from chernoff_mehler.measures import MeasureFamily


def test_dirac_sample_is_zero():
    assert np.array_equal(MeasureFamily.dirac_zero(1).sample(0.1, 3, seed=0), np.zeros((3, 1)))


def test_rademacher_draws_are_half():
    y = MeasureFamily.scaled_iid("rademacher").sample(0.25, 1000, seed=1)
    assert set(np.unique(y)) <= {-0.5, 0.5}


def test_brownian_unit_variance():
    y = MeasureFamily.brownian().sample(1.0, 10 ** 6, seed=2)
    assert abs(y.var() - 1.0) < 0.01


def test_sample_rejects_nonpositive_h():
    with pytest.raises(DomainError):
        MeasureFamily.brownian().sample(0.0, 3, seed=0)


def test_sample_is_deterministic():
    fam = MeasureFamily.compound_poisson(2.0, [[1.0], [-0.5]], drift=[0.1], cov=[[0.2]])
    assert np.array_equal(fam.sample(0.3, 100, seed=7), fam.sample(0.3, 100, seed=7))
    assert not np.array_equal(fam.sample(0.3, 100, seed=7), fam.sample(0.3, 100, seed=8))


def test_three_atom_moments():
    tm = MeasureFamily.three_atom_counterexample().truncated_moments(0.1, 1.0)
    assert tm.tail == pytest.approx(0.1, abs=1e-15)
    assert np.allclose(tm.mean_trunc, 0.0, atol=1e-15)
    assert tm.second_trunc == pytest.approx(0.009, abs=1e-15)


def test_three_atom_extends_constantly_beyond_one():
    fam = MeasureFamily.three_atom_counterexample()
    a, b = fam.atoms(1.0), fam.atoms(3.0)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_dirac_moments_vanish():
    tm = MeasureFamily.dirac_zero(2).truncated_moments(0.3, 0.7)
    assert tm.tail == 0 and tm.second_trunc == 0 and not np.any(tm.mean_trunc)


def test_brownian_truncated_second_moment():
    tm = MeasureFamily.brownian().truncated_moments(0.01, 1.0)
    assert abs(tm.second_trunc - 0.01) < 1e-4
    # independent oracle: scipy truncated normal
    z = 1.0 / 0.1
    oracle = 0.01 * (stats.norm.cdf(z) - stats.norm.cdf(-z) - 2 * z * stats.norm.pdf(z))
    assert tm.second_trunc == pytest.approx(oracle, rel=1e-12)


def test_monte_carlo_moments_need_samples():
    with pytest.raises(DomainError):
        MeasureFamily.brownian().truncated_moments(0.1, 1.0, mode="monte_carlo", n=0)


def test_analytic_mode_unavailable_raises():
    fam = MeasureFamily.stochastic_convolution([[-1.0, 0.5], [0.0, -2.0]], [0.0, 0.0], [[1.0, 0.0], [0.3, 1.0]])
    with pytest.raises(UnsupportedModeError):
        fam.truncated_moments(0.1, 1.0)


@pytest.mark.parametrize("fam", [MeasureFamily.brownian(), MeasureFamily.scaled_iid("two_point"),
                                 MeasureFamily.compound_poisson(1.5, [[0.8], [-2.0]], cov=[[0.3]]),
                                 MeasureFamily.scaled_iid("uniform")])
def test_monte_carlo_moments_match_analytic(fam):
    a = fam.truncated_moments(0.2, 0.5)
    m = fam.truncated_moments(0.2, 0.5, mode="monte_carlo", n=200_000, seed=3)
    assert abs(m.tail - a.tail) <= 4 * m.tail_se + 1e-12
    assert abs(m.second_trunc - a.second_trunc) <= 4 * m.second_se + 1e-12
    assert np.all(np.abs(m.mean_trunc - a.mean_trunc) <= 4 * m.mean_se + 1e-12)


def test_monte_carlo_error_shrinks_like_root_n():
    fam = MeasureFamily.brownian()
    se = [fam.truncated_moments(0.5, 0.5, mode="monte_carlo", n=n, seed=4).second_se for n in (10_000, 160_000)]
    assert se[0] / se[1] == pytest.approx(4.0, rel=0.1)


def test_convolution_power_dirac():
    assert not np.any(MeasureFamily.dirac_zero(1).convolution_power(0.2, 5, 50, seed=0))


def test_convolution_power_rademacher_binomial():
    k = 4
    y = MeasureFamily.scaled_iid("rademacher").convolution_power(1.0 / k, k, 40_000, seed=5).ravel()
    vals, counts = np.unique(y, return_counts=True)
    # four draws of +-sqrt(1/4) = +-0.5 sum to one of -2, -1, 0, 1, 2
    assert np.allclose(vals, [-2, -1, 0, 1, 2])
    expected = stats.binom.pmf(np.arange(5), 4, 0.5)
    assert stats.chisquare(counts, expected * y.size).pvalue > 1e-3
    atoms, w = convolution_power_atoms(MeasureFamily.scaled_iid("rademacher").atoms(1.0 / k), k)
    assert np.allclose(w, expected)


def test_convolution_power_brownian_is_gaussian():
    y = MeasureFamily.brownian().convolution_power(1 / 8, 8, 10 ** 5, seed=6).ravel()
    assert stats.kstest(y, "norm").statistic < 0.01


def test_convolution_power_one_equals_sample():
    fam = MeasureFamily.compound_poisson(2.0, [[1.0]], cov=[[0.5]])
    assert np.array_equal(fam.convolution_power(0.3, 1, 100, seed=9), fam.sample(0.3, 100, seed=9))


@given(st.floats(1e-4, 0.999))
def test_three_atom_functional(h):
    tm = MeasureFamily.three_atom_counterexample().truncated_moments(h, 1.0)
    assert (tm.second_trunc + tm.tail) / h == pytest.approx(1 + h * (1 - h), rel=1e-12)


@given(st.floats(1e-3, 50.0), st.floats(1e-4, 1.0))
def test_three_atom_tail_ratio(M, h):
    if not h < min(M, 1 / M):
        return
    tm = MeasureFamily.three_atom_counterexample().truncated_moments(h, M)
    assert tm.tail / h == pytest.approx(1.0, rel=1e-12)


@given(st.sampled_from(["brownian", "rademacher", "cpoisson", "uniform", "three_atom"]),
       st.floats(1e-3, 2.0), st.floats(0.05, 5.0))
def test_truncated_moment_invariants(kind, h, M):
    fam = {"brownian": MeasureFamily.brownian(), "rademacher": MeasureFamily.scaled_iid(),
           "cpoisson": MeasureFamily.compound_poisson(1.0, [[0.7], [-1.4]], cov=[[0.2]]),
           "uniform": MeasureFamily.scaled_iid("uniform"),
           "three_atom": MeasureFamily.three_atom_counterexample()}[kind]
    tm = fam.truncated_moments(h, M)
    assert -1e-15 <= tm.tail <= 1 + 1e-15
    assert tm.second_trunc >= 0
    assert np.linalg.norm(tm.mean_trunc) <= M * (1 + 1e-12)
    S = tm.second_matrix_trunc
    assert np.allclose(S, S.T) and np.linalg.eigvalsh(S).min() >= -1e-14
    assert np.trace(S) == pytest.approx(tm.second_trunc, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("M", [0.3, 1.0, 4.0])
def test_brownian_scaled_second_moment_tends_to_one(M):
    fam = MeasureFamily.brownian()
    vals = [fam.truncated_moments(h, M).second_trunc / h for h in (1e-2, 1e-3, 1e-4)]
    assert abs(vals[-1] - 1) < 1e-12
    assert abs(vals[-1] - 1) <= abs(vals[0] - 1)


def test_isotropic_gaussian_in_3d():
    fam = MeasureFamily.brownian(3)
    tm = fam.truncated_moments(0.5, 1.0)
    oracle = stats.chi2.cdf(1 / 0.5, 3)
    assert 1 - tm.tail == pytest.approx(oracle, rel=1e-12)


def test_sampled_mass_is_one():
    for fam in (MeasureFamily.compound_poisson(3.0, [[1.0]]), MeasureFamily.three_atom_counterexample()):
        atoms, w = fam.atoms(0.4)
        assert w.sum() == pytest.approx(1.0, abs=1e-15)


def test_poisson_additivity_exact():
    fam = MeasureFamily.compound_poisson(1.0, [[1.0]])
    k, h = 16, 1 / 16
    power = convolution_power_atoms(fam.atoms(h), k)
    assert tv_distance(power, fam.atoms(k * h)) <= 1e-10


def test_merge_atoms_sums_duplicates():
    a, w = merge_atoms(np.array([[1.0], [1.0], [-0.0]]), np.array([0.25, 0.25, 0.5]))
    assert a.ravel().tolist() == [0.0, 1.0] and w.tolist() == [0.5, 0.5]


def test_from_config_and_csv(tmp_path):
    path = tmp_path / "s.csv"
    rows = ["h,y_1"] + [f"0.5,{v}" for v in (-1.0, 0.0, 1.0, 2.0)]
    path.write_text("\n".join(rows) + "\n")
    fam = MeasureFamily.from_config({"kind": "custom_sampler", "csv": str(path)})
    assert fam.truncated_moments(0.5, 1.5).tail == pytest.approx(0.25)
    fam2 = MeasureFamily.from_config(json.dumps({"kind": "compound_poisson", "rate": 1.0, "jumps": [[1.0]],
                                                 "h_max": 2.0}))
    assert fam2.h_max == 2.0
    with pytest.raises(DomainError):
        MeasureFamily.from_config({"kind": "nope"})
