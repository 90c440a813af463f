import numpy as np
import pytest
from hypothesis import given, strategies as st

from chernoff_mehler.engine import (
    GridFunction, GridSpec, TransitionConfig, chernoff_iterate, lp_grid_error, mixed_topology_error,
    transition_apply,
)
from chernoff_mehler.errors import DomainError, UnsupportedModeError
from chernoff_mehler.flows import FlowFamily, linear_field
from chernoff_mehler.levy.testfunctions import bump, constant, coordinate, cosine
from chernoff_mehler.measures import MeasureFamily

NEG, _ = linear_field([[-1.0]])
GRID = TransitionConfig(mode="grid")
COS = cosine([1.0], 0.0, 1)


def clipped_identity(lo=-3.0, hi=3.0):
    return lambda X: np.clip(np.asarray(X)[:, 0], lo, hi)


def test_dirac_identity_transition_is_f():
    f = bump([0.2], 1.5, 1)
    for mode in ("grid", "particle"):
        v = transition_apply(MeasureFamily.dirac_zero(1), FlowFamily.identity(1), 0.3, f, 0.5,
                             TransitionConfig(mode=mode, n_paths=10))
        assert v.value == f.value(np.array([[0.5]]))[0] and v.error == 0


def test_brownian_cos_transition():
    v = transition_apply(MeasureFamily.brownian(), FlowFamily.identity(1), 0.5, COS, 0.0, GRID)
    assert v.value == pytest.approx(np.exp(-0.25), abs=1e-14)


def test_euler_flow_transition():
    v = transition_apply(MeasureFamily.dirac_zero(1), FlowFamily.euler(NEG, 1.0), 0.1, clipped_identity(), 1.0, GRID)
    assert v.value == pytest.approx(0.9, abs=1e-15)


def test_grid_mode_unsupported_for_nonatomic_multidim():
    with pytest.raises(UnsupportedModeError):
        transition_apply(MeasureFamily.brownian(2), FlowFamily.identity(2), 0.1, bump([0.0, 0.0], 1.0, 2),
                         [0.0, 0.0], GRID)


def test_transition_config_validation():
    with pytest.raises(DomainError):
        TransitionConfig(mode="particle", n_paths=0)
    with pytest.raises(DomainError):
        TransitionConfig(mode="fft")


def test_unital_exactly():
    one = constant(0.7, 1)
    for fam in (MeasureFamily.brownian(), MeasureFamily.compound_poisson(2.0, [[1.0]], cov=[[0.3]])):
        for mode in ("grid", "particle"):
            v = transition_apply(fam, FlowFamily.euler(NEG, 1.0), 0.2, one, 0.4, TransitionConfig(mode=mode, n_paths=50))
            assert v.value == 0.7


@given(st.floats(-3, 3), st.floats(0.01, 1.0), st.floats(0.1, 2.0))
def test_monotone_in_f(x, h, c):
    f = bump([0.0], 2.0, 1)
    g = f + bump([0.5], 1.0, 1) * c
    fam = MeasureFamily.compound_poisson(1.0, [[0.5], [-1.0]], cov=[[0.2]])
    a = transition_apply(fam, FlowFamily.identity(1), h, f, x, GRID)
    b = transition_apply(fam, FlowFamily.identity(1), h, g, x, GRID)
    assert a.value <= b.value + a.error + b.error + 1e-15


def test_iterate_k1_equals_transition():
    spec = GridSpec([[-3.0, 3.0]], 13)
    fam = MeasureFamily.compound_poisson(1.0, [[1.0]], cov=[[0.25]])
    psi = FlowFamily.euler(NEG, 1.0)
    g = chernoff_iterate(fam, psi, 0.2, 1, COS, spec, GRID)
    direct = [transition_apply(fam, psi, 0.2, COS, x, GRID).value for x in spec.points()]
    assert np.allclose(g.values, direct, atol=1e-15)


@pytest.mark.parametrize("k", [4, 16, 64])
def test_clt_grid_exact(k):
    g = chernoff_iterate(MeasureFamily.scaled_iid("rademacher"), FlowFamily.identity(1), 1 / k, k, COS,
                         GridSpec([[-1.0, 1.0]], 3), GRID)
    assert g.values[1] == pytest.approx(np.cos(1 / np.sqrt(k)) ** k, abs=1e-12)
    assert g.meta["atoms"] == k + 1


def test_clt_particle_within_error():
    k = 16
    g = chernoff_iterate(MeasureFamily.scaled_iid("rademacher"), FlowFamily.identity(1), 1 / k, k, COS,
                         GridSpec([[-1.0, 1.0]], 3), TransitionConfig(n_paths=40_000, seed=3))
    assert abs(g.values[1] - np.cos(0.25) ** 16) <= 3 * g.stderr[1]
    assert np.cos(0.25) ** 16 == pytest.approx(0.6033265, abs=1e-7)


def test_compound_interest_limit():
    t, k = 1.0, 200
    g = chernoff_iterate(MeasureFamily.dirac_zero(1), FlowFamily.euler(NEG, 1.0), t / k, k, clipped_identity(),
                         GridSpec([[-1.0, 1.0]], 3), GRID)
    assert g.values[2] == pytest.approx((1 - t / k) ** k, rel=1e-12)
    assert abs(g.values[2] - np.exp(-t)) < 1e-2


def test_particle_seed_determinism_and_threads():
    spec = GridSpec([[-2.0, 2.0]], 9)
    fam = MeasureFamily.compound_poisson(1.0, [[0.5]], cov=[[0.3]])
    psi = FlowFamily.runge_kutta(NEG, 1.0)
    runs = [chernoff_iterate(fam, psi, 0.1, 10, COS, spec, TransitionConfig(n_paths=500, seed=11, jobs=j))
            for j in (1, 1, 3)]
    assert np.array_equal(runs[0].values, runs[1].values)
    assert np.array_equal(runs[0].values, runs[2].values)
    other = chernoff_iterate(fam, psi, 0.1, 10, COS, spec, TransitionConfig(n_paths=500, seed=12))
    assert not np.array_equal(runs[0].values, other.values)


def test_atomic_grid_matches_particle():
    spec = GridSpec([[-2.0, 2.0]], 5)
    fam = MeasureFamily.compound_poisson(2.0, [[1.0], [-0.5]])
    f = bump([0.0], 3.0, 1)
    exact = chernoff_iterate(fam, FlowFamily.identity(1), 0.25, 4, f, spec, GRID)
    mc = chernoff_iterate(fam, FlowFamily.identity(1), 0.25, 4, f, spec, TransitionConfig(n_paths=40_000, seed=1))
    assert np.all(np.abs(exact.values - mc.values) <= 4 * mc.stderr + 1e-12)


def test_pure_levy_semigroup_consistency():
    fam = MeasureFamily.levy_increment(drift=0.2, cov=0.5, rate=1.0, jumps=[[1.0]], jump_weights=[1.0])
    spec = GridSpec([[-8.0, 8.0]], 801, "cubic")
    g = chernoff_iterate(fam, FlowFamily.identity(1), 0.1, 5, COS, spec, GRID)
    for x in (-1.0, 0.0, 0.5):
        ref = transition_apply(fam, FlowFamily.identity(1), 0.5, COS, x, GRID)
        i = int(np.argmin(np.abs(spec.points()[:, 0] - x)))
        assert abs(g.values[i] - ref.value) <= g.stderr[i] + ref.error + 1e-6


@given(st.sampled_from(["grid", "particle"]), st.integers(1, 6))
def test_contractivity_and_positivity(mode, k):
    f = bump([0.3], 1.2, 1)
    spec = GridSpec([[-3.0, 3.0]], 31)
    fam = MeasureFamily.compound_poisson(1.0, [[0.4]], cov=[[0.1]])
    g = chernoff_iterate(fam, FlowFamily.euler(NEG, 1.0), 0.2, k, f, spec, TransitionConfig(mode=mode, n_paths=200))
    assert g.sup_bound <= f.sup_norm
    assert np.abs(g.values).max() <= f.sup_norm
    assert g.values.min() >= -1e-15


def test_excursions_are_counted():
    spec = GridSpec([[-1.0, 1.0]], 3)
    cfg = TransitionConfig(n_paths=100, safety_box=[[-0.5, 0.5]])
    g = chernoff_iterate(MeasureFamily.brownian(), FlowFamily.identity(1), 0.5, 3, COS, spec, cfg)
    assert g.meta["excursions"] > 0


def test_mixed_topology_error_basics():
    spec = GridSpec([[-1.0, 1.0]], 21)
    f = GridFunction.from_function(COS, spec)
    assert mixed_topology_error(f, f, [0.5, 1.0]).errors == [0.0, 0.0]
    one = GridFunction(spec, np.ones(21), 1.0)
    zero = GridFunction(spec, np.zeros(21), 0.0)
    err = mixed_topology_error(one, zero, [0.2, 1.0])
    assert err.errors == [1.0, 1.0] and err.sup_bound == 1.0
    even = GridSpec([[-1.0, 1.0]], 20)
    with pytest.raises(DomainError):
        mixed_topology_error(GridFunction(even, np.ones(20), 1.0), GridFunction(even, np.zeros(20), 0.0), [0.01])


def test_lp_grid_error_basics():
    spec = GridSpec([[-1.0, 2.0]], 31)
    f = GridFunction(spec, np.full(31, 0.25), 1.0)
    g = GridFunction(spec, np.zeros(31), 1.0)
    assert lp_grid_error(f, f, 1) == 0
    assert lp_grid_error(f, g, 1) == pytest.approx(0.75, abs=1e-15)
    assert lp_grid_error(f, g, "inf") == 0.25
    with pytest.raises(UnsupportedModeError):
        two = GridSpec([[-1, 1], [-1, 1]], 3)
        lp_grid_error(GridFunction(two, np.zeros(9), 1.0), GridFunction(two, np.zeros(9), 1.0), 2)


def test_ou_error_ratio_about_two():
    spec = GridSpec([[-12.0, 12.0]], 1201, "cubic")
    from chernoff_mehler.reference import OuSpec, mehler_ou_apply

    ref, _ = mehler_ou_apply(OuSpec([[-1.0]], [0.0], [[1.0]]), 1.0, COS, spec.points())
    refg = GridFunction(spec, ref, 1.0)
    errs = [mixed_topology_error(chernoff_iterate(MeasureFamily.brownian(), FlowFamily.euler(NEG, 1.0), 1 / k, k,
                                                  COS, spec, GRID), refg, [2.0]).errors[0] for k in (32, 64)]
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)


def test_heat_lp2_rate():
    # Rademacher steps against the heat semigroup: L2 error halves when k doubles
    spec = GridSpec([[-30.0, 30.0]], 6001)
    f = bump([0.0], 2.0, 1)
    from chernoff_mehler.reference import heat_semigroup_apply

    ref, _ = heat_semigroup_apply([0.0], [[1.0]], 1.0, f, spec.points())
    refg = GridFunction(spec, ref, 1.0)
    ks = [16, 32, 64, 128]
    errs = [lp_grid_error(chernoff_iterate(MeasureFamily.scaled_iid(), FlowFamily.identity(1), 1 / k, k, f, spec,
                                           GRID), refg, 2) for k in ks]
    from chernoff_mehler.numerics import loglog_slope

    assert loglog_slope(ks, errs).slope == pytest.approx(-1.0, abs=0.2)


def test_gridfunction_csv_roundtrip(tmp_path):
    spec = GridSpec([[-1.0, 1.0], [0.0, 2.0]], (3, 4), "multilinear")
    g = GridFunction.from_function(lambda X: np.sin(X[:, 0]) * X[:, 1] / 2, spec, 1.0)
    path = tmp_path / "g.csv"
    g.to_csv(path)
    back = GridFunction.from_csv(path)
    assert np.array_equal(back.values, g.values) and back.sup_bound == 1.0
    assert (tmp_path / "g.json").exists()


def test_gridfunction_invariants():
    spec = GridSpec([[-1.0, 1.0]], 3)
    with pytest.raises(DomainError):
        GridFunction(spec, [0.0, 2.0, 0.0], 1.0)
    with pytest.raises(DomainError):
        GridSpec([[1.0, 1.0]], 3)
    with pytest.raises(DomainError):
        GridSpec([[0.0, 1.0]], 1)


def test_extension_policies():
    spec = GridSpec([[-1.0, 1.0]], 21)
    g = GridFunction.from_function(coordinate(0, 1).value, spec, 1.0)
    far = np.array([[3.0]])
    assert g.evaluate(far, "constant_nearest")[0] == 1.0
    assert g.evaluate(far, "declared_analytic")[0] == 3.0
    tab = GridFunction(spec, g.values, 1.0)
    assert tab.evaluate(far)[0] == 1.0
