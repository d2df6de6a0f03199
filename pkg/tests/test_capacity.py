import numpy as np
import pytest

from fedesn.capacity import (
    CapacityQuery,
    EmpiricalMcConfig,
    mc_closed_form,
    mc_empirical,
    mc_empirical_multi_input,
    mc_empirical_series,
    nrmse,
)
from fedesn.esn import ReservoirSpec

FAST = EmpiricalMcConfig(length=12_000, seed=7)


# --- closed forms ---

def test_single_spot_value_table_parameters():
    got = mc_closed_form(CapacityQuery("single", 30, 0.98))
    assert abs(got - (29.0 + 0.98**60)) < 1e-12


def test_series_depth_one_equals_single():
    q1 = mc_closed_form(CapacityQuery("series", 12, 0.85, depth=1))
    q2 = mc_closed_form(CapacityQuery("single", 12, 0.85))
    assert q1 == q2


def test_parallel_equals_single():
    assert mc_closed_form(CapacityQuery("parallel", 9, 0.6, depth=4)) == mc_closed_form(
        CapacityQuery("single", 9, 0.6)
    )


def test_multi_input_uncorrelated_reduces_to_single():
    q = CapacityQuery(
        "multi_input", 7, 0.8, sigmas=(0.4, 1.7), rho=((1.0, 0.0), (0.0, 1.0))
    )
    assert np.isclose(mc_closed_form(q), mc_closed_form(CapacityQuery("single", 7, 0.8)))


def test_multi_input_perfect_correlation_quarter_prefactor():
    q = CapacityQuery(
        "multi_input", 7, 0.8, sigmas=(1.0, 1.0), rho=((1.0, 1.0), (1.0, 1.0))
    )
    base = mc_closed_form(CapacityQuery("single", 7, 0.8))
    assert np.isclose(mc_closed_form(q), 0.25 * base)


def test_multi_input_prefactor_at_most_one():
    rng = np.random.default_rng(0)
    base = mc_closed_form(CapacityQuery("single", 8, 0.7))
    for _ in range(20):
        sig = tuple(rng.uniform(0.2, 2.0, size=2))
        r = float(rng.uniform(0.0, 1.0))
        q = CapacityQuery("multi_input", 8, 0.7, sigmas=sig, rho=((1.0, r), (r, 1.0)))
        assert mc_closed_form(q) <= base + 1e-12
    zero = CapacityQuery("multi_input", 8, 0.7, sigmas=(1.0, 2.0),
                         rho=((1.0, 0.0), (0.0, 1.0)))
    assert np.isclose(mc_closed_form(zero), base)


def test_single_capacity_below_neuron_count():
    for n in (5, 10, 20):
        for w in (0.5, 0.9, 0.99):
            assert mc_closed_form(CapacityQuery("single", n, w)) < n


def test_series_strictly_decreasing_in_depth():
    values = [
        mc_closed_form(CapacityQuery("series", 10, 0.9, depth=d)) for d in (1, 2, 3, 4)
    ]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_query_validation():
    with pytest.raises(ValueError):
        CapacityQuery("single", 1, 0.5).validate()
    with pytest.raises(ValueError):
        CapacityQuery("single", 5, 1.0).validate()
    with pytest.raises(ValueError):
        CapacityQuery("ring", 5, 0.5).validate()
    with pytest.raises(ValueError):
        CapacityQuery("multi_input", 5, 0.5, sigmas=(1.0, -1.0),
                      rho=((1, 0), (0, 1))).validate()
    with pytest.raises(ValueError):
        CapacityQuery("multi_input", 5, 0.5, sigmas=(1.0, 1.0),
                      rho=((1.0, 0.2), (0.3, 1.0))).validate()
    with pytest.raises(ValueError):
        CapacityQuery("multi_input", 5, 0.5, sigmas=(1.0, 1.0),
                      rho=((1.0, 2.0), (2.0, 1.0))).validate()


# --- brute-force estimator ---

def test_empirical_matches_closed_form_small():
    q = CapacityQuery("single", 5, 0.9)
    est = mc_empirical(ReservoirSpec(5, 0.9, seed=42), cfg=EmpiricalMcConfig(
        length=12_000, max_delay=25, seed=7))
    closed = mc_closed_form(q)
    assert abs(est - closed) / closed <= 0.05


def test_empirical_parallel_close_to_single():
    spec = ReservoirSpec(5, 0.9, seed=42)
    cfg = EmpiricalMcConfig(length=12_000, max_delay=25, seed=7)
    single = mc_empirical(spec, "single", 1, cfg)
    par = mc_empirical(spec, "parallel", 3, cfg)
    assert abs(par - single) <= 0.2


def test_empirical_tiny_ring_weight_small_capacity():
    # As the ring weight vanishes only the first delay or two survive the
    # ridge floor; the estimate collapses far below the moderate-weight value.
    tiny = mc_empirical(ReservoirSpec(6, 0.02, seed=1), cfg=FAST)
    moderate = mc_empirical(ReservoirSpec(6, 0.9, seed=1), cfg=FAST)
    assert tiny < 2.5 < moderate


def test_empirical_series_preserves_depth_ordering():
    spec = ReservoirSpec(8, 0.9, seed=42)
    cfg = EmpiricalMcConfig(length=12_000, seed=7)
    values = [mc_empirical_series(spec, d, cfg) for d in (1, 2, 3)]
    assert values[0] > values[1] > values[2]


def test_empirical_multi_input_decreases_with_correlation():
    cfg = EmpiricalMcConfig(length=12_000, seed=7)
    estimates = []
    for r in (0.0, 0.5, 0.9):
        q = CapacityQuery("multi_input", 8, 0.9, sigmas=(1.0, 1.0),
                          rho=((1.0, r), (r, 1.0)))
        estimates.append(mc_empirical_multi_input(q, cfg))
    assert estimates[0] > estimates[1] > estimates[2]


def test_empirical_rejects_short_sequence():
    with pytest.raises(ValueError):
        mc_empirical(ReservoirSpec(5, 0.9, seed=0),
                     cfg=EmpiricalMcConfig(length=100, washout=90, max_delay=15))


def test_empirical_deterministic():
    spec = ReservoirSpec(5, 0.8, seed=3)
    cfg = EmpiricalMcConfig(length=6_000, seed=11)
    assert mc_empirical(spec, cfg=cfg) == mc_empirical(spec, cfg=cfg)


# --- nrmse ---

def test_nrmse_perfect_prediction():
    series = np.linspace(0.0, 1.0, 50)[:, None]
    assert nrmse(series, series) == 0.0


def test_nrmse_constant_offset_unit_range():
    target = np.linspace(0.0, 1.0, 101)[:, None]
    assert np.isclose(nrmse(target + 0.07, target), 0.07)


def test_nrmse_seeded_replay_reproducible():
    rng = np.random.default_rng(12)
    target = rng.normal(size=(40, 3))
    predicted = target + rng.normal(scale=0.1, size=(40, 3))
    a = nrmse(predicted, target)
    rng = np.random.default_rng(12)
    target2 = rng.normal(size=(40, 3))
    predicted2 = target2 + rng.normal(scale=0.1, size=(40, 3))
    assert a == nrmse(predicted2, target2) and a > 0


def test_nrmse_errors():
    with pytest.raises(ValueError):
        nrmse(np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(ValueError):
        nrmse(np.zeros((3, 1)), np.zeros((4, 1)))
