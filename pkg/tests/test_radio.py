import math

import numpy as np
import pytest

from fedesn.radio import (
    Geometry,
    LinkState,
    RadioParams,
    antenna_gain,
    blocker_counts,
    count_blockers,
    db_to_linear,
    dbm_to_watt,
    downlink_rate,
    evaluate_downlink,
    evaluate_link,
    path_loss,
    self_blockage,
    uplink_rate,
    uplink_rates_for_plan,
    watt_to_dbm,
    wrap_angle,
)

PARAMS = RadioParams()


def test_dbm_watt_roundtrip():
    for dbm in (-94.0, 0.0, 10.0, 30.0, 46.5):
        back = watt_to_dbm(dbm_to_watt(dbm))
        assert abs(back - dbm) / max(abs(dbm), 1.0) < 1e-12
    assert np.isclose(dbm_to_watt(30.0), 1.0)
    assert np.isclose(dbm_to_watt(-94.0), 10**-12.4)


def test_wrap_angle_range_and_values():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    grid = np.linspace(-10, 10, 2001)
    wrapped = wrap_angle(grid)
    assert np.all(wrapped > -math.pi - 1e-12) and np.all(wrapped <= math.pi + 1e-12)


# --- uplink ---

def test_uplink_hand_value_no_interference():
    # P=10 dBm, d=100 m, beta=2, noise -94 dBm: SNR = 1e-2 * 1e-4 / 1e-12.4.
    rate = uplink_rate(100.0, [], PARAMS, fading=1.0)
    snr = 10**6.4
    expected = 10e6 * math.log2(1.0 + snr)
    assert np.isclose(rate, expected, rtol=1e-12)
    assert abs(rate - 2.13e8) / 2.13e8 < 0.01


def test_uplink_interference_reduces_rate():
    clean = uplink_rate(100.0, [], PARAMS)
    loud = uplink_rate(100.0, [150.0, 300.0], PARAMS)
    assert loud < clean


def test_uplink_distance_power_law():
    snr = lambda d: 2 ** (uplink_rate(d, [], PARAMS) / PARAMS.bandwidth_ul_hz) - 1
    assert np.isclose(snr(100.0) / snr(200.0), 2**PARAMS.pl_exponent_ul, rtol=1e-9)


def test_uplink_rejects_zero_distance():
    with pytest.raises(ValueError):
        uplink_rate(0.0, [], PARAMS)


# --- antenna, blockage ---

def test_antenna_gain_boundaries():
    q_main = db_to_linear(15.0)
    q_side = db_to_linear(0.7)
    assert antenna_gain(0.3, 0.3, PARAMS) == pytest.approx(q_main, rel=1e-12)
    assert q_main == pytest.approx(31.6227766, rel=1e-6)
    half = PARAMS.beamwidth_rad / 2
    # Boundary inclusive: exactly half a beamwidth off keeps the mainlobe.
    assert antenna_gain(half, 0.0, PARAMS) == pytest.approx(q_main)
    assert antenna_gain(half + 1e-9, 0.0, PARAMS) == pytest.approx(q_side)
    assert antenna_gain(math.pi, 0.0, PARAMS) == pytest.approx(q_side)


def test_self_blockage_examples():
    assert self_blockage(1.0, 1.0, 2.0) == 1
    assert self_blockage(1.0 + 2.0, 1.0, 2.0) == 1  # boundary inclusive
    assert self_blockage(1.0 + math.pi, 1.0, 2.0) == 0
    # Flipped rule blocks the complement.
    assert self_blockage(1.0, 1.0, 2.0, when_facing=False) == 0
    assert self_blockage(1.0 + math.pi, 1.0, 2.0, when_facing=False) == 1


def brute_count(user_xy, i, j, bs_xy, radius, samples=20001):
    """Independent oracle: dense sampling along the open segment."""
    a, b = np.asarray(user_xy[i]), np.asarray(bs_xy[j])
    ts = np.linspace(0.0, 1.0, samples)[1:-1]
    points = a[None, :] + ts[:, None] * (b - a)[None, :]
    count = 0
    for k, p in enumerate(user_xy):
        if k == i:
            continue
        if np.min(np.linalg.norm(points - np.asarray(p), axis=1)) <= radius:
            count += 1
    return count


def test_count_blockers_examples():
    users = np.array([[0.0, 0.0], [5.0, 0.1]])
    bs = np.array([[10.0, 0.0]])
    assert count_blockers(users, 0, 0, bs, 0.3) == 1
    behind = np.array([[0.0, 0.0], [12.0, 0.0]])
    assert count_blockers(behind, 0, 0, bs, 0.3) == 0
    assert count_blockers(np.array([[0.0, 0.0]]), 0, 0, bs, 0.3) == 0


def test_count_blockers_against_sampling_oracle():
    rng = np.random.default_rng(8)
    for _ in range(40):
        users = rng.uniform(-50, 50, size=(6, 2))
        bs = rng.uniform(-50, 50, size=(2, 2))
        i = int(rng.integers(6))
        j = int(rng.integers(2))
        got = count_blockers(users, i, j, bs, 1.0)
        want = brute_count(users, i, j, bs, 1.0)
        assert got == want


def test_blocker_counts_matrix_matches_scalar():
    rng = np.random.default_rng(9)
    users = rng.uniform(-100, 100, size=(7, 2))
    bs = rng.uniform(-100, 100, size=(3, 2))
    mat = blocker_counts(users, bs, 0.8)
    for i in range(7):
        for j in range(3):
            assert mat[i, j] == count_blockers(users, i, j, bs, 0.8)


# --- path loss / downlink ---

def test_free_space_term_golden():
    # 20 log10(d0 f 4 pi / c) with d0=5 m, f=28 GHz: 75.37 dB.
    loss = path_loss(1.0, True, PARAMS, shadow_db=0.0)
    assert abs(loss - 75.37) <= 0.01


def test_los_path_loss_at_100m():
    loss = path_loss(100.0, True, PARAMS, shadow_db=0.0)
    assert abs(loss - 115.37) <= 0.01


def test_nlos_exceeds_los():
    for d in (1.5, 10.0, 300.0):
        assert path_loss(d, False, PARAMS, 0.0) > path_loss(d, True, PARAMS, 0.0)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        path_loss(0.0, True, PARAMS)


def test_downlink_chained_golden():
    # LoS, 100 m, mainlobe, zero shadowing: SNR = 10^(1.5 + 12.4 - h/10).
    loss = path_loss(100.0, True, PARAMS, 0.0)
    rate = downlink_rate(db_to_linear(15.0), loss, PARAMS)
    snr = 10 ** (1.5 + 12.4 - loss / 10.0)
    assert np.isclose(rate, 10e6 * math.log2(1 + snr), rtol=1e-12)
    assert abs(snr - 231) / 231 < 0.01
    assert abs(rate / 10e6 - 7.86) < 0.01


def test_downlink_nlos_strictly_lower():
    los = downlink_rate(db_to_linear(15.0), path_loss(100.0, True, PARAMS, 0.0), PARAMS)
    nlos = downlink_rate(db_to_linear(15.0), path_loss(100.0, False, PARAMS, 0.0), PARAMS)
    assert nlos < los


def test_sidelobe_snr_ratio_is_gain_ratio():
    loss = path_loss(150.0, True, PARAMS, 0.0)
    snr = lambda g: 2 ** (downlink_rate(g, loss, PARAMS) / PARAMS.bandwidth_dl_hz) - 1
    ratio = snr(db_to_linear(15.0)) / snr(db_to_linear(0.7))
    assert np.isclose(ratio, db_to_linear(15.0 - 0.7), rtol=1e-9)


def test_rates_monotone_in_distance():
    losses = [path_loss(d, True, PARAMS, 0.0) for d in (50, 100, 200, 400)]
    rates = [downlink_rate(1.0, h, PARAMS) for h in losses]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    assert all(np.isfinite(r) and r >= 0 for r in rates)


# --- link evaluation ---

def sample_geometry(seed=0, n_users=6, n_bs=3):
    rng = np.random.default_rng(seed)
    return Geometry(
        rng.uniform(-300, 300, size=(n_bs, 2)),
        rng.uniform(-300, 300, size=(n_users, 2)),
        rng.uniform(0, 2 * math.pi, size=n_users),
        rng.uniform(0, 2 * math.pi, size=n_bs),
    )


def test_vectorized_downlink_matches_scalar_ops():
    geo = sample_geometry(3)
    rates, los, b_self, blockers, gains, loss = evaluate_downlink(geo, PARAMS)
    for i in range(geo.n_users):
        for j in range(geo.n_bs):
            link = evaluate_link(geo, i, j, PARAMS)
            assert link.self_blocked == b_self[i, j]
            assert link.n_blockers == blockers[i, j]
            assert link.los == los[i, j]
            assert np.isclose(link.path_loss_db, loss[i, j])
            assert np.isclose(link.gain_linear, gains[i, j])
            assert np.isclose(link.rate_bps, rates[i, j])


def test_los_iff_no_blockage():
    geo = sample_geometry(5, n_users=8)
    _, los, b_self, blockers, _, _ = evaluate_downlink(geo, PARAMS)
    assert np.array_equal(los, (b_self + blockers) == 0)


def test_link_state_rejects_inconsistent_flags():
    with pytest.raises(ValueError):
        LinkState(10.0, 0.0, 1, 0, True, 1.0, 100.0, 1e6)


def test_seeded_link_budget_reproducible():
    geo = sample_geometry(7)
    rng1 = np.random.default_rng(99)
    rng2 = np.random.default_rng(99)
    shadows1 = rng1.standard_normal((geo.n_users, geo.n_bs)) * PARAMS.shadow_std_los_db
    shadows2 = rng2.standard_normal((geo.n_users, geo.n_bs)) * PARAMS.shadow_std_los_db
    r1, *_ = evaluate_downlink(geo, PARAMS, shadows1, shadows1)
    r2, *_ = evaluate_downlink(geo, PARAMS, shadows2, shadows2)
    assert np.array_equal(r1, r2)


def test_uplink_plan_rates_no_interference_matches_scalar():
    geo = sample_geometry(11, n_users=5, n_bs=2)
    ul = np.array([0, 1, 0, 1, 0])
    rates = uplink_rates_for_plan(ul, geo, PARAMS, with_interference=False)
    dist = geo.distances()
    for i in range(5):
        assert np.isclose(rates[i], uplink_rate(dist[i, ul[i]], [], PARAMS))


def test_uplink_plan_cochannel_interference():
    # Two users on one station share nothing; a third on another station
    # reuses subcarrier 0 and interferes with the first.
    geo = Geometry(
        np.array([[0.0, 0.0], [500.0, 0.0]]),
        np.array([[100.0, 0.0], [120.0, 50.0], [400.0, 0.0]]),
        np.zeros(3),
        np.zeros(2),
    )
    ul = np.array([0, 0, 1])
    with_i = uplink_rates_for_plan(ul, geo, PARAMS, subcarriers_per_bs=10)
    without = uplink_rates_for_plan(ul, geo, PARAMS, with_interference=False)
    assert with_i[0] < without[0]  # user 2 shares subcarrier 0
    assert np.isclose(with_i[1], without[1])  # subcarrier 1 is clean
