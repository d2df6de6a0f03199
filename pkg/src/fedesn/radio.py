"""Channel, geometry, and link-budget models.

Sub-6 GHz uplink carries tracking data (power-law path gain, Rayleigh
fading, co-subcarrier interference); the mmWave downlink carries video
(sectored antenna, free-space-plus-exponent path loss with log-normal
shadowing, LoS/NLoS decided by body blockage).  All powers are handled in
dBm at the surface and watts inside.
"""

import math

import numpy as np
from dataclasses import dataclass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def wrap_angle(theta):
    """Wrap to [-pi, pi]; values already in range pass through bit-exact."""
    t = np.asarray(theta, dtype=float)
    two_pi = 2.0 * np.pi
    return t - two_pi * np.round(t / two_pi)


@dataclass(frozen=True)
class RadioParams:
    """Radio constants; defaults follow the evaluated system setup.

    Angles are radians, powers dBm, bandwidths Hz, distances meters.
    ``self_block_when_facing`` keeps the printed blockage rule (link blocked
    when the station direction falls inside the facing cone); flipping it
    blocks the complement instead.
    """

    tx_power_user_dbm: float = 10.0
    tx_power_bs_dbm: float = 30.0
    noise_dbm: float = -94.0
    bandwidth_ul_hz: float = 10e6
    bandwidth_dl_hz: float = 10e6
    pl_exponent_ul: float = 2.0
    ref_distance_m: float = 5.0
    carrier_hz: float = 28e9
    light_speed: float = 3e8
    pl_exponent_los: float = 2.0
    pl_exponent_nlos: float = 2.4
    shadow_std_los_db: float = 5.3
    shadow_std_nlos_db: float = 5.27
    mainlobe_gain_db: float = 15.0
    sidelobe_gain_db: float = 0.7
    beamwidth_rad: float = math.radians(30.0)
    self_block_halfangle_rad: float = 2.0
    body_radius_m: float = 0.3
    self_block_when_facing: bool = True

    @property
    def noise_watt(self):
        return dbm_to_watt(self.noise_dbm)


@dataclass
class Geometry:
    """Positions of stations and users plus facing and boresight angles."""

    bs_xy: np.ndarray  # (B, 2)
    user_xy: np.ndarray  # (U, 2)
    user_facing_rad: np.ndarray  # (U,)
    bs_boresight_rad: np.ndarray = None  # (B,)

    def __post_init__(self):
        self.bs_xy = np.atleast_2d(np.asarray(self.bs_xy, dtype=float))
        self.user_xy = np.atleast_2d(np.asarray(self.user_xy, dtype=float))
        self.user_facing_rad = np.mod(
            np.asarray(self.user_facing_rad, dtype=float), 2.0 * np.pi
        )
        if self.bs_boresight_rad is None:
            self.bs_boresight_rad = np.zeros(len(self.bs_xy))
        self.bs_boresight_rad = np.mod(
            np.asarray(self.bs_boresight_rad, dtype=float), 2.0 * np.pi
        )

    @property
    def n_users(self):
        return len(self.user_xy)

    @property
    def n_bs(self):
        return len(self.bs_xy)

    def distances(self):
        """(U, B) user-station distances."""
        diff = self.user_xy[:, None, :] - self.bs_xy[None, :, :]
        return np.linalg.norm(diff, axis=2)

    def bearings_to_bs(self):
        """(U, B) angle of the user->station ray."""
        diff = self.bs_xy[None, :, :] - self.user_xy[:, None, :]
        return np.arctan2(diff[..., 1], diff[..., 0])

    def bearings_to_user(self):
        """(U, B) angle of the station->user ray."""
        return np.mod(self.bearings_to_bs() + np.pi, 2.0 * np.pi) - np.pi


@dataclass
class LinkState:
    """Everything the downlink budget of one (user, station) pair resolved to."""

    distance_m: float
    bearing_to_bs_rad: float
    self_blocked: int
    n_blockers: int
    los: bool
    gain_linear: float
    path_loss_db: float
    rate_bps: float

    def __post_init__(self):
        if self.los != (self.self_blocked + self.n_blockers == 0):
            raise ValueError("los flag inconsistent with blockage counts")


def antenna_gain(bearing_to_user, boresight, params: RadioParams):
    """Sectored gain: mainlobe inside the half-beamwidth (inclusive), sidelobe outside."""
    off = np.abs(wrap_angle(np.asarray(bearing_to_user) - boresight))
    main = db_to_linear(params.mainlobe_gain_db)
    side = db_to_linear(params.sidelobe_gain_db)
    return np.where(off <= params.beamwidth_rad / 2.0, main, side)


def self_blockage(bearing_to_bs, facing, halfangle, when_facing: bool = True):
    """Own-body blockage indicator.

    As printed in the underlying rule, the link is blocked when the user->BS
    bearing lies within ``halfangle`` of the facing direction (boundary
    inclusive); ``when_facing=False`` flips to blocking the complement.
    """
    inside = np.abs(wrap_angle(np.asarray(bearing_to_bs) - facing)) <= halfangle
    blocked = inside if when_facing else ~inside
    return blocked.astype(int)


def count_blockers(user_xy, i, j, bs_xy, body_radius):
    """Other users whose body disc crosses the open user->station segment.

    A blocker counts when its perpendicular foot falls strictly inside the
    segment and its distance to the line is at most ``body_radius``; bodies
    behind either endpoint do not block.
    """
    a = np.asarray(user_xy[i], dtype=float)
    b = np.asarray(bs_xy[j], dtype=float)
    seg = b - a
    seg_len2 = seg @ seg
    if seg_len2 == 0.0:
        return 0
    others = np.delete(np.arange(len(user_xy)), i)
    rel = np.asarray(user_xy)[others] - a
    t = rel @ seg / seg_len2
    perp = rel - t[:, None] * seg
    dist = np.linalg.norm(perp, axis=1)
    return int(np.sum((t > 0.0) & (t < 1.0) & (dist <= body_radius)))


def path_loss(distance_m, los: bool, params: RadioParams, shadow_db: float = 0.0):
    """Free-space reference term plus exponent-scaled log distance plus shadowing (dB)."""
    if np.any(np.asarray(distance_m) <= 0):
        raise ValueError("distance must be positive")
    free = 20.0 * np.log10(
        params.ref_distance_m * params.carrier_hz * 4.0 * np.pi / params.light_speed
    )
    exp = params.pl_exponent_los if los else params.pl_exponent_nlos
    return free + 10.0 * exp * np.log10(distance_m) + shadow_db


def uplink_rate(
    distance_m,
    interferer_distances,
    params: RadioParams,
    fading=1.0,
    interferer_fading=None,
):
    """Tracking-link rate (bit/s): bandwidth * log2(1 + SINR).

    ``interferer_distances`` are co-subcarrier users' distances to the same
    serving station; fading values are linear Rayleigh power gains.
    """
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    p_tx = dbm_to_watt(params.tx_power_user_dbm)
    signal = p_tx * fading * distance_m ** (-params.pl_exponent_ul)
    interferer_distances = np.asarray(interferer_distances, dtype=float)
    if interferer_fading is None:
        interferer_fading = np.ones_like(interferer_distances)
    interference = float(
        np.sum(
            p_tx
            * np.asarray(interferer_fading)
            * interferer_distances ** (-params.pl_exponent_ul)
        )
    )
    sinr = signal / (interference + params.noise_watt)
    return params.bandwidth_ul_hz * math.log2(1.0 + sinr)


def downlink_rate(gain_linear, path_loss_db, params: RadioParams):
    """Video-link rate (bit/s); interference-free by directionality."""
    p_tx = dbm_to_watt(params.tx_power_bs_dbm)
    snr = p_tx * gain_linear / (db_to_linear(path_loss_db) * params.noise_watt)
    return params.bandwidth_dl_hz * np.log2(1.0 + snr)


def evaluate_downlink(
    geometry: Geometry,
    params: RadioParams,
    shadow_los_db=None,
    shadow_nlos_db=None,
):
    """Vectorized downlink budget for every (user, station) pair.

    Returns (rates, los, b_self, n_blockers, gains, loss_db) each (U, B).
    Shadowing draws, when given, are per-link dB values for the respective
    branch; the LoS branch applies when no body blocks the pair.
    """
    u, b = geometry.n_users, geometry.n_bs
    dist = geometry.distances()
    if np.any(dist <= 0):
        raise ValueError("user placed exactly on a station")
    b_self = self_blockage(
        geometry.bearings_to_bs(),
        geometry.user_facing_rad[:, None],
        params.self_block_halfangle_rad,
        params.self_block_when_facing,
    )
    blockers = blocker_counts(geometry.user_xy, geometry.bs_xy, params.body_radius_m)
    los = (b_self + blockers) == 0

    if shadow_los_db is None:
        shadow_los_db = np.zeros((u, b))
    if shadow_nlos_db is None:
        shadow_nlos_db = np.zeros((u, b))
    free = 20.0 * np.log10(
        params.ref_distance_m * params.carrier_hz * 4.0 * np.pi / params.light_speed
    )
    loss = np.where(
        los,
        free + 10.0 * params.pl_exponent_los * np.log10(dist) + shadow_los_db,
        free + 10.0 * params.pl_exponent_nlos * np.log10(dist) + shadow_nlos_db,
    )
    gains = antenna_gain(
        geometry.bearings_to_user(), geometry.bs_boresight_rad[None, :], params
    )
    rates = downlink_rate(gains, loss, params)
    return rates, los, b_self, blockers, gains, loss


def blocker_counts(user_xy, bs_xy, body_radius):
    """(U, B) matrix of third-party body counts on every open user->station segment."""
    user_xy = np.asarray(user_xy, dtype=float)
    bs_xy = np.asarray(bs_xy, dtype=float)
    u = len(user_xy)
    seg = bs_xy[None, :, :] - user_xy[:, None, :]  # (U, B, 2)
    seg_len2 = np.einsum("ubk,ubk->ub", seg, seg)
    rel = user_xy[None, None, :, :] - user_xy[:, None, None, :]  # (U, B, U', 2)
    t = np.einsum("ubok,ubk->ubo", rel, seg) / np.maximum(seg_len2[..., None], 1e-12)
    foot = t[..., None] * seg[:, :, None, :]
    dist = np.linalg.norm(rel - foot, axis=3)
    hit = (t > 0.0) & (t < 1.0) & (dist <= body_radius)
    hit[np.arange(u), :, np.arange(u)] = False
    return hit.sum(axis=2)


def uplink_rates_for_plan(
    ul_bs,
    geometry: Geometry,
    params: RadioParams,
    fading=None,
    subcarriers_per_bs: int = 10,
    with_interference: bool = True,
):
    """Per-user uplink rates under an uplink association vector.

    Users of one station are placed on subcarriers round-robin by user
    index; every other user sharing a subcarrier index interferes at the
    serving station.
    """
    ul_bs = np.asarray(ul_bs, dtype=int)
    u = geometry.n_users
    dist = geometry.distances()
    if fading is None:
        fading = np.ones((u, geometry.n_bs))
    subc = np.empty(u, dtype=int)
    for j in range(geometry.n_bs):
        members = np.flatnonzero(ul_bs == j)
        subc[members] = np.arange(len(members)) % max(subcarriers_per_bs, 1)

    p_tx = dbm_to_watt(params.tx_power_user_dbm)
    beta = params.pl_exponent_ul
    rates = np.empty(u)
    for i in range(u):
        j = ul_bs[i]
        signal = p_tx * fading[i, j] * dist[i, j] ** (-beta)
        interference = 0.0
        if with_interference:
            cochannel = np.flatnonzero((subc == subc[i]) & (np.arange(u) != i))
            if len(cochannel):
                interference = float(
                    np.sum(
                        p_tx
                        * fading[cochannel, j]
                        * dist[cochannel, j] ** (-beta)
                    )
                )
        rates[i] = params.bandwidth_ul_hz * math.log2(
            1.0 + signal / (interference + params.noise_watt)
        )
    return rates


def draw_rayleigh_fading(rng, shape):
    """Unit-mean exponential power gains."""
    return rng.exponential(1.0, size=shape)


def draw_shadowing_db(rng, std_db, shape):
    return rng.normal(0.0, std_db, size=shape)


def evaluate_link(geometry: Geometry, i, j, params: RadioParams, shadow_db=0.0):
    """Resolve one (user, station) downlink into a LinkState."""
    dist = float(geometry.distances()[i, j])
    bearing = float(geometry.bearings_to_bs()[i, j])
    b_self = int(
        self_blockage(
            bearing,
            geometry.user_facing_rad[i],
            params.self_block_halfangle_rad,
            params.self_block_when_facing,
        )
    )
    n_block = count_blockers(
        geometry.user_xy, i, j, geometry.bs_xy, params.body_radius_m
    )
    los = (b_self + n_block) == 0
    loss = float(path_loss(dist, los, params, shadow_db))
    gain = float(
        antenna_gain(
            geometry.bearings_to_user()[i, j], geometry.bs_boresight_rad[j], params
        )
    )
    return LinkState(
        distance_m=dist,
        bearing_to_bs_rad=bearing,
        self_blocked=b_self,
        n_blockers=n_block,
        los=los,
        gain_linear=gain,
        path_loss_db=loss,
        rate_bps=float(downlink_rate(gain, loss, params)),
    )


def link_budget_rows(geometry: Geometry, params: RadioParams, slot=0):
    """Debug dump rows (slot, i, j, d, b_self, n_blockers, los, loss_db, gain_db, rate)."""
    rates, los, b_self, blockers, gains, loss = evaluate_downlink(geometry, params)
    dist = geometry.distances()
    rows = []
    for i in range(geometry.n_users):
        for j in range(geometry.n_bs):
            rows.append(
                (
                    slot,
                    i,
                    j,
                    float(dist[i, j]),
                    int(b_self[i, j]),
                    int(blockers[i, j]),
                    bool(los[i, j]),
                    float(loss[i, j]),
                    10.0 * math.log10(gains[i, j]),
                    float(rates[i, j]),
                )
            )
    return rows
