"""Prediction-driven user association.

The uplink station is picked per user by an epsilon-greedy bandit over
predicted presence-break reward; the downlink station is then chosen among
the stations that can meet the remaining delay budget and the quality
threshold under the predicted geometry, highest predicted rate first,
subject to the per-station load cap.  An exhaustive enumerator over all
plans serves as the optimality yardstick at toy sizes.
"""

import itertools
import math

import numpy as np
from dataclasses import dataclass

from . import radio
from .bip import VideoFrameModel, bip_indicator, delivery_vector
from .radio import Geometry, RadioParams


@dataclass
class AssociationPlan:
    """Per-user uplink and downlink station choices.

    ``predicted_omegas`` is filled by the planner with the slot indicators
    it expected under the snapshot (for plan dumps); enumerated or random
    plans leave it None.
    """

    ul_bs: np.ndarray  # (U,) int
    dl_bs: np.ndarray  # (U,) int
    predicted_omegas: np.ndarray = None

    def __post_init__(self):
        self.ul_bs = np.asarray(self.ul_bs, dtype=int)
        self.dl_bs = np.asarray(self.dl_bs, dtype=int)

    def validate(self, n_bs, max_dl_users):
        if np.any((self.ul_bs < 0) | (self.ul_bs >= n_bs)):
            raise ValueError("uplink choice out of range")
        if np.any((self.dl_bs < 0) | (self.dl_bs >= n_bs)):
            raise ValueError("downlink choice out of range")
        loads = np.bincount(self.dl_bs, minlength=n_bs)
        if np.any(loads > max_dl_users):
            raise ValueError("downlink load cap exceeded")

    def onehot(self, n_bs):
        """(a_ul, a_dl) one-hot matrices of shape (U, n_bs)."""
        u = len(self.ul_bs)
        a_ul = np.zeros((u, n_bs), dtype=int)
        a_dl = np.zeros((u, n_bs), dtype=int)
        a_ul[np.arange(u), self.ul_bs] = 1
        a_dl[np.arange(u), self.dl_bs] = 1
        return a_ul, a_dl


@dataclass
class PredictionSnapshot:
    """Predicted user positions and facings for the slot being planned."""

    user_xy: np.ndarray  # (U, 2)
    user_facing_rad: np.ndarray  # (U,)

    def geometry(self, bs_xy, bs_boresight_rad):
        return Geometry(bs_xy, self.user_xy, self.user_facing_rad, bs_boresight_rad)

    @classmethod
    def from_truth(cls, geometry: Geometry):
        return cls(geometry.user_xy.copy(), geometry.user_facing_rad.copy())


class EpsilonGreedyPolicy:
    """Per-user epsilon-greedy arm values over uplink stations.

    Exploration decays multiplicatively per decision round; rewards are the
    negated predicted slot indicators fed back by the planner.
    """

    def __init__(self, n_users, n_bs, epsilon=0.1, decay=0.995, seed=0):
        self.n_users = n_users
        self.n_bs = n_bs
        self.epsilon = epsilon
        self.decay = decay
        self.rng = np.random.default_rng(seed)
        self.values = np.zeros((n_users, n_bs))
        self.counts = np.zeros((n_users, n_bs), dtype=int)
        self.primed = np.zeros(n_users, dtype=bool)

    def prime(self, user, scores):
        """Seed untried arms with predicted one-shot scores."""
        if not self.primed[user]:
            self.values[user] = scores
            self.primed[user] = True

    def choose(self, user):
        if self.rng.uniform() < self.epsilon:
            return int(self.rng.integers(self.n_bs))
        row = self.values[user]
        return int(np.argmax(row == row.max()))  # ties to the lowest index

    def update(self, user, arm, reward):
        self.counts[user, arm] += 1
        n = self.counts[user, arm]
        self.values[user, arm] += (reward - self.values[user, arm]) / n

    def end_round(self):
        self.epsilon *= self.decay


def _budget_delivery(dl_rate, ul_delay, frame: VideoFrameModel):
    """Delivery achievable in the delay budget left after the tracking upload."""
    window = max(0.0, frame.delay_budget_s - ul_delay)
    return delivery_vector(dl_rate, window, frame)


def downlink_feasible(dl_rate, ul_delay_s, frame: VideoFrameModel) -> int:
    """1 when a station's predicted downlink fits the leftover budget and quality.

    The remaining video budget is the delay target minus the tracking upload
    time; both the delay and the quality comparisons are non-strict.
    """
    if not math.isfinite(ul_delay_s) or ul_delay_s >= frame.delay_budget_s:
        return 0
    if dl_rate <= 0.0:
        return 0
    delivered = _budget_delivery(dl_rate, ul_delay_s, frame)
    video_delay = frame.payload_bits(delivered) / dl_rate
    fits = video_delay <= frame.delay_budget_s - ul_delay_s
    good = frame.quality(delivered) >= frame.quality_min
    return int(fits and good)


def predicted_indicators(
    plan: AssociationPlan,
    geometry: Geometry,
    params: RadioParams,
    frame: VideoFrameModel,
    subcarriers_per_bs: int = 10,
    with_interference: bool = True,
):
    """Slot indicators for a plan under nominal (fade-free) channels."""
    ul_rates = radio.uplink_rates_for_plan(
        plan.ul_bs,
        geometry,
        params,
        subcarriers_per_bs=subcarriers_per_bs,
        with_interference=with_interference,
    )
    dl_rates, _, _, _, _, _ = radio.evaluate_downlink(geometry, params)
    omegas = np.empty(geometry.n_users, dtype=int)
    for i in range(geometry.n_users):
        ul_delay = frame.tracking_bits / ul_rates[i] if ul_rates[i] > 0 else math.inf
        rate = dl_rates[i, plan.dl_bs[i]]
        delivered = _budget_delivery(rate, ul_delay, frame)
        omegas[i] = bip_indicator(ul_delay, rate, delivered, frame)
    return omegas


def zero_noise_bip(omegas, app_effect) -> float:
    """Total per-slot presence-break load with awareness noise switched off."""
    omegas = np.asarray(omegas, dtype=float)
    return float(np.sum(app_effect + (1.0 + app_effect) * omegas))


def select_association(
    snapshot: PredictionSnapshot,
    bs_xy,
    bs_boresight_rad,
    params: RadioParams,
    frame: VideoFrameModel,
    policy: EpsilonGreedyPolicy,
    max_dl_users: int = 10,
    subcarriers_per_bs: int = 10,
    with_interference: bool = True,
) -> AssociationPlan:
    """Plan one slot's associations from a prediction snapshot.

    Uplink arms come from the bandit (primed on first sight of a user with
    single-user predicted rates); downlink stations are granted greedily by
    predicted rate among feasible candidates, respecting the load cap, with
    a nearest-station fallback so every user ends up assigned.
    """
    geo = snapshot.geometry(bs_xy, bs_boresight_rad)
    u, b = geo.n_users, geo.n_bs
    if max_dl_users * b < u:
        raise ValueError("load cap makes the downlink infeasible")

    dist = geo.distances()
    dl_rates, _, _, _, _, _ = radio.evaluate_downlink(geo, params)

    # Prime untried users: single-user uplink delay per candidate arm plus
    # their best-case downlink decides the initial arm score.
    for i in range(u):
        if policy.primed[i]:
            continue
        scores = np.empty(b)
        for k in range(b):
            rate = radio.uplink_rate(dist[i, k], [], params)
            ul_delay = frame.tracking_bits / rate if rate > 0 else math.inf
            feas = [
                downlink_feasible(dl_rates[i, m], ul_delay, frame) for m in range(b)
            ]
            scores[k] = -1.0 + float(any(feas))
        policy.prime(i, scores)

    ul_bs = np.array([policy.choose(i) for i in range(u)], dtype=int)
    ul_rates = radio.uplink_rates_for_plan(
        ul_bs,
        geo,
        params,
        subcarriers_per_bs=subcarriers_per_bs,
        with_interference=with_interference,
    )
    ul_delays = np.where(
        ul_rates > 0, frame.tracking_bits / np.maximum(ul_rates, 1e-9), math.inf
    )

    feasible = np.zeros((u, b), dtype=int)
    for i in range(u):
        for k in range(b):
            feasible[i, k] = downlink_feasible(dl_rates[i, k], ul_delays[i], frame)

    # Users with something to lose pick first; within a user, candidates are
    # ranked by predicted rate with index as the tie-break.
    has_option = feasible.any(axis=1)
    best_rate = np.where(feasible.any(axis=1), (dl_rates * feasible).max(axis=1), 0.0)
    order = sorted(range(u), key=lambda i: (-int(has_option[i]), -best_rate[i], i))

    loads = np.zeros(b, dtype=int)
    dl_bs = np.full(u, -1, dtype=int)
    for i in order:
        candidates = sorted(
            range(b), key=lambda k: (-feasible[i, k], -dl_rates[i, k], k)
        )
        chosen = -1
        for k in candidates:
            if feasible[i, k] and loads[k] < max_dl_users:
                chosen = k
                break
        if chosen < 0:
            # Nearest station with room keeps the plan valid.
            for k in np.argsort(dist[i], kind="stable"):
                if loads[k] < max_dl_users:
                    chosen = int(k)
                    break
        dl_bs[i] = chosen
        loads[chosen] += 1

    plan = AssociationPlan(ul_bs, dl_bs)
    plan.validate(b, max_dl_users)

    omegas = predicted_indicators(
        plan,
        geo,
        params,
        frame,
        subcarriers_per_bs=subcarriers_per_bs,
        with_interference=with_interference,
    )
    plan.predicted_omegas = omegas
    for i in range(u):
        policy.update(i, ul_bs[i], -float(omegas[i]))
    policy.end_round()
    return plan


_ORACLE_PLAN_LIMIT = 2_000_000


def oracle_association(
    geometry: Geometry,
    params: RadioParams,
    frame: VideoFrameModel,
    app_effect: float = 11.0,
    max_dl_users: int = 10,
    subcarriers_per_bs: int = 10,
    with_interference: bool = True,
):
    """Exhaustive minimum of the zero-noise slot score over every valid plan.

    Enumerates all uplink x downlink combinations (ties resolved to the
    lexicographically smallest plan), so only toy instances are tractable;
    this is the verification yardstick, not a planner.
    """
    u, b = geometry.n_users, geometry.n_bs
    if b ** (2 * u) > _ORACLE_PLAN_LIMIT:
        raise ValueError("instance too large for exhaustive search")

    dl_rates, _, _, _, _, _ = radio.evaluate_downlink(geometry, params)
    dl_combos = [
        dl
        for dl in itertools.product(range(b), repeat=u)
        if not np.any(np.bincount(dl, minlength=b) > max_dl_users)
    ]

    best = None
    best_plan = None
    for ul in itertools.product(range(b), repeat=u):
        ul_rates = radio.uplink_rates_for_plan(
            np.array(ul),
            geometry,
            params,
            subcarriers_per_bs=subcarriers_per_bs,
            with_interference=with_interference,
        )
        # Indicator of user i served by downlink station k, for this uplink.
        omega_table = np.empty((u, b), dtype=int)
        for i in range(u):
            ul_delay = (
                frame.tracking_bits / ul_rates[i] if ul_rates[i] > 0 else math.inf
            )
            for k in range(b):
                delivered = _budget_delivery(dl_rates[i, k], ul_delay, frame)
                omega_table[i, k] = bip_indicator(
                    ul_delay, dl_rates[i, k], delivered, frame
                )
        users = np.arange(u)
        for dl in dl_combos:
            total = zero_noise_bip(omega_table[users, dl], app_effect)
            if best is None or total < best - 1e-12:
                best = total
                best_plan = AssociationPlan(np.array(ul), np.array(dl))
    return best_plan, best
