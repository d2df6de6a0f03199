"""Break-in-presence model: per-slot indicator and per-user aggregate score.

A slot breaks presence when the tracking-plus-video latency exceeds the
delay budget or the delivered video misses the quality threshold.  The
per-user score folds the indicator together with the application effect and
zero-mean awareness noise, averaged over the slots.
"""

import math

import numpy as np
from dataclasses import dataclass


@dataclass
class VideoFrameModel:
    """Frame structure and the thresholds a slot is judged against.

    ``importance`` holds one weight per pixel group, normalized so that full
    delivery scores quality 1; payload size scales linearly with the number
    of delivered groups.
    """

    n_groups: int = 16
    importance: np.ndarray = None
    frame_bits: float = 50e6
    tracking_bits: float = 50e3
    delay_budget_s: float = 0.010
    quality_min: float = 0.8

    def __post_init__(self):
        if self.importance is None:
            self.importance = np.full(self.n_groups, 1.0 / self.n_groups)
        self.importance = np.asarray(self.importance, dtype=float)
        if len(self.importance) != self.n_groups:
            raise ValueError("importance length must equal n_groups")
        if np.any(self.importance < 0) or np.any(self.importance > 1):
            raise ValueError("importance weights must lie in [0, 1]")
        total = self.importance.sum()
        if total > 0:
            self.importance = self.importance / total

    def payload_bits(self, delivered) -> float:
        """Payload size of a delivery vector: full size times delivered fraction."""
        delivered = np.asarray(delivered)
        return self.frame_bits * float(delivered.sum()) / self.n_groups

    def quality(self, delivered) -> float:
        return float(np.asarray(delivered, dtype=float) @ self.importance)


def importance_profile(n_groups, uncompressible_frac=0.25, seed=0) -> np.ndarray:
    """Importance weights: a fixed share of must-send groups, the rest uniform.

    Returned un-normalized; VideoFrameModel normalizes so full delivery
    scores 1.
    """
    rng = np.random.default_rng(seed)
    n_must = int(round(uncompressible_frac * n_groups))
    weights = np.empty(n_groups)
    weights[:n_must] = 1.0
    weights[n_must:] = rng.uniform(0.0, 1.0, size=n_groups - n_must)
    return weights


@dataclass(frozen=True)
class AwarenessProfile:
    """Application effect and the variances of the zero-mean awareness terms."""

    app_effect: float = 11.0
    var_user: float = 0.193
    var_app: float = 0.151
    var_ambient: float = 0.05
    seed: int = 0

    def validate(self):
        if min(self.var_user, self.var_app, self.var_ambient) < 0:
            raise ValueError("variances must be nonnegative")


def delivery_vector(rate_bps, window_s, frame: VideoFrameModel) -> np.ndarray:
    """Greedy delivery under a bit budget.

    Groups go out in descending importance (ties to the lower index); a
    group is delivered if any budget remains when its turn comes, so a
    budget of k.5 group-costs delivers k+1 groups.
    """
    if rate_bps < 0 or window_s < 0:
        raise ValueError("rate and window must be nonnegative")
    budget = rate_bps * window_s
    cost = frame.frame_bits / frame.n_groups
    n_send = min(frame.n_groups, int(math.ceil(budget / cost - 1e-12)))
    order = np.lexsort((np.arange(frame.n_groups), -frame.importance))
    delivered = np.zeros(frame.n_groups)
    delivered[order[:n_send]] = 1.0
    return delivered


def bip_indicator(uplink_delay_s, dl_rate_bps, delivered, frame: VideoFrameModel) -> int:
    """1 when the slot breaks presence: latency over budget or quality under threshold."""
    if dl_rate_bps <= 0.0:
        return 1  # no video link: infinite transmission delay
    quality = frame.quality(delivered)
    video_delay = frame.payload_bits(delivered) / dl_rate_bps
    late = uplink_delay_s + video_delay > frame.delay_budget_s
    poor = quality < frame.quality_min
    return int(late or poor)


def bip_score(indicators, profile: AwarenessProfile, rng=None) -> float:
    """Average per-slot presence-break load for one user.

    Each slot contributes app_effect + w + app_effect*w plus the awareness
    noise; the user trait is drawn once, the application and ambient terms
    per slot.
    """
    profile.validate()
    indicators = np.asarray(indicators, dtype=float)
    t = len(indicators)
    if t == 0:
        raise ValueError("need at least one slot")
    if rng is None:
        rng = np.random.default_rng(profile.seed)
    g = profile.app_effect
    eps_user = rng.normal(0.0, math.sqrt(profile.var_user))
    eps_app = rng.normal(0.0, math.sqrt(profile.var_app), size=t)
    eps_amb = rng.normal(0.0, math.sqrt(profile.var_ambient), size=t)
    per_slot = g + indicators + g * indicators + eps_user + eps_app + eps_amb
    return float(per_slot.mean())
