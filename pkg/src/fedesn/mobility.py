"""Synthetic user motion and the feature maps that feed the predictors.

Positions follow a random-waypoint walk inside the scenario disc; facing
angles follow a wrapped random walk.  Locations are folded into a single
triangular-pairing scalar over the rounded meter grid and, together with
the facing angle, squashed into [-0.5, 0.5] for training; the location map
is inverted by nearest lookup over the same grid.
"""

import math

import numpy as np
from dataclasses import dataclass


@dataclass
class Trace:
    """Per-slot user motion plus the station that records each observation."""

    x: np.ndarray  # (T, U) meters
    y: np.ndarray  # (T, U)
    facing_rad: np.ndarray  # (T, U), wrapped to [0, 2pi)
    observer: np.ndarray  # (T, U) int, station collecting the slot's sample

    @property
    def n_slots(self):
        return self.x.shape[0]

    @property
    def n_users(self):
        return self.x.shape[1]


@dataclass(frozen=True)
class MobilityConfig:
    radius_m: float = 500.0
    speed_min: float = 0.5
    speed_max: float = 1.5
    pause_max_slots: int = 10
    turn_std_deg: float = 10.0
    slot_seconds: float = 1.0


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def generate_trace(
    n_slots, n_users, bs_xy, cfg: MobilityConfig = MobilityConfig(), seed=0
) -> Trace:
    """Random-waypoint positions and random-walk facings, observer = nearest station.

    Each user draws a waypoint and a speed, walks slot by slot, pauses up to
    ``pause_max_slots`` on arrival, and repeats; a zero speed range keeps
    users static.
    """
    rng = np.random.default_rng(seed)
    bs_xy = np.atleast_2d(np.asarray(bs_xy, dtype=float))
    pos = _uniform_disc(rng, n_users, cfg.radius_m)
    target = _uniform_disc(rng, n_users, cfg.radius_m)
    speed = rng.uniform(cfg.speed_min, cfg.speed_max, size=n_users)
    pause = np.zeros(n_users, dtype=int)
    facing = rng.uniform(0.0, 2.0 * np.pi, size=n_users)

    x = np.empty((n_slots, n_users))
    y = np.empty((n_slots, n_users))
    fac = np.empty((n_slots, n_users))
    turn_std = math.radians(cfg.turn_std_deg)
    for t in range(n_slots):
        x[t] = pos[:, 0]
        y[t] = pos[:, 1]
        fac[t] = facing
        step = speed * cfg.slot_seconds
        for i in range(n_users):
            if pause[i] > 0:
                pause[i] -= 1
                continue
            delta = target[i] - pos[i]
            gap = float(np.hypot(*delta))
            if gap <= step[i]:
                pos[i] = target[i]
                target[i] = _uniform_disc(rng, 1, cfg.radius_m)[0]
                speed[i] = rng.uniform(cfg.speed_min, cfg.speed_max)
                pause[i] = int(rng.integers(0, cfg.pause_max_slots + 1))
            elif gap > 0:
                pos[i] = pos[i] + delta / gap * step[i]
        facing = np.mod(facing + rng.normal(0.0, turn_std, size=n_users), 2.0 * np.pi)

    diff = x[..., None] - bs_xy[None, None, :, 0]
    diff_y = y[..., None] - bs_xy[None, None, :, 1]
    observer = np.argmin(diff**2 + diff_y**2, axis=2)
    return Trace(x, y, fac, observer.astype(int))


def normalize_orientation(deg) -> float:
    """Map degrees to [-0.5, 0.5]: deg / 360 - 0.5."""
    return np.asarray(deg, dtype=float) / 360.0 - 0.5


def denormalize_orientation(value):
    """Inverse of normalize_orientation, wrapped into [0, 360)."""
    return np.mod((np.asarray(value, dtype=float) + 0.5) * 360.0, 360.0)


def location_scalar(x, y):
    """Triangular-pairing scalar T(x+y) * y over rounded integer coordinates."""
    u = np.round(np.asarray(x, dtype=float)).astype(np.int64)
    v = np.round(np.asarray(y, dtype=float)).astype(np.int64)
    s = u + v
    return (s * (s + 1) // 2).astype(float) * v


class LocationCodec:
    """Location <-> normalized-scalar maps for a fixed disc.

    Disc coordinates are shifted by the radius so the pairing map sees a
    nonnegative grid.  The scalar map is not invertible in closed form;
    decoding finds the nearest scalar over the disc's integer grid
    (precomputed and sorted once per radius).
    """

    def __init__(self, radius_m):
        self.radius_m = float(radius_m)
        self._shift = int(round(radius_m))
        coords = np.arange(-self._shift, self._shift + 1)
        uu, vv = np.meshgrid(coords, coords, indexing="ij")
        inside = uu**2 + vv**2 <= radius_m**2
        self._grid_x = uu[inside].astype(float)
        self._grid_y = vv[inside].astype(float)
        z = location_scalar(self._grid_x + self._shift, self._grid_y + self._shift)
        order = np.argsort(z, kind="stable")
        self._z_sorted = z[order]
        self._x_sorted = self._grid_x[order]
        self._y_sorted = self._grid_y[order]
        self.z_max = float(self._z_sorted[-1])

    def encode(self, x, y):
        """Normalized location scalar in [-0.5, 0.5]."""
        z = location_scalar(
            np.asarray(x, dtype=float) + self._shift,
            np.asarray(y, dtype=float) + self._shift,
        )
        return z / self.z_max - 0.5

    def decode(self, value):
        """Nearest grid point whose scalar matches the de-normalized value."""
        z = (np.asarray(value, dtype=float) + 0.5) * self.z_max
        idx = np.clip(
            np.searchsorted(self._z_sorted, z), 1, len(self._z_sorted) - 1
        )
        lo = idx - 1
        pick = np.where(
            np.abs(self._z_sorted[lo] - z) <= np.abs(self._z_sorted[idx] - z), lo, idx
        )
        return self._x_sorted[pick], self._y_sorted[pick]


_codec_cache = {}


def get_codec(radius_m) -> LocationCodec:
    key = round(float(radius_m), 6)
    if key not in _codec_cache:
        _codec_cache[key] = LocationCodec(radius_m)
    return _codec_cache[key]
