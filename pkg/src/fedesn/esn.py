"""Linear ring-reservoir echo state networks.

A reservoir is a fixed cyclic-shift recurrent matrix (single weight ``w``,
spectral radius ``|w| < 1``) plus a random input matrix; only the linear
readout is ever trained.  Models come in three topologies: a single
reservoir, ``depth`` reservoirs fed the same input in parallel (outputs
summed), or ``depth`` reservoirs chained in series (each layer's readout is
the next layer's input).
"""

import io
import logging

import numpy as np
from dataclasses import dataclass

log = logging.getLogger(__name__)

TOPOLOGIES = ("single", "parallel", "series")

# Resampling attempts before giving up on a regular circulant input matrix.
_MAX_INPUT_RESAMPLES = 8
# Relative smallest-singular-value threshold for "regular".
_SINGULAR_RTOL = 1e-9


@dataclass(frozen=True)
class ReservoirSpec:
    """Dimensions and seed that fully determine one reservoir draw.

    Attributes:
        n_neurons: neurons per reservoir (>= 2).
        ring_weight: the single recurrent weight w, 0 < |w| < 1.
        n_inputs: input vector length.
        n_outputs: readout vector length.
        seed: seeds the input-matrix draw; identical specs give
            bit-identical weights.
    """

    n_neurons: int
    ring_weight: float
    n_inputs: int = 1
    n_outputs: int = 1
    seed: int = 0

    def validate(self):
        if self.n_neurons < 2:
            raise ValueError(f"n_neurons must be >= 2, got {self.n_neurons}")
        if not 0.0 < abs(self.ring_weight) < 1.0:
            raise ValueError(
                f"ring_weight must satisfy 0 < |w| < 1, got {self.ring_weight}"
            )
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise ValueError("n_inputs and n_outputs must be >= 1")


def ring_matrix(n_neurons, ring_weight):
    """Cyclic-shift recurrent matrix: w on the subdiagonal and top-right corner."""
    w_mat = np.zeros((n_neurons, n_neurons))
    idx = np.arange(1, n_neurons)
    w_mat[idx, idx - 1] = ring_weight
    w_mat[0, n_neurons - 1] = ring_weight
    return w_mat


def circulant_from_column(col):
    """Circulant matrix whose first column is ``col`` (entry [i, j] = col[(i - j) mod n])."""
    n = len(col)
    i = np.arange(n)
    return col[(i[:, None] - i[None, :]) % n]


def _input_column_regular(col):
    """A reservoir column is usable iff its circulant is nonsingular."""
    sv = np.linalg.svd(circulant_from_column(col), compute_uv=False)
    return sv[-1] > _SINGULAR_RTOL * sv[0]


class Reservoir:
    """One ring reservoir: fixed weights, a mutable state, a trainable readout."""

    def __init__(self, n_neurons, ring_weight, n_inputs, n_outputs, rng):
        self.n_neurons = n_neurons
        self.n_inputs = n_inputs
        self.n_outputs = n_outputs
        self.w = ring_matrix(n_neurons, ring_weight)
        self.w_in = self._draw_input_matrix(rng)
        self.w_out = np.zeros((n_outputs, n_inputs + n_neurons))
        self.state = np.zeros(n_neurons)

    def _draw_input_matrix(self, rng):
        # Entries i.i.d. uniform on [-0.5, 0.5]; columns whose circulant is
        # singular are redrawn (the capacity formulas need each one regular).
        w_in = rng.uniform(-0.5, 0.5, size=(self.n_neurons, self.n_inputs))
        for j in range(self.n_inputs):
            attempts = 0
            while not _input_column_regular(w_in[:, j]):
                attempts += 1
                if attempts > _MAX_INPUT_RESAMPLES:
                    raise RuntimeError(
                        "could not draw a regular input column after "
                        f"{_MAX_INPUT_RESAMPLES} resamples"
                    )
                w_in[:, j] = rng.uniform(-0.5, 0.5, size=self.n_neurons)
        return w_in

    def step(self, u):
        self.state = self.w @ self.state + self.w_in @ u
        return self.state

    def read_out(self, u):
        return self.w_out @ np.concatenate([u, self.state])

    def reset(self):
        self.state = np.zeros(self.n_neurons)


class EsnModel:
    """A single / parallel / series arrangement of identical-shape reservoirs.

    The trainable surface is the stacked feature vector returned by
    ``features`` (current input plus states); ``install_readout`` splits a
    trained stacked readout back into the per-reservoir blocks used by
    ``read_out``.
    """

    def __init__(self, spec: ReservoirSpec, topology: str = "single", depth: int = 1):
        spec.validate()
        if topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {topology!r}")
        if topology == "single":
            depth = 1
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        self.spec = spec
        self.topology = topology
        self.depth = depth
        self.is_trained = False
        self._warned_untrained = False

        streams = np.random.SeedSequence(spec.seed).spawn(depth)
        self.reservoirs = []
        for layer, ss in enumerate(streams):
            n_in = spec.n_inputs
            if topology == "series" and layer > 0:
                n_in = spec.n_outputs  # fed by the previous layer's readout
            self.reservoirs.append(
                Reservoir(
                    spec.n_neurons,
                    spec.ring_weight,
                    n_in,
                    spec.n_outputs,
                    np.random.default_rng(ss),
                )
            )
        self._last_inputs = [np.zeros(r.n_inputs) for r in self.reservoirs]

    @property
    def n_features(self):
        """Length of the stacked trainable feature vector."""
        return sum(r.n_inputs + r.n_neurons for r in self.reservoirs)

    def reset_state(self):
        for r in self.reservoirs:
            r.reset()
        self._last_inputs = [np.zeros(r.n_inputs) for r in self.reservoirs]

    def step(self, u):
        """Advance every reservoir one slot; returns the first reservoir's state.

        Series layers cascade: layer l+1 is driven by layer l's current
        readout (zero until that layer is trained).
        """
        u = np.asarray(u, dtype=float)
        if u.shape != (self.spec.n_inputs,):
            raise ValueError(
                f"input must have shape ({self.spec.n_inputs},), got {u.shape}"
            )
        if self.topology == "series":
            drive = u
            for layer, r in enumerate(self.reservoirs):
                self._last_inputs[layer] = drive
                r.step(drive)
                drive = r.read_out(drive)
        else:
            for layer, r in enumerate(self.reservoirs):
                self._last_inputs[layer] = u
                r.step(u)
        return self.reservoirs[0].state

    def features(self):
        """Stacked [input; state] blocks over all reservoirs for the last stepped slot."""
        blocks = []
        for layer, r in enumerate(self.reservoirs):
            blocks.append(np.concatenate([self._last_inputs[layer], r.state]))
        return np.concatenate(blocks)

    def states(self):
        """Concatenated reservoir states (no input block)."""
        return np.concatenate([r.state for r in self.reservoirs])

    def read_out(self, u):
        """Model output for the current slot.

        Parallel models sum the per-reservoir readouts; series models return
        the last layer's readout.  An untrained model returns zeros.
        """
        u = np.asarray(u, dtype=float)
        if not self.is_trained and not self._warned_untrained:
            log.warning("read_out called on an untrained model; returning zeros")
            self._warned_untrained = True
        if self.topology == "series":
            last = len(self.reservoirs) - 1
            return self.reservoirs[last].read_out(self._last_inputs[last])
        out = np.zeros(self.spec.n_outputs)
        for r in self.reservoirs:
            out = out + r.read_out(u)
        return out

    def install_readout(self, w_out):
        """Split a stacked readout (n_outputs x n_features) into per-reservoir blocks.

        Series models are trained layer by layer; use ``install_layer_readout``.
        """
        if self.topology == "series" and self.depth > 1:
            raise ValueError("series models take per-layer readouts")
        w_out = np.asarray(w_out, dtype=float)
        if w_out.shape != (self.spec.n_outputs, self.n_features):
            raise ValueError(
                f"readout must have shape ({self.spec.n_outputs}, {self.n_features}),"
                f" got {w_out.shape}"
            )
        offset = 0
        for r in self.reservoirs:
            width = r.n_inputs + r.n_neurons
            r.w_out = w_out[:, offset : offset + width].copy()
            offset += width
        self.is_trained = True

    def install_layer_readout(self, layer, w_out):
        """Install one layer's readout (used when training series models layer by layer)."""
        r = self.reservoirs[layer]
        w_out = np.asarray(w_out, dtype=float)
        if w_out.shape != (r.n_outputs, r.n_inputs + r.n_neurons):
            raise ValueError(f"layer {layer} readout has wrong shape {w_out.shape}")
        r.w_out = w_out.copy()
        if layer == len(self.reservoirs) - 1:
            self.is_trained = True

    def run_features(self, inputs):
        """Reset, drive the model with ``inputs`` (T x n_inputs), stack features per slot."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.reset_state()
        rows = np.empty((inputs.shape[0], self.n_features))
        for t, u in enumerate(inputs):
            self.step(u)
            rows[t] = self.features()
        return rows

    def run_states(self, inputs):
        """Reset, drive the model, and return states only (T x depth*n_neurons)."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.reset_state()
        rows = np.empty((inputs.shape[0], self.spec.n_neurons * self.depth))
        for t, u in enumerate(inputs):
            self.step(u)
            rows[t] = self.states()
        return rows


def build_esn(spec: ReservoirSpec, topology: str = "single", depth: int = 1) -> EsnModel:
    """Build a model with ring recurrence, random input weights, zero readout."""
    return EsnModel(spec, topology, depth)


# --- weight serialization (cross-run comparison) ---
#
# Binary blob layout, little-endian:
#   magic b"ESNW" | uint32 rows | uint32 cols | rows*cols float64 row-major

_BLOB_MAGIC = b"ESNW"


def matrix_to_blob(a) -> bytes:
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    if a.ndim != 2:
        raise ValueError("only 2-D matrices are serialized")
    header = np.array(a.shape, dtype="<u4").tobytes()
    return _BLOB_MAGIC + header + a.tobytes()


def matrix_from_blob(blob: bytes) -> np.ndarray:
    if blob[:4] != _BLOB_MAGIC:
        raise ValueError("not a weight blob")
    rows, cols = np.frombuffer(blob, dtype="<u4", count=2, offset=4)
    body = np.frombuffer(blob, dtype="<f8", offset=12, count=rows * cols)
    return body.reshape(rows, cols).copy()


def write_matrix_csv(path, a):
    """Row-major CSV; the header row carries the dimensions."""
    a = np.asarray(a, dtype=float)
    with open(path, "w") as f:
        f.write(f"{a.shape[0]},{a.shape[1]}\n")
        np.savetxt(f, a, delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as f:
        rows, cols = (int(v) for v in f.readline().split(","))
        body = np.loadtxt(io.StringIO(f.read()), delimiter=",")
    return body.reshape(rows, cols)
