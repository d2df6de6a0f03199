"""Consensus training of ESN readouts across base stations.

Each base station holds a private shard (H_j, E_j) of one user's feature /
target rows.  Readouts are reconciled by an ADMM-style loop: a proximal
regularized least-squares solve per station, a penalty-weighted global
average with the ridge applied at the consensus step, then a dual ascent.
The fixed point is the pooled ridge regression over the union of shards,
which no station could compute alone.
"""

import logging

import numpy as np
from dataclasses import dataclass, field

log = logging.getLogger(__name__)


@dataclass
class LocalDataset:
    """One station's shard: feature rows (T_j x F) and target rows (T_j x Y)."""

    features: np.ndarray
    targets: np.ndarray
    bs_id: int = 0

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.features.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"feature/target row mismatch: {self.features.shape[0]} vs "
                f"{self.targets.shape[0]}"
            )
        if self.features.shape[0] < 1:
            raise ValueError("shard must hold at least one row")


@dataclass
class FederatedState:
    """Trainer hyperparameters and per-round consensus variables.

    ``ridge_lambda`` penalizes the consensus readout norm, ``penalty`` is the
    proximal weight of the local solves, ``dual_step`` scales the dual ascent,
    and ``tol`` is the stopping threshold on the residual norms.
    """

    n_outputs: int
    n_features: int
    ridge_lambda: float = 0.005
    penalty: float = 0.5
    dual_step: float = 0.5
    tol: float = 1e-4
    max_rounds: int = 500
    round: int = 0
    w_global: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.ridge_lambda <= 0 or self.penalty <= 0:
            raise ValueError("ridge_lambda and penalty must be positive")
        if not 0.0 < self.dual_step <= 1.0:
            raise ValueError("dual_step must lie in (0, 1]")
        self.w_global = np.zeros((self.n_outputs, self.n_features))


@dataclass
class TrainResult:
    """Converged (or best-effort) consensus readout plus the residual trace."""

    w_out: np.ndarray
    rounds: int
    converged: bool
    residual_trace: list  # (round, max primal norm, consensus-change norm)

    def write_residuals_csv(self, path):
        with open(path, "w") as f:
            f.write("round,max_primal_residual,consensus_change\n")
            for rnd, r, s in self.residual_trace:
                f.write(f"{rnd},{r:.10g},{s:.10g}\n")


def collect_states(model, inputs, targets, washout: int = 0) -> LocalDataset:
    """Drive ``model`` over an aligned input/target sequence and record rows.

    The model state is reset first; the leading ``washout`` rows are
    discarded after the run so the recorded states are free of the zero-state
    transient.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if inputs.shape[0] == 0:
        raise ValueError("empty input sequence")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets must be aligned in time")
    if washout >= inputs.shape[0]:
        raise ValueError("washout leaves no rows")
    rows = model.run_features(inputs)
    return LocalDataset(rows[washout:], targets[washout:])


def local_update(ds: LocalDataset, fs: FederatedState, dual: np.ndarray) -> np.ndarray:
    """Proximal least-squares step for one station.

    Solves  argmin_W  0.5 ||W H^T - E^T||^2 + (p/2) ||W - W_g + n/p||^2
    in closed form: (E^T H - n + p W_g)(H^T H + p I)^{-1}.
    """
    h, e = ds.features, ds.targets
    gram = h.T @ h + fs.penalty * np.eye(h.shape[1])
    rhs = e.T @ h - dual + fs.penalty * fs.w_global
    return np.linalg.solve(gram.T, rhs.T).T


def global_update(fs: FederatedState, locals_, duals) -> np.ndarray:
    """Penalty-weighted average of the local readouts with the ridge applied."""
    b = len(locals_)
    w_avg = sum(locals_) / b
    n_avg = sum(duals) / b
    return (b * fs.penalty * w_avg + b * n_avg) / (fs.ridge_lambda + fs.penalty * b)


def dual_update(fs: FederatedState, w_local, w_global, dual) -> np.ndarray:
    return dual + fs.dual_step * (w_local - w_global)


def train_federated(datasets, fs: FederatedState) -> TrainResult:
    """Run the consensus loop over all shards until the residuals drop.

    Stops when the largest per-station primal residual ||W_j - W_g||_F or the
    consensus change ||W_g - W_g_prev||_F falls below ``fs.tol``, or after
    ``fs.max_rounds`` rounds (reported, not silent).
    """
    if not datasets:
        raise ValueError("no shards to train on")
    for ds in datasets:
        if ds.features.shape[1] != fs.n_features:
            raise ValueError(
                f"shard feature width {ds.features.shape[1]} != {fs.n_features}"
            )
        if ds.targets.shape[1] != fs.n_outputs:
            raise ValueError(
                f"shard target width {ds.targets.shape[1]} != {fs.n_outputs}"
            )

    # The proximal normal matrix is constant across rounds, and the +penalty*I
    # floors its spectrum at `penalty`, so a precomputed inverse is both safe
    # and lets each round run as one batched matmul.
    penalty = fs.penalty
    b = len(datasets)
    eye = np.eye(fs.n_features)
    inv = np.linalg.inv(
        np.stack([ds.features.T @ ds.features + penalty * eye for ds in datasets])
    )
    rhs_data = np.stack([ds.targets.T @ ds.features for ds in datasets])

    duals = np.zeros((b, fs.n_outputs, fs.n_features))
    trace = []
    converged = False
    rounds = 0
    for rounds in range(1, fs.max_rounds + 1):
        locals_ = (rhs_data - duals + penalty * fs.w_global) @ inv
        w_next = (penalty * locals_.sum(axis=0) + duals.sum(axis=0)) / (
            fs.ridge_lambda + penalty * b
        )
        duals += fs.dual_step * (locals_ - w_next)
        r_norm = float(np.linalg.norm(locals_ - w_next, axis=(1, 2)).max())
        s_norm = float(np.linalg.norm(w_next - fs.w_global))
        fs.w_global = w_next
        fs.round = rounds
        trace.append((rounds, r_norm, s_norm))
        if r_norm <= fs.tol or s_norm <= fs.tol:
            converged = True
            break
    if not converged:
        r_norm, s_norm = trace[-1][1], trace[-1][2]
        log.warning(
            "consensus loop hit max_rounds=%d (primal residual %.3g, "
            "consensus change %.3g)",
            fs.max_rounds,
            r_norm,
            s_norm,
        )
    return TrainResult(fs.w_global.copy(), rounds, converged, trace)


def train_model_federated(model, shard_rows, fs_kwargs=None) -> TrainResult:
    """Train an EsnModel's readout from per-station (features, targets) shards.

    ``shard_rows`` maps bs_id -> (H_j, E_j) over the model's stacked feature
    vector.  The consensus readout is installed into the model.  Series
    models are handled by the caller layer by layer (their feature map
    changes as layers are trained).
    """
    datasets = [
        LocalDataset(h, e, bs_id=j) for j, (h, e) in shard_rows.items() if len(h)
    ]
    kwargs = dict(fs_kwargs or {})
    fs = FederatedState(
        n_outputs=datasets[0].targets.shape[1],
        n_features=datasets[0].features.shape[1],
        **kwargs,
    )
    result = train_federated(datasets, fs)
    model.install_readout(result.w_out)
    return result
