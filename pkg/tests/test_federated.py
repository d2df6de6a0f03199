import numpy as np
import pytest

from fedesn.esn import ReservoirSpec, build_esn
from fedesn.federated import (
    FederatedState,
    LocalDataset,
    collect_states,
    dual_update,
    global_update,
    local_update,
    train_federated,
)


def pooled_ridge(datasets, lam):
    """Independent oracle: direct dense solve on the union of shards."""
    h = np.vstack([d.features for d in datasets])
    e = np.vstack([d.targets for d in datasets])
    gram = h.T @ h + lam * np.eye(h.shape[1])
    return np.linalg.solve(gram.T, (e.T @ h).T).T


def random_instance(seed, b=None):
    rng = np.random.default_rng(seed)
    b = b or int(rng.integers(1, 6))
    n_w = int(rng.integers(3, 11))
    n_x = int(rng.integers(1, 4))
    y = int(rng.integers(1, 4))
    spec = ReservoirSpec(n_w, float(rng.uniform(0.3, 0.9)), n_x, y, seed=seed)
    model = build_esn(spec)
    w_true = rng.normal(size=(y, n_x + n_w))
    datasets = []
    for j in range(b):
        t = int(rng.integers(5, 51))
        inputs = rng.uniform(-0.5, 0.5, size=(t, n_x))
        rows = model.run_features(inputs)
        targets = rows @ w_true.T + 0.01 * rng.normal(size=(t, y))
        datasets.append(LocalDataset(rows, targets, bs_id=j))
    return datasets, y, n_x + n_w


# --- collect_states ---

def test_collect_states_shape():
    model = build_esn(ReservoirSpec(3, 0.5, n_inputs=2, n_outputs=1, seed=0))
    ds = collect_states(model, np.zeros((1, 2)), np.zeros((1, 1)))
    assert ds.features.shape == (1, 5)


def test_collect_states_zero_inputs_zero_rows():
    model = build_esn(ReservoirSpec(4, 0.5, n_inputs=2, n_outputs=1, seed=0))
    ds = collect_states(model, np.zeros((6, 2)), np.zeros((6, 1)))
    assert np.array_equal(ds.features, np.zeros((6, 6)))


def test_collect_states_replay_oracle():
    model = build_esn(ReservoirSpec(5, 0.8, n_inputs=1, n_outputs=1, seed=3))
    t = np.arange(50)
    inputs = np.sin(0.3 * t)[:, None]
    targets = np.roll(inputs, 1, axis=0)
    ds = collect_states(model, inputs, targets, washout=4)

    replay = build_esn(ReservoirSpec(5, 0.8, n_inputs=1, n_outputs=1, seed=3))
    rows = []
    for u in inputs:
        replay.step(u)
        rows.append(replay.features())
    assert np.array_equal(ds.features, np.asarray(rows)[4:])


def test_collect_states_errors():
    model = build_esn(ReservoirSpec(4, 0.5, seed=0))
    with pytest.raises(ValueError):
        collect_states(model, np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(ValueError):
        collect_states(model, np.zeros((3, 1)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        collect_states(model, np.zeros((3, 1)), np.zeros((3, 1)), washout=3)


# --- local / global / dual updates ---

def test_local_update_huge_penalty_is_proximal_identity():
    rng = np.random.default_rng(0)
    ds = LocalDataset(rng.normal(size=(10, 4)), rng.normal(size=(10, 2)))
    fs = FederatedState(2, 4, penalty=1e12)
    fs.w_global = rng.normal(size=(2, 4))
    dual = rng.normal(size=(2, 4))
    w = local_update(ds, fs, dual)
    assert np.allclose(w, fs.w_global, atol=1e-9)


def test_local_update_single_round_is_ridge():
    rng = np.random.default_rng(1)
    h = rng.normal(size=(20, 5))
    e = rng.normal(size=(20, 2))
    fs = FederatedState(2, 5, penalty=0.5)
    w = local_update(LocalDataset(h, e), fs, np.zeros((2, 5)))
    oracle = np.linalg.solve(
        (h.T @ h + 0.5 * np.eye(5)).T, (e.T @ h).T
    ).T
    assert np.allclose(w, oracle)


def test_local_update_orthonormal_exact_fit():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
    w_star = rng.normal(size=(2, 6))
    ds = LocalDataset(q, q @ w_star.T)
    fs = FederatedState(2, 6, penalty=1e-10)
    w = local_update(ds, fs, np.zeros((2, 6)))
    assert np.allclose(w, w_star, atol=1e-6)


def test_global_update_zero_ridge_is_mean():
    rng = np.random.default_rng(3)
    locals_ = [rng.normal(size=(2, 3)) for _ in range(4)]
    fs = FederatedState(2, 3, ridge_lambda=1e-300, penalty=0.5)
    w = global_update(fs, locals_, [np.zeros((2, 3))] * 4)
    assert np.allclose(w, np.mean(locals_, axis=0))


def test_global_update_single_bs_table_values():
    # B=1, lambda=0.005, penalty=0.5: consensus = (0.5 W_1 + n_1) / 0.505.
    rng = np.random.default_rng(4)
    w1 = rng.normal(size=(2, 3))
    n1 = rng.normal(size=(2, 3))
    fs = FederatedState(2, 3, ridge_lambda=0.005, penalty=0.5)
    w = global_update(fs, [w1], [n1])
    assert np.allclose(w, (0.5 * w1 + n1) / 0.505)


def test_global_update_consensus_fixed_point():
    rng = np.random.default_rng(5)
    shared = rng.normal(size=(2, 3))
    fs = FederatedState(2, 3, ridge_lambda=1e-300)
    w = global_update(fs, [shared] * 3, [np.zeros((2, 3))] * 3)
    assert np.allclose(w, shared)


def test_dual_update_examples():
    rng = np.random.default_rng(6)
    fs = FederatedState(2, 3, dual_step=0.5)
    shared = rng.normal(size=(2, 3))
    dual = rng.normal(size=(2, 3))
    assert np.allclose(dual_update(fs, shared, shared, dual), dual)
    w_loc, w_glob = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
    stepped = dual_update(fs, w_loc, w_glob, np.zeros((2, 3)))
    assert np.allclose(stepped, 0.5 * (w_loc - w_glob))


# --- train_federated ---

def test_identical_copies_match_pooled():
    datasets, y, f = random_instance(10, b=1)
    copies = [LocalDataset(datasets[0].features, datasets[0].targets, bs_id=j)
              for j in range(4)]
    fs = FederatedState(y, f, tol=1e-12, max_rounds=40000)
    res = train_federated(copies, fs)
    oracle = pooled_ridge(copies, fs.ridge_lambda)
    assert np.linalg.norm(res.w_out - oracle) <= 1e-6 * np.linalg.norm(oracle)


def test_disjoint_shards_match_pooled():
    datasets, y, f = random_instance(11, b=3)
    fs = FederatedState(y, f, tol=1e-12, max_rounds=40000)
    res = train_federated(datasets, fs)
    oracle = pooled_ridge(datasets, fs.ridge_lambda)
    assert np.linalg.norm(res.w_out - oracle) <= 1e-6 * np.linalg.norm(oracle)


def test_huge_tolerance_one_round():
    datasets, y, f = random_instance(12)
    fs = FederatedState(y, f, tol=1e12)
    res = train_federated(datasets, fs)
    assert res.rounds == 1 and res.converged


def test_bs_permutation_leaves_consensus_unchanged():
    datasets, y, f = random_instance(13, b=4)
    fs_a = FederatedState(y, f, tol=1e-10, max_rounds=20000)
    res_a = train_federated(datasets, fs_a)
    fs_b = FederatedState(y, f, tol=1e-10, max_rounds=20000)
    res_b = train_federated(datasets[::-1], fs_b)
    assert np.allclose(res_a.w_out, res_b.w_out, atol=1e-8)


def test_round_for_round_determinism():
    datasets, y, f = random_instance(14)
    traces = []
    for _ in range(2):
        fs = FederatedState(y, f, tol=1e-8, max_rounds=5000)
        traces.append(train_federated(datasets, fs).residual_trace)
    assert traces[0] == traces[1]


def test_duals_stationary_at_convergence():
    # The per-station dual increment each round is dual_step * (W_j - W_g),
    # so once the primal residual is inside tolerance the dual drift is
    # bounded by dual_step * tol.
    datasets, y, f = random_instance(15, b=3)
    tol = 1e-7
    fs = FederatedState(y, f, tol=1e-300, max_rounds=40000)
    res = train_federated(datasets, fs)
    crossing = [r_norm for _, r_norm, _ in res.residual_trace if r_norm <= tol]
    assert crossing, "primal residual never reached tolerance"
    assert all(fs.dual_step * r <= fs.dual_step * tol for r in crossing)


def test_nonconvergence_is_reported(caplog):
    datasets, y, f = random_instance(16, b=3)
    fs = FederatedState(y, f, tol=1e-300, max_rounds=5)
    with caplog.at_level("WARNING"):
        res = train_federated(datasets, fs)
    assert not res.converged
    assert res.rounds == 5
    assert any("max_rounds" in r.message for r in caplog.records)


def test_consensus_equivalence_fuzz():
    # Smaller sibling of the acceptance fuzz: every instance must match the
    # pooled dense solve.
    for seed in range(20):
        datasets, y, f = random_instance(100 + seed)
        fs = FederatedState(y, f, tol=1e-10, max_rounds=40000)
        res = train_federated(datasets, fs)
        oracle = pooled_ridge(datasets, fs.ridge_lambda)
        rel = np.linalg.norm(res.w_out - oracle) / np.linalg.norm(oracle)
        assert rel <= 1e-5, f"seed {seed}: rel={rel}"


def test_shard_validation():
    with pytest.raises(ValueError):
        LocalDataset(np.zeros((3, 4)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        LocalDataset(np.zeros((0, 4)), np.zeros((0, 1)))
    fs = FederatedState(1, 4)
    with pytest.raises(ValueError):
        train_federated([], fs)
    with pytest.raises(ValueError):
        train_federated([LocalDataset(np.zeros((2, 3)), np.zeros((2, 1)))], fs)


def test_hyperparameter_validation():
    with pytest.raises(ValueError):
        FederatedState(1, 2, ridge_lambda=0.0)
    with pytest.raises(ValueError):
        FederatedState(1, 2, dual_step=1.5)
    with pytest.raises(ValueError):
        FederatedState(1, 2, penalty=-1.0)


def test_residuals_csv(tmp_path):
    datasets, y, f = random_instance(17)
    fs = FederatedState(y, f, tol=1e-6, max_rounds=5000)
    res = train_federated(datasets, fs)
    path = tmp_path / "residuals.csv"
    res.write_residuals_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "round,max_primal_residual,consensus_change"
    assert len(lines) == res.rounds + 1
