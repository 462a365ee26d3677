"""EDMD contracts: dictionary evaluation, fitting, online updates,
prediction, linearization and serialization."""

import math

import numpy as np
import pytest

from koopland.koopman import (BasisSpec, KoopmanLearner, KoopmanModel,
                              ModelNotFittedError, SnapshotPair,
                              basis_jacobians, basis_jacobians_array,
                              eval_basis, eval_basis_array, fit,
                              h_step_errors, linearize, load_model,
                              pairs_from_trajectory, predict, residual,
                              save_model)
from koopland.lander import ControlInput, LanderState

NL = BasisSpec("nonlinear")
LIN = BasisSpec("linear")


def _pair(x, u, xn, un):
    return SnapshotPair(LanderState(*x), ControlInput(*u),
                        LanderState(*xn), ControlInput(*un))


def _random_pairs(rng, n, scale=1.0):
    """Unstructured snapshot pairs; fit() does not care how they arose."""
    out = []
    for _ in range(n):
        x, xn = rng.uniform(-scale, scale, (2, 6))
        u, un = rng.uniform(-1, 1, (2, 2))
        u[0], un[0] = abs(u[0]), abs(un[0])
        out.append(_pair(x, u, xn, un))
    return out


# ---------------------------------------------------------------- dictionary

def test_basis_at_origin_is_indicator():
    phi = eval_basis(NL, LanderState(0, 0, 0, 0, 0, 0), ControlInput(0, 0))
    expected = np.zeros(25)
    expected[0] = 1.0
    assert phi.shape == (25,)
    np.testing.assert_array_equal(phi, expected)


def test_basis_hand_evaluated_terms():
    phi = eval_basis(NL, LanderState(1, 1, 0, 1, 1, 1), ControlInput(1, 1))
    expected = np.array([
        1,                  # constant
        1, 1, 0, 1, 1, 1,   # states
        1, 1,               # controls
        1, 1, 0, 1, 1, 1,   # u1 * states
        1, 1, 0, 1, 1, 1,   # u2 * states
        1, 0, 1, 0,         # u1 cos, u1 sin, u2 cos, u2 sin at theta = 0
    ], dtype=float)
    np.testing.assert_array_equal(phi, expected)


def test_basis_linear_kind_is_first_nine_terms():
    phi = eval_basis(LIN, LanderState(1, 1, 0, 1, 1, 1), ControlInput(1, 1))
    np.testing.assert_array_equal(phi, [1, 1, 1, 0, 1, 1, 1, 1, 1])


def test_basis_state_recovery_indices_address_states():
    x = np.array([3.0, -1.0, 0.5, 2.0, -2.0, 0.1])
    for basis in (NL, LIN):
        phi = eval_basis_array(basis, x, np.array([0.3, -0.7]))
        np.testing.assert_array_equal(phi[list(basis.state_indices)], x)


def test_batch_matches_scalar_lift(rng):
    xs = rng.uniform(-3, 3, (40, 6))
    us = rng.uniform(-1, 1, (40, 2))
    from koopland.koopman import eval_basis_batch
    batch = eval_basis_batch(NL, xs, us)
    for i in range(40):
        np.testing.assert_array_equal(batch[i], eval_basis_array(NL, xs[i], us[i]))


# ----------------------------------------------------------------- jacobians

def _fd_jacobians(basis, x, u, h=1e-6):
    """Central-difference oracle for the dictionary partials."""
    dx = np.zeros((basis.dim, 6))
    du = np.zeros((basis.dim, 2))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        dx[:, j] = (eval_basis_array(basis, x + e, u)
                    - eval_basis_array(basis, x - e, u)) / (2 * h)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        du[:, j] = (eval_basis_array(basis, x, u + e)
                    - eval_basis_array(basis, x, u - e)) / (2 * h)
    return dx, du


def test_jacobian_constant_row_is_zero():
    dx, du = basis_jacobians(NL, LanderState(1, 2, 0.3, 4, 5, 6), ControlInput(0.5, -0.5))
    assert not dx[0].any() and not du[0].any()


def test_jacobian_trig_product_term():
    # term u1 sin(x3) at theta = 0, u1 = 2: d/dx3 = 2 cos 0 = 2, d/du1 = sin 0 = 0
    dx, du = basis_jacobians(NL, LanderState(0, 0, 0, 0, 0, 0), ControlInput(2.0, 0.0))
    assert dx[22, 2] == pytest.approx(2.0)
    assert du[22, 0] == pytest.approx(0.0)


@pytest.mark.parametrize("basis", [NL, LIN])
def test_jacobians_match_finite_differences(basis, rng):
    for _ in range(50):
        x = rng.uniform(-5, 5, 6)
        u = rng.uniform(-1, 1, 2)
        dx, du = basis_jacobians_array(basis, x, u)
        fd_dx, fd_du = _fd_jacobians(basis, x, u)
        assert np.all(np.abs(dx - fd_dx) <= 1e-6 * np.maximum(1.0, np.abs(fd_dx)))
        assert np.all(np.abs(du - fd_du) <= 1e-6 * np.maximum(1.0, np.abs(fd_du)))


# ----------------------------------------------------------------------- fit

def test_fit_recovers_scalar_contraction():
    # x_{t+1} = 0.9 x_t embedded on the first state coordinate, u = 0
    rng = np.random.default_rng(5)
    pairs = []
    for _ in range(60):
        x = rng.uniform(-2, 2)
        pairs.append(_pair([x, 0, 0, 0, 0, 0], [0, 0],
                           [0.9 * x, 0, 0, 0, 0, 0], [0, 0]))
    model = fit(pairs, LIN, epsilon=0.0)
    assert abs(model.K[1, 1] - 0.9) <= 1e-8


def test_fit_replayed_dataset_leaves_operator_unchanged(rng):
    # G and A scale by the same factor, so K is unchanged up to summation order
    pairs = _random_pairs(rng, 80)
    k1 = fit(pairs, NL).K
    k2 = fit(pairs + pairs, NL).K
    assert np.max(np.abs(k1 - k2)) <= 1e-9


def _ground_truth_operator(rng):
    """A 25x25 operator whose zero-residual trajectories stay expressible:
    states follow x' = A x + c with the heading row frozen (A[2] = e3,
    c[2] = 0) and controls follow u' = D u. Every dictionary term of the
    successor is then a fixed linear image of the current dictionary."""
    A = rng.uniform(-0.4, 0.4, (6, 6))
    A /= max(1e-9, max(abs(np.linalg.eigvals(A)))) / 0.9
    A[2] = 0.0
    A[2, 2] = 1.0
    c = rng.uniform(-0.1, 0.1, 6)
    c[2] = 0.0
    D = rng.uniform(-0.5, 0.5, (2, 2))
    D /= max(1e-9, max(abs(np.linalg.eigvals(D)))) / 0.9

    KT = np.zeros((25, 25))
    KT[0, 0] = 1.0
    for j in range(6):
        KT[1 + j, 0] = c[j]
        KT[1 + j, 1:7] = A[j]
    KT[7, 7:9] = D[0]
    KT[8, 7:9] = D[1]
    for i in range(2):          # products u'_i * x'_j
        for j in range(6):
            row = 9 + 6 * i + j
            for n in range(2):
                KT[row, 7 + n] += D[i, n] * c[j]
                for m in range(6):
                    KT[row, 9 + 6 * n + m] += D[i, n] * A[j, m]
    for i in range(2):          # trig products u'_i * cos/sin(theta)
        for n in range(2):
            KT[21 + 2 * i, 21 + 2 * n] = D[i, n]
            KT[22 + 2 * i, 22 + 2 * n] = D[i, n]
    return KT.T, A, c, D


def test_fit_recovers_known_operator_within_tolerance():
    rng = np.random.default_rng(11)
    K_true, A, c, D = _ground_truth_operator(rng)
    pairs = []
    for _ in range(80):
        x = rng.uniform(-1, 1, 6)
        u = rng.uniform(-1, 1, 2)
        for _ in range(15):
            xn = A @ x + c
            un = D @ u
            pairs.append(_pair(x, u, xn, un))
            x, u = xn, un
    # construction check: the lifted relation must hold exactly
    for p in pairs[:50]:
        phi = eval_basis(NL, p.state, p.control)
        phi_next = eval_basis(NL, p.next_state, p.next_control)
        assert np.max(np.abs(phi_next - K_true.T @ phi)) <= 1e-10
    model = fit(pairs, NL, epsilon=0.0)
    err = np.linalg.norm(model.K - K_true)
    assert err <= 1e-6


def test_fit_rank_deficient_data_warns_but_succeeds(caplog):
    pairs = [_pair([1, 0, 0, 0, 0, 0], [0, 0], [0.9, 0, 0, 0, 0, 0], [0, 0])] * 5
    with caplog.at_level("WARNING"):
        model = fit(pairs, NL, epsilon=0.0)
    assert "rank" in caplog.text
    assert np.all(np.isfinite(model.K))


def test_fit_empty_dataset_rejected():
    with pytest.raises(ValueError):
        fit([], NL)


def test_fit_residual_is_locally_optimal(rng):
    pairs = _random_pairs(rng, 120)
    model = fit(pairs, NL, epsilon=0.0)
    j0 = residual(model, pairs)
    for _ in range(20):
        delta = rng.normal(size=(25, 25))
        delta *= 1e-3 / np.linalg.norm(delta)
        perturbed = KoopmanModel(basis=NL, K=model.K + delta, G=model.G,
                                 A=model.A, samples=model.samples)
        assert residual(perturbed, pairs) >= j0 - 1e-12 * max(1.0, j0)


# -------------------------------------------------------------------- update

def test_update_matches_batch_fit(rng):
    pairs = _random_pairs(rng, 100)
    learner = KoopmanLearner(NL, epsilon=1e-6)
    for p in pairs:
        learner.update(p)
    batch = fit(pairs, NL, epsilon=1e-6)
    assert np.linalg.norm(learner.model.K - batch.K) <= 1e-8
    assert learner.model.samples == 100


def test_update_singleton_equals_fit(rng):
    pair = _random_pairs(rng, 1)[0]
    learner = KoopmanLearner(NL, epsilon=1e-6)
    learner.update(pair)
    batch = fit([pair], NL, epsilon=1e-6)
    assert np.linalg.norm(learner.model.K - batch.K) <= 1e-10


def test_update_equivalence_any_interleaving(rng):
    pairs = _random_pairs(rng, 60)
    order = rng.permutation(60)
    learner = KoopmanLearner(NL, epsilon=1e-6)
    for i in order:
        learner.update(pairs[i])
    batch = fit(pairs, NL, epsilon=1e-6)
    assert np.linalg.norm(learner.model.K - batch.K) <= 1e-8


def test_update_rejects_non_finite_pair(rng):
    learner = KoopmanLearner(NL, epsilon=1e-6)
    learner.update(_random_pairs(rng, 1)[0])
    before = learner.model
    bad = _pair([np.nan, 0, 0, 0, 0, 0], [0, 0], [0, 0, 0, 0, 0, 0], [0, 0])
    with pytest.raises(ValueError):
        learner.update(bad)
    assert learner.model is before
    assert learner.samples == 1


def test_uniform_initialization_matches_seed():
    learner = KoopmanLearner(NL, init="uniform", seed=77)
    expected = np.random.default_rng(77).uniform(0.0, 1.0, size=(25, 25))
    np.testing.assert_array_equal(learner.model.K, expected)
    assert learner.model.samples == 0
    assert learner.model.initialized


def test_online_from_naive_init_approaches_offline_accuracy(nonlinear_model,
                                                            expert_demos):
    """After ~900 lander updates the streamed model's 1-step error is within
    2x of the batch model trained on the full 10 trials."""
    pairs = expert_demos["train_pairs"]
    learner = KoopmanLearner(NL, epsilon=1e-6, init="uniform", seed=0)
    for p in pairs[:900]:
        learner.update(p)
    holdout = expert_demos["holdout"]

    def one_step_median(model):
        errs = []
        for rec in holdout:
            states, controls = rec.trajectory_arrays()
            for t in range(controls.shape[0]):
                pred = model.predict_array(states[t], controls[t])
                errs.append(math.hypot(pred[0] - states[t + 1, 0],
                                       pred[1] - states[t + 1, 1]))
        return float(np.median(errs))

    assert one_step_median(learner.model) <= 2.0 * one_step_median(nonlinear_model)


# ------------------------------------------------------------------- predict

def _identity_pairs(rng, n=80):
    pairs = []
    for _ in range(n):
        x = rng.uniform(-3, 3, 6)
        pairs.append(_pair(x, [0, 0], x, [0, 0]))
    return pairs


def test_predict_identity_system(rng):
    model = fit(_identity_pairs(rng), NL, epsilon=0.0)
    x = LanderState(1.3, -0.4, 0.8, 2.0, -1.0, 0.5)
    out = predict(model, x, ControlInput(0.0, 0.0))
    assert np.allclose(out.as_tuple(), x.as_tuple(), atol=1e-6)


def test_predict_requires_operator():
    model = KoopmanModel(basis=NL)
    with pytest.raises(ModelNotFittedError):
        predict(model, LanderState(0, 0, 0, 0, 0, 0), ControlInput(0, 0))


def test_one_step_position_error_on_holdout(nonlinear_model, expert_demos):
    errs = []
    for rec in expert_demos["holdout"]:
        states, controls = rec.trajectory_arrays()
        for t in range(controls.shape[0]):
            pred = nonlinear_model.predict_array(states[t], controls[t])
            errs.append(math.hypot(pred[0] - states[t + 1, 0],
                                   pred[1] - states[t + 1, 1]))
    assert float(np.median(errs)) <= 1e-2


def test_h_step_errors_monotone_on_holdout(nonlinear_model, linear_model,
                                           expert_demos):
    trajs = [r.trajectory_arrays() for r in expert_demos["holdout"]]
    horizon = 30
    for model in (nonlinear_model, linear_model):
        curve = h_step_errors(model, trajs, horizon)[:, 0]
        assert np.all(np.isfinite(curve))
        assert np.all(np.diff(curve) >= 0.0)


# ----------------------------------------------------------------- linearize

def test_linearize_matches_finite_difference_of_predict(nonlinear_model, rng):
    for _ in range(20):
        x = rng.uniform(-2, 2, 6) + np.array([10, 8, 0, 0, 0, 0])
        u = rng.uniform(-1, 1, 2)
        u[0] = abs(u[0])
        A, B = nonlinear_model.linearize_arrays(x, u)
        h = 1e-6
        fd_A = np.zeros((6, 6))
        fd_B = np.zeros((6, 2))
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            fd_A[:, j] = (nonlinear_model.predict_array(x + e, u)
                          - nonlinear_model.predict_array(x - e, u)) / (2 * h)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd_B[:, j] = (nonlinear_model.predict_array(x, u + e)
                          - nonlinear_model.predict_array(x, u - e)) / (2 * h)
        assert np.all(np.abs(A - fd_A) <= 1e-5 * np.maximum(1.0, np.abs(fd_A)))
        assert np.all(np.abs(B - fd_B) <= 1e-5 * np.maximum(1.0, np.abs(fd_B)))


def test_linearize_identity_model(rng):
    model = fit(_identity_pairs(rng), NL, epsilon=0.0)
    A, B = linearize(model, LanderState(0.5, -0.5, 0.2, 1, -1, 0.1),
                     ControlInput(0.0, 0.0))
    assert np.allclose(A, np.eye(6), atol=1e-6)
    assert np.allclose(B, 0.0, atol=1e-6)


def test_linear_basis_jacobians_are_point_independent(linear_model, rng):
    x1, x2 = rng.uniform(-3, 3, (2, 6))
    A1, B1 = linear_model.linearize_arrays(x1, np.array([0.5, 0.1]))
    A2, B2 = linear_model.linearize_arrays(x2, np.array([0.0, -0.9]))
    np.testing.assert_array_equal(A1, A2)
    np.testing.assert_array_equal(B1, B2)


def test_replay_refit_reproduces_linear_operator(linear_model, rng):
    """Rolling the fitted linear-dictionary operator forward (states and
    controls both read back from the lifted image) creates zero-residual
    data; refitting on it reproduces the operator."""
    K = linear_model.K
    pairs = []
    for _ in range(40):
        phi = np.concatenate(([1.0], rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 2)))
        for _ in range(10):
            phi_next = K.T @ phi
            pairs.append(_pair(phi[1:7], phi[7:9], phi_next[1:7], phi_next[7:9]))
            phi = np.concatenate(([1.0], phi_next[1:7], phi_next[7:9]))
    refit = fit(pairs, LIN, epsilon=0.0)
    assert np.linalg.norm(refit.K - K) <= 1e-6


# ------------------------------------------------------------- serialization

def test_model_round_trips_through_file(nonlinear_model, tmp_path):
    path = tmp_path / "model.json"
    save_model(nonlinear_model, path)
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.K, nonlinear_model.K)
    np.testing.assert_array_equal(loaded.G, nonlinear_model.G)
    np.testing.assert_array_equal(loaded.A, nonlinear_model.A)
    assert loaded.samples == nonlinear_model.samples
    assert loaded.epsilon == nonlinear_model.epsilon
    assert loaded.basis == nonlinear_model.basis


def test_model_file_version_is_checked(nonlinear_model, tmp_path):
    import json
    path = tmp_path / "model.json"
    save_model(nonlinear_model, path)
    doc = json.loads(path.read_text())
    doc["version"] = 999
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="version"):
        load_model(path)
    doc["version"] = 1
    doc["format"] = "something-else"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="not a"):
        load_model(path)


def test_unfitted_model_refuses_to_save(tmp_path):
    with pytest.raises(ModelNotFittedError):
        save_model(KoopmanModel(basis=NL), tmp_path / "nope.json")


def test_pairs_from_trajectory_terminal_convention():
    states = [LanderState(float(i), 0, 0, 0, 0, 0) for i in range(4)]
    controls = [ControlInput(0.5, 0.1), ControlInput(0.4, 0.0), ControlInput(0.3, -0.1)]
    pairs = pairs_from_trajectory(states, controls)
    assert len(pairs) == 3
    assert pairs[-1].next_control == ControlInput(0.0, 0.0)
    assert pairs[-1].next_state == states[-1]
    with pytest.raises(ValueError):
        pairs_from_trajectory(states, controls[:-1])
