import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kalmanreg.kalman import (
    KalmanConfig,
    KalmanModel,
    KalmanState,
    SingularInnovationError,
    consolidate,
    kf_correct,
    kf_predict,
    read_consolidated_csv,
    run_filter,
    write_consolidated_csv,
)
from kalmanreg.sgd import EpochRecord, Trajectory


def scalar_filter(f, h, r, x, p, zs):
    """Direct transcription of the five scalar recurrences."""
    for z in zs:
        x = f * x
        p = f * p * f
        k = p * h / (h * p * h + r)
        x = x + k * (z - h * x)
        p = (1 - k * h) * p
    return x, p


def scalar_model(f=1.0, h=1.0, r=1.0):
    return KalmanModel([[f]], [[h]], [[r]])


def make_trajectory(weights, biases, losses):
    recs = []
    for i, (w, b, l) in enumerate(zip(weights, biases, losses)):
        recs.append(EpochRecord(i, np.atleast_1d(np.asarray(w, dtype=float)), float(b), float(l)))
    return Trajectory(tuple(recs))


def random_psd(rng, n, floor=0.0):
    A = rng.standard_normal((n, n))
    return A @ A.T + floor * np.eye(n)


# --- predict -------------------------------------------------------------

def test_predict_identity_is_noop():
    m = KalmanModel(np.eye(2), np.eye(2), np.eye(2))
    s = KalmanState([1.0, -2.0], [[2.0, 0.5], [0.5, 1.0]])
    once = kf_predict(m, s)
    twice = kf_predict(m, once)
    for out in (once, twice):
        np.testing.assert_array_equal(out.x, s.x)
        np.testing.assert_array_equal(out.P, s.P)


def test_predict_scalar():
    out = kf_predict(scalar_model(f=2.0), KalmanState([3.0], [[1.0]]))
    assert out.x.tolist() == [6.0]
    assert out.P.tolist() == [[4.0]]


def test_predict_with_process_noise():
    m = KalmanModel([[1.0]], [[1.0]], [[1.0]], Q=[[0.25]])
    assert kf_predict(m, KalmanState([0.0], [[1.0]])).P.tolist() == [[1.25]]


# --- correct -------------------------------------------------------------

def test_correct_zero_noise_tracks_exactly():
    for p in (0.1, 1.0, 37.0):
        out = kf_correct(scalar_model(r=0.0), KalmanState([1.5], [[p]]), [4.0])
        assert out.x[0] == pytest.approx(4.0, abs=1e-15)
        assert out.P[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_correct_hand_case():
    # S = 1 + 1 = 2, K = 0.5, x = 0 + 0.5 * 4, P = 0.5
    out = kf_correct(scalar_model(r=1.0), KalmanState([0.0], [[1.0]]), [4.0])
    assert out.x[0] == pytest.approx(2.0, abs=1e-15)
    assert out.P[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_correct_zero_innovation_keeps_state():
    m = KalmanModel(np.eye(2), [[1.0, 1.0]], [[0.5]])
    s = KalmanState([1.0, 2.0], np.eye(2))
    out = kf_correct(m, s, [3.0])
    np.testing.assert_allclose(out.x, s.x, atol=1e-15)


def test_correct_singular_innovation():
    s = KalmanState([0.0], [[0.0]])
    with pytest.raises(SingularInnovationError) as info:
        kf_correct(scalar_model(r=0.0), s, [1.0], step=7)
    assert info.value.step == 7
    m = KalmanModel(np.eye(2), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(SingularInnovationError):
        kf_correct(m, KalmanState([0.0, 0.0], [[1.0, 0.0], [0.0, 1e-14]]), [1.0, 1.0])


def test_model_validation():
    with pytest.raises(ValueError):
        KalmanModel(np.eye(2), np.eye(3), np.eye(3))
    with pytest.raises(ValueError):
        KalmanModel(np.eye(2), np.eye(2), [[1.0, 0.5], [0.0, 1.0]])  # asymmetric R
    with pytest.raises(ValueError):
        KalmanModel(np.eye(1), np.eye(1), [[-1.0]])  # not PSD
    m = KalmanModel(np.eye(3), np.eye(3), np.eye(3))
    np.testing.assert_array_equal(m.I, np.eye(3))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), s=st.integers(1, 5))
def test_correct_keeps_covariance_symmetric_psd_and_contracts(seed, s):
    rng = np.random.default_rng(seed)
    P = random_psd(rng, s, floor=0.1)
    R = random_psd(rng, s) * rng.uniform(0, 1)
    m = KalmanModel(np.eye(s), np.eye(s), 0.5 * (R + R.T))
    out = kf_correct(m, KalmanState(rng.standard_normal(s), P), rng.standard_normal(s))
    assert np.max(np.abs(out.P - out.P.T)) <= 1e-9
    assert np.linalg.eigvalsh(out.P).min() >= -1e-8
    assert np.trace(out.P) <= np.trace(P) + 1e-9


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), s=st.integers(1, 5))
def test_zero_noise_identity_measurement_is_exact(seed, s):
    rng = np.random.default_rng(seed)
    m = KalmanModel(np.eye(s), np.eye(s), np.zeros((s, s)), Q=np.eye(s))
    state = KalmanState(rng.standard_normal(s), random_psd(rng, s, floor=0.5))
    for step in range(5):
        z = rng.standard_normal(s) * 10
        state = kf_correct(m, kf_predict(m, state), z, step)
        np.testing.assert_allclose(state.x, z, rtol=0, atol=1e-12 * max(1.0, np.abs(z).max()))


# --- run_filter ----------------------------------------------------------

def test_run_filter_scalar_chain_by_hand():
    m = scalar_model()
    s1 = run_filter(m, KalmanState([0.0], [[1.0]]), [[4.0]], ranger=10)
    assert s1.x[0] == pytest.approx(2.0, abs=1e-12)
    assert s1.P[0, 0] == pytest.approx(0.5, abs=1e-12)
    s2 = run_filter(m, KalmanState([0.0], [[1.0]]), [[4.0], [4.0]], ranger=10)
    assert s2.x[0] == pytest.approx(8.0 / 3.0, abs=1e-12)
    assert s2.P[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_run_filter_single_exact_measurement():
    m = KalmanModel(np.eye(3), np.eye(3), np.zeros((3, 3)))
    out = run_filter(m, KalmanState(np.zeros(3), np.eye(3)), [[1.0, 2.0, 3.0]], ranger=1000)
    np.testing.assert_allclose(out.x, [1.0, 2.0, 3.0], atol=1e-15)


def test_run_filter_truncates_at_ranger():
    rng = np.random.default_rng(0)
    zs = rng.standard_normal((5, 2))
    m = KalmanModel(np.eye(2), np.eye(2), np.eye(2))
    init = KalmanState([0.0, 0.0], np.eye(2))
    a = run_filter(m, init, zs, ranger=2)
    b = run_filter(m, init, zs[:2], ranger=1000)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.P, b.P)
    with pytest.raises(ValueError):
        run_filter(m, init, [], ranger=3)


def test_run_filter_propagates_step_index():
    m = scalar_model(r=0.0)
    with pytest.raises(SingularInnovationError) as info:
        run_filter(m, KalmanState([0.0], [[1.0]]), [[1.0], [2.0], [3.0]], ranger=10)
    assert info.value.step == 1


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 12))
def test_run_filter_matches_scalar_recurrences(seed, n):
    rng = np.random.default_rng(seed)
    f = rng.uniform(0.5, 1.5)
    h = rng.uniform(0.5, 2.0) * rng.choice([-1, 1])
    r = rng.uniform(0.0, 5.0)
    x0, p0 = rng.uniform(-10, 10), rng.uniform(0.1, 10)
    zs = rng.uniform(-10, 10, size=n)
    out = run_filter(KalmanModel([[f]], [[h]], [[r]]), KalmanState([x0], [[p0]]), zs.reshape(-1, 1), ranger=n)
    x, p = scalar_filter(f, h, r, x0, p0, zs)
    assert abs(out.x[0] - x) <= 1e-12 * max(1.0, abs(x))
    assert abs(out.P[0, 0] - p) <= 1e-12 * max(1.0, abs(p))


# --- consolidate ---------------------------------------------------------

def test_consolidate_two_records_zero_noise_gives_final_weights():
    traj = make_trajectory([[0.5, 1.0], [0.7, 1.2]], [0.1, 0.2], [3.0, 2.0])
    out = consolidate(traj, KalmanConfig(measurement_noise=0.0, horizon=1))
    assert len(out) == 1 and out[0].horizon_step == 1
    np.testing.assert_allclose(out[0].weights, [0.7, 1.2], atol=1e-15)
    assert out[0].bias == pytest.approx(0.2, abs=1e-15)


def test_consolidate_zero_noise_long_trajectory_needs_process_noise():
    ws = np.linspace(0.0, 1.0, 6)
    traj = make_trajectory(ws, ws / 2, 5.0 - ws)
    with pytest.raises(SingularInnovationError):
        consolidate(traj, KalmanConfig(measurement_noise=0.0))
    out = consolidate(traj, KalmanConfig(measurement_noise=0.0, process_noise=1.0))
    assert out[0].weights[0] == pytest.approx(1.0, abs=1e-12)
    assert out[0].bias == pytest.approx(0.5, abs=1e-12)


def test_consolidate_horizon_identity_is_stationary():
    traj = make_trajectory([0.1, 0.4, 0.3, 0.6], [0.0, 0.1, 0.2, 0.3], [4.0, 3.0, 2.5, 2.0])
    out = consolidate(traj, KalmanConfig(measurement_noise=1.0, horizon=3))
    assert [c.horizon_step for c in out] == [1, 2, 3]
    for c in out[1:]:
        np.testing.assert_array_equal(c.weights, out[0].weights)
        assert c.bias == out[0].bias


def test_consolidate_loss_coordinate_follows_hand_recursion():
    # first record seeds the state (x0 = z0 = 0 in every coordinate), then z = [4, 4]
    traj = make_trajectory([0.0, 4.0, 4.0], [0.0, 4.0, 4.0], [0.0, 4.0, 4.0])
    out = consolidate(traj, KalmanConfig(measurement_noise=1.0))
    assert out[0].weights[0] == pytest.approx(8.0 / 3.0, abs=1e-12)
    assert out[0].bias == pytest.approx(8.0 / 3.0, abs=1e-12)


def test_consolidate_ranger_caps_measurements():
    traj = make_trajectory([0.0, 4.0, 4.0, 100.0], [0.0] * 4, [1.0] * 4)
    capped = consolidate(traj, KalmanConfig(measurement_noise=1.0, ranger=2))
    assert capped[0].weights[0] == pytest.approx(8.0 / 3.0, abs=1e-12)


def test_consolidate_requires_two_records():
    with pytest.raises(ValueError):
        consolidate(make_trajectory([1.0], [0.0], [1.0]), KalmanConfig())


def test_consolidate_deterministic_and_csv(tmp_path):
    rng = np.random.default_rng(1)
    traj = make_trajectory(rng.standard_normal((20, 3)), rng.standard_normal(20), rng.uniform(0, 5, 20))
    a = consolidate(traj, KalmanConfig(horizon=2))
    b = consolidate(traj, KalmanConfig(horizon=2))
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u.weights, v.weights)
        assert u.bias == v.bias
    p = tmp_path / "cw.csv"
    write_consolidated_csv(a, p)
    assert p.read_text().splitlines()[0] == "horizon_step,w_0,w_1,w_2,bias"
    back = read_consolidated_csv(p)
    np.testing.assert_array_equal(back[1].weights, a[1].weights)


def test_kalman_config_validation():
    for bad in ({"ranger": 0}, {"horizon": 0}, {"measurement_noise": -1.0}, {"process_noise": -0.1}):
        with pytest.raises(ValueError):
            KalmanConfig(**bad)
