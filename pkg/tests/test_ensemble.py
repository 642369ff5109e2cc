import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haelt.ensemble import EnsembleState, combine, softmax_weights, step_bce, walk_forward
from haelt.exceptions import ConfigError

losses_st = st.lists(st.floats(0.0, 20.0), min_size=1, max_size=6)
tau_st = st.floats(0.01, 100.0)


class TestRollingLoss:
    def test_constant(self):
        s = EnsembleState(("a",), k=5)
        for _ in range(8):
            s.record([0.7])
        assert s.rolling_loss("a") == pytest.approx(0.7)

    def test_window_mean(self):
        s = EnsembleState(("a",), k=3)
        for v in (9.0, 0.2, 0.4, 0.6):
            s.record([v])
        assert s.rolling_loss("a") == pytest.approx(0.4)

    def test_k_one_is_last_loss(self):
        s = EnsembleState(("a", "b"), k=1)
        s.record([0.1, 0.2])
        s.record([0.3, 0.9])
        assert (s.rolling_loss("a"), s.rolling_loss("b")) == (0.3, 0.9)

    def test_partial_window(self):
        s = EnsembleState(("a",), k=24)
        s.record([1.0])
        s.record([2.0])
        assert s.rolling_loss("a") == 1.5

    def test_no_history(self):
        with pytest.raises(ValueError):
            EnsembleState(("a",)).rolling_loss("a")

    def test_buffers_bounded_and_aligned(self):
        s = EnsembleState(("a", "b", "c"), k=4)
        for i in range(10):
            s.record([i, i + 1, i + 2])
        assert [len(v) for v in s.loss_window.values()] == [4, 4, 4]


class TestWeights:
    def test_uniform_before_history(self):
        s = EnsembleState(("a", "b", "c"))
        np.testing.assert_array_equal(s.update_weights(), [1 / 3] * 3)

    def test_two_member_hand_case(self):
        np.testing.assert_allclose(softmax_weights([0.0, math.log(2)], 1.0), [2 / 3, 1 / 3],
                                   atol=1e-15)

    def test_huge_temperature_is_nearly_uniform(self):
        w = softmax_weights([0.1, 2.0, 5.0], 1e6)
        np.testing.assert_allclose(w, 1 / 3, atol=1e-5)

    def test_extreme_losses_are_stable(self):
        w = softmax_weights([0.0, 1e4], 0.01)
        assert np.all(np.isfinite(w)) and w[0] == 1.0

    @pytest.mark.parametrize("tau", [0.0, -1.0])
    def test_bad_temperature(self, tau):
        with pytest.raises(ConfigError):
            softmax_weights([0.1], tau)
        with pytest.raises(ConfigError):
            EnsembleState(("a",), tau=tau)

    def test_bad_window(self):
        with pytest.raises(ConfigError):
            EnsembleState(("a",), k=0)
        with pytest.raises(ConfigError):
            EnsembleState(())


class TestCombine:
    def test_dot_product(self):
        assert combine([0.5, 0.3, 0.2], [0.9, 0.5, 0.1]) == pytest.approx(0.62)

    def test_degenerate_weight(self):
        assert combine([1.0, 0.0, 0.0], [0.3, 0.9, 0.1]) == 0.3

    def test_identical_members(self):
        assert combine([0.2, 0.5, 0.3], [0.37] * 3) == 0.37

    def test_batch_axis(self):
        out = combine([0.25, 0.75], np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(out, [0.75, 0.25])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            combine([0.5, 0.5], [0.1, 0.2, 0.3])


@settings(max_examples=200, deadline=None)
@given(losses_st, tau_st)
def test_weights_are_a_distribution(losses, tau):
    w = softmax_weights(losses, tau)
    assert np.all(w >= 0)
    assert abs(w.sum() - 1) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(losses_st, tau_st, st.floats(-50, 50))
def test_shift_invariance(losses, tau, c):
    a = softmax_weights(losses, tau)
    b = softmax_weights(np.asarray(losses) + c, tau)
    np.testing.assert_allclose(a, b, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(losses_st, tau_st, st.data())
def test_lower_loss_never_lowers_weight(losses, tau, data):
    i = data.draw(st.integers(0, len(losses) - 1))
    drop = data.draw(st.floats(0.0, 5.0))
    before = softmax_weights(losses, tau)[i]
    lowered = list(losses)
    lowered[i] -= drop
    assert softmax_weights(lowered, tau)[i] >= before - 1e-15


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 10), st.integers(1, 6), tau_st)
def test_equal_losses_give_uniform(loss, n, tau):
    np.testing.assert_allclose(softmax_weights([loss] * n, tau), 1 / n, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=5), st.data())
def test_output_inside_member_hull(probs, data):
    raw = data.draw(st.lists(st.floats(0, 1), min_size=len(probs), max_size=len(probs)))
    w = np.asarray(raw) + 1e-3
    out = combine(w / w.sum(), probs)
    assert min(probs) <= out <= max(probs)


def test_properties_over_1000_random_states():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        tau = float(np.exp(rng.uniform(-3, 3)))
        losses = rng.exponential(1.0, n)
        w = softmax_weights(losses, tau)
        assert abs(w.sum() - 1) <= 1e-12
        np.testing.assert_allclose(softmax_weights(losses + rng.normal(0, 5), tau), w, atol=1e-12)
        i = int(rng.integers(n))
        better = losses.copy()
        better[i] *= rng.uniform(0, 1)
        assert softmax_weights(better, tau)[i] >= w[i] - 1e-15
        np.testing.assert_allclose(softmax_weights(np.full(n, losses[0]), tau), 1 / n, atol=1e-15)


class TestWalkForward:
    def test_weights_use_only_past_labels(self):
        probs = np.array([[0.9, 0.9, 0.1, 0.1], [0.1, 0.1, 0.9, 0.9]])
        y = np.array([1, 1, 0, 0])
        state = EnsembleState(("a", "b"), k=2)
        final, traj = walk_forward(state, probs, y)
        np.testing.assert_array_equal(traj[0], [0.5, 0.5])
        assert final[0] == pytest.approx(0.5)
        # after the first realised step member a is ahead
        assert traj[1][0] > traj[1][1]
        # changing a future label cannot change an earlier prediction
        y2 = y.copy()
        y2[3] = 1
        final2, _ = walk_forward(EnsembleState(("a", "b"), k=2), probs, y2)
        np.testing.assert_array_equal(final[:4], final2[:4])

    def test_matches_manual_recurrence(self):
        rng = np.random.default_rng(0)
        probs = rng.uniform(0.05, 0.95, size=(3, 40))
        y = rng.integers(0, 2, 40)
        final, _ = walk_forward(EnsembleState(("a", "b", "c"), k=5, tau=0.5), probs, y)
        hist = [[], [], []]
        for t in range(40):
            if hist[0]:
                L = [np.mean(h[-5:]) for h in hist]
                w = softmax_weights(L, 0.5)
            else:
                w = np.full(3, 1 / 3)
            assert final[t] == pytest.approx(w @ probs[:, t], abs=1e-15)
            for i in range(3):
                hist[i].append(float(step_bce(y[t], probs[i, t])))

    def test_fixed_mode_keeps_weights(self):
        state = EnsembleState(("a", "b"), k=3)
        state.record([0.1, 1.0])
        state.update_weights()
        w = state.weights.copy()
        _, traj = walk_forward(state, np.full((2, 5), 0.4), [1] * 5, update=False)
        np.testing.assert_array_equal(traj, np.tile(w, (5, 1)))
        assert state.steps_seen == 1

    def test_dict_input_and_copy(self):
        state = EnsembleState(("a", "b"), k=3)
        clone = state.copy()
        walk_forward(state, {"b": [0.2, 0.4], "a": [0.9, 0.8]}, [1, 1])
        assert state.steps_seen == 2 and clone.steps_seen == 0
        restored = EnsembleState.from_dict(state.to_dict())
        assert restored.to_dict() == state.to_dict()

    def test_label_length_mismatch(self):
        with pytest.raises(ValueError):
            walk_forward(EnsembleState(("a",)), np.ones((1, 3)) * 0.5, [1, 0])
