import numpy as np
import pytest

from fearkit.dataset import SequenceSample
from fearkit.errors import NetError, TrainingDivergedError
from fearkit.net import (AttentionTrace, NetConfig, attention, blstm_forward,
                         classify, init_params, loss_and_gradients, predict,
                         stable_softmax, train)


def small_config(**kw):
    base = dict(input_dim=8, hidden_size=4, sequence_length=5, num_classes=3,
                dropout_rate=0.0, learning_rate=1e-3, batch_size=4, epochs=3,
                seed=0, fc_width=6)
    base.update(kw)
    return NetConfig(**base)


def finite_difference_grads(x, y, params, config, eps=1e-5):
    """Central-difference oracle over every parameter entry."""
    grads = {}
    for name, value in params.items():
        grad = np.zeros_like(value)
        flat = value.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus, _ = loss_and_gradients(x, y, params, config, training=False)
            flat[i] = orig - eps
            minus, _ = loss_and_gradients(x, y, params, config, training=False)
            flat[i] = orig
            grad.ravel()[i] = (plus - minus) / (2 * eps)
        grads[name] = grad
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for name in analytic:
        a, n = analytic[name].ravel(), numeric[name].ravel()
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


class TestBlstmForward:
    def test_zero_params_give_zero_states(self):
        config = small_config()
        params = {k: np.zeros_like(v) for k, v in init_params(config).items()}
        x = np.random.default_rng(0).standard_normal((2, 5, 8))
        states, _ = blstm_forward(x, params, config)
        assert np.all(states == 0.0)

    def test_length_one_sequence(self):
        # with l=1 both directions see the same single input from zero state,
        # so tying the backward weights to the forward ones makes the two
        # state halves identical
        config = small_config(sequence_length=1)
        params = init_params(config)
        for gate in "ifgo":
            params[f"bw_W{gate}"] = params[f"fw_W{gate}"].copy()
            params[f"bw_U{gate}"] = params[f"fw_U{gate}"].copy()
            params[f"bw_b{gate}"] = params[f"fw_b{gate}"].copy()
        x = np.random.default_rng(1).standard_normal((1, 1, 8))
        states, _ = blstm_forward(x, params, config)
        assert np.allclose(states[0, 0, :4], states[0, 0, 4:], atol=1e-12)

    def test_palindrome_with_tied_directions_swaps_halves(self):
        config = small_config()
        params = init_params(config)
        for gate in "ifgo":
            params[f"bw_W{gate}"] = params[f"fw_W{gate}"].copy()
            params[f"bw_U{gate}"] = params[f"fw_U{gate}"].copy()
            params[f"bw_b{gate}"] = params[f"fw_b{gate}"].copy()
        rng = np.random.default_rng(2)
        half = rng.standard_normal((3, 8))
        x = np.stack([half[0], half[1], half[2], half[1], half[0]])[None, :, :]
        states, _ = blstm_forward(x, params, config)
        h = config.hidden_size
        for t in range(5):
            mirror = 4 - t
            assert np.allclose(states[0, t, :h], states[0, mirror, h:], atol=1e-12)

    def test_shape_validation(self):
        config = small_config()
        params = init_params(config)
        with pytest.raises(NetError):
            blstm_forward(np.zeros((1, 4, 8)), params, config)

    def test_zero_backward_weights_reduce_to_forward_reference(self):
        """Independent unidirectional LSTM coded inline as the oracle."""
        config = small_config()
        params = init_params(config)
        for gate in "ifgo":
            params[f"bw_W{gate}"][:] = 0.0
            params[f"bw_U{gate}"][:] = 0.0
            params[f"bw_b{gate}"][:] = 0.0
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 5, 8))
        states, _ = blstm_forward(x, params, config)

        def sigmoid(v):
            return 1.0 / (1.0 + np.exp(-v))

        h = np.zeros(4)
        c = np.zeros(4)
        reference = []
        for t in range(5):
            xt = x[0, t]
            i = sigmoid(xt @ params["fw_Wi"] + h @ params["fw_Ui"] + params["fw_bi"])
            f = sigmoid(xt @ params["fw_Wf"] + h @ params["fw_Uf"] + params["fw_bf"])
            g = np.tanh(xt @ params["fw_Wg"] + h @ params["fw_Ug"] + params["fw_bg"])
            o = sigmoid(xt @ params["fw_Wo"] + h @ params["fw_Uo"] + params["fw_bo"])
            c = f * c + i * g
            h = o * np.tanh(c)
            reference.append(h.copy())
        assert np.allclose(states[0, :, :4], np.stack(reference), atol=1e-12)
        # the zeroed backward direction is exactly zero
        assert np.all(states[0, :, 4:] == 0.0)


class TestAttention:
    def test_identical_states_give_uniform_weights(self):
        config = small_config()
        params = init_params(config)
        state = np.random.default_rng(4).standard_normal(8)
        states = np.tile(state, (5, 1))
        trace = attention(states, params)
        assert np.allclose(trace.weights, 0.2)
        assert np.allclose(trace.context, state)

    def test_length_one(self):
        config = small_config(sequence_length=1)
        params = init_params(config)
        states = np.random.default_rng(5).standard_normal((1, 8))
        trace = attention(states, params)
        assert np.allclose(trace.weights, [1.0])
        assert np.allclose(trace.context, states[0])

    def test_softmax_arithmetic(self):
        weights = stable_softmax(np.array([np.log(2.0), 0.0]))
        assert np.allclose(weights, [2 / 3, 1 / 3])

    def test_weights_sum_to_one_and_shift_invariance(self):
        rng = np.random.default_rng(6)
        config = small_config()
        for _ in range(50):
            params = init_params(config, rng)
            states = rng.standard_normal((5, 8))
            trace = attention(states, params)
            assert np.all(trace.weights >= 0.0)
            assert abs(trace.weights.sum() - 1.0) < 1e-9
            shifted = stable_softmax(trace.raw_scores + rng.uniform(-50, 50))
            assert np.allclose(shifted, trace.weights, atol=1e-12)


class TestClassifier:
    def test_dropout_zero_training_equals_inference(self):
        config = small_config(dropout_rate=0.0)
        params = init_params(config)
        ctx = np.random.default_rng(7).standard_normal(8)
        rng = np.random.default_rng(0)
        logits_train, _ = classify(ctx, params, config, training=True, rng=rng)
        logits_eval, _ = classify(ctx, params, config, training=False)
        assert np.allclose(logits_train, logits_eval)

    def test_zero_weights_uniform_probabilities(self):
        config = small_config()
        params = {k: np.zeros_like(v) for k, v in init_params(config).items()}
        _, probs = classify(np.ones(8), params, config)
        assert np.allclose(probs, 1.0 / 3.0)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(8)
        config = small_config()
        for _ in range(20):
            params = init_params(config, rng)
            _, probs = classify(rng.standard_normal(8), params, config)
            assert abs(probs.sum() - 1.0) < 1e-9

    def test_dropout_inference_is_identity(self):
        config = small_config(dropout_rate=0.5)
        params = init_params(config)
        ctx = np.random.default_rng(9).standard_normal(8)
        a = classify(ctx, params, config, training=False)
        b = classify(ctx, params, config, training=False)
        assert np.array_equal(a[0], b[0])


class TestLossAndGradients:
    def test_uniform_probabilities_loss(self):
        config = small_config(num_classes=6)
        params = {k: np.zeros_like(v) for k, v in init_params(config).items()}
        x = np.random.default_rng(10).standard_normal((4, 5, 8))
        y = np.array([0, 1, 2, 3])
        loss, _ = loss_and_gradients(x, y, params, config, training=False)
        assert loss == pytest.approx(np.log(6.0), rel=1e-12)

    def test_gradient_check_small_config(self):
        rng = np.random.default_rng(11)
        config = small_config()
        params = init_params(config, rng)
        x = rng.standard_normal((3, 5, 8))
        y = np.array([0, 2, 1])
        _, analytic = loss_and_gradients(x, y, params, config, training=False)
        numeric = finite_difference_grads(x, y, params, config)
        assert max_relative_error(analytic, numeric) < 1e-4

    @pytest.mark.parametrize("bidirectional,use_attention", [
        (False, False),  # plain LSTM
        (False, True),   # LSTM + attention
        (True, False),   # BLSTM, last-state readout
    ])
    def test_gradient_check_architecture_variants(self, bidirectional, use_attention):
        rng = np.random.default_rng(12)
        config = small_config(use_attention=use_attention,
                              bidirectional=bidirectional)
        params = init_params(config, rng)
        x = rng.standard_normal((2, 5, 8))
        y = np.array([1, 0])
        _, analytic = loss_and_gradients(x, y, params, config, training=False)
        numeric = finite_difference_grads(x, y, params, config)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_empty_batch_rejected(self):
        config = small_config()
        params = init_params(config)
        with pytest.raises(NetError):
            loss_and_gradients(np.zeros((0, 5, 8)), np.zeros(0, dtype=int),
                               params, config)


def separable_samples(n_per_class, config, seed=0, classes=None):
    """Each class occupies its own block of input coordinates."""
    classes = classes if classes is not None else config.num_classes
    rng = np.random.default_rng(seed)
    samples = []
    for c in range(classes):
        for _ in range(n_per_class):
            base = np.zeros((config.sequence_length, config.input_dim))
            width = config.input_dim // classes
            base[:, c * width:(c + 1) * width] = 1.5
            base += 0.1 * rng.standard_normal(base.shape)
            samples.append(SequenceSample(features=base, target=c,
                                          session_id="synthetic", start_frame=0))
    return samples


class TestTrain:
    def test_learning_rate_zero_keeps_params(self):
        config = small_config(learning_rate=0.0, epochs=2)
        samples = separable_samples(4, config)
        result = train(samples, samples[:3], config)
        fresh = init_params(config)
        for key, value in fresh.items():
            assert np.array_equal(result.params[key], value)

    def test_same_seed_bit_identical(self):
        config = small_config(epochs=2, dropout_rate=0.3)
        samples = separable_samples(4, config, seed=1)
        a = train(samples, samples[:3], config)
        b = train(samples, samples[:3], config)
        for key in a.params:
            assert np.array_equal(a.params[key], b.params[key])
        assert [r.loss for r in a.history] == [r.loss for r in b.history]

    def test_divergence_carries_history(self):
        config = small_config(learning_rate=1e6, epochs=50)
        samples = separable_samples(4, config, seed=2)
        try:
            result = train(samples, samples[:3], config)
        except TrainingDivergedError as exc:
            assert isinstance(exc.history, list)
        else:
            assert result.history  # huge steps may still survive tanh/sigmoid

    def test_quick_overfit(self):
        config = small_config(hidden_size=8, learning_rate=1e-2, epochs=120,
                              batch_size=6)
        samples = separable_samples(6, config, seed=3)
        result = train(samples, samples, config, stop_at_train_accuracy=0.95)
        assert result.history[-1].train_accuracy >= 0.95


class TestPredict:
    def test_constant_class_model(self):
        config = small_config()
        params = {k: np.zeros_like(v) for k, v in init_params(config).items()}
        params["fc2_b"] = np.array([0.0, 5.0, 0.0])
        pred = predict(np.zeros((5, 8)), params, config)
        assert pred.level == 1

    def test_probabilities_and_attention_sum_to_one(self):
        config = small_config()
        params = init_params(config)
        pred = predict(np.random.default_rng(13).standard_normal((5, 8)),
                       params, config)
        assert abs(pred.probabilities.sum() - 1.0) < 1e-9
        assert isinstance(pred.attention, AttentionTrace)
        assert abs(pred.attention.weights.sum() - 1.0) < 1e-9

    def test_tie_breaks_to_lower_level(self):
        config = small_config()
        params = {k: np.zeros_like(v) for k, v in init_params(config).items()}
        pred = predict(np.zeros((5, 8)), params, config)  # uniform probabilities
        assert pred.level == 0

    def test_shape_check(self):
        config = small_config()
        params = init_params(config)
        with pytest.raises(NetError):
            predict(np.zeros((4, 8)), params, config)


def test_checkpoint_round_trip(tmp_path):
    from fearkit.dataset import Normalization
    from fearkit.net import load_checkpoint, save_checkpoint

    config = small_config()
    params = init_params(config)
    norm = Normalization(mean=np.zeros(8), std=np.ones(8))
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, params, config, norm, metadata={"note": "t"})
    loaded_params, loaded_config, loaded_norm, meta = load_checkpoint(path)
    assert loaded_config == config
    assert meta == {"note": "t"}
    for key in params:
        assert np.array_equal(loaded_params[key], params[key])
    assert np.array_equal(loaded_norm.mean, norm.mean)
