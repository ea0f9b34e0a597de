import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amsobe.ablstm import (
    AblstmNetwork,
    AttentionParams,
    ClassifierParams,
    Dims,
    LstmParams,
    LstmState,
    attention,
    blstm_channel,
    classify_loss,
    concat_features,
    extract_template,
    forward,
    gradient_check,
    init_network,
    loss_and_grads,
    lstm_step,
    softmax,
    train,
)
from amsobe.signal import GaitSignal, SegmentationError
from amsobe.template import Role


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def scalar_lstm(p, x, h, c):
    """Gate-by-gate scalar trace for h = 1, T = 1; p maps gate -> (w, u, b)."""
    pre = {g: p[g][0] * x + p[g][1] * h + p[g][2] for g in "cfio"}
    c_new = sig(pre["f"]) * c + sig(pre["i"]) * math.tanh(pre["c"])
    return sig(pre["o"]) * math.tanh(c_new), c_new


def params_from_scalars(p):
    W = np.array([[[p[g][0]]] for g in "cfio"])
    U = np.array([[[p[g][1]]] for g in "cfio"])
    b = np.array([[p[g][2]] for g in "cfio"])
    return LstmParams(W, U, b)


def random_scalars(rng):
    return {g: tuple(rng.uniform(-1.5, 1.5, 3)) for g in "cfio"}


class TestLstmStep:
    def test_zero_weights_zero_state(self):
        out = lstm_step(LstmParams.zeros(3, 4), np.array([1.0, -2.0, 3.0, 0.5]), LstmState.zeros(3))
        np.testing.assert_array_equal(out.c, 0.0)
        np.testing.assert_array_equal(out.h, 0.0)

    def test_zero_weights_unit_cell(self):
        out = lstm_step(LstmParams.zeros(2, 1), np.array([7.0]), LstmState(np.zeros(2), np.ones(2)))
        np.testing.assert_allclose(out.c, 0.5, atol=1e-15)
        np.testing.assert_allclose(out.h, 0.5 * math.tanh(0.5), atol=1e-15)

    def test_matches_scalar_trace(self):
        rng = np.random.default_rng(11)
        p = random_scalars(rng)
        x, h, c = 0.7, -0.3, 0.9
        out = lstm_step(params_from_scalars(p), np.array([x]), LstmState(np.array([h]), np.array([c])))
        eh, ec = scalar_lstm(p, x, h, c)
        assert out.h[0] == pytest.approx(eh, abs=1e-14)
        assert out.c[0] == pytest.approx(ec, abs=1e-14)

    def test_matches_explicit_2x2(self):
        rng = np.random.default_rng(5)
        params = LstmParams(rng.normal(size=(4, 2, 2)), rng.normal(size=(4, 2, 2)), rng.normal(size=(4, 2)))
        x, h, c = rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)
        expected_h, expected_c = [], []
        for j in range(2):
            pre = [sum(params.W[g, j, k] * x[k] + params.U[g, j, k] * h[k] for k in range(2)) + params.b[g, j] for g in range(4)]
            cj = sig(pre[1]) * c[j] + sig(pre[2]) * math.tanh(pre[0])
            expected_c.append(cj)
            expected_h.append(sig(pre[3]) * math.tanh(cj))
        out = lstm_step(params, x, LstmState(h, c))
        np.testing.assert_allclose(out.h, expected_h, atol=1e-14)
        np.testing.assert_allclose(out.c, expected_c, atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lstm_step(LstmParams.zeros(2, 3), np.zeros(4), LstmState.zeros(2))
        with pytest.raises(ValueError):
            lstm_step(LstmParams.zeros(2, 3), np.zeros(3), LstmState.zeros(3))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_hidden_bounded(self, seed):
        rng = np.random.default_rng(seed)
        params = LstmParams(rng.normal(0, 5, (4, 3, 2)), rng.normal(0, 5, (4, 3, 3)), rng.normal(0, 5, (4, 3)))
        state = LstmState(rng.uniform(-1, 1, 3), rng.normal(0, 10, 3))
        for _ in range(5):
            state = lstm_step(params, rng.normal(0, 10, 2), state)
            assert np.all(np.abs(state.h) <= 1.0)


class TestBlstm:
    def test_zero_weights_single_window(self):
        out = blstm_channel(LstmParams.zeros(3, 2), LstmParams.zeros(3, 2), np.array([[1.0, 2.0]]))
        np.testing.assert_allclose(out, 0.5, atol=1e-15)
        assert out.shape == (6,)

    def test_palindrome_symmetry(self):
        rng = np.random.default_rng(2)
        params = LstmParams(rng.normal(size=(4, 2, 3)), rng.normal(size=(4, 2, 2)), rng.normal(size=(4, 2)))
        a, b = rng.normal(size=3), rng.normal(size=3)
        windows = np.stack([a, b, a])
        out = blstm_channel(params, params, windows).reshape(3, 2, 2)  # (t, direction, h)
        for t in range(3):
            np.testing.assert_allclose(out[t, 0], out[2 - t, 1], atol=1e-14)

    def test_two_step_hand_unroll(self):
        rng = np.random.default_rng(3)
        pf, pb = random_scalars(rng), random_scalars(rng)
        x = [0.4, -1.1]
        h1, c1 = scalar_lstm(pf, x[0], 0.0, 0.0)
        h2, _ = scalar_lstm(pf, x[1], h1, c1)
        b2, d2 = scalar_lstm(pb, x[1], 0.0, 0.0)
        b1, _ = scalar_lstm(pb, x[0], b2, d2)
        expected = [sig(h1), sig(b1), sig(h2), sig(b2)]
        out = blstm_channel(params_from_scalars(pf), params_from_scalars(pb), np.array([[x[0]], [x[1]]]))
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            blstm_channel(LstmParams.zeros(1, 2), LstmParams.zeros(1, 2), np.zeros((0, 2)))


class TestConcat:
    def test_copies(self):
        np.testing.assert_array_equal(concat_features([(1, 2)] * 6), [1, 2] * 6)

    def test_channel_order(self):
        out = concat_features([np.full(3, i) for i in range(1, 7)])
        np.testing.assert_array_equal(out.reshape(6, 3)[:, 0], [1, 2, 3, 4, 5, 6])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            concat_features([np.zeros(4)] * 5 + [np.zeros(2)])


class TestAttention:
    def test_zero_query_key_is_mean(self):
        f = np.array([1.0, 4.0, -2.0, 0.5])
        params = AttentionParams(np.zeros((4, 4)), np.zeros((4, 4)), np.eye(4))
        np.testing.assert_allclose(attention(params, f), np.full(4, f.mean()), atol=1e-15)

    def test_scalar(self):
        params = AttentionParams([[2.0]], [[-3.0]], [[0.7]])
        assert attention(params, [1.5])[0] == pytest.approx(0.7 * 1.5, abs=1e-15)

    def test_closed_form_2x2(self):
        rng = np.random.default_rng(8)
        Wq, Wk, Wv = rng.normal(size=(3, 2, 2))
        f = rng.normal(size=2)
        q, k, v = Wq @ f, Wk @ f, Wv @ f
        expected = []
        for i in range(2):
            s0, s1 = q[i] * k[0] / math.sqrt(2), q[i] * k[1] / math.sqrt(2)
            w0 = 1.0 / (1.0 + math.exp(s1 - s0))
            expected.append(w0 * v[0] + (1 - w0) * v[1])
        np.testing.assert_allclose(attention(AttentionParams(Wq, Wk, Wv), f), expected, atol=1e-14)

    def test_rejects_non_positive_dk(self):
        with pytest.raises(ValueError):
            AttentionParams(np.eye(2), np.eye(2), np.eye(2), d_k=0.0)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 12))
    @settings(max_examples=50, deadline=None)
    def test_output_in_hull_of_values(self, seed, d):
        rng = np.random.default_rng(seed)
        params = AttentionParams(*rng.normal(0, 3, (3, d, d)))
        f = rng.normal(size=d)
        v = params.Wv @ f
        out = attention(params, f)
        assert np.all(out >= v.min() - 1e-12) and np.all(out <= v.max() + 1e-12)


class TestSoftmax:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.floats(0.01, 200))
    @settings(max_examples=80, deadline=None)
    def test_rows_are_distributions(self, seed, d, spread):
        x = np.random.default_rng(seed).normal(0, spread, (d, d))
        s = softmax(x, axis=1)
        assert np.all(s >= 0)
        assert np.max(np.abs(s.sum(axis=1) - 1.0)) <= 1e-12


class TestClassifier:
    def test_zero_weights_uniform(self):
        params = ClassifierParams(np.zeros((5, 3)), np.zeros(5))
        y_hat, loss = classify_loss(params, [1.0, 2.0, 3.0], np.eye(5)[2])
        np.testing.assert_allclose(y_hat, 0.5)
        assert loss == pytest.approx(math.log(5), abs=1e-14)

    def test_equal_logits_two_classes(self):
        params = ClassifierParams(np.ones((2, 2)), np.zeros(2))
        assert classify_loss(params, [0.3, -1.2], [0, 1])[1] == pytest.approx(math.log(2), abs=1e-14)

    def test_direct_formula_three_classes(self):
        rng = np.random.default_rng(4)
        W, b, f = rng.normal(size=(3, 4)), rng.normal(size=3), rng.normal(size=4)
        y_hat = [sig(sum(W[i, j] * f[j] for j in range(4)) + b[i]) for i in range(3)]
        expected = -(y_hat[1] - math.log(sum(math.exp(v) for v in y_hat)))
        out_hat, loss = classify_loss(ClassifierParams(W, b), f, [0, 1, 0])
        np.testing.assert_allclose(out_hat, y_hat, atol=1e-14)
        assert loss == pytest.approx(expected, abs=1e-13)

    def test_label_must_be_one_hot(self):
        params = ClassifierParams(np.zeros((3, 2)), np.zeros(3))
        for bad in ([0, 0, 0], [1, 1, 0], [0.5, 0.5, 0], [1, 0]):
            with pytest.raises(ValueError):
                classify_loss(params, [1.0, 1.0], bad)

    def test_inverted_dropout_scaling(self):
        params = ClassifierParams(np.array([[1.0, 1.0]]), np.zeros(1), p=0.5)
        y_hat, _ = classify_loss(params, [1.0, 3.0], [1], dropout_mask=[1.0, 0.0])
        assert y_hat[0] == pytest.approx(sig(2.0))

    def test_dropout_rate_bounds(self):
        with pytest.raises(ValueError):
            ClassifierParams(np.zeros((2, 2)), np.zeros(2), p=1.0)


def tiny(seed, h=2, n=2, T=3, n_c=3):
    rng = np.random.default_rng(seed)
    dims = Dims(h, n, T, n_c)
    net = init_network(dims, rng)
    x = rng.standard_normal((6, n, T))
    y = np.eye(n_c)[rng.integers(n_c)]
    return net, x, y


class TestNetwork:
    def test_forward_matches_reference_operations(self):
        net, x, y = tiny(0)
        per_channel = [blstm_channel(net.lstm(c, 0), net.lstm(c, 1), x[c]) for c in range(6)]
        f_blstm = concat_features(per_channel)
        f_att = attention(net.attention, f_blstm)
        _, loss = classify_loss(net.classifier, f_att, y)
        res = forward(net, x, y)
        np.testing.assert_allclose(res.f_blstm, f_blstm, atol=1e-14)
        np.testing.assert_allclose(res.f_att, f_att, atol=1e-13)
        assert res.loss == pytest.approx(loss, abs=1e-13)

    def test_forward_deterministic(self):
        net, x, y = tiny(1)
        a, b = forward(net, x, y), forward(net, x, y)
        assert a.loss == b.loss
        np.testing.assert_array_equal(a.f_att, b.f_att)

    def test_initial_state_used(self):
        rng = np.random.default_rng(6)
        net = init_network(Dims(2, 2, 3, 2), rng, random_initial_state=True)
        x = rng.standard_normal((6, 2, 3))
        expected = blstm_channel(
            net.lstm(4, 0),
            net.lstm(4, 1),
            x[4],
            LstmState(net.h0[4, 0], net.c0[4, 0]),
            LstmState(net.h0[4, 1], net.c0[4, 1]),
        )
        np.testing.assert_allclose(forward(net, x).f_blstm.reshape(6, -1)[4], expected, atol=1e-14)

    def test_zero_network_bias_gradients(self):
        dims = Dims(1, 1, 2, 2)
        d = dims.d
        z = lambda *s: np.zeros(s)  # noqa: E731
        net = AblstmNetwork(
            dims, z(6, 2, 4, 1, 2), z(6, 2, 4, 1, 1), z(6, 2, 4, 1),
            AttentionParams(z(d, d), z(d, d), z(d, d)), ClassifierParams(z(2, d), z(2)),
        )
        x = np.random.default_rng(0).standard_normal((6, 1, 2))
        _, grads = loss_and_grads(net, x, [1, 0])
        eps = 1e-5
        for idx in range(2):
            up, down = net.copy(), net.copy()
            up.classifier.b[idx] += eps
            down.classifier.b[idx] -= eps
            fd = (forward(up, x, [1, 0]).loss - forward(down, x, [1, 0]).loss) / (2 * eps)
            assert abs(grads["bfc"][idx] - fd) < 1e-5

    def test_gradient_check_seed_7(self):
        net, x, y = tiny(7, h=1, n=1, T=3, n_c=2)
        assert gradient_check(net, x, y) < 1e-4

    def test_gradient_check_three_point_stencil(self):
        net, x, y = tiny(12, h=1, n=2, T=2, n_c=3)
        assert gradient_check(net, x, y, 1e-4, points=3) < 1e-3

    def test_gradient_check_preconditions(self):
        net, x, y = tiny(0)
        with pytest.raises(ValueError):
            gradient_check(net, x, y, epsilon=1e-2)
        with pytest.raises(ValueError):
            gradient_check(net, x, y, points=4)
        big, bx, by = tiny(0, h=4, n=1, T=2, n_c=2)
        with pytest.raises(ValueError):
            gradient_check(big, bx, by)
        net.classifier.p = 0.3
        with pytest.raises(ValueError):
            gradient_check(net, x, y)

    def test_dropout_gradients(self):
        net, x, y = tiny(9, h=1, n=1, T=2, n_c=2)
        net.classifier.p = 0.5
        mask = (np.arange(net.dims.d) % 2).astype(float)
        _, grads = loss_and_grads(net, x, y, mask)
        eps = 1e-5
        i, j = 1, 3
        up, down = net.copy(), net.copy()
        up.classifier.W[i, j] += eps
        down.classifier.W[i, j] -= eps
        fd = (forward(up, x, y, mask).loss - forward(down, x, y, mask).loss) / (2 * eps)
        assert grads["Wfc"][i, j] == pytest.approx(fd, rel=1e-6, abs=1e-10)

    def test_training_reduces_loss(self):
        rng = np.random.default_rng(21)
        dims = Dims(2, 2, 4, 4)
        prototypes = rng.normal(0, 1.5, (4, 6, 2, 4))
        inputs, labels = [], []
        for cls in range(4):
            for _ in range(3):
                inputs.append(prototypes[cls] + rng.normal(0, 0.1, (6, 2, 4)))
                labels.append(np.eye(4)[cls])
        net = init_network(dims, rng, random_initial_state=True)
        history = train(net, inputs, labels, steps=10, learning_rate=0.5, rng=rng)
        assert len(history) == 11
        assert history[10] < history[0]
        assert all(b < a for a, b in zip(history, history[1:]))

    def test_checkpoint_round_trip(self, tmp_path):
        net, x, y = tiny(3)
        path = tmp_path / "m.json"
        net.save(path)
        loaded = AblstmNetwork.load(path)
        assert loaded.dims == net.dims
        assert forward(loaded, x, y).loss == forward(net, x, y).loss

    def test_checkpoint_kind_checked(self):
        with pytest.raises(ValueError):
            AblstmNetwork.from_dict({"kind": "template"})

    def test_window_shape_checked(self):
        net, x, _ = tiny(0)
        with pytest.raises(ValueError):
            forward(net, x[:, :1])


class TestExtract:
    def test_template_length_and_role(self):
        net, _, _ = tiny(0, h=1, n=2, T=10, n_c=2)
        t = np.arange(45)
        signal = GaitSignal(np.stack([np.sin(t / (k + 2)) for k in range(6)]))
        tpl = extract_template(net, signal, Role.IDENTIFICATION)
        assert tpl.n == net.dims.d and tpl.role is Role.IDENTIFICATION

    def test_short_signal(self):
        net, _, _ = tiny(0, h=1, n=3, T=10, n_c=2)
        with pytest.raises(SegmentationError):
            extract_template(net, GaitSignal(np.ones((6, 25))))
