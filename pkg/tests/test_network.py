import math

import numpy as np
import pytest

from bangla_toxic.errors import ArgumentError, FormatError, LookupIndexError, ShapeError, StateError
from bangla_toxic.network import (
    BiLstmLayer,
    DenseLayer,
    EmbeddingLayer,
    LstmDirectionParams,
    ModelConfig,
    bilstm_forward,
    default_parameter_count,
    dense_forward,
    embed_forward,
    init_params,
    load_params,
    lstm_cell_backward,
    lstm_cell_forward,
    model_backward,
    model_forward,
    predict,
    save_params,
)
from bangla_toxic.tensor_core import SeededRng, finite_difference_grad

from conftest import numeric_param_grads, rel_error, toy_model


class TestEmbedding:
    def test_lookup(self):
        table = np.arange(12, dtype=float).reshape(4, 3)
        table[0] = 0
        out = embed_forward(np.array([[0, 3], [2, 1]]), EmbeddingLayer(table))
        np.testing.assert_array_equal(out[0, 0], np.zeros(3))
        np.testing.assert_array_equal(out[0, 1], table[3])
        np.testing.assert_array_equal(out[1, 0], table[2])

    def test_paper_shape(self):
        p = init_params(ModelConfig(vocab_size=50), SeededRng(0))
        out = embed_forward(np.zeros((7, 80), dtype=int), p.embedding)
        assert out.shape == (7, 80, 200)

    def test_out_of_range(self):
        with pytest.raises(LookupIndexError, match="9"):
            embed_forward(np.array([[1, 9]]), EmbeddingLayer(np.zeros((4, 2))))


class TestLstmCell:
    def _scalar(self):
        return LstmDirectionParams(
            W=np.array([[0.5], [-0.5], [1.0], [2.0]]),
            U=np.array([[0.1], [0.2], [0.3], [0.4]]),
            b=np.array([0.05, 0.1, -0.1, 0.0]),
        )

    def test_all_zero(self):
        p = LstmDirectionParams(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
        h, c, _ = lstm_cell_forward(np.zeros((1, 3)), np.zeros((1, 2)), np.zeros((1, 2)), p)
        assert np.all(h == 0) and np.all(c == 0)

    def test_scalar_hand_trace(self):
        # z = W x + U h + b with x=1, h=0.5, c=-0.2, evaluated gate by gate
        sig = lambda z: 1 / (1 + math.exp(-z))
        i, f, o = sig(0.5 + 0.05 + 0.05), sig(-0.5 + 0.1 + 0.1), sig(1.0 + 0.15 - 0.1)
        g = math.tanh(2.0 + 0.2)
        c_exp = f * -0.2 + i * g
        h_exp = o * math.tanh(c_exp)
        h, c, _ = lstm_cell_forward(np.array([[1.0]]), np.array([[0.5]]), np.array([[-0.2]]), self._scalar())
        assert h[0, 0] == pytest.approx(h_exp, abs=1e-14)
        assert c[0, 0] == pytest.approx(c_exp, abs=1e-14)
        # frozen values from the trace above
        assert h[0, 0] == pytest.approx(0.3679247195297146, abs=1e-14)
        assert c[0, 0] == pytest.approx(0.5448832085236348, abs=1e-14)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            lstm_cell_forward(np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 1)), self._scalar())

    def test_cell_gradients(self):
        r = np.random.default_rng(4)
        D, H, B = 3, 2, 2
        p = LstmDirectionParams(r.normal(size=(4 * H, D)), r.normal(size=(4 * H, H)), r.normal(size=4 * H))
        x, h0, c0 = r.normal(size=(B, D)), r.normal(size=(B, H)), r.normal(size=(B, H))
        wh, wc = r.normal(size=(B, H)), r.normal(size=(B, H))

        def loss():
            h, c, _ = lstm_cell_forward(x, h0, c0, p)
            return float(np.sum(wh * h) + np.sum(wc * c))

        _, _, cache = lstm_cell_forward(x, h0, c0, p)
        dx, dh0, dc0, g = lstm_cell_backward(wh, wc, cache, p)
        for arr, ana in ((p.W, g.W), (p.U, g.U), (p.b, g.b), (x, dx), (h0, dh0), (c0, dc0)):
            def f(v, arr=arr):
                saved = arr.copy()
                arr[...] = v
                out = loss()
                arr[...] = saved
                return out

            num = finite_difference_grad(f, arr.copy(), 1e-5)
            assert np.max(rel_error(ana, num)) < 1e-4


class TestBiLstm:
    def _layer(self, seed, D=3, H=2, seqs=True, zero_bias=False):
        r = SeededRng(seed)
        from bangla_toxic.network import _direction

        layer = BiLstmLayer(_direction(H, D, r), _direction(H, D, r), seqs)
        if not zero_bias:
            rng = np.random.default_rng(seed)
            layer.forward.b[...] = rng.normal(size=4 * H)
            layer.backward.b[...] = rng.normal(size=4 * H)
        return layer

    def test_zero_input_zero_bias(self):
        out, _ = bilstm_forward(np.zeros((2, 5, 3)), self._layer(0, zero_bias=True))
        assert np.all(out == 0)

    def test_backward_direction_is_reversed_forward_cell(self):
        layer = self._layer(1)
        x = np.random.default_rng(1).normal(size=(2, 6, 3))
        out, _ = bilstm_forward(x, layer)
        H = 2
        h, c = np.zeros((2, H)), np.zeros((2, H))
        rev = []
        for t in range(5, -1, -1):
            h, c, _ = lstm_cell_forward(x[:, t], h, c, layer.backward)
            rev.append(h)
        np.testing.assert_allclose(out[:, :, H:], np.stack(rev[::-1], axis=1), rtol=1e-12, atol=1e-15)

    def test_reversal_swaps_directions(self):
        layer = self._layer(2, seqs=False)
        swapped = BiLstmLayer(layer.backward, layer.forward, False)
        x = np.random.default_rng(2).normal(size=(3, 5, 3))
        a, _ = bilstm_forward(x, layer)
        b, _ = bilstm_forward(x[:, ::-1], swapped)
        np.testing.assert_allclose(a[:, :2], b[:, 2:], rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(a[:, 2:], b[:, :2], rtol=1e-12, atol=1e-15)

    def test_paper_widths(self):
        p = init_params(ModelConfig(vocab_size=10), SeededRng(0))
        x = np.random.default_rng(0).normal(size=(2, 80, 200))
        s1, _ = bilstm_forward(x, p.bilstm1)
        s2, _ = bilstm_forward(s1, p.bilstm2)
        assert s1.shape == (2, 80, 128) and s2.shape == (2, 64)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            bilstm_forward(np.zeros((1, 4, 5)), self._layer(0))


class TestDense:
    def test_zero_relu(self):
        layer = DenseLayer(np.ones((3, 2)), np.zeros(3), "relu")
        np.testing.assert_array_equal(dense_forward(np.zeros((1, 2)), layer), np.zeros((1, 3)))

    def test_zero_sigmoid(self):
        layer = DenseLayer(np.ones((1, 2)), np.zeros(1), "sigmoid")
        assert dense_forward(np.zeros((1, 2)), layer)[0, 0] == 0.5

    def test_hand_case(self):
        layer = DenseLayer(np.array([[2.0, -1.0]]), np.array([0.5]), "relu")
        assert dense_forward(np.array([[3.0, 1.0]]), layer)[0, 0] == 2 * 3 - 1 + 0.5

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            dense_forward(np.zeros((1, 3)), DenseLayer(np.ones((1, 2)), np.zeros(1), "relu"))


class TestModel:
    def test_zero_propagation(self):
        for seed in range(10):
            p = init_params(ModelConfig(vocab_size=20, max_len=12, embed_dim=8, lstm1_units=4,
                                        lstm2_units=3, dense_units=5), SeededRng(seed))
            probs, _ = model_forward(np.zeros((3, 12), dtype=int), p)
            assert np.all(probs == 0.5)

    def test_output_range_and_shape(self):
        p = init_params(ModelConfig(vocab_size=30, max_len=10, embed_dim=6, lstm1_units=4,
                                    lstm2_units=3, dense_units=5), SeededRng(1))
        x = np.random.default_rng(1).integers(0, 32, size=(9, 10))
        probs, _ = model_forward(x, p)
        assert probs.shape == (9,)
        assert np.all((probs > 0) & (probs < 1))

    def test_parameter_count_closed_form(self):
        # embedding 1002*200 + lstm1 2*4*64*(200+64+1) + lstm2 2*4*32*(128+32+1) + 64*65 + 65
        assert default_parameter_count(1000) == 200400 + 135680 + 41216 + 4160 + 65 == 381521
        p = init_params(ModelConfig(vocab_size=1000), SeededRng(0))
        assert p.parameter_count() == 381521

    @pytest.mark.parametrize("seed", range(3))
    def test_gradients_match_finite_differences(self, seed):
        p, x, y = toy_model(seed)
        probs, cache = model_forward(x, p)
        grads = dict(model_backward(x, y, p, cache).arrays())
        numeric = numeric_param_grads(p, x, y, eps=1e-3)
        for name, num in numeric.items():
            ana = grads[name]
            if name == "embedding.table":
                ana, num = ana[1:], num[1:]
            assert np.max(rel_error(ana, num)) < 1e-4, name

    def test_pad_row_gradient_is_zero(self):
        p, x, y = toy_model(0)
        x[:, 0] = 0
        probs, cache = model_forward(x, p)
        g = model_backward(x, y, p, cache)
        assert np.all(g.embedding.table[0] == 0.0)

    def test_duplicated_batch_same_gradient(self):
        p, x, y = toy_model(1)
        g1 = model_backward(x, y, p, model_forward(x, p)[1])
        x2, y2 = np.concatenate([x, x]), np.concatenate([y, y])
        g2 = model_backward(x2, y2, p, model_forward(x2, p)[1])
        for (_, a), (_, b) in zip(g1.arrays(), g2.arrays()):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-16)

    def test_missing_cache(self):
        p, x, y = toy_model(0)
        with pytest.raises(StateError):
            model_backward(x, y, p, None)

    def test_cache_from_other_batch(self):
        p, x, y = toy_model(0)
        _, cache = model_forward(x, p)
        with pytest.raises(StateError):
            model_backward(x[:2], y[:2], p, cache)


class TestPredict:
    @pytest.mark.parametrize("prob,label", [(0.75, 1), (0.25, 0), (0.5, 1)])
    def test_threshold(self, prob, label):
        assert predict(prob) == label

    def test_out_of_range(self):
        with pytest.raises(ArgumentError):
            predict(1.5)


class TestCheckpoint:
    def _params(self):
        p = init_params(ModelConfig(vocab_size=9, max_len=5, embed_dim=4, lstm1_units=3,
                                    lstm2_units=2, dense_units=3), SeededRng(3))
        p.vocab_hash = "ab" * 32
        p.meta["split_seed"] = 77
        return p

    def test_round_trip_bit_exact(self, tmp_path):
        p = self._params()
        save_params(p, tmp_path / "m.bin")
        q = load_params(tmp_path / "m.bin")
        assert q.config == p.config and q.vocab_hash == p.vocab_hash and q.meta["split_seed"] == 77
        for (n1, a), (n2, b) in zip(p.arrays(), q.arrays()):
            assert n1 == n2 and a.tobytes() == b.tobytes()

    def test_truncated(self, tmp_path):
        path = tmp_path / "m.bin"
        save_params(self._params(), path)
        data = path.read_bytes()
        for cut in (10, len(data) // 2, len(data) - 1):
            path.write_bytes(data[:cut])
            with pytest.raises(FormatError):
                load_params(path)

    def test_wrong_version_names_both(self, tmp_path):
        path = tmp_path / "m.bin"
        save_params(self._params(), path)
        data = bytearray(path.read_bytes())
        data[8:12] = (7).to_bytes(4, "little")
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match=r"version 7.*version 1"):
            load_params(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(b"\0" * 200)
        with pytest.raises(FormatError):
            load_params(path)
