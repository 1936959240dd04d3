import math

import numpy as np
import pytest

from bangla_toxic.dataset import synth_corpus
from bangla_toxic.errors import ArgumentError, ConfigError, NumericError, ShapeError, TrainingError
from bangla_toxic.evaluation import mean_sd
from bangla_toxic.network import ModelConfig, init_params
from bangla_toxic.optim import (
    OptimizerState,
    TrainConfig,
    adam_step,
    bce_loss,
    clip_by_global_norm,
    cross_validate,
    lr_schedule,
    parse_config,
    sgd_momentum_step,
    train,
)
from bangla_toxic.pipeline import encode_comments, vocab_from
from bangla_toxic.tensor_core import SeededRng, finite_difference_grad

from conftest import toy_model

SMALL = dict(embed_dim=16, lstm1=8, lstm2=4, dense=8, batch_size=1024)


def _scalar_model(theta=1.0):
    """A one-parameter ModelParams stand-in: only the output bias is live."""
    p = init_params(ModelConfig(vocab_size=1, max_len=1, embed_dim=1, lstm1_units=1, lstm2_units=1,
                                dense_units=1), SeededRng(0))
    for _, a in p.arrays():
        a[...] = 0.0
    p.output.b[...] = theta
    return p


def _grad_like(p, g):
    grads = p.zeros_like()
    grads.output.b[...] = g
    return grads


class TestBce:
    def test_half_is_ln2(self):
        loss, _ = bce_loss([0.5, 0.5], [1, 0])
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_perfect_prediction_near_zero(self):
        loss, _ = bce_loss([1.0, 0.0], [1, 0])
        assert 0 <= loss <= 1e-11

    def test_gradient(self):
        p = np.array([0.2, 0.7, 0.9, 0.4])
        y = np.array([0, 1, 1, 0])
        _, g = bce_loss(p, y)
        num = finite_difference_grad(lambda v: bce_loss(v, y)[0], p, 1e-6)
        np.testing.assert_allclose(g, num, atol=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            bce_loss([0.5, 0.5], [1])


class TestSgd:
    def test_first_step(self):
        p = _scalar_model(1.0)
        sgd_momentum_step(p, _grad_like(p, 0.5), OptimizerState("sgd_momentum"), lr=0.1, momentum=0.9)
        assert p.output.b[0] == pytest.approx(1.0 - 0.05, abs=1e-15)

    def test_zero_momentum_is_plain_sgd(self):
        p = _scalar_model(1.0)
        st = OptimizerState("sgd_momentum")
        for _ in range(3):
            sgd_momentum_step(p, _grad_like(p, 0.5), st, lr=0.1, momentum=0.0)
        assert p.output.b[0] == pytest.approx(1.0 - 3 * 0.05, abs=1e-15)

    @pytest.mark.parametrize("mu", [0.0, 0.5, 0.9])
    def test_two_steps_accumulate(self, mu):
        p = _scalar_model(0.0)
        st = OptimizerState("sgd_momentum")
        for _ in range(2):
            sgd_momentum_step(p, _grad_like(p, 2.0), st, lr=0.01, momentum=mu)
        assert -p.output.b[0] == pytest.approx(0.01 * 2.0 * (2 + mu), abs=1e-15)

    def test_non_finite_raises(self):
        p = _scalar_model(1.0)
        with pytest.raises(NumericError):
            sgd_momentum_step(p, _grad_like(p, np.inf), OptimizerState("sgd_momentum"), lr=0.1)


class TestAdam:
    def test_first_step_is_lr_times_sign(self):
        for g in (0.5, -3.0, 1e-3):
            p = _scalar_model(1.0)
            adam_step(p, _grad_like(p, g), OptimizerState("adam"), lr=0.1)
            assert p.output.b[0] == pytest.approx(1.0 - 0.1 * np.sign(g), abs=1e-6)

    def test_zero_gradient_leaves_params(self):
        p = _scalar_model(1.0)
        before = [a.copy() for _, a in p.arrays()]
        adam_step(p, p.zeros_like(), OptimizerState("adam"), lr=0.1)
        for b, (_, a) in zip(before, p.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_three_step_trace(self):
        p = _scalar_model(1.0)
        st = OptimizerState("adam")
        got = []
        for _ in range(3):
            adam_step(p, _grad_like(p, 0.5), st, lr=0.1)
            got.append(float(p.output.b[0]))
        expected = [0.9000000019999999, 0.8000000040000005, 0.7000000060000005]
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)
        assert st.step == 3


class TestSchedule:
    def test_epoch_zero_is_lr0(self):
        assert lr_schedule(0, 0.1, 50) == 0.1

    def test_value(self):
        assert lr_schedule(10, 0.1, 50) == pytest.approx(0.1 / (1 + 0.1 / 50 * 10), abs=1e-15)
        assert lr_schedule(10, 0.1, 50) == pytest.approx(0.09803921568627451, abs=1e-15)

    def test_monotone(self):
        vals = [lr_schedule(e, 0.1, 50) for e in range(50)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_bad_args(self):
        with pytest.raises(ArgumentError):
            lr_schedule(-1, 0.1, 50)


def test_clip_by_global_norm():
    p = _scalar_model()
    g = _grad_like(p, 10.0)
    assert clip_by_global_norm(g, 1.0) == pytest.approx(10.0)
    assert g.output.b[0] == pytest.approx(1.0)


class TestConfig:
    def test_presets(self):
        a, s = TrainConfig.paper_adam(), TrainConfig.paper_sgd()
        assert (a.lr0, a.epochs, a.batch_size, a.scheduler_enabled) == (1e-5, 100, 1024, False)
        assert (s.lr0, s.momentum, s.epochs, s.scheduler_enabled) == (0.1, 0.9, 50, True)

    def test_parse(self):
        cfg = parse_config("# comment\noptimizer = sgd_momentum\nlr0=0.05  # inline\nscheduler=off\n")
        assert cfg.optimizer == "sgd_momentum" and cfg.lr0 == 0.05 and cfg.scheduler is False

    def test_overrides_win(self):
        assert parse_config("epochs=3", overrides={"epochs": 7, "seed": None}).epochs == 7

    def test_round_trip(self):
        cfg = TrainConfig.paper_sgd(seed=9, clip_norm=5.0)
        assert parse_config(cfg.to_text()) == cfg

    @pytest.mark.parametrize("text", ["bogus=1", "no equals sign", "epochs=abc", "optimizer=rmsprop", "lr0=0"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)


def _corpus(n=32, seed=0):
    comments = synth_corpus(n, SeededRng(seed))
    vocab = vocab_from(comments)
    return comments, vocab, encode_comments(comments, vocab, 80)


class TestTrain:
    def _run(self, cfg, seed=0):
        _, vocab, tr = _corpus()
        model = init_params(cfg.model_config(vocab.size), SeededRng(seed).derive(0))
        return train(model, tr, tr, cfg, vocab=vocab)

    def test_deterministic(self):
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=3, **SMALL)
        (p1, h1), (p2, h2) = self._run(cfg), self._run(cfg)
        assert h1.to_csv() == h2.to_csv()
        for (_, a), (_, b) in zip(p1.arrays(), p2.arrays()):
            assert a.tobytes() == b.tobytes()

    def test_history_shape_and_constant_lr(self):
        cfg = TrainConfig(optimizer="sgd_momentum", lr0=0.1, epochs=4, scheduler=False, **SMALL)
        _, h = self._run(cfg)
        assert len(h) == 4 and h.column("lr") == [0.1] * 4
        assert h.to_csv().splitlines()[0] == "epoch,train_loss,train_acc,val_loss,val_acc,lr"

    def test_scheduled_lr_recorded(self):
        cfg = TrainConfig(optimizer="sgd_momentum", lr0=0.1, epochs=3, **SMALL)
        _, h = self._run(cfg)
        assert h.column("lr") == [lr_schedule(e, 0.1, 3) for e in range(3)]

    def test_input_model_untouched(self):
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=2, **SMALL)
        _, vocab, tr = _corpus()
        model = init_params(cfg.model_config(vocab.size), SeededRng(0))
        before = [a.copy() for _, a in model.arrays()]
        train(model, tr, None, cfg)
        for b, (_, a) in zip(before, model.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_sgd_loss_decreases_by_epoch_ten(self):
        cfg = TrainConfig(optimizer="sgd_momentum", lr0=0.5, epochs=11, **SMALL)
        _, h = self._run(cfg)
        loss = h.column("train_loss")
        assert loss[10] < loss[0]

    def test_empty_training_set(self):
        cfg = TrainConfig(epochs=1, **SMALL)
        model = init_params(cfg.model_config(3), SeededRng(0))
        with pytest.raises(ArgumentError):
            train(model, (np.zeros((0, 80), dtype=int), np.zeros(0, dtype=int)), None, cfg)

    def test_nan_aborts_with_epoch_and_batch(self):
        cfg = TrainConfig(optimizer="adam", epochs=2, batch_size=2, embed_dim=4, lstm1=3, lstm2=2, dense=3,
                          max_len=3)
        p, x, y = toy_model(0)
        p2 = init_params(cfg.model_config(6), SeededRng(0))
        p2.output.W[...] = np.nan
        with pytest.raises(TrainingError, match=r"epoch 0, batch 0"):
            train(p2, (x, y), None, cfg)


class TestCrossValidate:
    def test_every_sample_validated_once(self):
        comments, _, _ = _corpus(20)
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=1, **SMALL)
        res = cross_validate(comments, cfg, k=5)
        assert sum(r.cm.total for r in res.reports) == 20
        assert len(res.histories) == 5

    def test_leave_one_out(self):
        comments, _, _ = _corpus(6)
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=1, **SMALL)
        res = cross_validate(comments, cfg, k=6)
        assert [r.cm.total for r in res.reports] == [1] * 6
        assert all(a in (0.0, 1.0) for a in res.accuracies)

    def test_separable_corpus_gives_zero_sd(self):
        comments, _, _ = _corpus(40, seed=3)
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=25, **SMALL)
        res = cross_validate(comments, cfg, k=5)
        assert res.accuracies == [1.0] * 5
        assert (res.mean_accuracy, res.sd_accuracy) == (1.0, 0.0)

    def test_threads_match_serial(self):
        comments, _, _ = _corpus(20)
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=2, **SMALL)
        a = cross_validate(comments, cfg, k=4)
        b = cross_validate(comments, cfg, k=4, threads=4)
        assert [r.cm for r in a.reports] == [r.cm for r in b.reports]

    def test_custom_builders(self):
        comments, _, _ = _corpus(10)
        calls = []

        def vb(part):
            calls.append(len(part))
            return vocab_from(part)

        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=1, **SMALL)
        cross_validate(comments, cfg, k=5, vocab_builder=vb)
        assert calls == [8] * 5

    def test_fold_seeds_differ(self):
        comments, _, _ = _corpus(10)
        cfg = TrainConfig(optimizer="adam", lr0=1e-2, epochs=1, **SMALL)
        seeds = [r.meta["seed"] for r in cross_validate(comments, cfg, k=5).reports]
        assert len(set(seeds)) == 5


def test_mean_sd_of_reported_folds():
    mean, sd = mean_sd([0.9446, 0.9345, 0.9491, 0.9446, 0.9410])
    assert mean == pytest.approx(0.94276, abs=1e-12)
    assert sd == pytest.approx(0.0054376, abs=1e-6)
