import numpy as np
import pytest

from bangla_toxic.network import ModelConfig, init_params
from bangla_toxic.optim import bce_loss
from bangla_toxic.network import model_forward
from bangla_toxic.tensor_core import SeededRng, finite_difference_grad

TOY = ModelConfig(vocab_size=6, max_len=3, embed_dim=4, lstm1_units=3, lstm2_units=2, dense_units=3)


def toy_model(seed: int):
    """Toy-size model with non-zero biases and a visible embedding scale."""
    p = init_params(TOY, SeededRng(seed), embed_scale=0.5)
    rng = np.random.default_rng(seed)
    for name, a in p.arrays():
        if name.endswith(".b"):
            a[...] = rng.normal(scale=0.2, size=a.shape)
    x = rng.integers(0, TOY.vocab_size + 2, size=(5, TOY.max_len))
    y = rng.integers(0, 2, size=5)
    return p, x, y


def rel_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor); the floor only matters
    for entries whose true gradient is below 1e-6."""
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_param_grads(params, x, y, eps=1e-3):
    """Central differences of mean BCE wrt every parameter array."""
    out = {}
    for name, arr in params.arrays():
        def f(v, arr=arr):
            saved = arr.copy()
            arr[...] = v
            loss = bce_loss(model_forward(x, params)[0], y)[0]
            arr[...] = saved
            return loss

        out[name] = finite_difference_grad(f, arr.copy(), eps)
    return out


@pytest.fixture
def rng():
    return SeededRng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
