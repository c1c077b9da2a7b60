import numpy as np
import pytest

from xlstm_trader import kernels
from xlstm_trader.kernels import _fallback

needs_compiled = pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")


def _inputs(seed, B=3, d=4, H=2):
    rng = np.random.default_rng(seed)
    dh = d // H
    u = lambda *s: rng.uniform(-2, 2, size=s)
    return {
        "slstm": (u(B, 4, d), u(B, d), np.abs(u(B, d)) + 0.1, u(B, d)),
        "mlstm": (u(B, d), u(B, d), u(B, d), u(B, H), u(B, H), u(B, d), u(B, H, dh, dh), u(B, H, dh), u(B, H)),
        "lstm": (u(B, 4, d), u(B, d)),
    }, rng


def test_backend_selection_roundtrip():
    assert "python" in kernels.available_backends()
    before = kernels.backend_name()
    with kernels.use_backend("python"):
        assert kernels.impl is _fallback
    assert kernels.backend_name() == before
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_compiled_matches_fallback(seed):
    from xlstm_trader.kernels import _ckernels as ck

    ins, rng = _inputs(seed)
    for name in ("slstm", "mlstm", "lstm"):
        fwd_py = getattr(_fallback, f"{name}_forward")(*ins[name])
        fwd_c = getattr(ck, f"{name}_forward")(*ins[name])
        for a, b in zip(fwd_py, fwd_c):
            np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-13)
    grads = {
        "slstm": [rng.standard_normal(ins["slstm"][1].shape) for _ in range(3)],
        "mlstm": [rng.standard_normal(s) for s in (ins["mlstm"][0].shape, ins["mlstm"][6].shape, ins["mlstm"][7].shape)],
        "lstm": [rng.standard_normal(ins["lstm"][1].shape) for _ in range(2)],
    }
    for name in ("slstm", "mlstm", "lstm"):
        bw_py = getattr(_fallback, f"{name}_backward")(*ins[name], *grads[name])
        bw_c = getattr(ck, f"{name}_backward")(*ins[name], *grads[name])
        for a, b in zip(bw_py, bw_c):
            np.testing.assert_allclose(b, a, rtol=1e-11, atol=1e-12)


@needs_compiled
def test_compiled_is_deterministic():
    from xlstm_trader.kernels import _ckernels as ck

    ins, _ = _inputs(11)
    a = ck.mlstm_forward(*ins["mlstm"])
    b = ck.mlstm_forward(*ins["mlstm"])
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))


def test_mlstm_single_step_outer_product(backend):
    # one head, dh = 2: i~ = 0, f~ = 0 from a zero state, q = k = e1, v = e2
    e1, e2 = np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])
    zero = np.zeros((1, 1))
    h, C, n, m = kernels.impl.mlstm_forward(
        e1, e1, e2, zero, zero, np.full((1, 2), 40.0), np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2)), zero
    )
    np.testing.assert_array_equal(C[0, 0], np.outer([0.0, 1.0], [1.0, 0.0]))
    np.testing.assert_array_equal(n[0, 0], [1.0, 0.0])
    np.testing.assert_array_equal(m, zero)
    np.testing.assert_allclose(h[0], [0.0, 1.0], atol=1e-15)  # sigmoid(40) rounds to 1


def test_lstm_hand_example(backend):
    pre = np.zeros((1, 4, 1))
    pre[0, 2, 0] = 40.0  # tanh(40) == 1.0 in f64
    h, c = kernels.impl.lstm_forward(pre, np.zeros((1, 1)))
    assert c[0, 0] == 0.5
    assert h[0, 0] == pytest.approx(0.23105857863000487, abs=1e-15)
