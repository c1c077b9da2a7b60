
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from xlstm_trader.errors import CheckpointError, ContractError, DimensionError, DomainError, NonFiniteError
from xlstm_trader.numerics import (
    AdamState,
    Tensor,
    adam_step,
    backward,
    clamp,
    clip_grad_norm,
    concat,
    elementwise,
    exp,
    gelu,
    gradient_check,
    layernorm,
    linalg,
    linear,
    load_checkpoint,
    log,
    matmul,
    maximum,
    minimum,
    mul,
    no_grad,
    outer,
    save_checkpoint,
    sigmoid,
    softplus,
    square,
    stack,
    tanh,
    tmean,
    tsum,
    zero_grad,
)

GELU_1 = 0.8413447460685429  # 0.5 * (1 + erf(1 / sqrt(2))) via math.erf


def leaf(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


# --- Tensor contract -------------------------------------------------------

@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_tensor_rejects_non_finite(bad):
    with pytest.raises(NonFiniteError):
        Tensor([1.0, bad])


def test_operation_producing_overflow_is_rejected():
    with pytest.raises(NonFiniteError):
        exp(Tensor([1000.0]))


def test_tensor_shape_and_grad_shape():
    x = leaf(np.ones((2, 3)))
    backward(tsum(mul(x, x)))
    assert x.shape == (2, 3) and x.size == 6
    assert x.grad.shape == x.shape


# --- elementwise -----------------------------------------------------------

def test_gelu_examples():
    assert gelu(Tensor([0.0])).data[0] == 0.0
    assert gelu(Tensor([1.0])).data[0] == pytest.approx(GELU_1, abs=1e-15)
    assert elementwise("gelu", Tensor([1.0])).data[0] == pytest.approx(0.841345, abs=1e-6)


def test_sigmoid_at_zero():
    assert sigmoid(Tensor([0.0])).data[0] == 0.5


def test_elementwise_dispatch_max_and_clamp():
    x = Tensor([-1.0, 0.5, 3.0])
    np.testing.assert_array_equal(elementwise("max_with", x, 0.0).data, [0.0, 0.5, 3.0])
    np.testing.assert_array_equal(elementwise("clamp", x, (0.0, 1.0)).data, [0.0, 0.5, 1.0])
    with pytest.raises(ContractError):
        elementwise("cosh", x)


def test_broadcast_mismatch_is_dimension_error():
    with pytest.raises(DimensionError):
        maximum(Tensor(np.ones(3)), Tensor(np.ones(2)))
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones(4))


def test_subgradient_zero_at_clamp_bounds():
    x = leaf([0.0, 0.5, 1.0])
    backward(tsum(clamp(x, 0.0, 1.0)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_max_tie_sends_gradient_to_first_operand():
    a, b = leaf([1.0]), leaf([1.0])
    backward(tsum(maximum(a, b)))
    assert a.grad[0] == 1.0 and b.grad[0] == 0.0


# --- linalg ----------------------------------------------------------------

def test_matmul_identity():
    A = np.array([[1.5, -2.0], [0.25, 4.0]])
    np.testing.assert_array_equal(matmul(Tensor(np.eye(2)), Tensor(A)).data, A)


def test_matmul_hand_example():
    out = linalg("matmul", Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
    np.testing.assert_array_equal(out.data, [[17.0], [39.0]])


def test_outer_basis():
    np.testing.assert_array_equal(outer(Tensor([1.0, 0.0]), Tensor([0.0, 1.0])).data, [[0.0, 1.0], [0.0, 0.0]])


def test_matmul_nonconforming():
    with pytest.raises(DimensionError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_linalg_dispatch_reductions():
    x = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert linalg("sum", x).data == 10.0
    assert linalg("mean", x).data == 2.5
    np.testing.assert_array_equal(linalg("concat", [x, x], axis=0).data.shape, (4, 2))


@given(arrays(np.float64, (3, 7), elements=st.floats(-50, 50)))
def test_layernorm_standardizes_rows(x):
    # rows with (near) zero spread are excluded: normalization is undefined there
    if np.min(np.std(x, axis=1)) < 1e-3:
        return
    d = x.shape[1]
    y = layernorm(Tensor(x), Tensor(np.ones(d)), Tensor(np.zeros(d)), eps=0.0).data
    np.testing.assert_allclose(y.mean(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(y.var(axis=1), 1.0, atol=1e-10)


def test_layernorm_zero_length_axis():
    with pytest.raises(DomainError):
        layernorm(Tensor(np.zeros((2, 0))), Tensor(np.zeros(0)), Tensor(np.zeros(0)))


# --- backward --------------------------------------------------------------

def test_backward_sum_is_ones():
    x = leaf([0.3, -1.0, 2.0])
    backward(tsum(x))
    np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])


def test_backward_square_example():
    x = leaf([1.0, 2.0])
    backward(tsum(mul(x, x)))
    np.testing.assert_allclose(x.grad, [2.0, 4.0], rtol=1e-12)
    assert gradient_check(lambda t: tsum(mul(t, t)), Tensor([1.0, 2.0])) < 1e-9


def test_backward_sigmoid_times_constant():
    w = leaf([0.0])
    backward(tsum(mul(sigmoid(w), 3.0)))
    assert w.grad[0] == pytest.approx(0.75, abs=1e-15)


def test_backward_rejects_non_scalar():
    with pytest.raises(ContractError):
        backward(leaf([1.0, 2.0]))


def test_unreachable_input_gets_zero_grad():
    x, y = leaf([1.0]), leaf([5.0, 6.0])
    backward(tsum(x), inputs=[x, y])
    np.testing.assert_array_equal(y.grad, [0.0, 0.0])


@given(arrays(np.float64, 4, elements=st.floats(-2, 2)))
def test_fan_out_accumulates(values):
    x = leaf(values)
    backward(tsum(add_paths(x)))
    g_both = x.grad.copy()
    x1, x2 = leaf(values), leaf(values)
    backward(tsum(tanh(x1)))
    backward(tsum(square(x2)))
    np.testing.assert_allclose(g_both, x1.grad + x2.grad, rtol=1e-13, atol=1e-15)


def add_paths(x):
    return tanh(x) + square(x)


def test_no_grad_records_nothing():
    x = leaf([1.0])
    with no_grad():
        y = mul(x, 2.0)
    assert not y.requires_grad


# --- gradient checks for every op -----------------------------------------

UNARY = {
    "exp": exp,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "gelu": gelu,
    "softplus": softplus,
    "square": square,
    "log_of_square_plus_one": lambda t: log(square(t) + 1.0),
    "clamp": lambda t: clamp(t, -1.0, 1.0),
    "mean": lambda t: tmean(t, axis=0),
}


@pytest.mark.parametrize("name", sorted(UNARY))
@given(arrays(np.float64, 5, elements=st.floats(-2, 2)))
def test_unary_gradients(name, x):
    if name == "clamp" and np.min(np.abs(np.abs(x) - 1.0)) < 1e-3:
        return  # finite differences straddle the kink
    w = np.linspace(0.5, 1.5, 5)
    assert gradient_check(lambda t: tsum(mul(UNARY[name](t), w)), Tensor(x)) < 1e-4


@given(arrays(np.float64, (3, 4), elements=st.floats(-2, 2)), arrays(np.float64, (4, 2), elements=st.floats(-2, 2)))
def test_binary_gradients(a, b):
    def through_a(t):
        return tsum(square(matmul(t, Tensor(b))))

    def through_b(t):
        return tsum(tanh(matmul(Tensor(a), t)))

    assert gradient_check(through_a, Tensor(a)) < 1e-4
    assert gradient_check(through_b, Tensor(b)) < 1e-4
    d = Tensor(np.abs(a) + 0.5)
    assert gradient_check(lambda t: tsum(t / d - t * d), Tensor(a)) < 1e-4
    assert gradient_check(lambda t: tsum(d / (square(t) + 1.0)), Tensor(a)) < 1e-4


@given(arrays(np.float64, (2, 6), elements=st.floats(-2, 2)))
def test_layernorm_and_linear_gradients(x):
    rng = np.random.default_rng(0)
    W, b = Tensor(rng.uniform(-1, 1, (3, 6))), Tensor(rng.uniform(-1, 1, 3))
    scale, shift = Tensor(rng.uniform(0.5, 1.5, 6)), Tensor(rng.uniform(-1, 1, 6))

    def f(t):
        return tsum(square(linear(layernorm(t, scale, shift), W, b)))

    assert gradient_check(f, Tensor(x)) < 1e-4
    assert gradient_check(lambda s: tsum(square(layernorm(Tensor(x), s, shift))), scale) < 1e-4
    assert gradient_check(lambda w: tsum(square(linear(Tensor(x), w, b))), W) < 1e-4


@given(arrays(np.float64, (3, 2), elements=st.floats(-2, 2)))
def test_structural_gradients(x):
    def f(t):
        parts = concat([t, square(t)], axis=1)
        stacked = stack([parts, tanh(parts)], axis=0)
        return tsum(mul(stacked[1, :, 1:3], stacked[0, :, 0:2])) + tsum(t.reshape(6)[::2])

    assert gradient_check(f, Tensor(x)) < 1e-4
    assert gradient_check(lambda t: tsum(outer(t[0], t[1])), Tensor(x)) < 1e-4
    assert gradient_check(lambda t: tsum(minimum(t, 0.3) + maximum(t, -0.3)), Tensor(x)) < 1e-4 or \
        np.min(np.abs(np.abs(x) - 0.3)) < 1e-3


def test_gradient_check_linear_and_contract():
    x = Tensor(np.random.default_rng(1).uniform(-2, 2, 6))
    assert gradient_check(lambda t: tsum(t), x) < 1e-10
    with pytest.raises(ContractError):
        gradient_check(lambda t: t, x)
    with pytest.raises(ContractError):
        gradient_check(lambda t: tsum(t), x, h=1e-2)


def test_operations_are_deterministic():
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal((8, 8)), rng.standard_normal((8, 8))
    r1 = gelu(matmul(Tensor(a), Tensor(b))).data
    r2 = gelu(matmul(Tensor(a), Tensor(b))).data
    assert r1.tobytes() == r2.tobytes()


# --- Adam ------------------------------------------------------------------

def test_adam_zero_grad_is_fixed_point():
    p = leaf([0.5, -1.25])
    state = AdamState.for_params([p])
    zero_grad([p])
    adam_step([p], state)
    np.testing.assert_array_equal(p.data, [0.5, -1.25])
    assert state.step_count == 1


def test_adam_first_step_magnitude():
    p = leaf([2.0])
    state = AdamState.for_params([p], alpha=0.001, epsilon=1e-8)
    p.grad = np.array([0.3])
    adam_step([p], state)
    assert p.data[0] - 2.0 == pytest.approx(-0.0009999999666666678, rel=1e-9)


def test_adam_second_step_not_larger():
    p = leaf([2.0])
    state = AdamState.for_params([p], alpha=0.001)
    p.grad = np.array([0.3])
    adam_step([p], state)
    d1 = p.data[0] - 2.0
    before = p.data[0]
    p.grad = np.array([0.3])
    adam_step([p], state)
    d2 = p.data[0] - before
    assert abs(d2) <= abs(d1) * (1 + 1e-6)
    assert state.step_count == 2


def test_adam_missing_grad():
    p = leaf([1.0])
    with pytest.raises(ContractError):
        adam_step([p], AdamState.for_params([p]))


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=6))
def test_adam_moments_match_param_shapes(grads):
    p = leaf(np.zeros(len(grads)))
    state = AdamState.for_params([p])
    p.grad = np.array(grads)
    adam_step([p], state)
    assert state.first_moment[0].shape == p.shape == state.second_moment[0].shape
    assert np.all(np.isfinite(p.data))


def test_clip_grad_norm():
    a, b = leaf([0.0]), leaf([0.0, 0.0])
    a.grad, b.grad = np.array([3.0]), np.array([0.0, 4.0])
    assert clip_grad_norm([a, b], 1.0) == 5.0
    np.testing.assert_allclose(np.concatenate([a.grad, b.grad]), [0.6, 0.0, 0.8])


# --- checkpoints -----------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    arrays_in = {"a.W": np.arange(6.0).reshape(2, 3), "scalar": np.array(2.5), "empty": np.zeros((0, 3))}
    save_checkpoint(tmp_path / "c.xltr", arrays_in)
    out = load_checkpoint(tmp_path / "c.xltr")
    assert list(out) == list(arrays_in)
    for k in arrays_in:
        assert out[k].shape == arrays_in[k].shape
        np.testing.assert_array_equal(out[k], arrays_in[k])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.xltr"
    path.write_bytes(b"nope")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    save_checkpoint(tmp_path / "ok.xltr", {"x": np.ones(3)})
    data = (tmp_path / "ok.xltr").read_bytes()
    (tmp_path / "trunc.xltr").write_bytes(data[:-4])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "trunc.xltr")
