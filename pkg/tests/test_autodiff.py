import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mmsumm.autodiff import PRIMITIVES, Tape, Tensor, grad_check, ops
from mmsumm.autodiff.probes import primitive_suite, probe
from mmsumm.errors import ContractError, NumericError, ShapeError

@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_every_primitive_passes_gradcheck_at_ten_points(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for _ in range(10):
        fn, point = probe(name, rng)
        assert grad_check(fn, point, h=1e-5) < 1e-4


def test_matmul_identity():
    x = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(ops.matmul(np.eye(2), x).data, x)


def test_softmax_uniform():
    np.testing.assert_allclose(ops.softmax(np.zeros(3)).data, [1 / 3] * 3, atol=1e-15)


def test_cross_entropy_two_class_uniform():
    loss = ops.cross_entropy(np.zeros((1, 2)), [0])
    assert loss.item() == pytest.approx(math.log(2), abs=1e-12)


def test_backward_square_sum():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.mul(x, x))
    grads = tape.backward(loss)
    np.testing.assert_array_equal(grads[x], [2.0, 4.0, 6.0])


def test_tanh_derivative_at_zero():
    x = Tensor([0.0], requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.tanh(x))
    assert tape.backward(loss)[x][0] == 1.0


def test_random_three_layer_composite():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(5, 4))
    w1, w2, w3 = rng.normal(size=(4, 6)), rng.normal(size=(6, 6)), rng.normal(size=(6, 3))

    def fn(x, w1, w2, w3):
        h = ops.tanh(ops.matmul(x, w1))
        h = ops.sigmoid(ops.matmul(h, w2))
        return ops.sum(ops.log_softmax(ops.matmul(h, w3)))

    assert grad_check(fn, [x, w1, w2, w3]) < 1e-4


def test_linear_map_exact():
    rng = np.random.default_rng(1)
    w, x = rng.normal(size=(1, 5)), rng.normal(size=(5, 1))
    assert grad_check(lambda w, x: ops.sum(ops.matmul(w, x)), [w, x]) < 1e-10


def test_softmax_cross_entropy_chain():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(4, 6))
    assert grad_check(lambda z: ops.cross_entropy(ops.log_softmax(z), [1, 0, 5, 2]), [z]) < 1e-4


def test_shared_parameter_gradients_accumulate():
    w = Tensor([[2.0]], requires_grad=True)
    x = Tensor([[3.0]])
    with Tape() as tape:
        loss = ops.sum(ops.add(ops.matmul(x, w), ops.matmul(w, x)))
    assert tape.backward(loss)[w][0, 0] == 6.0


def test_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        ops.matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_unknown_primitive():
    with Tape() as tape, pytest.raises(ContractError):
        tape.forward("convolve", np.zeros(2))


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = ops.tanh(x)
    with pytest.raises(ContractError):
        tape.backward(y)


def test_non_finite_intermediate_reports_node():
    x = Tensor(np.array([1.0, 0.0]), requires_grad=True)
    with Tape() as tape:
        y = ops.mul(x, x)
        with pytest.raises(NumericError) as info, np.errstate(invalid="ignore"):
            ops.scale(y, np.inf)
    assert info.value.node_id == 1


def test_masked_row_is_finite():
    out = ops.softmax(ops.masked_fill(np.zeros((1, 3)), np.ones((1, 3), bool)))
    assert np.all(np.isfinite(out.data))


def test_tape_is_acyclic_and_ordered():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = ops.tanh(ops.mul(x, x))
        ops.sum(ops.add(y, x))
    for node in tape.nodes:
        for t in node.inputs:
            if t.node_id is not None:
                assert t.node_id < node.id


def test_inverted_dropout_expectation():
    x = np.ones((200, 200))
    y = ops.dropout(Tensor(x), 0.25, np.random.default_rng(0)).data
    assert set(np.unique(y)) <= {0.0, 1 / 0.75}
    assert abs(y.mean() - 1.0) < 0.02
    assert ops.dropout(Tensor(x), 0.25, np.random.default_rng(0), training=False).data is x


finite = st.floats(-20, 20, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 5), elements=finite))
def test_softmax_rows_positive_and_normalized(x):
    s = ops.softmax(x).data
    assert np.all(s > 0)
    np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 8), elements=st.floats(-5, 5)))
def test_layer_norm_moments(x):
    x = x + np.random.default_rng(0).normal(size=x.shape)  # avoid constant rows
    y = ops.layer_norm(x).data
    assert np.all(np.abs(y.mean(axis=-1)) < 1e-9)
    var = x.var(axis=-1)
    np.testing.assert_allclose(y.var(axis=-1), var / (var + 1e-8), atol=1e-12)
    assert np.all(np.abs(y.var(axis=-1) - 1) < 1e-6)


def test_determinism_forward_backward():
    def run():
        rng = np.random.default_rng(42)
        w = Tensor(rng.normal(size=(6, 6)), requires_grad=True)
        x = rng.normal(size=(3, 6))
        with Tape() as tape:
            h = ops.dropout(ops.tanh(ops.matmul(x, w)), 0.1, rng)
            loss = ops.cross_entropy(h, [0, 1, 2])
        return loss.data.tobytes(), tape.backward(loss)[w].tobytes()

    assert run() == run()
