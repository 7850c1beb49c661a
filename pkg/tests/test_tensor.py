import math

import numpy as np
import pytest

from factorgcn import tensor as T
from factorgcn.optim import Adam
from factorgcn.seeding import new_rng
from factorgcn.tensor import NumericDomainError, ShapeError, Tensor

from oracles import check_gradients, finite_difference, max_rel_err, naive_matmul


# ---------------------------------------------------------------------------
# forward values


def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    out = T.matmul(Tensor(np.eye(2)), a)
    np.testing.assert_array_equal(out.data, a.data)


def test_matmul_1x1():
    out = T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
    assert out.data.tolist() == [[11.0]]


def test_matmul_matches_triple_loop():
    rng = new_rng(3)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    out = T.matmul(Tensor(a), Tensor(b))
    assert np.max(np.abs(out.data - naive_matmul(a, b))) < 1e-12


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_sigmoid_values():
    out = T.sigmoid(Tensor([0.0, math.log(3.0)]))
    np.testing.assert_allclose(out.data, [0.5, 0.75], atol=1e-15)


def test_sigmoid_strictly_inside_unit_interval():
    # strict bounds hold across the regime float64 can resolve (|x| <= ~36)
    xs = np.linspace(-36.0, 36.0, 401)
    out = T.sigmoid(Tensor(xs))
    assert np.all(out.data > 0.0) and np.all(out.data < 1.0)


def test_sigmoid_extreme_inputs_stay_bounded():
    out = T.sigmoid(Tensor([-800.0, 800.0]))
    assert np.all(np.isfinite(out.data))
    assert np.all(out.data >= 0.0) and np.all(out.data <= 1.0)


def test_leaky_relu_value():
    out = T.leaky_relu(Tensor([-1.0, 2.0]), slope=0.2)
    np.testing.assert_allclose(out.data, [-0.2, 2.0])


def test_log_domain_error():
    with pytest.raises(NumericDomainError):
        T.log(Tensor([1.0, 0.0]))


def test_add_broadcast_bias():
    out = T.add(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([10.0, 20.0]))
    np.testing.assert_array_equal(out.data, [[11.0, 22.0], [13.0, 24.0]])


def test_add_shape_error():
    with pytest.raises(ShapeError):
        T.add(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))


def test_reduce_values():
    assert T.mean(Tensor([1.0, 2.0, 3.0])).item() == 2.0
    np.testing.assert_array_equal(T.sum(Tensor([[1.0, 2.0], [3.0, 4.0]]), axis=0).data, [4.0, 6.0])


def test_reduce_invalid_axis():
    with pytest.raises(ShapeError):
        T.sum(Tensor([[1.0]]), axis=2)


def test_concat_and_shape_law():
    out = T.concat([Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]])], axis=1)
    np.testing.assert_array_equal(out.data, [[1.0, 2.0, 3.0, 4.0]])
    parts = [Tensor(np.ones((3, 5))) for _ in range(4)]
    assert T.concat(parts, axis=1).shape == (3, 20)


def test_concat_narrow_round_trip():
    rng = new_rng(0)
    parts = [rng.normal(size=(3, 2)) for _ in range(3)]
    merged = T.concat([Tensor(p) for p in parts], axis=1)
    for k, p in enumerate(parts):
        np.testing.assert_array_equal(T.narrow(merged, 1, 2 * k, 2).data, p)


def test_concat_mismatch_error():
    with pytest.raises(ShapeError):
        T.concat([Tensor(np.ones((2, 2))), Tensor(np.ones((3, 2)))], axis=1)


def test_softmax_values():
    np.testing.assert_allclose(T.softmax(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3)
    out = T.softmax(Tensor([math.log(1.0), math.log(2.0), math.log(3.0)]))
    np.testing.assert_allclose(out.data, [1 / 6, 2 / 6, 3 / 6], atol=1e-15)


def test_softmax_overflow_guard():
    out = T.softmax(Tensor([1000.0, 1000.0]))
    np.testing.assert_allclose(out.data, [0.5, 0.5])


def test_softmax_rows_sum_to_one():
    rng = new_rng(1)
    out = T.softmax(Tensor(rng.normal(size=(5, 7)) * 20), axis=1)
    np.testing.assert_allclose(out.data.sum(axis=1), np.ones(5), atol=1e-12)
    assert np.all(out.data >= 0.0) and np.all(out.data <= 1.0)


# ---------------------------------------------------------------------------
# losses


def test_bce_perfect_prediction_is_tiny():
    target = np.array([[1.0, 0.0, 1.0]])
    out = T.binary_cross_entropy(Tensor(target.copy()), target)
    assert 0.0 <= out.item() <= -math.log(1.0 - T.EPS_CLIP) + 1e-12


def test_bce_rejects_soft_targets():
    with pytest.raises(ValueError):
        T.binary_cross_entropy(Tensor([[0.5]]), np.array([[0.5]]))


def test_cross_entropy_uniform_case():
    out = T.cross_entropy(Tensor([0.0, 0.0]), 0)
    assert abs(out.item() - math.log(2.0)) < 1e-12


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError):
        T.cross_entropy(Tensor([[0.0, 0.0]]), [2])


def test_l1_value():
    assert T.l1_loss(Tensor([1.0, 2.0]), np.array([0.0, 0.0])).item() == 1.5


def test_loss_dispatcher():
    assert T.loss("l1", Tensor([1.0]), np.array([1.0])).item() == 0.0
    with pytest.raises(ValueError):
        T.loss("huber", Tensor([1.0]), np.array([1.0]))


# ---------------------------------------------------------------------------
# backward semantics


def test_square_gradient():
    x = Tensor([3.0], requires_grad=True)
    T.backward(T.sum(T.mul(x, x)))
    np.testing.assert_allclose(x.grad, [6.0])


def test_backward_requires_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ValueError):
        T.backward(T.mul(x, x))


def test_repeated_backward_accumulates():
    x = Tensor([2.0], requires_grad=True)
    loss = T.sum(T.mul(x, x))
    T.backward(loss)
    T.backward(loss)
    np.testing.assert_allclose(x.grad, [8.0])


def test_unused_parameter_keeps_zero_grad():
    x = Tensor([1.0], requires_grad=True)
    unused = Tensor([5.0], requires_grad=True)
    T.zero_grads([x, unused])
    T.backward(T.sum(T.mul(x, x)))
    np.testing.assert_array_equal(unused.grad, [0.0])


def test_shared_subexpression_counted_once():
    x = Tensor([2.0], requires_grad=True)
    y = T.mul(x, x)  # used twice below
    T.backward(T.sum(T.add(y, y)))
    np.testing.assert_allclose(x.grad, [8.0])


def test_sum_gradient_is_ones():
    rng = new_rng(2)
    x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)

    def build():
        return T.sum(x)

    T.backward(build())
    np.testing.assert_array_equal(x.grad, np.ones((3, 4)))
    numeric = finite_difference(lambda _: build().item(), x.data)
    assert max_rel_err(x.grad, numeric) < 1e-4


def test_no_grad_suppresses_tape():
    x = Tensor([1.0], requires_grad=True)
    with T.no_grad():
        out = T.mul(x, x)
    assert out._parents == () and not out.requires_grad


# ---------------------------------------------------------------------------
# finite-difference checks per op


def _fd_case(name):
    rng = new_rng(hash(name) % 2**31)

    if name == "matmul":
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        return [a, b], lambda: T.sum(T.mul(T.matmul(a, b), T.matmul(a, b)))
    if name == "add_broadcast":
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4,)), requires_grad=True)
        return [a, b], lambda: T.sum(T.mul(T.add(a, b), T.add(a, b)))
    if name == "sub_mul":
        a = Tensor(rng.normal(size=(5,)), requires_grad=True)
        b = Tensor(rng.normal(size=(5,)), requires_grad=True)
        return [a, b], lambda: T.sum(T.mul(T.sub(a, b), b))
    if name == "sigmoid":
        x = Tensor(rng.normal(size=(6,)), requires_grad=True)
        return [x], lambda: T.sum(T.sigmoid(x))
    if name == "relu":
        x = Tensor(rng.normal(size=(8,)) + 0.05, requires_grad=True)
        return [x], lambda: T.sum(T.relu(x))
    if name == "leaky_relu":
        x = Tensor(rng.normal(size=(8,)) + 0.05, requires_grad=True)
        return [x], lambda: T.sum(T.leaky_relu(x, 0.2))
    if name == "exp":
        x = Tensor(rng.normal(size=(5,)), requires_grad=True)
        return [x], lambda: T.sum(T.exp(x))
    if name == "log":
        x = Tensor(rng.uniform(0.5, 2.0, size=(5,)), requires_grad=True)
        return [x], lambda: T.sum(T.log(x))
    if name == "mean_axis":
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        return [x], lambda: T.sum(T.mul(T.mean(x, axis=0), T.mean(x, axis=0)))
    if name == "softmax":
        x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        w = rng.normal(size=(3, 5))
        return [x], lambda: T.sum(T.mul(T.softmax(x, axis=1), Tensor(w)))
    if name == "concat_narrow":
        a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        return [a, b], lambda: T.sum(T.mul(T.narrow(T.concat([a, b], axis=1), 1, 1, 3),
                                           T.narrow(T.concat([a, b], axis=1), 1, 1, 3)))
    if name == "gather":
        x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        idx = np.array([0, 2, 2, 3, 1])
        return [x], lambda: T.sum(T.mul(T.gather_rows(x, idx), T.gather_rows(x, idx)))
    if name == "arc_matrix":
        vals = Tensor(rng.uniform(0.1, 1.0, size=(4,)), requires_grad=True)
        arcs = np.array([[0, 1], [1, 0], [1, 2], [2, 1]])
        scale = rng.uniform(0.5, 1.5, size=4)
        h = rng.normal(size=(3, 2))
        return [vals], lambda: T.sum(T.mul(T.matmul(T.arc_matrix(vals, arcs, scale, 3), Tensor(h)),
                                           T.matmul(T.arc_matrix(vals, arcs, scale, 3), Tensor(h))))
    if name == "bce":
        x = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        t = (rng.uniform(size=(2, 4)) > 0.5).astype(float)
        return [x], lambda: T.binary_cross_entropy(T.sigmoid(x), t)
    if name == "cross_entropy":
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        labels = np.array([0, 3, 1])
        return [x], lambda: T.cross_entropy(x, labels)
    if name == "l1":
        x = Tensor(rng.normal(size=(5,)) + 3.0, requires_grad=True)
        t = rng.normal(size=(5,)) - 3.0
        return [x], lambda: T.l1_loss(x, t)
    raise AssertionError(name)


FD_OPS = [
    "matmul", "add_broadcast", "sub_mul", "sigmoid", "relu", "leaky_relu", "exp",
    "log", "mean_axis", "softmax", "concat_narrow", "gather", "arc_matrix",
    "bce", "cross_entropy", "l1",
]


@pytest.mark.parametrize("name", FD_OPS)
def test_gradients_match_finite_differences(name):
    params, build = _fd_case(name)
    check_gradients(build, params)


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_grad_zero_decay_leaves_param():
    p = Tensor([1.0, -2.0], requires_grad=True)
    opt = Adam([p], lr=0.1)
    opt.zero_grad()
    opt.step()
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_is_signed_lr():
    p = Tensor([1.0, 1.0], requires_grad=True)
    opt = Adam([p], lr=0.01)
    p.grad = np.array([0.5, -0.25])
    opt.step()
    np.testing.assert_allclose(p.data, [1.0 - 0.01, 1.0 + 0.01], atol=1e-6)


def test_adam_descends_quadratic():
    p = Tensor([3.0], requires_grad=True)
    opt = Adam([p], lr=0.1)
    values = []
    for _ in range(3):
        values.append(float(p.data[0] ** 2))
        opt.zero_grad()
        T.backward(T.sum(T.mul(p, p)))
        opt.step()
    values.append(float(p.data[0] ** 2))
    assert values[-1] < values[0]


def test_adam_decoupled_weight_decay():
    p = Tensor([2.0], requires_grad=True)
    opt = Adam([p], lr=0.1, weight_decay=0.5)
    opt.zero_grad()
    opt.step()
    # zero gradient, so the only movement is the decay term lr * wd * p
    np.testing.assert_allclose(p.data, [2.0 - 0.1 * 0.5 * 2.0])


def test_same_seed_same_trajectory():
    def run():
        rng = new_rng(11)
        p = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        opt = Adam([p], lr=0.05)
        targets = rng.normal(size=(4, 3))
        snaps = []
        for _ in range(5):
            opt.zero_grad()
            diff = T.sub(p, Tensor(targets))
            T.backward(T.sum(T.mul(diff, diff)))
            opt.step()
            snaps.append(p.data.copy())
        return snaps

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)
