import math

import numpy as np
import pytest

from cogs.utils import tensor as T
from cogs.utils.errors import ShapeError
from cogs.utils.tensor import AdamState, Tensor, adam_step, backward, grad_check, make_op

INSTANCES = 20


def weighted(op):
    """Scalar probe: random fixed weights make every output element matter."""
    weights = {}

    def f(x):
        y = op(x)
        if y.shape not in weights:
            weights[y.shape] = np.random.default_rng(7).normal(size=y.shape)
        return T.sum(y * weights[y.shape])

    return f


class TestElementwise:
    def test_add_zero_is_identity(self):
        x = Tensor([1.5, -2.0, 3.25])
        np.testing.assert_array_equal((x + 0).data, x.data)

    def test_sigmoid_of_zero(self):
        assert T.sigmoid(Tensor(0.0)).item() == 0.5

    def test_mul(self):
        np.testing.assert_array_equal((Tensor([1, 2, 3]) * Tensor([4, 5, 6])).data, [4, 10, 18])

    def test_sigmoid_is_stable_for_large_inputs(self):
        y = T.sigmoid(Tensor([-800.0, 800.0])).data
        assert np.all(np.isfinite(y))
        np.testing.assert_allclose(y, [0.0, 1.0])

    def test_broadcast_must_keep_first_shape(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones(3)) + Tensor(np.ones((2, 3)))

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            T.elementwise("cube", Tensor(1.0), Tensor(1.0))


class TestMatmul:
    def test_identity(self, rng):
        a = rng.normal(size=(4, 4))
        np.testing.assert_array_equal(T.matmul(Tensor(a), Tensor(np.eye(4))).data, a)

    def test_small_product(self):
        out = Tensor([[1, 2], [3, 4]]) @ Tensor([[5], [6]])
        np.testing.assert_array_equal(out.data, [[17], [39]])

    def test_zero_annihilates(self, rng):
        out = Tensor(np.zeros((3, 2))) @ Tensor(rng.normal(size=(2, 5)))
        np.testing.assert_array_equal(out.data, np.zeros((3, 5)))

    @pytest.mark.parametrize("a, b", [((2, 3), (2, 3)), ((3,), (3, 1)), ((2, 2, 2), (2, 2))])
    def test_shape_errors(self, a, b):
        with pytest.raises(ShapeError):
            T.matmul(Tensor(np.ones(a)), Tensor(np.ones(b)))


class TestSoftmax:
    def test_constant_is_uniform(self):
        np.testing.assert_allclose(T.softmax(Tensor(np.full(5, 3.7))).data, np.full(5, 0.2))

    def test_closed_form(self):
        np.testing.assert_allclose(T.softmax(Tensor([0.0, math.log(2.0)])).data, [1 / 3, 2 / 3])

    def test_shift_invariance(self, rng):
        x = rng.normal(size=(3, 6))
        np.testing.assert_allclose(T.softmax(Tensor(x), 1).data, T.softmax(Tensor(x + 123.0), 1).data, atol=1e-15)

    def test_large_logits(self):
        y = T.softmax(Tensor([1000.0, 1000.0, -1000.0])).data
        np.testing.assert_allclose(y, [0.5, 0.5, 0.0])

    @pytest.mark.parametrize("axis", [0, 1])
    def test_sums_to_one(self, rng, axis):
        y = T.softmax(Tensor(rng.normal(scale=5, size=(7, 9))), axis).data
        np.testing.assert_allclose(y.sum(axis=axis), 1.0, atol=1e-12)


class TestReduce:
    def test_one_hot_sum(self):
        assert T.sum(Tensor([0.0, 0.0, 1.0, 0.0])).item() == 1.0

    def test_mean(self):
        assert T.mean(Tensor([2.0, 4.0, 6.0])).item() == 4.0

    def test_axis_of_zeros(self):
        np.testing.assert_array_equal(T.sum(Tensor(np.zeros((3, 4))), axis=1).data, np.zeros(3))

    def test_bad_axis(self):
        with pytest.raises(ShapeError):
            T.sum(Tensor(np.zeros((3, 4))), axis=2)


class TestBackward:
    def test_sum_gives_ones(self, rng):
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        backward(T.sum(x))
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_square_sum_gives_2x(self, rng):
        x = Tensor(rng.normal(size=5), requires_grad=True)
        backward(T.sum(x * x))
        np.testing.assert_allclose(x.grad, 2 * x.data)

    def test_shared_node_accumulates(self):
        x = Tensor(3.0, requires_grad=True)
        y = x * x
        backward(y + y)
        assert x.grad == pytest.approx(12.0)

    def test_non_scalar_loss(self):
        with pytest.raises(ShapeError):
            backward(Tensor(np.ones(3), requires_grad=True) * 2.0)

    def test_tape_is_topological(self, rng):
        x = Tensor(rng.normal(size=3), requires_grad=True)
        loss = T.sum(T.exp(x) * T.sigmoid(x))
        tape = backward(loss)
        positions = {id(t): i for i, t in enumerate(tape.entries)}
        for node in tape.entries:
            for parent in node._parents:
                if parent.requires_grad:
                    assert positions[id(parent)] < positions[id(node)]
        assert tape.entries[-1] is loss


UNARY = {
    "neg": (lambda x: -x, (-2, 2)),
    "exp": (T.exp, (-2, 2)),
    "log": (T.log, (0.5, 3)),
    "sqrt": (T.sqrt, (0.5, 3)),
    "square": (T.square, (-2, 2)),
    "sigmoid": (T.sigmoid, (-4, 4)),
    "softplus": (T.softplus, (-4, 4)),
    "tanh": (T.tanh, (-2, 2)),
}


class TestGradients:
    @pytest.mark.parametrize("name", sorted(UNARY))
    def test_unary(self, name):
        op, (lo, hi) = UNARY[name]
        rng = np.random.default_rng(sorted(UNARY).index(name))
        for _ in range(INSTANCES):
            report = grad_check(weighted(op), rng.uniform(lo, hi, size=(3, 2)))
            assert report.passed, report.max_error

    def test_relu_away_from_the_kink(self):
        rng = np.random.default_rng(0)
        for _ in range(INSTANCES):
            x = rng.uniform(0.1, 1.0, size=6) * rng.choice([-1, 1], size=6)
            assert grad_check(weighted(T.relu), x).passed

    @pytest.mark.parametrize("kind", ["add", "sub", "mul", "div"])
    @pytest.mark.parametrize("other_shape", [(3, 4), (1, 4), (4,), ()])
    def test_binary_both_operands(self, kind, other_shape):
        rng = np.random.default_rng(1)
        for _ in range(INSTANCES):
            a = rng.normal(size=(3, 4))
            b = rng.uniform(0.5, 2.0, size=other_shape)
            assert grad_check(weighted(lambda x: T.elementwise(kind, x, Tensor(b))), a).passed
            assert grad_check(weighted(lambda y: T.elementwise(kind, Tensor(a), y)), b).passed

    def test_matmul(self):
        rng = np.random.default_rng(2)
        for _ in range(INSTANCES):
            a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
            assert grad_check(weighted(lambda x: x @ Tensor(b)), a).passed
            assert grad_check(weighted(lambda y: Tensor(a) @ y), b).passed

    @pytest.mark.parametrize("axis", [0, 1])
    def test_softmax(self, axis):
        rng = np.random.default_rng(3)
        for _ in range(INSTANCES):
            assert grad_check(weighted(lambda x: T.softmax(x, axis)), rng.normal(size=(4, 5))).passed

    @pytest.mark.parametrize("kind", ["sum", "mean"])
    @pytest.mark.parametrize("axis, keepdims", [(None, False), (0, False), (1, True)])
    def test_reduce(self, kind, axis, keepdims):
        rng = np.random.default_rng(4)
        for _ in range(INSTANCES):
            op = lambda x: T.reduce(x, axis, kind, keepdims)  # noqa: E731
            assert grad_check(weighted(op), rng.normal(size=(3, 5))).passed

    def test_shape_ops(self):
        rng = np.random.default_rng(5)
        ops = [
            lambda x: T.reshape(x, (2, 6)),
            T.transpose,
            lambda x: x[1:, 2],
            lambda x: T.broadcast_to(x[0:1, :], (5, 4)),
            lambda x: T.concat([x, T.exp(x)], axis=0),
            lambda x: T.stack_sum([x, x * x, T.sigmoid(x)]),
            T.l2_normalize_rows,
        ]
        for op in ops:
            for _ in range(INSTANCES):
                assert grad_check(weighted(op), rng.normal(size=(3, 4))).passed

    def test_composite(self):
        rng = np.random.default_rng(6)
        w = Tensor(rng.normal(size=(4, 3)))

        def f(x):
            h = T.relu(x @ w + 0.5)
            return T.mean(T.softplus(T.softmax(h, 1) * 3.0 - T.tanh(h)))

        for _ in range(INSTANCES):
            assert grad_check(f, rng.normal(size=(5, 4))).passed


class TestGradCheck:
    def test_sum_is_exact(self, rng):
        report = grad_check(T.sum, rng.normal(size=(4, 3)))
        assert report.max_error < 1e-9

    def test_sigmoid_of_sum(self, rng):
        assert grad_check(lambda x: T.sigmoid(T.sum(x)), rng.normal(size=6)).passed

    def test_wrong_rule_fails(self, rng):
        def bad_square(x):
            return make_op("bad_square", x.data**2, (x,), lambda g: (g * x.data,))

        report = grad_check(lambda x: T.sum(bad_square(x)), rng.uniform(1, 2, size=5))
        assert not report.passed
        assert len(report.failures) == 5

    def test_floor_makes_tiny_gradients_absolute(self, rng):
        def bad_square(x):
            return make_op("bad_square", x.data**2, (x,), lambda g: (g * x.data,))

        x = rng.uniform(1e-8, 2e-8, size=5)
        assert grad_check(lambda x: T.sum(bad_square(x)), x).passed
        assert not grad_check(lambda x: T.sum(bad_square(x)), x, floor=0.0).passed

    def test_parameter_is_restored(self, rng):
        p = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        before = p.data.copy()
        report = T.grad_check_parameter(lambda: T.sum(T.exp(p)), p)
        assert report.passed
        np.testing.assert_array_equal(p.data, before)


class TestAdam:
    def test_zero_gradient_leaves_params(self, rng):
        p = Tensor(rng.normal(size=4), requires_grad=True)
        before = p.data.copy()
        state = adam_step(AdamState(), {"p": p}, {"p": np.zeros(4)})
        np.testing.assert_array_equal(p.data, before)
        np.testing.assert_array_equal(state.first_moment["p"], 0.0)
        np.testing.assert_array_equal(state.second_moment["p"], 0.0)

    def test_first_step_moves_by_learning_rate(self, rng):
        p = Tensor(np.zeros(6), requires_grad=True)
        g = rng.normal(size=6)
        adam_step(AdamState(learning_rate=1e-3), {"p": p}, {"p": g})
        np.testing.assert_allclose(p.data, -1e-3 * np.sign(g), rtol=1e-4)

    def test_deterministic(self):
        def run():
            rng = np.random.default_rng(0)
            p = Tensor(rng.normal(size=3), requires_grad=True)
            state = AdamState()
            for _ in range(5):
                p.zero_grad()
                backward(T.sum(T.square(p)))
                adam_step(state, {"p": p})
            return p.data

        np.testing.assert_array_equal(run(), run())

    def test_shape_mismatch(self):
        p = Tensor(np.zeros(3), requires_grad=True)
        with pytest.raises(ShapeError):
            adam_step(AdamState(), {"p": p}, {"p": np.zeros(4)})
