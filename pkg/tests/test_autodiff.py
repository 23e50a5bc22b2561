import numpy as np
import pytest

from tsviz.autodiff import Graph, Parameter, backward
from tsviz.errors import ContractError
from tsviz.gradcheck import gradcheck_fn

from oracles import central_difference


def test_sum_of_parameter_gives_ones(rng):
    p = Parameter("w", rng.normal(size=(3, 4)))
    g = Graph()
    g.backward(g.sum(g.param(p)))
    np.testing.assert_array_equal(g.param_grads()["w"], np.ones((3, 4)))


def test_sigmoid_slope_at_zero():
    g = Graph()
    x = g.variable(np.zeros(1))
    grads = backward(g, g.sum(g.sigmoid(x)))
    assert grads[x.id][0] == 0.25


def test_non_scalar_root_rejected():
    g = Graph()
    x = g.variable(np.ones(3))
    with pytest.raises(ContractError):
        g.backward(g.relu(x))


def test_backward_twice_is_idempotent(rng):
    p = Parameter("w", rng.normal(size=5))
    g = Graph()
    w = g.param(p)
    root = g.sum(g.mul(w, w))
    first = g.backward(root)[w.id].copy()
    second = g.backward(root)[w.id]
    np.testing.assert_array_equal(first, second)
    np.testing.assert_array_equal(second, 2 * p.value)


def test_const_leaf_gets_no_adjoint():
    g = Graph()
    c = g.const(np.ones(2))
    v = g.variable(np.ones(2))
    grads = g.backward(g.sum(g.add(c, v)))
    assert c.id not in grads and v.id in grads


def test_shared_parameter_accumulates(rng):
    p = Parameter("w", rng.normal(size=3))
    g = Graph()
    root = g.sum(g.add(g.param(p), g.param(p)))
    g.backward(root)
    np.testing.assert_array_equal(g.param_grads()["w"], np.full(3, 2.0))


def _small_net(rng):
    """conv -> relu -> pool -> upsample -> concat -> dense -> softmax-CE."""
    ps = {
        "k": Parameter("k", rng.normal(size=(3, 3, 2, 3))),
        "b": Parameter("b", rng.normal(size=3)),
        "w": Parameter("w", rng.normal(size=(4 * 4 * 5, 3))),
        "c": Parameter("c", rng.normal(size=3)),
    }
    x = rng.normal(size=(4, 4, 2))

    def loss():
        g = Graph()
        h = g.relu(g.conv2d(g.const(x), g.param(ps["k"]), g.param(ps["b"])))
        h = g.upsample2x(g.maxpool2x2(h))
        h = g.concat_channels(h, g.const(x))
        z = g.dense(g.flatten(h), g.param(ps["w"]), g.param(ps["c"]))
        return g, g.softmax_cross_entropy(z, 1)
    return ps, loss


def test_every_op_against_central_differences(rng):
    ps, loss = _small_net(rng)
    g, root = loss()
    g.backward(root)
    grads = g.param_grads()
    for name, p in ps.items():
        num = central_difference(lambda: float(loss()[1].value), p.value, step=1e-6)
        np.testing.assert_allclose(grads[name], num, rtol=1e-5, atol=1e-8)


def test_smooth_ops_against_central_differences(rng):
    a, b = Parameter("a", rng.normal(size=4)), Parameter("b", rng.normal(size=4))

    def f():
        g = Graph()
        u, v = g.param(a), g.param(b)
        y = g.sum(g.mul(g.sigmoid(g.sub(u, v)), g.scale(g.add(u, v), 0.7)))
        return g, y
    g, root = f()
    g.backward(root)
    for p in (a, b):
        num = central_difference(lambda: float(f()[1].value), p.value)
        np.testing.assert_allclose(g.param_grads()[p.name], num, rtol=1e-8, atol=0)


def test_gradcheck_linear_least_squares(rng):
    X = rng.normal(size=(6, 3))
    y = rng.normal(size=6)
    w = Parameter("w", rng.normal(size=(3, 1)))
    b = Parameter("b", rng.normal(size=1))

    def loss():
        g = Graph()
        terms = []
        for xi, yi in zip(X, y):
            r = g.sub(g.dense(g.const(xi), g.param(w), g.param(b)), g.const([yi]))
            terms.append(g.sum(g.mul(r, r)))
        return g, g.scale(g.add_n(terms), 0.5)

    g, root = loss()
    g.backward(root)
    resid = X @ w.value[:, 0] + b.value[0] - y
    np.testing.assert_allclose(g.param_grads()["w"][:, 0], X.T @ resid, rtol=1e-12)
    report = gradcheck_fn(loss, [w, b], step=1e-5, tolerance=1e-9)
    assert report.passed, report.format()


def test_gradcheck_frozen_parameter_uses_absolute_tolerance(rng):
    w = Parameter("w", rng.normal(size=3))
    frozen = Parameter("frozen", rng.normal(size=2))

    def loss():
        g = Graph()
        g.param(frozen)
        return g, g.sum(g.mul(g.param(w), g.param(w)))

    report = gradcheck_fn(loss, [w, frozen], tolerance=1e-9)
    assert report.passed
    check = {p.name: p for p in report.params}["frozen"]
    assert check.max_abs_error <= 1e-10


def test_gradcheck_flags_a_wrong_gradient(rng):
    w = Parameter("w", rng.normal(size=3))

    def loss():
        g = Graph()
        node = g.param(w)
        # |w| enters as a constant, so the adjoint misses half the true slope
        return g, g.sum(g.mul(node, g.const(np.abs(w.value))))

    report = gradcheck_fn(loss, [w])
    assert not report.passed
    assert report.failures[0].name == "w"
