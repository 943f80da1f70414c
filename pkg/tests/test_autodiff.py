import numpy as np
import pytest

from bgtkit import autodiff as ad
from bgtkit.errors import NotScalarRoot, ShapeMismatch


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += eps
        dn[idx] -= eps
        g[idx] = (f(up) - f(dn)) / (2 * eps)
    return g


class TestForward:
    def test_relu(self):
        np.testing.assert_array_equal(ad.relu([[-1.0, 2.0]]).value, [[0.0, 2.0]])

    def test_pooling(self):
        x = np.array([[1.0, 3.0], [4.0, 2.0]])
        np.testing.assert_array_equal(ad.rowmax(x).value, [[3, 3], [4, 4]])
        np.testing.assert_array_equal(ad.colmax(x).value, [[4, 3], [4, 3]])

    def test_softmax(self, rng):
        np.testing.assert_allclose(ad.softmax(np.zeros(2)).value, [0.5, 0.5])
        x = rng.normal(scale=50, size=(20, 7))
        s = ad.softmax(x).value
        np.testing.assert_allclose(s.sum(axis=-1), 1.0, atol=1e-12)
        big = ad.softmax(np.array([1000.0, 0.0])).value
        assert np.all(np.isfinite(big))

    def test_rowsum(self):
        np.testing.assert_array_equal(ad.rowsum(np.array([[1.0, 2.0], [3.0, 4.0]])).value, [3.0, 7.0])

    def test_linear_potential(self):
        x, y = np.array([[1.0, 2.0]]), np.array([[3.0, -1.0]])
        out = ad.linear_potential(np.array([3.0, 4.0]), x, y).value
        np.testing.assert_allclose(out, (3 * x + 4 * y) / 5)

    def test_channel_mix_shapes(self, rng):
        with pytest.raises(ShapeMismatch):
            ad.channel_mix(rng.normal(size=(2, 3)), rng.normal(size=(1, 4, 2, 2)), np.zeros(2))

    def test_determinism(self, rng):
        x = rng.normal(size=(3, 4))
        build = lambda: ad.softmax(ad.relu(ad.add(ad.rowmax(x), ad.colmax(x)))).value
        assert np.array_equal(build(), build())


class TestBackward:
    def test_relu_grad(self):
        x = ad.variable(np.array(2.0))
        ad.backward(ad.relu(x))
        assert x.grad == 1.0

    def test_relu_grad_at_zero(self):
        x = ad.variable(np.array([0.0, -1.0, 1.0]))
        ad.backward(ad.sum_(ad.relu(x)))
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_softmax_pick_first(self):
        x = ad.variable(np.zeros(2))
        ad.backward(ad.take(ad.softmax(x), 0))
        np.testing.assert_allclose(x.grad, [0.25, -0.25])

    def test_rowmax_routes_to_max(self):
        x = ad.variable(np.array([[1.0, 5.0, 2.0]]))
        ad.backward(ad.sum_(ad.rowmax(x)))
        np.testing.assert_array_equal(x.grad, [[0.0, 3.0, 0.0]])

    def test_tie_lowest_index(self):
        x = ad.variable(np.array([[2.0, 2.0], [1.0, 1.0]]))
        ad.backward(ad.sum_(ad.colmax(x)))
        np.testing.assert_array_equal(x.grad, [[2.0, 2.0], [0.0, 0.0]])
        y = ad.variable(np.array([[2.0, 2.0]]))
        ad.backward(ad.sum_(ad.rowmax(y)))
        np.testing.assert_array_equal(y.grad, [[2.0, 0.0]])

    def test_not_scalar(self):
        with pytest.raises(NotScalarRoot):
            ad.backward(ad.variable(np.ones(3)))

    def test_shared_subexpression(self):
        x = ad.variable(np.array(3.0))
        y = ad.mul(x, x)
        ad.backward(ad.add(y, y))
        assert x.grad == pytest.approx(12.0)

    @pytest.mark.parametrize(
        "op",
        [
            lambda a: ad.exp(a),
            lambda a: ad.log(ad.add(ad.square(a), 1.0)),
            lambda a: ad.div(a, ad.add(ad.square(a), 2.0)),
            lambda a: ad.softmax(a),
            lambda a: ad.rowmax(a),
            lambda a: ad.colmax(a),
            lambda a: ad.rowsum(a),
            lambda a: ad.abs_(a),
            lambda a: ad.relu(a),
            lambda a: ad.reshape(a, (-1,)),
            lambda a: ad.concat([a, ad.neg(a)], axis=0),
            lambda a: ad.stack([a, ad.square(a)], axis=1),
            lambda a: ad.sub(ad.sum_(a, axis=0), 1.0),
        ],
    )
    def test_against_finite_differences(self, op, rng):
        x0 = rng.normal(size=(3, 4))
        weight = rng.normal(size=op(ad.constant(x0)).shape)
        f = lambda x: float(np.sum(op(ad.constant(x)).value * weight))
        x = ad.variable(x0)
        ad.backward(ad.sum_(ad.mul(op(x), weight)))
        np.testing.assert_allclose(x.grad, numeric_grad(f, x0), atol=1e-6)

    def test_layer_ops(self, rng):
        params = {
            "w": rng.normal(size=(2, 3)),
            "x": rng.normal(size=(4, 3, 2, 2)),
            "b": rng.normal(size=2),
            "m": rng.dirichlet(np.ones(3)),
            "s": rng.dirichlet(np.ones(2), size=4),
        }

        def loss(n):
            h = ad.channel_mix(n["w"], n["x"], n["b"])
            mixed = ad.mix(n["m"], ad.sum_(n["x"], axis=-1))
            ev = ad.matvec(ad.take(ad.reshape(h, (4, 2, 2, 2)), 0), n["s"])
            return ad.add(ad.sum_(ad.square(mixed)), ad.sum_(ad.mul(ev, ev)))

        assert ad.grad_check(loss, params) < 1e-6


class TestGradCheck:
    def test_linear_graph(self, rng):
        a = rng.uniform(1, 2, size=(3, 3)) * rng.choice([-1, 1], size=(3, 3))
        err = ad.grad_check(lambda n: ad.sum_(ad.mul(n["x"], a)), {"x": rng.normal(size=(3, 3))})
        assert err < 1e-10

    def test_detects_wrong_gradient(self, rng):
        def bad_square(a):
            return ad.Node(a.value**2, (a,), lambda g: (g * a.value,), "bad")

        err = ad.grad_check(lambda n: ad.sum_(bad_square(n["x"])), {"x": rng.normal(size=3) + 2})
        assert err > 0.1

    def test_kink_margin(self):
        x = ad.constant(np.array([[1.0, 1.5], [0.2, -3.0]]))
        assert ad.kink_margin(ad.sum_(ad.rowmax(x))) == pytest.approx(0.5)
        assert ad.kink_margin(ad.sum_(ad.relu(x))) == pytest.approx(0.2)
        assert ad.kink_margin(ad.sum_(ad.exp(x))) == np.inf
