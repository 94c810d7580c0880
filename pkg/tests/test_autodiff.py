"""Gradient checks for every primitive against central finite differences,
plus graph-walk correctness and the pixel-shuffle index contract."""

import numpy as np
import pytest

from hintcolor import autodiff as ad
from hintcolor.autodiff import Tensor, backward, finite_diff_check

TOL = 1e-3


def t(rng, *shape, scale=1.0):
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


class TestPrimitiveGradients:
    def test_add_broadcast(self):
        rng = np.random.default_rng(0)
        a = t(rng, 3, 4)
        b = t(rng, 4)
        assert finite_diff_check(lambda x: ad.mean_all(ad.add(x, b)), a) < TOL
        assert finite_diff_check(lambda x: ad.mean_all(ad.add(a, x)), b) < TOL

    def test_mul_broadcast(self):
        rng = np.random.default_rng(1)
        a = t(rng, 2, 3, 4)
        b = t(rng, 3, 1)
        assert finite_diff_check(lambda x: ad.mean_all(ad.mul(x, b)), a) < TOL
        assert finite_diff_check(lambda x: ad.mean_all(ad.mul(a, x)), b) < TOL

    def test_mul_scalar(self):
        rng = np.random.default_rng(2)
        a = t(rng, 5)
        assert finite_diff_check(lambda x: ad.sum_all(ad.mul_scalar(x, -2.5)), a) < TOL

    def test_matmul_plain(self):
        rng = np.random.default_rng(3)
        a = t(rng, 4, 6)
        b = t(rng, 6, 3)
        assert finite_diff_check(lambda x: ad.mean_all(ad.matmul(x, b)), a) < TOL
        assert finite_diff_check(lambda x: ad.mean_all(ad.matmul(a, x)), b) < TOL

    def test_matmul_batched_broadcast(self):
        rng = np.random.default_rng(4)
        a = t(rng, 2, 3, 4, 5)
        b = t(rng, 5, 6)  # broadcast over two leading axes
        assert finite_diff_check(lambda x: ad.mean_all(ad.matmul(x, b)), a) < TOL
        assert finite_diff_check(lambda x: ad.mean_all(ad.matmul(a, x)), b) < TOL

    def test_matmul_shape_error(self):
        with pytest.raises(ValueError):
            ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))

    def test_reshape_transpose(self):
        rng = np.random.default_rng(5)
        a = t(rng, 2, 3, 4)
        w = Tensor(rng.normal(size=(4, 2, 3)))
        assert finite_diff_check(
            lambda x: ad.mean_all(ad.reshape(x, (4, 6))), a) < TOL
        assert finite_diff_check(
            lambda x: ad.mean_all(ad.mul(ad.transpose(x, (2, 0, 1)), w)), a) < TOL

    def test_softmax(self):
        rng = np.random.default_rng(6)
        a = t(rng, 3, 7)
        w = Tensor(rng.normal(size=(3, 7)))
        assert finite_diff_check(
            lambda x: ad.sum_all(ad.mul(ad.softmax_lastdim(x), w)), a) < TOL

    def test_layer_norm_all_inputs(self):
        rng = np.random.default_rng(7)
        x = t(rng, 2, 5, 8)
        gamma = Tensor(rng.normal(1.0, 0.1, size=8), requires_grad=True)
        beta = t(rng, 8)
        w = Tensor(rng.normal(size=(2, 5, 8)))

        def loss_wrt(v):
            return lambda _: ad.sum_all(ad.mul(ad.layer_norm(x, gamma, beta), w))

        assert finite_diff_check(loss_wrt(x), x) < TOL
        assert finite_diff_check(loss_wrt(gamma), gamma) < TOL
        assert finite_diff_check(loss_wrt(beta), beta) < TOL

    def test_gelu(self):
        rng = np.random.default_rng(8)
        a = t(rng, 4, 4, scale=2.0)
        assert finite_diff_check(lambda x: ad.sum_all(ad.gelu(x)), a) < TOL

    def test_huber_away_from_knee(self):
        # FD at the knee |x|=1 is invalid (one-sided curvature); stay clear.
        rng = np.random.default_rng(9)
        vals = rng.uniform(-3.0, 3.0, size=64)
        vals[np.abs(np.abs(vals) - 1.0) < 0.05] = 0.5
        a = Tensor(vals, requires_grad=True)
        assert finite_diff_check(lambda x: ad.sum_all(ad.huber(x)), a) < TOL

    def test_huber_gradient_continuity_at_knee(self):
        # analytic slope approaches 1 from both sides of x=1
        for v in (1.0 - 1e-7, 1.0 + 1e-7):
            x = Tensor(np.array([v]), requires_grad=True)
            backward(ad.sum_all(ad.huber(x)))
            assert x.grad[0] == pytest.approx(1.0, abs=1e-6)

    def test_mean_sum(self):
        rng = np.random.default_rng(10)
        a = t(rng, 3, 5)
        assert finite_diff_check(lambda x: ad.mean_all(x), a) < TOL
        assert finite_diff_check(lambda x: ad.sum_all(x), a) < TOL

    def test_unfold3x3(self):
        rng = np.random.default_rng(11)
        a = t(rng, 2, 4, 5, 3)
        w = Tensor(rng.normal(size=(2, 4, 5, 9, 3)))
        assert finite_diff_check(
            lambda x: ad.sum_all(ad.mul(ad.unfold3x3(x), w)), a) < TOL

    def test_conv2d_same(self):
        rng = np.random.default_rng(12)
        x = t(rng, 2, 5, 5, 3)
        k = t(rng, 3, 3, 3, 4)
        b = t(rng, 4)
        for probe in (x, k, b):
            err = finite_diff_check(
                lambda _: ad.mean_all(ad.conv2d_same(x, k, b)), probe)
            assert err < TOL

    def test_pixel_shuffle_grads(self):
        rng = np.random.default_rng(13)
        a = t(rng, 2, 3, 3, 8)
        w = Tensor(rng.normal(size=(2, 6, 6, 2)))
        assert finite_diff_check(
            lambda x: ad.sum_all(ad.mul(ad.pixel_shuffle(x, 2), w)), a) < TOL
        b = t(rng, 2, 6, 6, 2)
        w2 = Tensor(rng.normal(size=(2, 3, 3, 8)))
        assert finite_diff_check(
            lambda x: ad.sum_all(ad.mul(ad.pixel_unshuffle(x, 2), w2)), b) < TOL

    def test_index_lastdim_with_repeats(self):
        rng = np.random.default_rng(14)
        table = t(rng, 3, 7)
        idx = rng.integers(0, 7, size=(4, 4))  # repeats force scatter-add
        w = Tensor(rng.normal(size=(3, 4, 4)))
        assert finite_diff_check(
            lambda x: ad.sum_all(ad.mul(ad.index_lastdim(x, idx), w)), table) < TOL

    def test_composite_chain(self):
        rng = np.random.default_rng(15)
        x = t(rng, 4, 6)
        w1 = t(rng, 6, 8)
        w2 = t(rng, 8, 2)
        def f(_):
            h = ad.gelu(ad.matmul(x, w1))
            return ad.mean_all(ad.huber(ad.matmul(h, w2)))
        for probe in (x, w1, w2):
            assert finite_diff_check(f, probe) < TOL


class TestGraphWalk:
    def test_diamond_reuse_accumulates(self):
        # z = sum(x*x) + sum(x): d/dx = 2x + 1 at every coordinate
        x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        z = ad.add(ad.sum_all(ad.mul(x, x)), ad.sum_all(x))
        backward(z)
        assert np.allclose(x.grad, 2 * x.data + 1)

    def test_shared_intermediate_multiple_children(self):
        # y feeds two children; its backward must see both contributions
        x = Tensor(np.array([2.0]), requires_grad=True)
        y = ad.mul_scalar(x, 3.0)
        z = ad.add(ad.mul(y, y), ad.mul_scalar(y, 5.0))  # 9x^2 + 15x
        backward(ad.sum_all(z))
        assert x.grad[0] == pytest.approx(18 * 2.0 + 15)

    def test_grad_accumulates_across_backward_calls(self):
        x = Tensor(np.ones(3), requires_grad=True)
        backward(ad.sum_all(x))
        backward(ad.sum_all(x))
        assert np.allclose(x.grad, 2.0)
        x.zero_grad()
        assert x.grad is None

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            backward(ad.mul_scalar(x, 2.0))

    def test_disconnected_loss_rejected(self):
        with pytest.raises(ValueError):
            backward(ad.sum_all(Tensor(np.ones(3))))

    def test_untracked_ops_build_no_graph(self):
        a = Tensor(np.ones((2, 2)))
        b = Tensor(np.ones((2, 2)))
        out = ad.matmul(a, b)
        assert not out.requires_grad
        assert out._backward is None and out._parents == ()

    def test_operator_sugar(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        y = (-x + 3.0) * 2.0 - 1.0
        z = ad.sum_all(y / 2.0)
        backward(z)
        assert np.allclose(x.grad, -1.0)
        assert np.allclose(y.data, [3.0, 1.0])


class TestPixelShuffleContract:
    def test_index_formula_small_case(self):
        # out[y*P+i, x*P+j, c] == in[y, x, c*P*P + i*P + j]
        P, h, w, C = 2, 2, 3, 2
        rng = np.random.default_rng(16)
        x = rng.normal(size=(h, w, C * P * P))
        out = ad.pixel_shuffle(Tensor(x), P).data
        for y in range(h):
            for xx in range(w):
                for i in range(P):
                    for j in range(P):
                        for c in range(C):
                            assert out[y * P + i, xx * P + j, c] == x[y, xx, c * P * P + i * P + j]

    def test_round_trip_randomized(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            P = int(rng.choice([1, 2, 8, 16]))
            h = int(rng.integers(1, 5))
            w = int(rng.integers(1, 5))
            C = int(rng.integers(1, 4))
            lead = [int(rng.integers(1, 3))] if rng.uniform() < 0.5 else []
            x = rng.normal(size=(*lead, h, w, C * P * P))
            rt = ad.pixel_unshuffle(ad.pixel_shuffle(Tensor(x), P), P).data
            assert rt.shape == x.shape
            assert np.array_equal(rt, x)

    def test_divisibility_errors(self):
        with pytest.raises(ValueError):
            ad.pixel_shuffle(Tensor(np.zeros((2, 2, 7))), 2)
        with pytest.raises(ValueError):
            ad.pixel_unshuffle(Tensor(np.zeros((3, 4, 2))), 2)


class TestConvOracle:
    def test_against_naive_loops(self):
        rng = np.random.default_rng(18)
        H, W, Cin, Cout = 5, 6, 2, 3
        x = rng.normal(size=(H, W, Cin))
        k = rng.normal(size=(3, 3, Cin, Cout))
        bias = rng.normal(size=Cout)
        got = ad.conv2d_same(Tensor(x), Tensor(k), Tensor(bias)).data
        want = np.zeros((H, W, Cout))
        xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        for y in range(H):
            for xx in range(W):
                for co in range(Cout):
                    acc = bias[co]
                    for dy in range(3):
                        for dx in range(3):
                            for ci in range(Cin):
                                acc += xp[y + dy, xx + dx, ci] * k[dy, dx, ci, co]
                    want[y, xx, co] = acc
        assert np.allclose(got, want, atol=1e-12)

    def test_kernel_shape_errors(self):
        with pytest.raises(ValueError):
            ad.conv2d_same(Tensor(np.zeros((4, 4, 2))), Tensor(np.zeros((5, 5, 2, 3))))
        with pytest.raises(ValueError):
            ad.conv2d_same(Tensor(np.zeros((4, 4, 2))), Tensor(np.zeros((3, 3, 9, 3))))


class TestFiniteDiffHarness:
    def test_detects_a_wrong_gradient(self):
        # a deliberately broken backward must be flagged by the checker
        def bad_square(x):
            out_val = x.data**2

            def backward_fn(g):
                x._accumulate(g * x.data)  # missing factor 2

            return ad._make(out_val, (x,), backward_fn)

        x = Tensor(np.array([1.5, -2.0]), requires_grad=True)
        err = finite_diff_check(lambda v: ad.sum_all(bad_square(v)), x)
        assert err > 0.1
