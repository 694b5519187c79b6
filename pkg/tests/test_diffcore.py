import numpy as np
import pytest

import relplace.diffcore as dc
from relplace.diffcore import Parameter, Tape, Tensor


def conv2d_oracle(x, k, b, stride=1, padding=0):
    """Naive quadruple-loop cross-correlation."""
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, f, ho, wo), dtype=np.float64)
    for ni in range(n):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for di in range(kh):
                            for dj in range(kw):
                                acc += xp[ni, ci, i * stride + di, j * stride + dj] * k[fi, ci, di, dj]
                    out[ni, fi, i, j] = acc + b[fi]
    return out


def pool_oracle(x, window, stride):
    """Brute-force window scan."""
    h, w = x.shape
    ho = (h - window) // stride + 1
    wo = (w - window) // stride + 1
    out = np.zeros((ho, wo), dtype=x.dtype)
    for i in range(ho):
        for j in range(wo):
            out[i, j] = x[i * stride:i * stride + window, j * stride:j * stride + window].max()
    return out


class TestConv2d:
    def test_identity_kernel(self):
        x = Tensor(np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3))
        k = Tensor(np.ones((1, 1, 1, 1)))
        out = dc.conv2d(x, k, Tensor(np.zeros(1)))
        np.testing.assert_array_equal(out.data, x.data)

    def test_all_ones_sums(self):
        x = Tensor(np.ones((1, 1, 3, 3)))
        k = Tensor(np.ones((1, 1, 3, 3)))
        out = dc.conv2d(x, k, Tensor(np.zeros(1)))
        assert out.shape == (1, 1, 1, 1)
        assert out.data.reshape(()) == 9.0

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
        k = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        out = dc.conv2d(Tensor(x), Tensor(k), Tensor(b))
        np.testing.assert_allclose(out.data, conv2d_oracle(x, k, b), atol=1e-6)

    @pytest.mark.parametrize("stride,padding", [(1, 0), (2, 1), (1, 2), (3, 0)])
    def test_oracle_with_stride_padding(self, stride, padding):
        rng = np.random.default_rng(stride * 10 + padding)
        x = rng.standard_normal((2, 3, 8, 7)).astype(np.float32)
        k = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        out = dc.conv2d(Tensor(x), Tensor(k), Tensor(b), stride=stride, padding=padding)
        np.testing.assert_allclose(out.data, conv2d_oracle(x, k, b, stride, padding), atol=1e-5)

    def test_channel_mismatch_names_axis(self):
        x = Tensor(np.zeros((1, 2, 4, 4)))
        k = Tensor(np.zeros((1, 3, 3, 3)))
        with pytest.raises(dc.DimensionError) as e:
            dc.conv2d(x, k, Tensor(np.zeros(1)))
        assert e.value.axis == "channel"

    def test_kernel_too_tall(self):
        x = Tensor(np.zeros((1, 1, 3, 3)))
        k = Tensor(np.zeros((1, 1, 5, 3)))
        with pytest.raises(dc.DimensionError) as e:
            dc.conv2d(x, k, Tensor(np.zeros(1)))
        assert e.value.axis == "height"


class TestPoolMax:
    def test_single_window(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = dc.pool_max(x, window=2, stride=2)
        assert out.data.reshape(()) == 4.0

    def test_tie_gradient_goes_to_first_cell(self):
        x = Tensor(np.full((2, 2), 5.0), requires_grad=True)
        with Tape() as tape:
            out = dc.pool_max(x, window=2, stride=2)
        tape.backward(out)
        expected = np.array([[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_array_equal(x.grad, expected)

    def test_matches_scan_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((8, 8)).astype(np.float32)
        out = dc.pool_max(Tensor(x), window=2, stride=2)
        np.testing.assert_array_equal(out.data, pool_oracle(x, 2, 2))

    def test_batched_matches_oracle(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 3, 6, 6)).astype(np.float32)
        out = dc.pool_max(Tensor(x), window=3, stride=1)
        for n in range(2):
            for c in range(3):
                np.testing.assert_array_equal(out.data[n, c], pool_oracle(x[n, c], 3, 1))

    def test_window_too_large(self):
        with pytest.raises(dc.DimensionError):
            dc.pool_max(Tensor(np.zeros((3, 3))), window=4, stride=1)


class TestUpsample2x:
    def test_replicates(self):
        x = Tensor(np.array([[[[1.0]]]]))
        out = dc.upsample2x(x)
        np.testing.assert_array_equal(out.data, np.ones((1, 1, 2, 2)))

    def test_gradient_sums_blocks(self):
        x = Tensor(np.random.default_rng(0).standard_normal((1, 1, 3, 3)), requires_grad=True)
        with Tape() as tape:
            up = dc.upsample2x(x)
            loss = dc.weighted_sq_err_sum(up, np.zeros_like(up.data))
        tape.backward(loss)
        # adjoint of replication: each source cell collects its 2x2 block
        np.testing.assert_allclose(x.grad, 2 * 4 * x.data, rtol=1e-5)

    def test_roundtrip_with_average(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        up = dc.upsample2x(Tensor(x)).data
        down = up.reshape(1, 2, 4, 2, 4, 2).mean(axis=(3, 5))
        np.testing.assert_allclose(down, x, rtol=1e-6)


class TestActivations:
    def test_sigmoid_at_zero(self):
        assert dc.sigmoid(Tensor(np.zeros(1))).data[0] == 0.5

    def test_relu_values(self):
        out = dc.activation(Tensor(np.array([-3.0, 3.0])), "relu")
        np.testing.assert_array_equal(out.data, [0.0, 3.0])

    def test_sigmoid_gradient_quarter(self):
        def f(x):
            return dc.weighted_sq_err_sum(dc.sigmoid(x), np.zeros(1))

        # d/dx sigmoid(x)^2 at 0 = 2*0.5*0.25
        x = Tensor(np.zeros(1), requires_grad=True)
        with Tape() as tape:
            loss = f(x)
        tape.backward(loss)
        np.testing.assert_allclose(x.grad, [0.25], atol=1e-6)
        assert dc.grad_check(f, Tensor(np.zeros(1), dtype=np.float64), h=1e-4) < 1e-5

    def test_sigmoid_extreme_inputs_stay_finite(self):
        out = dc.sigmoid(Tensor(np.array([-200.0, 200.0])))
        assert np.isfinite(out.data).all()
        assert 0.0 <= out.data[0] < 1e-6
        assert out.data[1] > 1 - 1e-6


class TestSoftmax:
    def test_uniform_logits(self):
        out = dc.softmax(Tensor(np.full(6, 3.25)))
        np.testing.assert_allclose(out.data, np.full(6, 1 / 6), atol=1e-7)

    def test_two_class_closed_form(self):
        out = dc.softmax(Tensor(np.array([np.log(2.0), 0.0])))
        np.testing.assert_allclose(out.data, [2 / 3, 1 / 3], atol=1e-6)

    def test_extreme_logits_no_overflow(self):
        out = dc.softmax(Tensor(np.array([1000.0, 0.0])))
        # extended-precision oracle: exp(-1000) under f64
        np.testing.assert_allclose(out.data, [1.0, np.exp(-1000.0)], atol=1e-12)

    def test_probability_vector_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            z = rng.standard_normal(6).astype(np.float32) * 5
            p = dc.softmax(Tensor(z)).data
            assert (p >= 0).all()
            assert abs(p.sum() - 1.0) < 1e-6
            shifted = dc.softmax(Tensor(z + 7.5)).data
            assert np.abs(shifted - p).max() < 1e-6

    def test_rejects_single_class(self):
        with pytest.raises(dc.DimensionError):
            dc.softmax(Tensor(np.ones(1)))


class TestCrossEntropy:
    def test_perfect_posterior(self):
        y = np.array([0.0, 1.0, 0.0])
        out = dc.cross_entropy(Tensor(y.copy()), y)
        assert abs(float(out.data.reshape(()))) < 1e-9

    def test_uniform_six_way(self):
        p = Tensor(np.full(6, 1 / 6))
        y = np.eye(6)[2]
        out = dc.cross_entropy(p, y)
        np.testing.assert_allclose(float(out.data.reshape(())), np.log(6.0), atol=1e-5)

    def test_logit_gradient_is_softmax_minus_onehot(self):
        rng = np.random.default_rng(9)
        z = rng.standard_normal(6).astype(np.float64)
        y = np.eye(6)[4]
        logits = Tensor(z, requires_grad=True, dtype=np.float64)
        with Tape() as tape:
            loss = dc.cross_entropy(dc.softmax(logits), y)
        tape.backward(loss)
        np.testing.assert_allclose(logits.grad, dc.softmax(Tensor(z)).data - y, atol=1e-6)

        def f(x):
            return dc.cross_entropy(dc.softmax(x), y)

        assert dc.grad_check(f, Tensor(z, dtype=np.float64), h=1e-4) < 1e-5


class TestMse:
    def test_identical(self):
        x = np.arange(4.0)
        assert float(dc.mse(Tensor(x.copy()), x).data.reshape(())) == 0.0

    def test_swapped_onehot(self):
        out = dc.mse(Tensor(np.array([1.0, 0.0])), np.array([0.0, 1.0]))
        assert float(out.data.reshape(())) == 1.0

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(4)
        t = rng.standard_normal(6)

        def f(x):
            return dc.mse(x, t)

        assert dc.grad_check(f, Tensor(rng.standard_normal(6), dtype=np.float64), h=1e-4) < 1e-6


class TestOptimizers:
    def test_zero_gradient_keeps_params(self):
        p = Parameter("w", np.array([1.0, 2.0]))
        p.tensor.grad = np.zeros(2, dtype=p.data.dtype)
        dc.SGD([p], lr=0.1).step()
        np.testing.assert_array_equal(p.data, [1.0, 2.0])

    def test_sgd_arithmetic(self):
        p = Parameter("w", np.array([1.0]))
        p.tensor.grad = np.array([0.5], dtype=p.data.dtype)
        dc.SGD([p], lr=0.1).step()
        np.testing.assert_allclose(p.data, [0.95], rtol=1e-6)

    def test_adam_first_step_closed_form(self):
        p = Parameter("w", np.array([2.0]))
        p.tensor.grad = np.array([1.0], dtype=p.data.dtype)
        opt = dc.Adam([p], lr=1e-3)
        opt.step()
        # bias-corrected m-hat = 1, v-hat = 1 -> update = lr / (1 + eps)
        expected = 2.0 - 1e-3 * 1.0 / (1.0 + 1e-8)
        np.testing.assert_allclose(p.data, [expected], rtol=1e-6)
        assert opt.t == 1

    def test_missing_gradient_names_parameter(self):
        p = Parameter("conv1.weight", np.zeros(3))
        with pytest.raises(dc.MissingGradientError, match="conv1.weight"):
            dc.SGD([p], lr=0.1).step()

    def test_optimizer_step_functional(self):
        p = Parameter("w", np.array([1.0]))
        p.tensor.grad = np.array([1.0], dtype=p.data.dtype)
        state = dc.optimizer_step([p], "sgd", 0.5)
        np.testing.assert_allclose(p.data, [0.5])
        p.tensor.grad = np.array([1.0], dtype=p.data.dtype)
        dc.optimizer_step([p], "sgd", 0.5, state)
        np.testing.assert_allclose(p.data, [0.0])

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            dc.SGD([Parameter("w", np.zeros(1)), Parameter("w", np.ones(1))], lr=0.1)


class TestGradCheck:
    def test_quadratic(self):
        def f(x):
            return dc.weighted_sq_err_sum(x, np.zeros(2))

        err = dc.grad_check(f, Tensor(np.array([1.0, 2.0]), dtype=np.float64), h=1e-4)
        assert err < 1e-6

    def test_constant_function(self):
        def f(x):
            return dc.mse(dc.relu(x), dc.relu(x).data)  # always 0

        err = dc.grad_check(f, Tensor(np.array([1.0, -1.0])), h=1e-4)
        assert err == 0.0


class TestOpsGradCheckRandomized:
    """Every differentiable op vs central differences at >=5 seeded points."""

    @pytest.mark.parametrize("seed", range(5))
    def test_conv2d(self, seed):
        rng = np.random.default_rng(seed)
        k = Tensor(rng.standard_normal((2, 2, 3, 3)) * 0.5, requires_grad=True)
        b = Tensor(rng.standard_normal(2) * 0.1, requires_grad=True)
        t = rng.standard_normal((1, 2, 3, 3))

        def f(x):
            return dc.mse(dc.conv2d(x, k, b, stride=2, padding=1), t)

        assert dc.grad_check(f, Tensor(rng.standard_normal((1, 2, 5, 5))), h=1e-4) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_pool_and_upsample(self, seed):
        rng = np.random.default_rng(100 + seed)
        t = rng.standard_normal((1, 1, 8, 8))

        def f(x):
            return dc.mse(dc.upsample2x(dc.pool_max(x, 2, 2)), t)

        # keep away from pooling ties so the finite step stays on one side
        point = Tensor(rng.permutation(64).reshape(1, 1, 8, 8) * 0.1)
        assert dc.grad_check(f, point, h=1e-4) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_activations_softmax_linear(self, seed):
        rng = np.random.default_rng(200 + seed)
        w = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal(3), requires_grad=True)
        y = np.eye(3)[seed % 3]

        def f(x):
            hidden = dc.relu(x)
            logits = dc.linear(hidden, w, b)
            return dc.cross_entropy(dc.softmax(logits), np.tile(y, (2, 1)))

        point = Tensor(rng.standard_normal((2, 4)) + np.sign(rng.standard_normal((2, 4))) * 0.2)
        assert dc.grad_check(f, point, h=1e-4) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_gather_and_sigmoid(self, seed):
        rng = np.random.default_rng(300 + seed)
        rows = rng.integers(0, 5, size=6)
        cols = rng.integers(0, 5, size=6)
        t = rng.uniform(0, 1, size=(6, 3))
        wts = rng.uniform(0.5, 1.5, size=6)

        def f(x):
            picked = dc.gather_pixels(dc.sigmoid(x), rows, cols)
            return dc.weighted_sq_err_sum(picked, t, wts)

        assert dc.grad_check(f, Tensor(rng.standard_normal((3, 5, 5))), h=1e-4) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_gap_and_concat(self, seed):
        rng = np.random.default_rng(400 + seed)
        other = Tensor(rng.standard_normal((1, 2, 4, 4)))
        t = rng.standard_normal((1, 4))

        def f(x):
            merged = dc.concat_channels([x, other])
            return dc.mse(dc.global_avg_pool(merged), t)

        assert dc.grad_check(f, Tensor(rng.standard_normal((1, 2, 4, 4))), h=1e-4) < 1e-4


class TestTapeAndDeterminism:
    def test_gradient_accumulates_additively(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        with Tape() as tape:
            a = dc.add(x, x)
            loss = dc.weighted_sq_err_sum(a, np.zeros(1))
        tape.backward(loss)
        # d/dx (2x)^2 = 8x
        np.testing.assert_allclose(x.grad, [16.0])

    def test_no_tape_blocks_recording(self):
        x = Tensor(np.ones(2), requires_grad=True)
        with Tape() as tape:
            with dc.no_tape():
                dc.relu(x)
        assert len(tape) == 0

    def test_nonfinite_raises(self):
        with pytest.raises(dc.NonFiniteError):
            dc.add(Tensor(np.array([np.float32(3e38)])), Tensor(np.array([np.float32(3e38)])))

    def test_identical_seeds_identical_trajectories(self):
        def run():
            rng = np.random.default_rng(42)
            w = Parameter("w", rng.standard_normal((3, 2)).astype(np.float32))
            b = Parameter("b", np.zeros(2, dtype=np.float32))
            opt = dc.Adam([w, b], lr=1e-2)
            traj = []
            for step in range(5):
                x = Tensor(rng.standard_normal((4, 3)).astype(np.float32))
                y = np.eye(2)[rng.integers(0, 2, size=4)]
                with Tape() as tape:
                    loss = dc.cross_entropy(dc.softmax(dc.linear(x, w.tensor, b.tensor)), y)
                opt.zero_grad()
                tape.backward(loss)
                opt.step()
                traj.append(w.data.tobytes())
            return traj

        assert run() == run()


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {
            "conv1.weight": rng.standard_normal((2, 3, 3, 3)).astype(np.float32),
            "head.bias": rng.standard_normal(6).astype(np.float32),
        }
        path = tmp_path / "weights.rpt"
        dc.save_tensors(path, tensors)
        with open(path, "rb") as fp:
            assert fp.read(4) == b"RPT1"
        loaded = dc.load_tensors(path)
        assert list(loaded) == list(tensors)
        for name in tensors:
            np.testing.assert_array_equal(loaded[name], tensors[name])

    def test_bytes_roundtrip_deterministic(self):
        tensors = {"a": np.arange(6, dtype=np.float32).reshape(2, 3)}
        blob1 = dc.dump_bytes(tensors)
        blob2 = dc.dump_bytes(tensors)
        assert blob1 == blob2
        np.testing.assert_array_equal(dc.load_bytes(blob1)["a"], tensors["a"])

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError, match="magic"):
            dc.load_bytes(b"XXXX" + b"\x00" * 8)
