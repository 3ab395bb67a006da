import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhsb.errors import ConditioningError, InputError
from rkhsb.gp import Dataset, FittedGP, fit, predict_mean, predict_var, weights
from rkhsb.kernels import KernelSpec
from rkhsb.systems import builtin_system, generate_dataset

from oracles import ConstantKernel, dense_posterior as dense_oracle


@pytest.fixture(scope="module")
def fig1():
    data = generate_dataset(builtin_system("toy1d"), 20, seed=1)[0]
    return data, fit(KernelSpec(1.0, 1.0), data, 0.1)


class TestScalarCase:
    @pytest.fixture
    def gp(self):
        return fit(ConstantKernel(), Dataset([[0.0]], [2.0], 0.5), 1.0)

    def test_inverse(self, gp):
        np.testing.assert_allclose(gp.G, [[0.5]], rtol=1e-15)

    def test_mean(self, gp):
        assert predict_mean(gp, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_variance(self, gp):
        assert predict_var(gp, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_weights(self, gp):
        np.testing.assert_allclose(weights(gp, 0.0), [0.5], rtol=1e-15)


class TestFit:
    def test_reconstruction(self, fig1):
        data, gp = fig1
        A = gp.gram + 0.01 * np.eye(20)
        assert np.linalg.norm(gp.chol @ gp.chol.T - A) / np.linalg.norm(A) <= 1e-8

    def test_alpha_matches_dense_inverse(self, fig1):
        data, gp = fig1
        alpha = np.linalg.inv(gp.gram + 0.01 * np.eye(20)) @ data.y
        np.testing.assert_allclose(gp.alpha, alpha, rtol=0, atol=1e-8 * np.abs(alpha).max())

    def test_rejects_nonpositive_noise(self):
        with pytest.raises(InputError):
            fit(KernelSpec(1.0, 1.0), Dataset([[0.0]], [1.0]), 0.0)

    def test_indefinite_matrix(self):
        class Broken(ConstantKernel):
            def matrix(self, X1, X2=None):
                return -np.eye(len(X1))

        with pytest.raises(ConditioningError, match="larger sigma_n"):
            fit(Broken(), Dataset([[0.0], [1.0]], [1.0, 2.0]), 0.1)

    def test_deterministic(self, fig1):
        data, gp = fig1
        again = fit(KernelSpec(1.0, 1.0), data, 0.1)
        np.testing.assert_array_equal(gp.chol, again.chol)
        np.testing.assert_array_equal(gp.alpha, again.alpha)

    def test_refit_changes_noise_only(self, fig1):
        data, gp = fig1
        other = gp.refit(0.5)
        assert other.sigma_n == 0.5 and gp.sigma_n == 0.1
        assert gp.refit(0.1) is gp


class TestPrediction:
    def test_dense_oracle(self, fig1):
        data, gp = fig1
        x = np.linspace(0, 10, 100)[:, None]
        k = gp.kernel
        mean, var, _ = dense_oracle(gp.gram, k.matrix(x, data.X), k.diag(x), data.y, 0.1)
        np.testing.assert_allclose(predict_mean(gp, x), mean, rtol=0, atol=1e-8)
        np.testing.assert_allclose(predict_var(gp, x), var, rtol=0, atol=1e-8)

    def test_near_interpolation(self):
        X = np.linspace(0, 5, 6)[:, None]
        data = Dataset(X, np.sin(X[:, 0]))
        gp = fit(KernelSpec(1.0, 1.0), data, 1e-6)
        np.testing.assert_allclose(predict_mean(gp, X), data.y, atol=1e-3)

    def test_prior_far_from_data(self):
        gp = fit(ConstantKernel(1.0, local=True), Dataset([[0.0], [1.0]], [1.0, 2.0]), 0.1)
        assert predict_var(gp, 5.0) == 1.0
        np.testing.assert_array_equal(weights(gp, 5.0), np.zeros(2))
        assert predict_mean(gp, 5.0) == 0.0

    def test_variance_bounded_by_prior(self, fig1):
        _, gp = fig1
        x = np.linspace(-2, 12, 300)
        assert np.all(predict_var(gp, x) <= 1.0)
        assert np.all(predict_var(gp, x) >= 0.0)

    def test_scalar_and_batch_queries(self, fig1):
        _, gp = fig1
        assert isinstance(predict_mean(gp, 3.0), float)
        assert predict_mean(gp, [1.0, 2.0, 3.0]).shape == (3,)
        assert predict_mean(gp, 2.0) == predict_mean(gp, [2.0])

    def test_dimension_mismatch(self, fig1):
        _, gp = fig1
        with pytest.raises(InputError):
            gp.predict_mean(np.zeros((2, 3)))

    def test_stats_consistent(self, fig1):
        _, gp = fig1
        x = np.linspace(0, 10, 57)[:, None]
        mean, var, w2, w1 = gp.stats(x, chunk=10)
        W = gp.weights(x)
        np.testing.assert_allclose(mean, gp.predict_mean(x), rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(var, gp.predict_var(x), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(w2, (W ** 2).sum(1), rtol=1e-12)
        np.testing.assert_allclose(w1, np.abs(W).sum(1), rtol=1e-12)

    def test_with_targets(self, fig1):
        data, gp = fig1
        y2 = data.y * 2 + 1
        a = gp.with_targets(y2)
        b = fit(gp.kernel, Dataset(data.X, y2), 0.1)
        np.testing.assert_allclose(a.predict_mean([1.0, 4.0]), b.predict_mean([1.0, 4.0]), rtol=1e-13)


class TestWeights:
    @pytest.mark.parametrize("seed", range(5))
    def test_reproduce_mean(self, seed):
        rng = np.random.default_rng(seed)
        data = Dataset(rng.normal(size=(10, 3)), rng.normal(size=10))
        gp = fit(KernelSpec(1.5, 2.0), data, 0.3)
        x = rng.normal(size=(20, 3))
        np.testing.assert_allclose(gp.weights(x) @ data.y, gp.predict_mean(x), rtol=0, atol=1e-12)

    def test_matches_dense(self, fig1):
        data, gp = fig1
        x = np.array([[0.5], [7.3]])
        _, _, Ginv = dense_oracle(gp.gram, gp.cross(x), gp.kernel.diag(x), data.y, 0.1)
        np.testing.assert_allclose(gp.weights(x), gp.cross(x) @ Ginv, atol=1e-8)


class TestDuplicatePoint:
    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2 ** 31 - 1))
    def test_never_increases_variance(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(-3, 3, size=(8, 2))
        y = rng.normal(size=8)
        k = KernelSpec(1.0, 1.0)
        gp = fit(k, Dataset(X, y), 0.2)
        j = rng.integers(8)
        gp2 = fit(k, Dataset(np.vstack([X, X[j]]), np.append(y, y[j])), 0.2)
        x = rng.uniform(-4, 4, size=(50, 2))
        assert np.all(gp2.predict_var(x) <= gp.predict_var(x) + 1e-12)


class TestDataset:
    def test_validation(self):
        with pytest.raises(InputError):
            Dataset(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(InputError):
            Dataset([[0.0], [1.0]], [1.0])
        with pytest.raises(InputError):
            Dataset([[np.nan]], [1.0])
        with pytest.raises(InputError):
            Dataset([[0.0]], [1.0], sigma_v=-0.1)

    def test_immutable(self):
        d = Dataset([[0.0, 1.0]], [2.0])
        with pytest.raises(ValueError):
            d.X[0, 0] = 5.0

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        d = Dataset(rng.normal(size=(7, 3)), rng.normal(size=7), 0.2)
        d.to_csv(tmp_path / "d.csv")
        back = Dataset.from_csv(tmp_path / "d.csv", 0.2)
        np.testing.assert_array_equal(back.X, d.X)
        np.testing.assert_array_equal(back.y, d.y)
        assert (tmp_path / "d.csv").read_text().splitlines()[0] == "x1,x2,x3,y"

    @pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "x1,y\n1,foo\n", "x1,x2,y\n1,2\n"])
    def test_bad_csv(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(InputError):
            Dataset.from_csv(p)


def test_fitted_gp_direct_construction():
    gp = FittedGP(KernelSpec(1.0, 1.0), [[0.0], [1.0]], [0.0, 1.0], 0.5)
    assert gp.m == 2 and gp.dim == 1
