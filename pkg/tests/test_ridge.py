import numpy as np
import pytest

from shipfuel.errors import SingularSystem
from shipfuel.models import RidgeRegressor, load_model, save_model


def ols_oracle(X, y):
    """Brute-force normal equations with an explicit intercept column."""
    A = np.column_stack([np.ones(len(y)), X])
    coef = np.linalg.solve(A.T @ A, A.T @ y)
    return coef[0], coef[1:]


class TestRidge:
    def test_exact_line(self):
        model = RidgeRegressor(lam=0.0).fit([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
        assert model.coef_[0] == pytest.approx(2.0, abs=1e-12)
        assert model.intercept_ == pytest.approx(0.0, abs=1e-12)

    def test_huge_lambda_shrinks_to_zero(self, rng):
        X = rng.normal(size=(40, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=40)
        model = RidgeRegressor(lam=1e9).fit(X, y)
        assert np.linalg.norm(model.coef_) < 1e-6
        assert model.predict(X[:1])[0] == pytest.approx(y.mean(), rel=1e-4)

    def test_duplicate_columns_singular_at_zero(self):
        X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(SingularSystem):
            RidgeRegressor(lam=0.0).fit(X, [1.0, 2.0, 3.0])
        # any positive penalty regularizes it away
        RidgeRegressor(lam=1e-6).fit(X, [1.0, 2.0, 3.0])

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            RidgeRegressor(lam=-1.0).fit([[1.0]], [1.0])

    def test_matches_ols_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(10, 51))
            p = int(rng.integers(1, 6))
            X = rng.normal(size=(n, p)) * rng.uniform(0.5, 3.0, size=p)
            beta = rng.normal(size=p)
            y = X @ beta + rng.normal(size=n)
            model = RidgeRegressor(lam=0.0).fit(X, y)
            b0, b = ols_oracle(X, y)
            assert np.allclose(model.coef_, b, rtol=1e-8, atol=1e-10)
            assert model.intercept_ == pytest.approx(b0, rel=1e-8, abs=1e-10)

    def test_coef_norm_monotone_in_lambda(self, rng):
        X = rng.normal(size=(60, 4))
        y = X @ np.array([2.0, -1.0, 0.5, 3.0]) + rng.normal(size=60)
        norms = [np.linalg.norm(RidgeRegressor(lam=lam).fit(X, y).beta_std_)
                 for lam in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4]]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_penalty_applies_on_standardized_scale(self, rng):
        # scaling a feature must not change fitted predictions
        X = rng.normal(size=(50, 2))
        y = X @ np.array([1.0, -1.0]) + rng.normal(size=50)
        X_scaled = X * np.array([1000.0, 0.001])
        m1 = RidgeRegressor(lam=5.0).fit(X, y)
        m2 = RidgeRegressor(lam=5.0).fit(X_scaled, y)
        assert np.allclose(m1.predict(X), m2.predict(X_scaled), atol=1e-8)

    def test_serialization_round_trip(self, tmp_path, rng):
        X = rng.normal(size=(20, 3))
        y = rng.normal(size=20)
        model = RidgeRegressor(lam=0.5).fit(X, y)
        path = tmp_path / "ridge.json"
        save_model(model, path)
        back = load_model(path)
        assert np.allclose(back.predict(X), model.predict(X))

    def test_get_params_roundtrip(self):
        model = RidgeRegressor(lam=2.5)
        assert model.get_params() == {"lam": 2.5}
        model.set_params(lam=0.1)
        assert model.lam == 0.1
