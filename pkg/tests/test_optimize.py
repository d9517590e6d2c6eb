import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from twolocal.optimize import bfgs


def quadratic(A, b):
    # zero at the minimum so that f resolves steps down to a tiny gradient
    x_star = np.linalg.solve(A, b)

    def fg(x):
        d = x - x_star
        return 0.5 * d @ A @ d, A @ d
    return fg


class TestBfgs:

    def test_quadratic(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((6, 6))
        A = M @ M.T + np.eye(6)
        b = rng.standard_normal(6)
        res = bfgs(quadratic(A, b), np.zeros(6))
        assert res.converged
        np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-9)

    def test_rosenbrock(self):
        res = bfgs(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0, 0.5]), gtol=1e-8)
        assert res.converged
        np.testing.assert_allclose(res.x, 1.0, atol=1e-6)

    def test_history_nonincreasing(self):
        res = bfgs(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]), gtol=1e-10)
        assert np.all(np.diff(res.history) <= 0)
        assert res.history[0] == rosen(np.array([-1.2, 1.0]))

    def test_maxiter(self):
        res = bfgs(lambda x: (rosen(x), rosen_der(x)), np.array([-1.2, 1.0]), maxiter=3)
        assert res.iterations == 3 and not res.converged
        assert res.message == "maximum iterations reached"

    def test_starts_at_minimum(self):
        res = bfgs(quadratic(np.eye(2), np.zeros(2)), np.zeros(2))
        assert res.iterations == 0 and res.converged

    def test_nonfinite_start(self):
        with pytest.raises(FloatingPointError):
            bfgs(lambda x: (np.nan, x), np.zeros(2))

    @pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
    def test_scale_covariance(self, scale):
        # f_c(y) = c^2 f(y / c) from c * x0 visits c times the iterates of f from x0
        A = np.diag([1.0, 4.0, 9.0])
        b = np.array([1.0, -2.0, 0.5])
        fg = quadratic(A, b)
        x0 = np.array([0.3, 0.1, -0.2])
        ref = bfgs(fg, x0, gtol=1e-9)

        def scaled(y):
            f, g = fg(y / scale)
            return scale**2 * f, scale * g

        res = bfgs(scaled, scale * x0, gtol=1e-9 * scale)
        np.testing.assert_allclose(res.x, scale * ref.x, rtol=1e-8, atol=1e-12 * scale)
        assert res.iterations == ref.iterations

    def test_callback(self):
        seen = []
        bfgs(quadratic(np.eye(3), np.ones(3)), np.zeros(3), callback=lambda x, f: seen.append(f))
        assert len(seen) >= 1
