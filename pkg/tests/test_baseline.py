import numpy as np
import pytest

from sparseproj.baseline import hoyer_project
from sparseproj.bench import random_input
from sparseproj.core import project_nonneg, target_for_sigma


class TestHoyerProject:
    def test_single_iteration_matches_improved(self):
        x = np.array([1.0, 1.1, 0.9, 1.05])
        t = target_for_sigma(4, 0.1)
        p, trace = hoyer_project(x, t)
        assert trace.iterations == 1
        np.testing.assert_allclose(p, project_nonneg(x, t).point, atol=1e-15)

    def test_feasible(self):
        rng = np.random.default_rng(0)
        for n in (5, 50, 500):
            t = target_for_sigma(n, 0.8)
            p, _ = hoyer_project(rng.standard_normal(n), t)
            assert abs(p.sum() - t.lambda1) <= 1e-9 * t.lambda1
            assert abs(np.linalg.norm(p) - 1.0) <= 1e-9
            assert p.min() >= 0

    def test_support_non_increasing(self):
        rng = np.random.default_rng(1)
        x = random_input(1000, 0.15, rng)
        _, trace = hoyer_project(x, target_for_sigma(1000, 0.9))
        s = trace.support_per_iteration
        assert len(s) == trace.iterations
        assert all(a >= b for a, b in zip(s, s[1:]))

    def test_same_distance_and_dominated(self):
        rng = np.random.default_rng(2)
        for n in (10, 100, 1000):
            t = target_for_sigma(n, 0.85)
            for _ in range(100):
                x = rng.standard_normal(n)
                p, trace = hoyer_project(x, t)
                res = project_nonneg(x, t)
                assert np.linalg.norm(p - x) == pytest.approx(np.linalg.norm(res.point - x), abs=1e-8)
                assert len(res.trace.iterations) <= trace.iterations
