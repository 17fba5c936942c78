import numpy as np
import pytest

from hazelift.regularizer import (
    EnergyProblem,
    SolverDivergence,
    build_system,
    regularize_maps,
    solve_cg,
)


def dense_oracle(problem: EnergyProblem) -> np.ndarray:
    """Literal translation of the energy into a dense solve; independent
    of the sparse assembly code path."""
    h, w = problem.mask.shape
    n = h * w
    guide = problem.guide.astype(np.float64)
    a_mat = np.zeros((n, n))
    b = np.zeros(n)
    for y in range(h):
        for x in range(w):
            i = y * w + x
            if problem.mask[y, x]:
                a_mat[i, i] += 1.0
                b[i] += problem.observed[y, x]
            for dy, dx in ((0, 1), (1, 0)):
                yy, xx = y + dy, x + dx
                if yy >= h or xx >= w:
                    continue
                j = yy * w + xx
                diff = guide[y, x] - guide[yy, xx]
                wgt = problem.smoothness / (float(diff @ diff) + problem.edge_eps)
                a_mat[i, i] += wgt
                a_mat[j, j] += wgt
                a_mat[i, j] -= wgt
                a_mat[j, i] -= wgt
    return np.linalg.solve(a_mat, b).reshape(h, w)


def random_problem(rng, h=8, w=8, coverage=0.6):
    guide = rng.random((h, w, 3)).astype(np.float32)
    observed = rng.random((h, w)).astype(np.float32)
    mask = rng.random((h, w)) < coverage
    if not mask.any():
        mask[0, 0] = True
    return EnergyProblem(guide=guide, observed=observed, mask=mask)


class TestBuildSystem:
    def test_hand_1x2_system(self):
        problem = EnergyProblem(
            guide=np.full((1, 2, 3), 0.5, dtype=np.float32),
            observed=np.array([[1.0, 0.0]], dtype=np.float32),
            mask=np.array([[True, False]]),
            smoothness=1.0,
            edge_eps=1.0,
        )
        system = build_system(problem)
        dense = system.matrix.toarray()
        np.testing.assert_allclose(dense, [[2.0, -1.0], [-1.0, 1.0]], atol=1e-12)
        np.testing.assert_allclose(system.rhs, [1.0, 0.0], atol=1e-12)
        result = solve_cg(system, tol=1e-12)
        np.testing.assert_allclose(result.solution, 1.0, atol=1e-8)

    def test_full_mask_tiny_smoothness_returns_observed(self, rng):
        problem = random_problem(rng)
        problem.mask[...] = True
        problem.smoothness = 1e-10
        system = build_system(problem)
        result = solve_cg(system, tol=1e-10)
        np.testing.assert_allclose(result.solution, problem.observed, atol=1e-6)

    def test_single_seed_large_smoothness_floods_value(self):
        guide = np.full((4, 4, 3), 0.2, dtype=np.float32)
        observed = np.zeros((4, 4), dtype=np.float32)
        observed[1, 2] = 0.8
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 2] = True
        problem = EnergyProblem(
            guide=guide, observed=observed, mask=mask, smoothness=1e6
        )
        result = solve_cg(build_system(problem), tol=1e-10, max_iter=20000)
        np.testing.assert_allclose(result.solution, 0.8, atol=1e-4)

    def test_symmetry_exact(self, rng):
        system = build_system(random_problem(rng))
        diff = system.matrix - system.matrix.T
        assert diff.nnz == 0

    def test_all_zero_mask_is_singular(self, rng):
        problem = random_problem(rng)
        problem.mask[...] = False
        with pytest.raises(ValueError, match="singular"):
            build_system(problem)

    def test_matches_dense_oracle(self, rng):
        for _ in range(3):
            problem = random_problem(rng, h=6, w=7)
            system = build_system(problem)
            np.testing.assert_allclose(
                system.matrix.toarray(),
                _dense_matrix_of(problem),
                atol=1e-10,
            )


def _dense_matrix_of(problem):
    h, w = problem.mask.shape
    n = h * w
    guide = problem.guide.astype(np.float64)
    a_mat = np.zeros((n, n))
    for y in range(h):
        for x in range(w):
            i = y * w + x
            if problem.mask[y, x]:
                a_mat[i, i] += 1.0
            for dy, dx in ((0, 1), (1, 0)):
                yy, xx = y + dy, x + dx
                if yy >= h or xx >= w:
                    continue
                j = yy * w + xx
                diff = guide[y, x] - guide[yy, xx]
                wgt = problem.smoothness / (float(diff @ diff) + problem.edge_eps)
                a_mat[i, i] += wgt
                a_mat[j, j] += wgt
                a_mat[i, j] -= wgt
                a_mat[j, i] -= wgt
    return a_mat


class TestSolveCg:
    def test_identity_system(self):
        import scipy.sparse as sp

        from hazelift.regularizer import SparseSystem

        rhs = np.array([1.0, 2.0, 3.0])
        system = SparseSystem(sp.identity(3, format="csr"), rhs, (1, 3), 0.0)
        result = solve_cg(system)
        np.testing.assert_allclose(result.solution.ravel(), rhs, atol=1e-9)

    def test_diagonal_system(self):
        import scipy.sparse as sp

        from hazelift.regularizer import SparseSystem

        system = SparseSystem(
            sp.diags([2.0, 2.0, 2.0, 2.0]).tocsr(), np.ones(4), (2, 2), 0.0
        )
        result = solve_cg(system)
        np.testing.assert_allclose(result.solution, 0.5, atol=1e-9)

    def test_matches_dense_oracle_on_random_problems(self, rng):
        for _ in range(5):
            problem = random_problem(rng, h=7, w=6)
            expected = dense_oracle(problem)
            result = solve_cg(build_system(problem), tol=1e-12, max_iter=4000)
            np.testing.assert_allclose(result.solution, expected, atol=1e-8)

    def test_energy_decreases_at_restarts(self, rng):
        problem = random_problem(rng, h=24, w=24, coverage=0.2)
        result = solve_cg(build_system(problem), tol=1e-12, max_iter=4000)
        energies = [e for _, e in result.energy_trace]
        for earlier, later in zip(energies, energies[1:]):
            assert later <= earlier + 1e-9 * max(1.0, abs(earlier))

    def test_maximum_principle(self, rng):
        for _ in range(10):
            problem = random_problem(rng, h=10, w=10, coverage=0.3)
            result = solve_cg(build_system(problem), tol=1e-10, max_iter=4000)
            lo = problem.observed[problem.mask].min()
            hi = problem.observed[problem.mask].max()
            assert result.solution.min() >= lo - 1e-6
            assert result.solution.max() <= hi + 1e-6

    def test_max_iter_warns(self, rng):
        problem = random_problem(rng, h=16, w=16, coverage=0.1)
        system = build_system(problem)
        with pytest.warns(RuntimeWarning, match="max_iter"):
            result = solve_cg(system, tol=1e-14, max_iter=3)
        assert not result.converged


class TestRegularizeMaps:
    def test_full_mask_tiny_smoothness_is_identity(self, rng):
        guide = rng.random((8, 8, 3)).astype(np.float32)
        t = rng.random((8, 8)).astype(np.float32)
        a = rng.random((8, 8, 3)).astype(np.float32)
        mask = np.ones((8, 8), dtype=bool)
        t_out, a_out = regularize_maps(t, a, mask, guide, smoothness=1e-10, tol=1e-10)
        np.testing.assert_allclose(t_out, t, atol=1e-5)
        np.testing.assert_allclose(a_out, a, atol=1e-5)

    def test_empty_mask_rejected(self, rng):
        guide = rng.random((4, 4, 3)).astype(np.float32)
        with pytest.raises(ValueError, match="empty coverage"):
            regularize_maps(
                np.zeros((4, 4)), np.zeros((4, 4, 3)),
                np.zeros((4, 4), dtype=bool), guide,
            )

    def test_path_graph_ramp_matches_harmonic_oracle(self):
        # 1xN strip, seeds at both ends, constant guide: interior pixels
        # satisfy the discrete harmonic (mean of neighbors) relation
        n = 17
        guide = np.full((1, n, 3), 0.5, dtype=np.float32)
        observed = np.zeros((1, n), dtype=np.float32)
        observed[0, -1] = 1.0
        mask = np.zeros((1, n), dtype=bool)
        mask[0, 0] = mask[0, -1] = True
        problem = EnergyProblem(guide=guide, observed=observed, mask=mask)
        expected = dense_oracle(problem)
        result = solve_cg(build_system(problem), tol=1e-12, max_iter=4000)
        np.testing.assert_allclose(result.solution, expected, atol=1e-6)
        sol = result.solution[0]
        np.testing.assert_allclose(
            sol[1:-1], 0.5 * (sol[:-2] + sol[2:]), atol=1e-6
        )
        assert np.all(np.diff(sol) > 0)

    def test_halo_smoothing_reduces_seam(self):
        # blocky map with a vertical seam on a constant guide: smoothing
        # must shrink the jump across the seam
        h = w = 16
        guide = np.full((h, w, 3), 0.5, dtype=np.float32)
        t = np.full((h, w), 0.4, dtype=np.float32)
        t[:, w // 2 :] = 0.6
        a = np.repeat(t[:, :, None], 3, axis=2)
        mask = np.ones((h, w), dtype=bool)
        t_out, _ = regularize_maps(t, a, mask, guide, smoothness=1.0)
        seam_before = np.abs(t[:, w // 2] - t[:, w // 2 - 1]).mean()
        seam_after = np.abs(t_out[:, w // 2] - t_out[:, w // 2 - 1]).mean()
        assert seam_after < seam_before

    def test_outputs_clamped(self, rng):
        guide = rng.random((6, 6, 3)).astype(np.float32)
        t = rng.random((6, 6)).astype(np.float32)
        a = rng.random((6, 6, 3)).astype(np.float32)
        mask = rng.random((6, 6)) < 0.5
        mask[0, 0] = True
        t_out, a_out = regularize_maps(t, a, mask, guide)
        assert t_out.min() >= 0.0 and t_out.max() <= 1.0
        assert a_out.min() >= 0.0 and a_out.max() <= 1.0
