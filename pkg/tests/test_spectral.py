"""Unit tests for eigensolvers, projectors, masks and Schatten norms"""

import math
import unittest
import os
import sys
import numpy as np
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tests.helpers import atomic, build, trivial
from src.core.hamiltonian import build_model
from src.core.models import Axis, HermitianOperator, LatticeIndexing, ModelSpec, hermiticity_residual
from src.core import spectral
from src.utils.error_handler import EigenvalueAtFermiLevel, ValidationError


class TestEigh(unittest.TestCase):

    def test_residual_and_orthonormality(self):
        """Test eigenpairs satisfy H v = lambda v with orthonormal vectors"""
        H = build_model(ModelSpec(N=3, u=1.0, W=1.0, seed=2))
        values, vectors = spectral.eigh(H, verify=True)
        self.assertTrue(np.all(np.diff(values) >= 0))
        self.assertLess(np.max(np.abs(H.matrix @ vectors - vectors * values)), 1e-10)

    def test_diagonal_operator(self):
        """Test eigenvalues of a diagonal operator are its sorted entries"""
        values, _ = spectral.eigh(HermitianOperator.diagonal([3.0, -1.0, 2.0]))
        np.testing.assert_allclose(values, [-1.0, 2.0, 3.0])


class TestFermiProjector(unittest.TestCase):

    def test_projector_algebra(self):
        """Test idempotency, Hermiticity and trace of the Fermi projector"""
        for run in (atomic(), trivial(), build(N=4, u=1.0, W=1.0, seed=9, with_basis=False)):
            P = run.P
            self.assertLessEqual(P.idempotency_residual(), 1e-10)
            self.assertLessEqual(hermiticity_residual(P.matrix), 1e-12)
            self.assertAlmostEqual(float(np.trace(P.matrix).real), P.rank, delta=1e-8)

    def test_large_lattice(self):
        """Test the Fermi projector builds at N=16 and meets the algebra bounds"""
        P = trivial(N=16).P
        self.assertEqual(P.rank, 32 * 32)
        self.assertLessEqual(P.idempotency_residual(), 1e-10)

    def test_half_filling(self):
        """Test E_F = 0 fills the lower band: rank = number of sites"""
        run = trivial()
        self.assertEqual(run.P.rank, run.idx.n_sites)

    def test_commutes_with_hamiltonian(self):
        """Test [H, P] = 0"""
        run = trivial()
        H, P = run.H.matrix, run.P.matrix
        self.assertLess(np.max(np.abs(H @ P - P @ H)), 1e-10)

    def test_fermi_level_on_spectrum(self):
        """Test E_F on an eigenvalue raises EigenvalueAtFermiLevel"""
        H = build_model(ModelSpec(kind="atomic_limit", N=2, g=2.0))
        with self.assertRaises(EigenvalueAtFermiLevel):
            spectral.fermi_projector(H, -1.0)

    def test_empty_projector(self):
        """Test E_F below the spectrum gives the zero projector"""
        H = build_model(ModelSpec(kind="atomic_limit", N=2, g=2.0))
        P = spectral.fermi_projector(H, -5.0)
        self.assertEqual(P.rank, 0)
        self.assertTrue(np.allclose(P.matrix, 0))

    def test_bulk_gap(self):
        """Test the atomic bulk gap is g/2 at E_F = 0"""
        H = build_model(ModelSpec(kind="atomic_limit", N=4, g=2.0))
        self.assertAlmostEqual(spectral.bulk_gap(H, LatticeIndexing(4), 0.0), 1.0)


class TestMasks(unittest.TestCase):

    def setUp(self):
        self.idx = LatticeIndexing(4)

    def test_position_operators(self):
        """Test X and Y are diagonal with site coordinates"""
        X, Y = spectral.position_operators(self.idx)
        k = self.idx.encode((-3, 2), 1)
        self.assertEqual(X.diag()[k], -3)
        self.assertEqual(Y.diag()[k], 2)

    def test_box_mask_half_open(self):
        """Test chi_L covers (2L)^2 sites of [-L, L)^2"""
        chi = spectral.box_mask(self.idx, 2).diag()
        self.assertEqual(chi.sum(), 2 * 16)
        self.assertEqual(chi[self.idx.encode((-2, -2), 0)], 1)
        self.assertEqual(chi[self.idx.encode((2, 0), 0)], 0)

    def test_box_mask_range(self):
        """Test L outside 1..N is rejected"""
        with self.assertRaises(ValidationError):
            spectral.box_mask(self.idx, 5)
        with self.assertRaises(ValidationError):
            spectral.box_mask(self.idx, 0)

    def test_strip_mask(self):
        """Test the strip |m_1 - c| <= D"""
        strip = spectral.strip_mask(self.idx, Axis.X, 0, 1).diag()
        self.assertEqual(strip.sum(), 3 * 8 * 2)

    def test_ball_mask_open(self):
        """Test the ball is open: distance exactly r is excluded"""
        ball = spectral.ball_mask(self.idx, (0.0, 0.0), 1.0).diag()
        self.assertEqual(ball.sum(), 2)
        ball = spectral.ball_mask(self.idx, (0.5, 0.5), 1.0).diag()
        self.assertEqual(ball.sum(), 8)


class TestSchattenNorms(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(3)
        self.A = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
        # independent route: eigenvalues of A^dagger A
        self.sigma = np.sqrt(np.clip(np.linalg.eigvalsh(self.A.conj().T @ self.A), 0, None))

    def test_trace_norm(self):
        """Test S1 equals the sum of singular values"""
        self.assertAlmostEqual(spectral.schatten_norm(self.A, 1), self.sigma.sum(), places=10)

    def test_hilbert_schmidt(self):
        """Test S2 equals the Frobenius norm"""
        self.assertAlmostEqual(spectral.schatten_norm(self.A, 2), math.sqrt((self.sigma ** 2).sum()), places=10)

    def test_spectral_norm(self):
        """Test S_inf equals the largest singular value"""
        self.assertAlmostEqual(spectral.spectral_norm(self.A), self.sigma.max(), places=10)

    def test_ordering(self):
        """Test S_inf <= S2 <= S1"""
        s1, s2, sinf = (spectral.schatten_norm(self.A, p) for p in (1, 2, math.inf))
        self.assertLessEqual(sinf, s2 + 1e-12)
        self.assertLessEqual(s2, s1 + 1e-12)

    def test_projector_norms(self):
        """Test ||P||_S2^2 = rank and ||P||_inf = 1"""
        P = atomic(N=3).P
        self.assertAlmostEqual(spectral.schatten_norm(P, 2) ** 2, P.rank)
        self.assertAlmostEqual(spectral.spectral_norm(P), 1.0)

    def test_holder_trace_norm(self):
        """Test ||AB||_S1 <= ||A||_S2 ||B||_S2"""
        rng = np.random.default_rng(5)
        B = rng.normal(size=(4, 5)) + 1j * rng.normal(size=(4, 5))
        lhs = spectral.schatten_norm(self.A @ B, 1)
        self.assertLessEqual(lhs, spectral.schatten_norm(self.A, 2) * spectral.schatten_norm(B, 2) + 1e-12)

    def test_unitary_invariance(self):
        """Test ||U A V||_Sp = ||A||_Sp for unitary U and V"""
        rng = np.random.default_rng(8)
        U, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
        V, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        for p in (1, 2, math.inf):
            self.assertAlmostEqual(
                spectral.schatten_norm(U @ self.A @ V, p), spectral.schatten_norm(self.A, p), places=10)

    def test_unsupported_index(self):
        """Test only p in {1, 2, inf} is accepted"""
        with self.assertRaises(ValidationError):
            spectral.schatten_norm(self.A, 3)

    def test_non_finite(self):
        """Test NaN entries are rejected"""
        with self.assertRaises(ValidationError):
            spectral.singular_values(np.array([[np.nan]]))


class TestKernelDecay(unittest.TestCase):

    def test_atomic_super_exponential(self):
        """Test a site-diagonal projector is flagged super-exponential"""
        fit = spectral.kernel_decay_fit(atomic(N=3).P, LatticeIndexing(3))
        self.assertEqual(fit.regime, "super_exponential")
        self.assertTrue(math.isinf(fit.gamma))
        self.assertIsNone(fit.to_dict()["gamma"])

    def test_two_band_decay_rate(self):
        """Test the gapped two-band projector decays exponentially"""
        run = trivial()
        fit = spectral.kernel_decay_fit(run.P, run.idx)
        self.assertEqual(fit.regime, "exponential")
        self.assertGreater(fit.gamma, 0)
        self.assertEqual(fit.samples[0][0], 0.0)

    def test_decay_rate_grows_with_gap(self):
        """Test gamma is smaller closer to the transition (u=2.2) than at u=3"""
        near = build(N=8, u=2.2, with_basis=False)
        far = trivial()
        gamma_near = spectral.kernel_decay_fit(near.P, near.idx).gamma
        gamma_far = spectral.kernel_decay_fit(far.P, far.idx).gamma
        self.assertLess(gamma_near, gamma_far)

    def test_density_constant_two_band(self):
        """Test K for the half-filled two-band projector: one electron per bulk site"""
        run = trivial()
        K, samples = spectral.density_constant(run.P, run.idx, [(0.0, 0.0), (0.5, 0.5)], [1.0, 2.0])
        for _, r, mass in samples:
            self.assertLessEqual(mass, K * r * r + 1e-12)
        # 4 sites of the open unit ball around a plaquette center
        self.assertAlmostEqual(K, 4.0, delta=0.05)

    def test_density_constant_radius(self):
        """Test non-positive radii are rejected"""
        run = atomic(N=3)
        with self.assertRaises(ValidationError):
            spectral.density_constant(run.P, run.idx, [(0.0, 0.0)], [0.0])

    def test_density_constant(self):
        """Test ||chi_B P||_S2^2 <= K r^2 for the atomic projector"""
        run = atomic(N=3)
        K, samples = spectral.density_constant(run.P, run.idx, [(0.0, 0.0), (0.5, 0.5)], [1.0, 2.0])
        self.assertEqual(len(samples), 4)
        # 4 sites of the open unit ball around a plaquette center
        self.assertAlmostEqual(K, 4.0)


if __name__ == '__main__':
    unittest.main()
