"""Shared model fixtures for the test suite (cached; diagonalization dominates runtime)"""

import os
import sys
from functools import lru_cache

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.hamiltonian import build_model
from src.core.manager import PreparedModel
from src.core.models import ModelSpec, Projector, WannierBasis
from src.core.spectral import fermi_projector, position_operators
from src.core.wannier import build_gwb_pxp, relabel_to_lattice


def build(kind="two_band_chern", N=8, u=3.0, W=0.0, seed=0, boundary="open", g=2.0,
          fermi_level=0.0, with_basis=True) -> PreparedModel:
    """Hamiltonian, Fermi projector, positions and relabeled PXP basis."""
    spec = ModelSpec(kind=kind, N=N, u=u, W=W, seed=seed, boundary=boundary, g=g)
    idx = spec.indexing()
    H = build_model(spec)
    P = fermi_projector(H, fermi_level)
    X, Y = position_operators(idx)
    run = PreparedModel(spec, idx, H, P, X, Y)
    if with_basis:
        run.basis = relabel_to_lattice(build_gwb_pxp(P, X, Y))
    return run


@lru_cache(maxsize=3)
def prepared(kind="two_band_chern", N=8, u=3.0, W=0.0, seed=0, boundary="open") -> PreparedModel:
    return build(kind=kind, N=N, u=u, W=W, seed=seed, boundary=boundary)


def atomic(N=6, W=0.0) -> PreparedModel:
    return prepared(kind="atomic_limit", N=N, W=W)


def trivial(N=8, W=0.0) -> PreparedModel:
    return prepared(N=N, u=3.0, W=W)


def topological(N=8, u=1.0) -> PreparedModel:
    return prepared(N=N, u=u)


def disordered(N=16, seed=1) -> PreparedModel:
    """Trivial phase (u=3) with W=0.5 on-site disorder."""
    return prepared(N=N, u=3.0, W=0.5, seed=seed)


def random_projector(dim=20, rank=5, seed=7) -> Projector:
    """Projector onto a random rank-dimensional subspace (fixed seed)."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    q, _ = np.linalg.qr(a)
    return Projector.from_columns(q)


def delta_basis(dim, centers, labels=None, degeneracy=1) -> WannierBasis:
    """Unit-vector columns with the given centers (and optional labels)."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    functions = np.eye(dim, dtype=complex)[:, :len(centers)]
    return WannierBasis(functions, centers, labels, degeneracy)
