"""Finite tight-binding Hamiltonians on the centered square lattice"""

import logging

import numpy as np

from .models import Boundary, HermitianOperator, LatticeIndexing, ModelKind, ModelSpec
from ..utils.error_handler import ValidationError


logger = logging.getLogger(__name__)

# Pauli matrices
SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# m -> m + e1 and m -> m + e2 hopping blocks
HOP_X = (SIGMA_Z - 1j * SIGMA_X) / 2
HOP_Y = (SIGMA_Z - 1j * SIGMA_Y) / 2


def onsite_disorder(idx: LatticeIndexing, spec: ModelSpec) -> np.ndarray:
    """i.i.d. uniform on-site energies on [-W/2, W/2], one per site in linear site order.

    Uses numpy's PCG64 generator seeded with ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    return rng.uniform(-spec.W / 2, spec.W / 2, size=idx.n_sites)


def _check_compatible(idx: LatticeIndexing, spec: ModelSpec, kind: ModelKind) -> None:
    if spec.kind is not kind:
        raise ValidationError(f"model kind {spec.kind.value} given to the {kind.value} builder")
    if idx.q != 2:
        raise ValidationError(f"{kind.value} needs q=2 orbitals per site, indexing has q={idx.q}")
    if idx.N != spec.N:
        raise ValidationError(f"indexing half width {idx.N} does not match model N={spec.N}")


def _neighbor_sites(idx: LatticeIndexing, axis: int, periodic: bool):
    """(from, to) site pairs for the bond m -> m + e_axis."""
    coords = idx.site_coords
    target = coords.copy()
    target[:, axis] += 1
    if periodic:
        target[:, axis] = (target[:, axis] + idx.N) % idx.side - idx.N
        keep = np.ones(len(coords), dtype=bool)
    else:
        keep = target[:, axis] < idx.N
    sources = np.nonzero(keep)[0]
    targets = (target[keep, 0] + idx.N) * idx.side + (target[keep, 1] + idx.N)
    return sources, targets


def build_two_band(idx: LatticeIndexing, spec: ModelSpec) -> HermitianOperator:
    """Two-band Chern model with on-site Anderson disorder.

    On-site block u*sigma_z + w(m), hopping block (sigma_z - i sigma_x)/2 along
    e1 and (sigma_z - i sigma_y)/2 along e2, plus Hermitian conjugates. The
    clean periodic Bloch Hamiltonian is
    sin k1 sigma_x + sin k2 sigma_y + (u + cos k1 + cos k2) sigma_z.
    """
    _check_compatible(idx, spec, ModelKind.TWO_BAND_CHERN)
    n = idx.n_sites
    blocks = np.zeros((n, 2, n, 2), dtype=complex)

    w = onsite_disorder(idx, spec)
    sites = np.arange(n)
    blocks[sites, :, sites, :] = spec.u * SIGMA_Z + w[:, None, None] * SIGMA_0

    periodic = spec.boundary is Boundary.PERIODIC
    for axis, hop in ((0, HOP_X), (1, HOP_Y)):
        src, dst = _neighbor_sites(idx, axis, periodic)
        # <m| H |m + e> = hop, plus the conjugate bond
        blocks[src, :, dst, :] += hop
        blocks[dst, :, src, :] += hop.conj().T

    matrix = blocks.reshape(idx.total_dim, idx.total_dim)
    matrix = 0.5 * (matrix + matrix.conj().T)
    logger.debug("built two-band model N=%d u=%.3f W=%.3f %s", spec.N, spec.u, spec.W, spec.boundary.value)
    return HermitianOperator(matrix)


def build_atomic(idx: LatticeIndexing, spec: ModelSpec) -> HermitianOperator:
    """Hopping-free insulator: H(m) = diag(-g/2 + w(m), g/2 + w(m)) with |w| <= g/4."""
    _check_compatible(idx, spec, ModelKind.ATOMIC_LIMIT)
    if spec.g <= 0:
        raise ValidationError(f"atomic gap g must be > 0, got {spec.g}")
    if spec.W / 2 > spec.g / 4:
        raise ValidationError(f"disorder W={spec.W} exceeds g/2={spec.g / 2}; levels would cross")
    w = onsite_disorder(idx, spec)
    levels = np.stack([-spec.g / 2 + w, spec.g / 2 + w], axis=1).ravel()
    return HermitianOperator.diagonal(levels)


def build_model(spec: ModelSpec) -> HermitianOperator:
    """Dispatch on ``spec.kind``."""
    idx = spec.indexing()
    if spec.kind is ModelKind.ATOMIC_LIMIT:
        return build_atomic(idx, spec)
    return build_two_band(idx, spec)
