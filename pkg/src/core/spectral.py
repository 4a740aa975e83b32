"""Eigendecomposition, Fermi projectors, masks, Schatten norms and kernel decay"""

import logging
import math
from typing import Iterable, List, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import stats

from .lattice import ball_indicator, box_indicator, positions, strip_indicator
from .models import (
    Axis, DecayFit, HermitianOperator, LatticeIndexing, Projector, hermiticity_residual,
)
from ..utils.error_handler import EigenvalueAtFermiLevel, NumericalError, ValidationError


logger = logging.getLogger(__name__)

FERMI_GAP_TOL = 1e-8
KERNEL_FLOOR = 1e-12


def eigh(H: HermitianOperator, verify: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns).

    Args:
        H: Hermitian operator
        verify: Also check the residual and orthonormality post-conditions

    Raises:
        ValidationError: If H is not Hermitian
        NumericalError: If LAPACK fails to converge or verification fails
    """
    matrix = H.matrix
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if hermiticity_residual(matrix) > 1e-12 * scale:
        raise ValidationError("eigh needs a Hermitian operator")
    try:
        values, vectors = scipy.linalg.eigh(matrix, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"eigensolver failed: {e}") from e

    if verify:
        norm = max(float(np.max(np.abs(values))), 1e-300) if values.size else 1.0
        residual = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
        if residual.size and float(np.max(residual)) > 1e-9 * norm:
            raise NumericalError(f"eigenpair residual {float(np.max(residual)):.3e} too large")
        gram = vectors.conj().T @ vectors
        if gram.size and float(np.max(np.abs(gram - np.eye(len(values))))) > 1e-10:
            raise NumericalError("eigenvectors not orthonormal")
    return values, vectors


def fermi_projector(H: HermitianOperator, E_F: float) -> Projector:
    """Spectral projector onto eigenstates below E_F.

    Raises:
        EigenvalueAtFermiLevel: If an eigenvalue lies within 1e-8 of E_F
    """
    values, vectors = eigh(H)
    distance = float(np.min(np.abs(values - E_F))) if values.size else math.inf
    if distance <= FERMI_GAP_TOL:
        raise EigenvalueAtFermiLevel(f"eigenvalue within {distance:.2e} of E_F={E_F}")
    occupied = vectors[:, values < E_F]
    logger.debug("Fermi projector: rank %d of %d, distance to E_F %.3e", occupied.shape[1], H.dim, distance)
    return Projector.from_columns(occupied)


def bulk_gap(H: HermitianOperator, idx: LatticeIndexing, E_F: float) -> float:
    """min |lambda - E_F| over states with more than half their weight in the interior box."""
    values, vectors = eigh(H)
    interior = box_indicator(idx, max(1, idx.N // 2))
    weight = interior @ (np.abs(vectors) ** 2)
    bulk = weight > 0.5
    if not np.any(bulk):
        return math.inf
    return float(np.min(np.abs(values[bulk] - E_F)))


def position_operators(idx: LatticeIndexing) -> Tuple[HermitianOperator, HermitianOperator]:
    """Diagonal position operators X and Y (site coordinate repeated across orbitals)."""
    pos = positions(idx)
    return HermitianOperator.diagonal(pos[:, 0]), HermitianOperator.diagonal(pos[:, 1])


def box_mask(idx: LatticeIndexing, L: int) -> HermitianOperator:
    """chi_L: indicator of [-L, L)^2."""
    if L < 1:
        raise ValidationError(f"window L must be positive, got {L}")
    return HermitianOperator.diagonal(box_indicator(idx, L))


def strip_mask(idx: LatticeIndexing, axis: Axis, center: int, D: float) -> HermitianOperator:
    """Indicator of |m_axis - center| <= D."""
    return HermitianOperator.diagonal(strip_indicator(idx, axis, center, D))


def ball_mask(idx: LatticeIndexing, center: Sequence[float], r: float) -> HermitianOperator:
    """Indicator of the open ball B_r(center)."""
    return HermitianOperator.diagonal(ball_indicator(idx, center, r))


def _as_array(A) -> np.ndarray:
    if isinstance(A, HermitianOperator):
        return A.matrix
    if isinstance(A, Projector):
        return A.matrix
    return np.asarray(A)


def singular_values(A) -> np.ndarray:
    """Singular values in decreasing order."""
    matrix = _as_array(A)
    if matrix.size == 0:
        return np.zeros(0)
    if not np.all(np.isfinite(matrix)):
        raise ValidationError("matrix has non-finite entries")
    try:
        return scipy.linalg.svdvals(matrix)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericalError(f"SVD failed: {e}") from e


def schatten_norm(A, p) -> float:
    """Schatten p-norm for p in {1, 2, inf}."""
    matrix = _as_array(A)
    if p == 2:
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("matrix has non-finite entries")
        return float(np.linalg.norm(matrix)) if matrix.size else 0.0
    if p == 1:
        return float(np.sum(singular_values(matrix)))
    if p in (math.inf, np.inf, "inf"):
        s = singular_values(matrix)
        return float(s[0]) if s.size else 0.0
    raise ValidationError(f"unsupported Schatten index p={p}")


def spectral_norm(A) -> float:
    return schatten_norm(A, math.inf)


def block_kernel(P: Projector, idx: LatticeIndexing) -> np.ndarray:
    """(n_sites, n_sites) max over orbital pairs of |P(m j, m' j')|."""
    q = idx.q
    blocks = np.abs(P.matrix).reshape(idx.n_sites, q, idx.n_sites, q)
    return blocks.max(axis=(1, 3))


def kernel_decay_fit(P: Projector, idx: LatticeIndexing) -> DecayFit:
    """Worst-case kernel magnitude per site distance and its exponential fit.

    Distance bins are exact: r = sqrt(|m - m'|^2) over integer offsets.
    """
    kernel = block_kernel(P, idx)
    coords = idx.site_coords
    diff = coords[:, None, :] - coords[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff).ravel()
    bins, inverse = np.unique(r2, return_inverse=True)
    worst = np.zeros(len(bins))
    np.maximum.at(worst, inverse, kernel.ravel())
    samples = [(float(math.sqrt(b)), float(v)) for b, v in zip(bins, worst)]

    usable = [(r, v) for r, v in samples if v > KERNEL_FLOOR]
    if len(usable) < 3:
        beyond_origin = [v for r, v in samples if r > 0]
        regime = "super_exponential" if all(v <= KERNEL_FLOOR for v in beyond_origin) else "degenerate"
        logger.warning("kernel decay fit flagged %s (%d usable bins)", regime, len(usable))
        prefactor = samples[0][1] if samples else 0.0
        return DecayFit(samples, math.inf, prefactor, regime)

    r, v = np.array(usable).T
    fit = stats.linregress(r, np.log(v))
    return DecayFit(samples, float(-fit.slope), float(math.exp(fit.intercept)), "exponential")


def density_constant(
    P: Projector,
    idx: LatticeIndexing,
    centers: Iterable[Sequence[float]],
    radii: Iterable[float],
) -> Tuple[float, List[Tuple[Tuple[float, float], float, float]]]:
    """Smallest K with ||chi_{B_r(a)} P||_{S2}^2 <= K r^2 over the probed (a, r).

    Returns:
        (K, samples) where samples are (center, r, ||chi P||_{S2}^2)
    """
    radii = [float(r) for r in radii]
    if not radii or min(radii) <= 0:
        raise ValidationError(f"ball radii must be > 0, got {radii}")
    p = P.matrix
    row_mass = np.sum(np.abs(p) ** 2, axis=1)
    samples = []
    K = 0.0
    for a in centers:
        for r in radii:
            mass = float(ball_indicator(idx, a, r) @ row_mass)
            samples.append(((float(a[0]), float(a[1])), float(r), mass))
            K = max(K, mass / (r * r))
    return K, samples
