"""Chern markers, the commutator identities behind them, and a k-space oracle"""

import logging
import math
from typing import Iterable, List, Tuple

import numpy as np

from .lattice import box_indicator
from .models import (
    HermitianOperator, LatticeIndexing, MarkerForm, MarkerResult, Projector, TraceReduction,
    WannierBasis,
)
from .spectral import spectral_norm
from .wannier import truncated_columns
from ..utils.error_handler import NumericalError, ValidationError


logger = logging.getLogger(__name__)


def _half_width(X: HermitianOperator) -> int:
    x = X.diag()
    return int(round(-x.min())) if x.size else 0


def _check_window(L: int, N: int) -> None:
    if L < 1:
        raise ValidationError(f"window L must be positive, got {L}")
    if 2 * L > N:
        raise ValidationError(f"window L={L} exceeds the interior limit N/2={N / 2}")


def commutator(P: np.ndarray, d: np.ndarray) -> np.ndarray:
    """[D, P] for the diagonal operator D = diag(d)."""
    return d[:, None] * P - P * d[None, :]


def double_commutator(P: Projector, X: HermitianOperator, Y: HermitianOperator) -> np.ndarray:
    """C = [[X, P], [Y, P]]."""
    p = P.matrix
    xp = commutator(p, X.diag())
    yp = commutator(p, Y.diag())
    return xp @ yp - yp @ xp


def _marker(trace: complex, L: int, form: MarkerForm) -> MarkerResult:
    value = 2j * math.pi / (4 * L * L) * trace
    logger.debug("marker %s L=%d: %.10f (imag %.2e)", form.value, L, value.real, abs(value.imag))
    return MarkerResult(L, float(value.real), float(abs(value.imag)), form)


def chern_marker_chi(
    P: Projector, X: HermitianOperator, Y: HermitianOperator, L: int, idx: LatticeIndexing,
    C: np.ndarray = None,
) -> MarkerResult:
    """(2 pi i / 4L^2) tr(chi_L P C P chi_L) over the interior window [-L, L)^2."""
    _check_window(L, idx.N)
    if C is None:
        C = double_commutator(P, X, Y)
    p = P.matrix
    window = np.nonzero(box_indicator(idx, L))[0]
    cp = C @ p[:, window]
    trace = np.einsum("ik,ki->", p[window, :], cp)
    return _marker(complex(trace), L, MarkerForm.CHI_WINDOW)


def chern_marker_pl(
    P: Projector, basis: WannierBasis, X: HermitianOperator, Y: HermitianOperator, L: int,
    C: np.ndarray = None,
) -> MarkerResult:
    """(2 pi i / 4L^2) tr(P_L C P_L) with P_L from the relabeled basis."""
    _check_window(L, _half_width(X))
    psi = truncated_columns(basis, L)
    if C is None:
        C = double_commutator(P, X, Y)
    trace = np.einsum("ij,ij->", psi.conj(), C @ psi) if psi.shape[1] else 0.0
    return _marker(complex(trace), L, MarkerForm.PL_WINDOW)


def commutator_identity_residual(P: Projector, X: HermitianOperator, Y: HermitianOperator) -> float:
    """||P [[X,P],[Y,P]] P - [PXP, PYP]|| in spectral norm."""
    p = P.matrix
    lhs = p @ double_commutator(P, X, Y) @ p
    pxp = p @ (X.diag()[:, None] * p)
    pyp = p @ (Y.diag()[:, None] * p)
    return spectral_norm(lhs - (pxp @ pyp - pyp @ pxp))


def whole_sample_trace(P: Projector, X: HermitianOperator, Y: HermitianOperator) -> complex:
    """tr(P C P); a finite-dimensional commutator trace, hence zero."""
    p = P.matrix
    return complex(np.einsum("ij,ji->", p, double_commutator(P, X, Y) @ p))


def complement_apply(P: Projector, psi: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """(P - P_L) applied to columns, with P_L = psi psi^dagger."""
    return P.matrix @ vectors - psi @ (psi.conj().T @ vectors)


def trace_reduction_check(
    P: Projector, basis: WannierBasis, X: HermitianOperator, Y: HermitianOperator, L: int,
    C: np.ndarray = None,
) -> TraceReduction:
    """Both sides of tr(P_L C P_L) = tr(P_L X (P - P_L) Y P_L - P_L Y (P - P_L) X P_L).

    Also returns tr[P_L X P_L, P_L Y P_L], which must vanish, and the
    scale ||X|| ||Y|| rank(P_L) it is compared against.
    """
    psi = truncated_columns(basis, L)
    x, y = X.diag(), Y.diag()
    rank = psi.shape[1]
    scale = float(np.max(np.abs(x)) * np.max(np.abs(y)) * rank) if x.size else 0.0
    if rank == 0:
        return TraceReduction(0j, 0j, 0j, scale)
    if C is None:
        C = double_commutator(P, X, Y)
    lhs = complex(np.einsum("ij,ij->", psi.conj(), C @ psi))

    x_psi = x[:, None] * psi
    y_psi = y[:, None] * psi
    rhs = complex(
        np.einsum("ij,ij->", x_psi.conj(), complement_apply(P, psi, y_psi))
        - np.einsum("ij,ij->", y_psi.conj(), complement_apply(P, psi, x_psi))
    )
    a = psi.conj().T @ x_psi
    b = psi.conj().T @ y_psi
    commutator_trace = complex(np.trace(a @ b - b @ a))
    return TraceReduction(lhs, rhs, commutator_trace, scale)


def holder_chain(
    P: Projector, basis: WannierBasis, X: HermitianOperator, Y: HermitianOperator, L: int,
    C: np.ndarray = None,
) -> Tuple[float, float]:
    """(|tr(P_L C P_L)|, 2 ||(P - P_L) X P_L||_{S2} ||(P - P_L) Y P_L||_{S2})."""
    psi = truncated_columns(basis, L)
    if psi.shape[1] == 0:
        return 0.0, 0.0
    if C is None:
        C = double_commutator(P, X, Y)
    lhs = abs(complex(np.einsum("ij,ij->", psi.conj(), C @ psi)))
    x_norm = float(np.linalg.norm(complement_apply(P, psi, X.diag()[:, None] * psi)))
    y_norm = float(np.linalg.norm(complement_apply(P, psi, Y.diag()[:, None] * psi)))
    return lhs, 2.0 * x_norm * y_norm


def bloch_hamiltonian(u: float, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """h(k) = sin k1 sx + sin k2 sy + (u + cos k1 + cos k2) sz, stacked on the k grid."""
    dx, dy = np.sin(k1), np.sin(k2)
    dz = u + np.cos(k1) + np.cos(k2)
    h = np.empty(k1.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = dz
    h[..., 1, 1] = -dz
    h[..., 0, 1] = dx - 1j * dy
    h[..., 1, 0] = dx + 1j * dy
    return h


def fhs_chern_number(u: float, grid: int = 24) -> int:
    """Lattice field-strength Chern number of the lower band of the clean two-band model.

    The plaquette orientation (k1 link, then k2 link) matches the sign of
    the real-space marker for the lattice Hamiltonian built in
    :func:`src.core.hamiltonian.build_two_band`.

    Raises:
        ValidationError: If the gap closes (|u| in {0, 2}) or grid < 8
    """
    if grid < 8:
        raise ValidationError(f"Brillouin-zone grid must be >= 8, got {grid}")
    if min(abs(u), abs(abs(u) - 2.0)) < 1e-9:
        raise ValidationError(f"gapless parameter u={u}")
    ks = 2 * math.pi * np.arange(grid) / grid
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    _, vectors = np.linalg.eigh(bloch_hamiltonian(u, k1, k2))
    lower = vectors[..., :, 0]

    def link(axis: int) -> np.ndarray:
        overlap = np.sum(lower.conj() * np.roll(lower, -1, axis=axis), axis=-1)
        return overlap / np.abs(overlap)

    u1, u2 = link(0), link(1)
    plaquette = u1 * np.roll(u2, -1, axis=0) * np.roll(u1, -1, axis=1).conj() * u2.conj()
    total = float(np.sum(np.angle(plaquette))) / (2 * math.pi)
    chern = int(round(total))
    if abs(total - chern) > 1e-6:
        raise NumericalError(f"field-strength sum {total:.8f} is not an integer")
    return chern


def marker_rows(results: Iterable[MarkerResult], model_hash: str, N: int) -> List[tuple]:
    """CSV rows (model_hash, N, L, form, value, imag_residual)."""
    return [(model_hash, N, r.L, r.form.value, r.value, r.imaginary_residual) for r in results]
