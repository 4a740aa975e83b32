"""Lattice geometry helpers: coordinates and 0/1 indicator vectors.

The operators handed out by :mod:`src.core.spectral` are dense diagonal
matrices; internally the estimate code works with these indicator vectors
and broadcasting, which is equivalent and much cheaper.
"""

from typing import Sequence

import numpy as np

from .models import Axis, LatticeIndexing
from ..utils.error_handler import ValidationError


def positions(idx: LatticeIndexing) -> np.ndarray:
    """(total_dim, 2) float coordinates per linear index."""
    return idx.coords.astype(float)


def box_indicator(idx: LatticeIndexing, L: int) -> np.ndarray:
    """1 on sites with -L <= m_i < L for both i (the half-open box)."""
    if L < 0:
        raise ValidationError(f"window half width must be non-negative, got {L}")
    if L > idx.N:
        raise ValidationError(f"window L={L} exceeds lattice half width N={idx.N}")
    c = idx.coords
    inside = np.all((c >= -L) & (c < L), axis=1)
    return inside.astype(float)


def strip_indicator(idx: LatticeIndexing, axis: Axis, center: int, D: float) -> np.ndarray:
    """1 on sites with |m_axis - center| <= D."""
    column = 0 if Axis(axis) is Axis.X else 1
    return (np.abs(idx.coords[:, column] - center) <= D).astype(float)


def ball_indicator(idx: LatticeIndexing, center: Sequence[float], r: float) -> np.ndarray:
    """1 on sites strictly inside the Euclidean ball B_r(center)."""
    offset = idx.coords - np.asarray(center, dtype=float)
    return (np.einsum("ij,ij->i", offset, offset) < r * r).astype(float)


def sup_norm_labels(labels: np.ndarray) -> np.ndarray:
    """|m|_inf of (m1, m2, ...) label rows."""
    return np.max(np.abs(np.asarray(labels)[:, :2]), axis=1)


def site_weights(idx: LatticeIndexing, columns: np.ndarray) -> np.ndarray:
    """(n_sites, n_columns) weight sum_j |psi(m, j)|^2 per site."""
    w = np.abs(columns) ** 2
    return w.reshape(idx.n_sites, idx.q, -1).sum(axis=1)
