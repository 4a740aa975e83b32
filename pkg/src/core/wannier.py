"""Generalized Wannier bases: construction, moments, density, relabeling, truncation"""

import itertools
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from .lattice import site_weights, sup_norm_labels
from .models import (
    HermitianOperator, LatticeIndexing, MomentReport, Projector, WannierBasis,
)
from ..utils.error_handler import DegenerateClusteringError, NumericalError, ValidationError


logger = logging.getLogger(__name__)

DEFAULT_CLUSTER_TOL = 0.25
# 中心がこの幅を超えるクラスタは分割する
MAX_CLUSTER_WIDTH = 1.0


def _range_basis(P: Projector) -> np.ndarray:
    if P.range_basis is not None:
        return P.range_basis
    values, vectors = scipy.linalg.eigh(P.matrix)
    return vectors[:, values > 0.5]


def _clusters(values: np.ndarray, cluster_tol: float) -> List[np.ndarray]:
    """Split sorted values at gaps > cluster_tol or when a run reaches unit width."""
    groups = []
    start = 0
    for i in range(1, len(values)):
        if values[i] - values[i - 1] > cluster_tol or values[i] - values[start] >= MAX_CLUSTER_WIDTH:
            groups.append(np.arange(start, i))
            start = i
    if len(values):
        groups.append(np.arange(start, len(values)))
    return groups


def _fix_gauge(columns: np.ndarray) -> np.ndarray:
    """Make the largest component of every column real and positive."""
    if columns.size == 0:
        return columns
    peak = np.argmax(np.abs(columns), axis=0)
    phase = columns[peak, np.arange(columns.shape[1])]
    return columns * (np.abs(phase) / phase)[None, :]


def _expectations(columns: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    weight = np.abs(columns) ** 2
    return np.stack([x @ weight, y @ weight], axis=1)


def build_gwb_pxp(
    P: Projector,
    X: HermitianOperator,
    Y: HermitianOperator,
    cluster_tol: Optional[float] = None,
    max_cluster: Optional[int] = None,
) -> WannierBasis:
    """Projected-position basis: diagonalize PXP, then PYP inside each X cluster.

    Args:
        P: Projector whose range the basis spans
        X, Y: Diagonal position operators
        cluster_tol: Gap that separates PXP clusters (default 0.25)
        max_cluster: Largest allowed cluster (default 8N)

    Raises:
        ValidationError: If cluster_tol is not positive
        DegenerateClusteringError: If a cluster exceeds max_cluster members
    """
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_TOL
    if cluster_tol <= 0:
        raise ValidationError(f"cluster_tol must be > 0, got {cluster_tol}")
    x = X.diag()
    y = Y.diag()
    if max_cluster is None:
        half_width = int(round(-min(x.min(), y.min()))) if x.size else 1
        max_cluster = 8 * max(half_width, 1)

    V = _range_basis(P)
    rank = V.shape[1]
    if rank == 0:
        return WannierBasis(np.zeros((P.dim, 0), dtype=complex), np.zeros((0, 2)))

    pxp = (V.conj().T * x) @ V
    pxp = 0.5 * (pxp + pxp.conj().T)
    x_values, x_vectors = scipy.linalg.eigh(pxp)

    rotation = np.zeros((rank, rank), dtype=complex)
    column = 0
    groups = _clusters(x_values, cluster_tol)
    for group in groups:
        if len(group) > max_cluster:
            raise DegenerateClusteringError(
                f"PXP cluster near x={x_values[group[0]]:.3f} has {len(group)} members "
                f"(limit {max_cluster}); cluster_tol={cluster_tol} is too large"
            )
        block = x_vectors[:, group]
        states = V @ block
        pyp = (states.conj().T * y) @ states
        pyp = 0.5 * (pyp + pyp.conj().T)
        _, y_vectors = scipy.linalg.eigh(pyp)
        rotation[:, column:column + len(group)] = block @ y_vectors
        column += len(group)

    functions = _fix_gauge(V @ rotation)
    centers = _expectations(functions, x, y)
    logger.debug(
        "PXP basis: rank %d, %d clusters, largest %d",
        rank, len(groups), max(len(g) for g in groups),
    )
    return WannierBasis(functions, centers)


def span_residual(basis: WannierBasis, P: Projector) -> float:
    """||P - sum psi psi^dagger|| in spectral norm."""
    columns = basis.real_functions()
    diff = P.matrix - columns @ columns.conj().T
    diff = 0.5 * (diff + diff.conj().T)
    values = scipy.linalg.eigvalsh(diff)
    return float(np.max(np.abs(values))) if values.size else 0.0


def _moments(weights: np.ndarray, coords: np.ndarray, centers: np.ndarray, s: float) -> np.ndarray:
    """sum_x (|x - mu|^2 + 1)^s w(x) for every column."""
    dx = coords[:, 0][:, None] - centers[:, 0][None, :]
    dy = coords[:, 1][:, None] - centers[:, 1][None, :]
    bracket = (dx * dx + dy * dy + 1.0) ** s
    return np.einsum("ij,ij->j", bracket, weights)


def moment(psi: np.ndarray, mu: Sequence[float], s: float, idx: LatticeIndexing) -> float:
    """Lattice Japanese-bracket moment sum_x <x - mu>^{2s} |psi(x)|^2.

    Raises:
        ValidationError: If psi is not normalized or s <= 0
    """
    if s <= 0:
        raise ValidationError(f"moment order s must be > 0, got {s}")
    psi = np.asarray(psi, dtype=complex).reshape(-1, 1)
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(f"moment needs a normalized function, norm is {norm:.12f}")
    weights = site_weights(idx, psi)
    return float(_moments(weights, idx.site_coords.astype(float), np.asarray(mu, dtype=float).reshape(1, 2), s)[0])


def localization_profile(
    basis: WannierBasis, s_list: Iterable[float], idx: LatticeIndexing
) -> List[MomentReport]:
    """Moments of every non-padding function for each s."""
    columns = basis.real_functions()
    centers = basis.centers[~basis.padding]
    labels = basis.lattice_labels[~basis.padding] if basis.is_relabeled else None
    weights = site_weights(idx, columns)
    coords = idx.site_coords.astype(float)
    reports = []
    for s in s_list:
        if s <= 0:
            raise ValidationError(f"moment order s must be > 0, got {s}")
        reports.append(MomentReport(float(s), _moments(weights, coords, centers, s), labels))
    return reports


def _circumcenter(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> Optional[np.ndarray]:
    d = 2 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-14:
        return None
    a2, b2, c2 = a @ a, b @ b, c @ c
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    return np.array([ux, uy])


def bounded_density(centers: Sequence[Sequence[float]]) -> int:
    """Largest number of centers inside one open unit ball.

    The maximizing ball can always be centered on the smallest enclosing
    circle of the points it contains, which is either a point, the
    midpoint of a pair or the circumcenter of a triple.
    """
    points = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        raise ValidationError("bounded_density needs at least one center")
    tree = cKDTree(points)
    candidates = [points]

    pairs = np.array(sorted(tree.query_pairs(2.0 - 1e-12)), dtype=int).reshape(-1, 2)
    if len(pairs):
        candidates.append(0.5 * (points[pairs[:, 0]] + points[pairs[:, 1]]))

    neighbors: Dict[int, List[int]] = {}
    for i, j in pairs:
        neighbors.setdefault(int(i), []).append(int(j))
    pair_set = {(int(i), int(j)) for i, j in pairs}
    triple_centers = []
    for i, later in neighbors.items():
        for j, k in itertools.combinations(sorted(later), 2):
            if (j, k) not in pair_set:
                continue
            center = _circumcenter(points[i], points[j], points[k])
            if center is not None and np.linalg.norm(center - points[i]) < 1.0:
                triple_centers.append(center)
    if triple_centers:
        candidates.append(np.array(triple_centers))

    probes = np.vstack(candidates)
    counts = tree.query_ball_point(probes, r=1.0 - 1e-9, return_length=True)
    return int(np.max(counts))


def relabel_to_lattice(basis: WannierBasis) -> WannierBasis:
    """Assign every function to the unit square S_m holding its center.

    Squares are half open, S_m = [m1 - 1/2, m1 + 1/2) x [m2 - 1/2, m2 + 1/2).
    Occupied squares are padded with zero columns up to the common
    degeneracy M; padding columns carry the center m.
    """
    real = ~basis.padding
    columns = basis.functions[:, real]
    centers = basis.centers[real]
    squares = np.floor(centers + 0.5).astype(int)

    members: Dict[Tuple[int, int], List[int]] = {}
    for col, (m1, m2) in enumerate(squares):
        members.setdefault((int(m1), int(m2)), []).append(col)
    if not members:
        return WannierBasis(basis.functions[:, :0], np.zeros((0, 2)), np.zeros((0, 3), dtype=int), 1)
    M = max(len(v) for v in members.values())

    order = sorted(members)
    n = len(order) * M
    functions = np.zeros((basis.functions.shape[0], n), dtype=complex)
    new_centers = np.zeros((n, 2))
    labels = np.zeros((n, 3), dtype=int)
    padding = np.ones(n, dtype=bool)
    for k, m in enumerate(order):
        for j in range(M):
            slot = k * M + j
            labels[slot] = (m[0], m[1], j + 1)
            if j < len(members[m]):
                col = members[m][j]
                functions[:, slot] = columns[:, col]
                new_centers[slot] = centers[col]
                padding[slot] = False
            else:
                new_centers[slot] = m
    if M > 1:
        logger.info("relabeled basis has degeneracy M=%d over %d squares", M, len(order))
    return WannierBasis(functions, new_centers, labels, M, padding)


def truncated_columns(basis: WannierBasis, L: int) -> np.ndarray:
    """Non-padding functions with lattice label |m|_inf <= L."""
    if not basis.is_relabeled:
        raise ValidationError("truncated projector needs a relabeled basis")
    select = (~basis.padding) & (sup_norm_labels(basis.lattice_labels) <= L)
    return basis.functions[:, select]


def truncated_projector(basis: WannierBasis, L: int) -> Projector:
    """P_L: projector onto functions labeled within |m|_inf <= L."""
    if L < 0:
        raise ValidationError(f"truncation L must be non-negative, got {L}")
    return Projector.from_columns(truncated_columns(basis, L))


def moment_rows(reports: List[MomentReport]) -> List[Tuple[int, int, int, float, float]]:
    """CSV rows (label_m1, label_m2, j, s, moment)."""
    rows = []
    for report in reports:
        if report.labels is None:
            raise NumericalError("moment rows need a relabeled basis")
        for (m1, m2, j), value in zip(report.labels, report.values):
            rows.append((int(m1), int(m2), int(j), report.s, float(value)))
    return rows
