"""Scaling experiments for the truncation and decay estimates.

Every series is built from a relabeled basis. For a basis spanning
range(P), P - P_K is the projector onto the functions labeled outside
|m|_inf <= K, so most Hilbert-Schmidt norms below reduce to Frobenius
norms of column blocks and never form a dense difference of projectors.
"""

import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import stats

from .chern import commutator, complement_apply, double_commutator
from .lattice import box_indicator, sup_norm_labels
from .models import (
    DecayTrickReport, DecayTrickRow, HermitianOperator, LatticeIndexing, Projector,
    ScalingSeries, WannierBasis,
)
from .spectral import schatten_norm
from .wannier import truncated_columns
from ..utils.error_handler import InsufficientDataError, ValidationError


logger = logging.getLogger(__name__)

ZERO_FLOOR = 1e-14
DEFAULT_DELTA = 0.5

# Largest accepted log-log slope per series
EXPONENT_LIMITS: Dict[str, Callable[[float], float]] = {
    "approx": lambda delta: 2.0 / 3.0 + 0.1,
    "pl_chern": lambda delta: -1.0 / 3.0 + 0.15,
    "near_bd": lambda delta: -2.0 * (1.0 + delta) + 0.5,
}


def fit_power_law(points: Iterable[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares slope of log(value) against log(parameter) and its R^2.

    Points with value <= 1e-14 are dropped.

    Raises:
        InsufficientDataError: If fewer than 3 usable points remain
    """
    usable = [(float(x), float(y)) for x, y in points if x > 0 and y > ZERO_FLOOR]
    if len(usable) < 3 or len({x for x, _ in usable}) < 2:
        raise InsufficientDataError(f"power-law fit needs >= 3 usable points, got {len(usable)}")
    lx, ly = np.log(np.array(usable)).T
    fit = stats.linregress(lx, ly)
    residual = ly - (fit.intercept + fit.slope * lx)
    ss_res = float(residual @ residual)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(fit.slope), r2


def _fit(series: ScalingSeries) -> ScalingSeries:
    if all(v <= ZERO_FLOOR for v in series.values):
        series.status = "numerically_zero"
        return series
    try:
        series.exponent, series.r2 = fit_power_law(series.points)
        series.status = "fitted"
    except InsufficientDataError as e:
        logger.warning("series %s: %s", series.name, e)
        series.status = "insufficient"
    return series


def _exponent_ok(series: ScalingSeries, key: str, delta: float) -> bool:
    if series.status != "fitted":
        return True
    return series.exponent <= EXPONENT_LIMITS[key](delta)


def _labels(basis: WannierBasis) -> Tuple[np.ndarray, np.ndarray]:
    """Non-padding columns and their integer labels."""
    if not basis.is_relabeled:
        raise ValidationError("estimates need a relabeled basis")
    real = ~basis.padding
    return basis.functions[:, real], basis.lattice_labels[real]


def _check_range(a: int, b_values: Sequence[int], idx: LatticeIndexing) -> None:
    if a < 1 or not b_values or min(b_values) < 1:
        raise ValidationError("a and every b must be >= 1")
    if a + max(b_values) > idx.N:
        raise ValidationError(f"a + max(b) = {a + max(b_values)} exceeds lattice half width {idx.N}")


def _check_interior(L_values: Sequence[int], N: int) -> None:
    if not L_values or min(L_values) < 1:
        raise ValidationError("L values must be >= 1")
    if 2 * max(L_values) > N:
        raise ValidationError(f"max L={max(L_values)} exceeds the interior limit N/2={N / 2}")


def _half_width(X: HermitianOperator) -> int:
    return int(round(-X.diag().min()))


def _window_indices(X: HermitianOperator, Y: HermitianOperator, L: int) -> np.ndarray:
    x, y = X.diag(), Y.diag()
    return np.nonzero((x >= -L) & (x < L) & (y >= -L) & (y < L))[0]


def prop_near_bd(
    basis: WannierBasis, a: int, b_values: Sequence[int], idx: LatticeIndexing,
    delta: float = DEFAULT_DELTA,
) -> ScalingSeries:
    """||(1 - chi_{a+b}) P_a||_{S2}^2 against b, bounded by C a^2 b^{-2(1+delta)}."""
    _check_range(a, b_values, idx)
    psi = truncated_columns(basis, a)
    row_mass = np.sum(np.abs(psi) ** 2, axis=1)
    points = []
    witness = 0.0
    for b in sorted(set(b_values)):
        outside = 1.0 - box_indicator(idx, a + b)
        value = float(outside @ row_mass)
        points.append((b, value))
        witness = max(witness, value * b ** (2 * (1 + delta)) / a ** 2)

    series = _fit(ScalingSeries("near_bd", "b", points, witness=witness))
    series.checks["non_increasing"] = series.is_non_increasing(slack=ZERO_FLOOR)
    series.tolerance["exponent"] = _exponent_ok(series, "near_bd", delta)
    return series


def prop_far_bd(
    basis: WannierBasis, a: int, b_values: Sequence[int], idx: LatticeIndexing,
    delta: float = DEFAULT_DELTA,
) -> ScalingSeries:
    """||chi_a (P - P_{a+b})||_{S2}^2 against b, bounded by C (b^-delta + a b^-(1+delta)).

    The observable is also split over the label regions outside the box:
    S1 (both |m1|, |m2| > a+b), S2 (only |m1|) and S3 (only |m2|).
    """
    _check_range(a, b_values, idx)
    columns, labels = _labels(basis)
    window = box_indicator(idx, a)
    mass = window @ (np.abs(columns) ** 2)
    abs1, abs2 = np.abs(labels[:, 0]), np.abs(labels[:, 1])

    points = []
    regions: Dict[str, List[float]] = {"region_S1": [], "region_S2": [], "region_S3": []}
    witness = 0.0
    split_ok = True
    for b in sorted(set(b_values)):
        K = a + b
        outside = (np.maximum(abs1, abs2) > K).astype(float)
        value = float(mass @ outside)
        parts = [
            float(mass @ ((abs1 > K) & (abs2 > K)).astype(float)),
            float(mass @ ((abs1 > K) & (abs2 <= K)).astype(float)),
            float(mass @ ((abs1 <= K) & (abs2 > K)).astype(float)),
        ]
        for key, part in zip(regions, parts):
            regions[key].append(part)
        split_ok &= abs(sum(parts) - value) <= 1e-12 * max(1.0, value)
        points.append((b, value))
        witness = max(witness, value / (b ** -delta + a * b ** -(1 + delta)))

    series = _fit(ScalingSeries("far_bd", "b", points, witness=witness, extras=regions))
    series.checks["non_increasing"] = series.is_non_increasing(slack=ZERO_FLOOR)
    series.checks["region_split"] = bool(split_ok)
    return series


def _bracket(v: np.ndarray) -> np.ndarray:
    return np.sqrt(v * v + 1.0)


def lemma_decay_trick(
    basis: WannierBasis, a: int, idx: LatticeIndexing, delta: float = DEFAULT_DELTA,
) -> DecayTrickReport:
    """||chi_a psi_m||^2 for every labeled function with |m|_inf > a.

    Region bounds, with <v> = sqrt(v^2 + 1):
      1. <|m1| - a>^{-(1+delta)} <|m2| - a>^{-(1+delta)}
      2. <|m1| - a>^{-2(1+delta)}
      3. <|m2| - a>^{-2(1+delta)}
    The explicit form checks observable * bracket product against the
    (1+delta) moments of psi about its label.
    """
    if a < 1 or a > idx.N:
        raise ValidationError(f"window a={a} outside 1..{idx.N}")
    columns, labels = _labels(basis)
    window = box_indicator(idx, a)
    weights = np.abs(columns) ** 2
    observable = window @ weights

    x, y = idx.coords[:, 0].astype(float), idx.coords[:, 1].astype(float)
    power = 1.0 + delta
    report = DecayTrickReport(a, delta)
    explicit_ok = True
    for col, (m1, m2, j) in enumerate(labels):
        if max(abs(m1), abs(m2)) <= a:
            continue
        g1 = math.hypot(abs(m1) - a, 1.0)
        g2 = math.hypot(abs(m2) - a, 1.0)
        mx = float(_bracket(x - m1) ** (2 * power) @ weights[:, col])
        my = float(_bracket(y - m2) ** (2 * power) @ weights[:, col])
        obs = float(observable[col])
        if abs(m1) > a and abs(m2) > a:
            region, bound = 1, (g1 * g2) ** -power
            lhs, rhs = obs * (g1 * g2) ** power, 0.5 * (mx + my)
        elif abs(m1) > a:
            region, bound = 2, g1 ** (-2 * power)
            lhs, rhs = obs * g1 ** (2 * power), mx
        else:
            region, bound = 3, g2 ** (-2 * power)
            lhs, rhs = obs * g2 ** (2 * power), my
        explicit_ok &= lhs <= rhs * (1 + 1e-12) + 1e-300
        report.rows.append(DecayTrickRow((int(m1), int(m2), int(j)), region, obs, bound, lhs, rhs))

    outside = int(np.count_nonzero(sup_norm_labels(labels) > a))
    report.checks["partition"] = sum(report.region_counts().values()) == outside
    report.checks["explicit_constant"] = bool(explicit_ok)
    report.checks["finite_ratio"] = math.isfinite(report.max_ratio)
    logger.debug("decay trick a=%d: %d functions, max ratio %.3e", a, len(report.rows), report.max_ratio)
    return report


def _band(columns: np.ndarray, sup: np.ndarray, low: float, high: float) -> np.ndarray:
    """Columns with low < |m|_inf <= high."""
    return columns[:, (sup > low) & (sup <= high)]


def prop_approx_series(
    P: Projector, basis: WannierBasis, L_values: Sequence[int], idx: LatticeIndexing,
    delta: float = DEFAULT_DELTA,
) -> ScalingSeries:
    """||chi_L P - P_L||_{S2} against L, bounded by C L^{2/3}.

    Also checks the four-term triangle split with ell = ceil(L^{1/(3+2 delta)}).
    """
    _check_interior(L_values, idx.N)
    columns, labels = _labels(basis)
    sup = sup_norm_labels(labels)
    p = P.matrix

    def rows_norm(block: np.ndarray, rows: np.ndarray) -> float:
        return float(np.linalg.norm(block[rows, :]))

    points = []
    extras: Dict[str, List[float]] = {"ell": [], "four_term_sum": []}
    triangle_ok = True
    for L in sorted(set(L_values)):
        inside = box_indicator(idx, L).astype(bool)
        psi_L = _band(columns, sup, -1, L)
        in_part = p[inside, :] - psi_L[inside, :] @ psi_L.conj().T
        value = math.hypot(float(np.linalg.norm(in_part)), rows_norm(psi_L, ~inside))

        ell = math.ceil(L ** (1.0 / (3.0 + 2.0 * delta)))
        psi_up = _band(columns, sup, -1, L + ell)
        t1 = float(np.linalg.norm(p[inside, :] - psi_up[inside, :] @ psi_up.conj().T))
        t2 = rows_norm(_band(columns, sup, L, L + ell), inside)
        t3 = rows_norm(_band(columns, sup, L - ell, L), ~inside)
        t4 = rows_norm(_band(columns, sup, -1, L - ell), ~inside)
        total = t1 + t2 + t3 + t4
        triangle_ok &= value <= total * (1 + 1e-10) + 1e-12
        extras["ell"].append(float(ell))
        extras["four_term_sum"].append(total)
        points.append((L, value))

    series = _fit(ScalingSeries("approx", "L", points, extras=extras))
    series.witness = max(v / L ** (2.0 / 3.0) for L, v in series.points)
    series.checks["four_term_split"] = bool(triangle_ok)
    series.tolerance["exponent"] = _exponent_ok(series, "approx", delta)
    return series


def _anti_hermitian_norm(A: np.ndarray) -> float:
    """Spectral norm of an anti-Hermitian matrix via the Hermitian i*A."""
    h = 1j * A
    values = scipy.linalg.eigvalsh(0.5 * (h + h.conj().T))
    return float(np.max(np.abs(values))) if values.size else 0.0


def prop_pl_chern_diff(
    P: Projector, basis: WannierBasis, X: HermitianOperator, Y: HermitianOperator,
    L_values: Sequence[int], C: Optional[np.ndarray] = None,
) -> ScalingSeries:
    """||chi_L P C P chi_L - P_L C P_L||_{S1} / L^2 against L, with C = [[X,P],[Y,P]].

    Both operators live on span(window sites, range P_L); the trace norm is
    taken of the compression to an orthonormal basis of that span.
    """
    _check_interior(L_values, _half_width(X))
    columns, labels = _labels(basis)
    sup = sup_norm_labels(labels)
    p = P.matrix
    if C is None:
        C = double_commutator(P, X, Y)
    c_norm = _anti_hermitian_norm(C)
    xp_norm = _anti_hermitian_norm(commutator(p, X.diag()))
    yp_norm = _anti_hermitian_norm(commutator(p, Y.diag()))

    points = []
    extras: Dict[str, List[float]] = {"holder_majorant": []}
    holder_ok = True
    for L in sorted(set(L_values)):
        window = _window_indices(X, Y, L)
        psi = _band(columns, sup, -1, L)
        p_w = p[:, window]

        stacked = np.zeros((P.dim, len(window) + psi.shape[1]), dtype=complex)
        stacked[window, np.arange(len(window))] = 1.0
        stacked[:, len(window):] = psi
        Q = scipy.linalg.orth(stacked)
        q_w = Q[window, :]
        q_psi = Q.conj().T @ psi
        chi_part = q_w.conj().T @ (p_w.conj().T @ (C @ p_w)) @ q_w
        pl_part = q_psi @ (psi.conj().T @ (C @ psi)) @ q_psi.conj().T
        trace_norm = schatten_norm(chi_part - pl_part, 1)

        inside = np.zeros(P.dim, dtype=bool)
        inside[window] = True
        diff = math.hypot(
            float(np.linalg.norm(p[inside, :] - psi[inside, :] @ psi.conj().T)),
            float(np.linalg.norm(psi[~inside, :])),
        )
        majorant = diff * c_norm * float(np.linalg.norm(p_w)) + math.sqrt(psi.shape[1]) * c_norm * diff
        holder_ok &= trace_norm <= majorant * (1 + 1e-9) + 1e-10
        extras["holder_majorant"].append(majorant)
        points.append((L, trace_norm / L ** 2))

    series = _fit(ScalingSeries("pl_chern", "L", points, extras=extras))
    series.checks["holder_majorant"] = bool(holder_ok)
    series.checks["commutator_bound"] = c_norm <= 2 * xp_norm * yp_norm * (1 + 1e-10) + 1e-12
    series.tolerance["strictly_decreasing"] = series.is_strictly_decreasing()
    series.tolerance["exponent"] = _exponent_ok(series, "pl_chern", DEFAULT_DELTA)
    return series


def _p_x_pl_series(
    name: str, P: Projector, columns: np.ndarray, labels: np.ndarray, d: np.ndarray, axis: int,
    L_values: Sequence[int], delta: float,
) -> ScalingSeries:
    sup = sup_norm_labels(labels)
    # sup over labeled functions of ||(D - m_axis) psi_m||^2
    spread = np.sum(((d[:, None] - labels[None, :, axis]) ** 2) * np.abs(columns) ** 2, axis=0)
    spread_sup = float(np.max(spread)) if spread.size else 0.0

    points = []
    extras: Dict[str, List[float]] = {"ell": [], "band_term": [], "band_bound": []}
    split_ok = True
    band_ok = True
    for L in sorted(set(L_values)):
        psi = _band(columns, sup, -1, L)
        if psi.shape[1] == 0:
            points.append((L, 0.0))
            continue
        image = complement_apply(P, psi, d[:, None] * psi)
        total = float(np.sum(np.abs(image) ** 2))
        points.append((L, total / L ** 2))

        ell = min(math.ceil(L ** (2.0 / (2.0 + delta))), L // 2 - 1)
        if ell < 1:
            continue
        inner = _band(columns, sup, -1, L - 2 * ell)
        band = _band(columns, sup, L - 2 * ell, L)
        inner_term = float(np.sum(np.abs(complement_apply(P, psi, d[:, None] * inner)) ** 2))
        band_term = float(np.sum(np.abs(complement_apply(P, psi, d[:, None] * band)) ** 2))
        split_ok &= abs(inner_term + band_term - total) <= 1e-10 * max(1.0, total)
        bound = spread_sup * band.shape[1]
        band_ok &= band_term <= bound * (1 + 1e-10) + 1e-12
        extras["ell"].append(float(ell))
        extras["band_term"].append(band_term)
        extras["band_bound"].append(bound)

    series = _fit(ScalingSeries(name, "L", points, extras=extras))
    series.checks["two_term_split"] = bool(split_ok)
    series.checks["boundary_band_bound"] = bool(band_ok)
    series.tolerance["non_increasing"] = series.is_non_increasing(slack=ZERO_FLOOR)
    return series


def prop_p_x_pl(
    P: Projector, basis: WannierBasis, X: HermitianOperator, Y: HermitianOperator,
    L_values: Sequence[int], delta: float = DEFAULT_DELTA,
) -> Tuple[ScalingSeries, ScalingSeries]:
    """||(P - P_L) X P_L||_{S2}^2 / L^2 and the Y analogue against L."""
    _check_interior(L_values, _half_width(X))
    columns, labels = _labels(basis)
    return (
        _p_x_pl_series("p_x_pl_X", P, columns, labels, X.diag(), 0, L_values, delta),
        _p_x_pl_series("p_x_pl_Y", P, columns, labels, Y.diag(), 1, L_values, delta),
    )


def witness_stable(first: ScalingSeries, second: ScalingSeries) -> Optional[bool]:
    """Witness ratio within [0.5, 2] between two lattice sizes (None if undefined)."""
    if not first.witness or not second.witness:
        return None
    ratio = second.witness / first.witness
    return 0.5 <= ratio <= 2.0


def series_rows(series: ScalingSeries) -> List[Tuple[str, int, float]]:
    """CSV rows (series_name, param, value)."""
    return [(series.name, p, v) for p, v in series.points]


def decay_trick_rows(report: DecayTrickReport) -> List[tuple]:
    """CSV rows (label_m1, label_m2, j, region, observable, bound, ratio)."""
    return [(*row.label, row.region, row.observable, row.bound, row.ratio) for row in report.rows]
