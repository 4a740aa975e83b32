"""Data models for the Chern marker laboratory"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..utils.error_handler import NumericalError, ValidationError


HERMITIAN_TOL = 1e-12
IDEMPOTENT_TOL = 1e-10
TRACE_TOL = 1e-8
GRAM_TOL = 1e-9


class ModelKind(Enum):
    """Supported lattice models."""
    TWO_BAND_CHERN = "two_band_chern"
    ATOMIC_LIMIT = "atomic_limit"


class Boundary(Enum):
    """Boundary conditions of the finite box."""
    OPEN = "open"
    PERIODIC = "periodic"


class Axis(Enum):
    """Lattice axis for strip masks."""
    X = "X"
    Y = "Y"


class MarkerForm(Enum):
    """Which window the Chern marker is evaluated with."""
    CHI_WINDOW = "chi_window"
    PL_WINDOW = "pl_window"


@dataclass(frozen=True)
class LatticeIndexing:
    """Bijection between (site m, orbital j) and a linear matrix index.

    Sites run over the box {-N, ..., N-1}^2. The linear index is
    ``site * q + j`` with ``site = (m1 + N) * 2N + (m2 + N)``.

    Attributes:
        N: Half width of the box
        q: Orbitals per site
    """
    N: int
    q: int = 2

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"half width N must be a positive integer, got {self.N}")
        if int(self.q) != self.q or self.q < 1:
            raise ValidationError(f"orbitals per site q must be a positive integer, got {self.q}")

    @property
    def side(self) -> int:
        return 2 * self.N

    @property
    def n_sites(self) -> int:
        return self.side * self.side

    @property
    def total_dim(self) -> int:
        return self.n_sites * self.q

    def contains(self, m: Tuple[int, int]) -> bool:
        return all(-self.N <= c < self.N for c in m)

    def site_index(self, m: Tuple[int, int]) -> int:
        """Linear site number of lattice point m."""
        if not self.contains(m):
            raise ValidationError(f"site {m} outside the box [-{self.N}, {self.N})^2")
        return (m[0] + self.N) * self.side + (m[1] + self.N)

    def encode(self, m: Tuple[int, int], j: int) -> int:
        """Linear matrix index of (site m, orbital j)."""
        if not 0 <= j < self.q:
            raise ValidationError(f"orbital {j} outside 0..{self.q - 1}")
        return self.site_index(m) * self.q + j

    def decode(self, index: int) -> Tuple[Tuple[int, int], int]:
        """Inverse of :meth:`encode`."""
        if not 0 <= index < self.total_dim:
            raise ValidationError(f"index {index} outside 0..{self.total_dim - 1}")
        site, j = divmod(index, self.q)
        i1, i2 = divmod(site, self.side)
        return (i1 - self.N, i2 - self.N), j

    @cached_property
    def site_coords(self) -> np.ndarray:
        """(n_sites, 2) integer coordinates in linear site order."""
        axis = np.arange(-self.N, self.N)
        m1, m2 = np.meshgrid(axis, axis, indexing="ij")
        return np.stack([m1.ravel(), m2.ravel()], axis=1)

    @cached_property
    def coords(self) -> np.ndarray:
        """(total_dim, 2) site coordinates of every linear index."""
        return np.repeat(self.site_coords, self.q, axis=0)


@dataclass
class ModelSpec:
    """Lattice model parameters.

    Attributes:
        kind: Model family
        N: Half width of the box
        u: Two-band mass parameter
        W: Disorder strength (on-site, uniform on [-W/2, W/2])
        seed: 64-bit unsigned seed of the disorder generator
        boundary: Open or periodic box
        g: Atomic-limit gap
    """
    kind: ModelKind = ModelKind.TWO_BAND_CHERN
    N: int = 8
    u: float = 3.0
    W: float = 0.0
    seed: int = 0
    boundary: Boundary = Boundary.OPEN
    g: float = 2.0

    JSON_KEYS = ("kind", "N", "u", "W", "seed", "boundary", "g")

    def __post_init__(self):
        # 文字列からEnumへ正規化
        try:
            self.kind = ModelKind(self.kind)
            self.boundary = Boundary(self.boundary)
        except ValueError as e:
            raise ValidationError(str(e)) from e
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N}")
        self.N = int(self.N)
        if self.W < 0:
            raise ValidationError(f"disorder strength W must be >= 0, got {self.W}")
        if self.g <= 0:
            raise ValidationError(f"atomic gap g must be > 0, got {self.g}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self.seed = int(self.seed)
        self.u = float(self.u)
        self.W = float(self.W)
        self.g = float(self.g)

    @property
    def orbitals(self) -> int:
        return 2

    def indexing(self) -> LatticeIndexing:
        return LatticeIndexing(self.N, self.orbitals)

    def with_size(self, N: int) -> "ModelSpec":
        data = self.to_dict()
        data["N"] = N
        return ModelSpec.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "N": self.N,
            "u": self.u,
            "W": self.W,
            "seed": self.seed,
            "boundary": self.boundary.value,
            "g": self.g,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSpec":
        """Build from a JSON object; unknown keys are rejected."""
        if not isinstance(data, dict):
            raise ValidationError("model must be a JSON object")
        unknown = sorted(set(data) - set(cls.JSON_KEYS))
        if unknown:
            raise ValidationError(f"unknown model key: {unknown[0]}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"invalid model value: {e}") from e

    def model_hash(self) -> str:
        """Short stable digest of the model parameters."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def hermiticity_residual(matrix: np.ndarray) -> float:
    """max |A - A^dagger| entrywise."""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.conj().T)))


@dataclass(eq=False)
class HermitianOperator:
    """Dense Hermitian matrix; read-only after construction."""
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValidationError(f"operator must be square, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("operator has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        residual = hermiticity_residual(matrix)
        if residual > HERMITIAN_TOL * scale:
            raise ValidationError(f"operator is not Hermitian (residual {residual:.3e})")
        matrix.flags.writeable = False
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def diagonal(cls, values: np.ndarray) -> "HermitianOperator":
        return cls(np.diag(np.asarray(values, dtype=float)))

    def diag(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))


@dataclass(eq=False)
class Projector:
    """Orthogonal projector with validated algebra.

    Attributes:
        base: The projector as a Hermitian operator
        rank: Dimension of the range
        range_basis: Optional orthonormal columns spanning the range
    """
    base: HermitianOperator
    rank: int
    range_basis: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.range_basis is not None:
            # P = VV† なら ||P² - P|| = ||V†V - I||（スペクトルノルム）
            gram = self.range_basis.conj().T @ self.range_basis
            gram_residual = float(np.linalg.norm(gram - np.eye(gram.shape[0]), 2)) if gram.size else 0.0
            if gram_residual > IDEMPOTENT_TOL:
                raise NumericalError(f"range basis not orthonormal (residual {gram_residual:.3e})")
        else:
            residual = self.idempotency_residual()
            if residual > IDEMPOTENT_TOL:
                raise NumericalError(f"projector not idempotent (residual {residual:.3e})")
        trace = float(np.real(np.trace(self.base.matrix)))
        if abs(trace - self.rank) > TRACE_TOL:
            raise NumericalError(f"projector trace {trace:.12f} differs from rank {self.rank}")

    @property
    def matrix(self) -> np.ndarray:
        return self.base.matrix

    @property
    def dim(self) -> int:
        return self.base.dim

    def idempotency_residual(self) -> float:
        """||P^2 - P|| in spectral norm (Frobenius shortcut when already tiny)."""
        p = self.base.matrix
        diff = p @ p - p
        frob = float(np.linalg.norm(diff))
        if frob <= IDEMPOTENT_TOL:
            return frob
        return float(np.linalg.norm(diff, 2))

    @classmethod
    def from_columns(cls, columns: np.ndarray) -> "Projector":
        """Projector onto the span of orthonormal columns (zero columns ignored)."""
        columns = np.asarray(columns, dtype=complex)
        if columns.ndim != 2:
            raise ValidationError("columns must be a 2D array")
        if columns.shape[1]:
            keep = np.linalg.norm(columns, axis=0) > 0.5
            columns = columns[:, keep]
        p = columns @ columns.conj().T
        p = 0.5 * (p + p.conj().T)
        return cls(HermitianOperator(p), columns.shape[1], columns)

    @classmethod
    def zero(cls, dim: int) -> "Projector":
        return cls(HermitianOperator(np.zeros((dim, dim), dtype=complex)), 0, np.zeros((dim, 0), dtype=complex))


@dataclass
class DecayFit:
    """Kernel decay of a projector: max block norm per distance and its log-linear fit.

    Attributes:
        samples: (distance, max |P(m, m')|) pairs, sorted by distance
        gamma: Fitted decay rate (inf when the kernel vanishes beyond r = 0)
        prefactor: Fitted prefactor C in C exp(-gamma r)
        regime: "exponential", "super_exponential" or "degenerate"
    """
    samples: List[Tuple[float, float]]
    gamma: float
    prefactor: float
    regime: str = "exponential"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma if math.isfinite(self.gamma) else None,
            "prefactor": self.prefactor,
            "regime": self.regime,
            "samples": [[r, v] for r, v in self.samples],
        }


@dataclass(eq=False)
class WannierBasis:
    """Orthonormal column family with center points.

    Attributes:
        functions: (dim, n) complex columns; zero columns only after relabeling
        centers: (n, 2) real center points
        lattice_labels: Optional (n, 3) integer rows (m1, m2, j), j in 1..M
        degeneracy: Common degeneracy M of the relabeled squares
        padding: Optional boolean mask of zero-padding columns
    """
    functions: np.ndarray
    centers: np.ndarray
    lattice_labels: Optional[np.ndarray] = None
    degeneracy: int = 1
    padding: Optional[np.ndarray] = None

    def __post_init__(self):
        self.functions = np.asarray(self.functions, dtype=complex)
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        if self.functions.shape[1] != self.centers.shape[0]:
            raise ValidationError("one center per function required")
        if self.padding is None:
            self.padding = np.zeros(self.functions.shape[1], dtype=bool)
        real = self.functions[:, ~self.padding]
        gram = real.conj().T @ real
        residual = float(np.max(np.abs(gram - np.eye(gram.shape[0])))) if gram.size else 0.0
        if residual > GRAM_TOL:
            raise NumericalError(f"basis not orthonormal (Gram residual {residual:.3e})")
        if self.lattice_labels is not None:
            self.lattice_labels = np.asarray(self.lattice_labels, dtype=int).reshape(-1, 3)
            offset = np.abs(self.centers - self.lattice_labels[:, :2])
            if offset.size and float(np.max(offset)) > 0.5 + 1e-12:
                raise NumericalError("relabeled center lies outside its unit square")

    @property
    def size(self) -> int:
        return self.functions.shape[1]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(~self.padding))

    @property
    def is_relabeled(self) -> bool:
        return self.lattice_labels is not None

    def real_functions(self) -> np.ndarray:
        return self.functions[:, ~self.padding]


@dataclass
class MomentReport:
    """Japanese-bracket moments of every (non-padding) basis function at one s.

    Attributes:
        s: Moment order
        values: Moment per function
        labels: Optional (n, 3) labels aligned with values
    """
    s: float
    values: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size and float(np.min(self.values)) < 1.0 - 1e-9:
            raise NumericalError(f"moment below 1 at s={self.s}")

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values.size else 0.0


@dataclass
class MarkerResult:
    """One Chern marker evaluation.

    Attributes:
        L: Window half width
        value: Real part of the marker
        imaginary_residual: |imaginary part|, a numerical health metric
        form: Window form
    """
    L: int
    value: float
    imaginary_residual: float
    form: MarkerForm

    def __post_init__(self):
        self.form = MarkerForm(self.form)
        if self.imaginary_residual > 1e-8 * max(1.0, abs(self.value)):
            raise NumericalError(
                f"marker at L={self.L} has imaginary part {self.imaginary_residual:.3e}"
            )


@dataclass
class TraceReduction:
    """Both sides of the trace reduction identity plus the traceless commutator."""
    lhs: complex
    rhs: complex
    commutator_trace: complex
    scale: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    def holds(self, tol: float = 1e-8) -> bool:
        return (self.residual <= tol * max(1.0, abs(self.lhs))
                and abs(self.commutator_trace) <= tol * self.scale)


@dataclass
class ScalingSeries:
    """Observable versus an integer parameter with a fitted power law.

    Attributes:
        name: Series name
        parameter: Parameter name ("L", "a" or "b")
        points: (parameter, observable) pairs, sorted by parameter
        exponent: Fitted log-log slope (None if numerically zero)
        r2: Fit quality
        witness: Witness constant C* of the stated bound
        status: "fitted", "numerically_zero" or "insufficient"
        checks: Exact invariants (a failure is a numerical error)
        tolerance: Desk-scale expectations (exponents, monotone trends)
        extras: Auxiliary per-point quantities
    """
    name: str
    parameter: str
    points: List[Tuple[int, float]]
    exponent: Optional[float] = None
    r2: Optional[float] = None
    witness: Optional[float] = None
    status: str = "fitted"
    checks: Dict[str, bool] = field(default_factory=dict)
    extras: Dict[str, List[float]] = field(default_factory=dict)
    tolerance: Optional[Dict[str, bool]] = None

    def __post_init__(self):
        self.points = sorted((int(p), float(v)) for p, v in self.points)
        for p, v in self.points:
            if not math.isfinite(v) or v < 0:
                raise NumericalError(f"series {self.name}: observable at {p} is {v}")
        if self.tolerance is None:
            self.tolerance = {}

    @property
    def params(self) -> List[int]:
        return [p for p, _ in self.points]

    @property
    def values(self) -> List[float]:
        return [v for _, v in self.points]

    def is_non_increasing(self, slack: float = 0.0) -> bool:
        vals = self.values
        return all(b <= a + slack for a, b in zip(vals, vals[1:]))

    def is_strictly_decreasing(self) -> bool:
        vals = self.values
        return all(b < a for a, b in zip(vals, vals[1:]))

    def passed(self) -> bool:
        return all(self.checks.values())

    def within_tolerance(self) -> bool:
        return all(self.tolerance.values())

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "exponent": self.exponent,
            "r2": self.r2,
            "witness_C": self.witness,
            "status": self.status,
            "checks": dict(self.checks),
            "tolerance": dict(self.tolerance),
        }


@dataclass
class DecayTrickRow:
    """One labeled function outside the window chi_a.

    region is 1 (both |m1|, |m2| > a), 2 (only |m1| > a) or 3 (only |m2| > a).
    """
    label: Tuple[int, int, int]
    region: int
    observable: float
    bound: float
    explicit_lhs: float
    explicit_rhs: float

    @property
    def ratio(self) -> float:
        return self.observable / self.bound


@dataclass
class DecayTrickReport:
    """Window mass of far-away basis functions against the three-region bound."""
    a: int
    delta: float
    rows: List[DecayTrickRow] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=0.0)

    def region_counts(self) -> Dict[int, int]:
        counts = {1: 0, 2: 0, 3: 0}
        for row in self.rows:
            counts[row.region] += 1
        return counts

    def summary(self) -> Dict[str, Any]:
        return {
            "name": "decay_trick",
            "a": self.a,
            "delta": self.delta,
            "max_ratio": self.max_ratio,
            "regions": {str(k): v for k, v in self.region_counts().items()},
            "checks": dict(self.checks),
        }


@dataclass
class RunManifest:
    """Record of one CLI run.

    ``checks`` are invariants and decide success; ``tolerance`` records the
    desk-scale expectations (fitted exponents, trends) without failing the run.
    """
    config_hash: str
    tool_version: str
    command: str
    started_at: str
    finished_at: str = ""
    artifacts: List[str] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    tolerance: Dict[str, bool] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "command": self.command,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "artifacts": list(self.artifacts),
            "checks": dict(self.checks),
            "tolerance": dict(self.tolerance),
            "success": self.success,
        }
