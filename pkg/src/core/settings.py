"""Experiment configuration for the Chern marker laboratory"""

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List

from .models import ModelSpec
from ..utils.error_handler import ValidationError


logger = logging.getLogger(__name__)

SUPPORTED_VERSIONS = ("1.0",)
MAX_CONFIG_SIZE = 1024 * 1024  # 1MB制限


def _reject_unknown(data: Dict[str, Any], allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown {where} key: {unknown[0]}")


def _int_list(value: Any, key: str) -> List[int]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ValidationError(f"{key} must be a list of integers")
    return list(value)


def _float_list(value: Any, key: str) -> List[float]:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ValidationError(f"{key} must be a list of numbers")
    return [float(v) for v in value]


@dataclass
class EstimateToggles:
    """Which estimate series the suite runs."""
    near_bd: bool = True
    far_bd: bool = True
    approx: bool = True
    pl_chern: bool = True
    p_x_pl: bool = True
    decay_trick: bool = True

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EstimateToggles":
        if not isinstance(data, dict):
            raise ValidationError("estimates must be a JSON object")
        _reject_unknown(data, [f.name for f in fields(cls)], "estimates")
        for key, value in data.items():
            if not isinstance(value, bool):
                raise ValidationError(f"estimates.{key} must be true or false")
        return cls(**data)

    def to_dict(self) -> Dict[str, bool]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def enabled(self) -> List[str]:
        return [name for name, on in self.to_dict().items() if on]


@dataclass
class ExperimentConfig:
    """One experiment: a model family, lattice sizes, windows and estimate settings.

    Attributes:
        model: Model parameters; ``model.N`` is the default lattice size
        fermi_level: E_F of the Fermi projector
        delta: Localization excess, moments are taken at s = 1 + delta
        L_values: Marker and estimate windows (each <= N/2 for every size)
        estimates: Series toggles for the estimate suite
        output_dir: Where artifacts go (overridable from the command line)
        cluster_tol: Gap separating PXP clusters
        sizes: Lattice half widths to run (empty means [model.N])
        s_values: Moment orders reported by the dichotomy report
        a: Inner window of the near/far boundary estimates
        b_values: Collar widths of the near/far boundary estimates
        fhs_grid: Brillouin-zone mesh of the k-space oracle
        version: Config format version
    """
    model: ModelSpec = field(default_factory=ModelSpec)
    fermi_level: float = 0.0
    delta: float = 0.5
    L_values: List[int] = field(default_factory=lambda: [2, 3, 4])
    estimates: EstimateToggles = field(default_factory=EstimateToggles)
    output_dir: str = "results"
    cluster_tol: float = 0.25
    sizes: List[int] = field(default_factory=list)
    s_values: List[float] = field(default_factory=lambda: [1.0, 1.5])
    a: int = 2
    b_values: List[int] = field(default_factory=lambda: [1, 2, 3, 4])
    fhs_grid: int = 24
    version: str = "1.0"

    def __post_init__(self):
        self.validate()

    @property
    def run_sizes(self) -> List[int]:
        return list(self.sizes) if self.sizes else [self.model.N]

    def validate(self) -> None:
        """Check cross-field invariants.

        Raises:
            ValidationError: On the first violated invariant
        """
        if self.version not in SUPPORTED_VERSIONS:
            raise ValidationError(f"Unsupported version: {self.version}")
        if self.delta <= 0:
            raise ValidationError(f"delta must be > 0, got {self.delta}")
        if self.cluster_tol <= 0:
            raise ValidationError(f"cluster_tol must be > 0, got {self.cluster_tol}")
        if not self.L_values:
            raise ValidationError("L_values must not be empty")
        if any(s < 1 for s in self.run_sizes):
            raise ValidationError("sizes must be positive")
        if any(s <= 0 for s in self.s_values):
            raise ValidationError("s_values must be > 0")
        if self.fhs_grid < 8:
            raise ValidationError(f"fhs_grid must be >= 8, got {self.fhs_grid}")
        smallest = min(self.run_sizes)
        for L in self.L_values:
            if L < 1 or 2 * L > smallest:
                raise ValidationError(f"L={L} outside 1..N/2 for N={smallest}")
        if self.a < 1 or not self.b_values or min(self.b_values) < 1:
            raise ValidationError("a and every b must be >= 1")
        if self.a + max(self.b_values) > smallest:
            raise ValidationError(f"a + max(b) = {self.a + max(self.b_values)} exceeds N={smallest}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build from a JSON object; unknown keys are rejected at every level."""
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        _reject_unknown(data, [f.name for f in fields(cls)], "config")
        if "model" not in data:
            raise ValidationError("config is missing model")
        kwargs = dict(data)
        kwargs["model"] = ModelSpec.from_dict(data["model"])
        if "estimates" in data:
            kwargs["estimates"] = EstimateToggles.from_dict(data["estimates"])
        for key in ("L_values", "sizes", "b_values"):
            if key in data:
                kwargs[key] = _int_list(data[key], key)
        if "s_values" in data:
            kwargs["s_values"] = _float_list(data["s_values"], "s_values")
        for key in ("fermi_level", "delta", "cluster_tol"):
            if key in data:
                if isinstance(data[key], bool) or not isinstance(data[key], (int, float)):
                    raise ValidationError(f"{key} must be a number")
                kwargs[key] = float(data[key])
        for key in ("a", "fhs_grid"):
            if key in data and (isinstance(data[key], bool) or not isinstance(data[key], int)):
                raise ValidationError(f"{key} must be an integer")
        if "version" in data:
            kwargs["version"] = str(data["version"])
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model.to_dict(),
            "fermi_level": self.fermi_level,
            "delta": self.delta,
            "L_values": list(self.L_values),
            "estimates": self.estimates.to_dict(),
            "output_dir": self.output_dir,
            "cluster_tol": self.cluster_tol,
            "sizes": list(self.sizes),
            "s_values": list(self.s_values),
            "a": self.a,
            "b_values": list(self.b_values),
            "fhs_grid": self.fhs_grid,
            "version": self.version,
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, output_dir excluded."""
        data = self.to_dict()
        data.pop("output_dir")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config file.

    Raises:
        ValidationError: If the file is unreadable, too large or invalid
    """
    try:
        size = os.path.getsize(path)
    except OSError as e:
        raise ValidationError(f"cannot read config {path}: {e}") from e
    if size > MAX_CONFIG_SIZE:
        raise ValidationError(f"config file too large (max {MAX_CONFIG_SIZE // 1024}KB)")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"config {path} is not valid JSON: {e}") from e
    config = ExperimentConfig.from_dict(data)
    logger.debug("loaded config %s (hash %s)", path, config.config_hash()[:12])
    return config


def save_config(config: ExperimentConfig, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, ensure_ascii=False, indent=2)
