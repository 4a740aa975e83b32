"""Experiment orchestration for the Chern marker laboratory"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

import numpy as np

from . import chern, estimates, spectral, wannier
from .hamiltonian import build_model
from .models import (
    HermitianOperator, LatticeIndexing, ModelKind, ModelSpec, Projector, RunManifest, WannierBasis,
    hermiticity_residual,
)
from .settings import ExperimentConfig
from .storage import ArtifactStore
from .. import __version__
from ..utils.error_handler import EXIT_NUMERICAL, EXIT_OK


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

IDENTITY_TOL = 1e-9
TRACE_REDUCTION_TOL = 1e-8
TRIVIAL_MARKER = 0.05
STABLE_GROWTH = 0.10
DELOCALIZED_GROWTH = 0.25


@dataclass
class PreparedModel:
    """Everything derived from one lattice size."""
    spec: ModelSpec
    idx: LatticeIndexing
    H: HermitianOperator
    P: Projector
    X: HermitianOperator
    Y: HermitianOperator
    basis: Optional[WannierBasis] = None

    @property
    def N(self) -> int:
        return self.spec.N


class ExperimentManager:
    """Runs the four laboratory commands for one configuration.

    Each command stages its artifacts in an :class:`ArtifactStore`
    transaction and returns an exit code: 0 when every invariant holds,
    1 when an invariant failed (the manifest lists which). Exceptions
    discard the staged files.
    """

    def __init__(self, config: ExperimentConfig, out_dir: Optional[str] = None, threads: int = 1) -> None:
        """Initialize the manager.

        Args:
            config: Validated experiment configuration
            out_dir: Output directory (defaults to config.output_dir)
            threads: Worker threads for independent units
        """
        self.config = config
        self.store = ArtifactStore(out_dir or config.output_dir)
        self.threads = max(1, int(threads))

    def _map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply fn to independent items; results keep input order."""
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def prepare(self, N: int, with_basis: bool = False) -> PreparedModel:
        """Build H, the Fermi projector, X, Y and optionally the relabeled basis at size N."""
        spec = self.config.model.with_size(N)
        idx = spec.indexing()
        H = build_model(spec)
        P = spectral.fermi_projector(H, self.config.fermi_level)
        X, Y = spectral.position_operators(idx)
        run = PreparedModel(spec, idx, H, P, X, Y)
        if with_basis:
            gwb = wannier.build_gwb_pxp(P, X, Y, self.config.cluster_tol)
            run.basis = wannier.relabel_to_lattice(gwb)
        logger.info("prepared %s N=%d: rank %d of %d", spec.kind.value, N, P.rank, P.dim)
        return run

    def _manifest(self, command: str) -> RunManifest:
        return RunManifest(
            config_hash=self.config.config_hash(),
            tool_version=__version__,
            command=command,
            started_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def _finish(self, manifest: RunManifest) -> int:
        manifest.finished_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.store.write_manifest(manifest)
        failed = [name for name, ok in manifest.checks.items() if not ok]
        if failed:
            logger.warning("%s: %d invariant checks failed: %s", manifest.command, len(failed), failed[:5])
            return EXIT_NUMERICAL
        logger.info("%s finished, %d artifacts", manifest.command, len(manifest.artifacts))
        return EXIT_OK

    def cmd_spectrum(self) -> int:
        """Eigenvalues, kernel decay fit and projector algebra per lattice size."""
        manifest = self._manifest("spectrum")
        with self.store.transaction():
            rows = []
            fits: Dict[str, Any] = {}
            for N in self.config.run_sizes:
                run = self.prepare(N)
                values, _ = spectral.eigh(run.H, verify=True)
                model_hash = run.spec.model_hash()
                rows.extend((model_hash, N, i, v) for i, v in enumerate(values))

                fit = spectral.kernel_decay_fit(run.P, run.idx)
                entry = fit.to_dict()
                gap = spectral.bulk_gap(run.H, run.idx, self.config.fermi_level)
                entry["bulk_gap"] = gap if math.isfinite(gap) else None
                entry["rank"] = run.P.rank
                fits[str(N)] = entry

                trace = float(np.real(np.trace(run.P.matrix)))
                manifest.checks[f"N{N}_idempotent"] = run.P.idempotency_residual() <= 1e-10
                manifest.checks[f"N{N}_hermitian"] = hermiticity_residual(run.P.matrix) <= 1e-12
                manifest.checks[f"N{N}_trace_rank"] = abs(trace - run.P.rank) <= 1e-8
            self.store.write_csv("eigenvalues.csv", ("model_hash", "N", "index", "eigenvalue"), rows)
            self.store.write_json("decay_fit.json", fits)
            return self._finish(manifest)

    def _markers_at_size(self, N: int, manifest: RunManifest):
        run = self.prepare(N, with_basis=True)
        C = chern.double_commutator(run.P, run.X, run.Y)
        scale = float(np.max(np.abs(run.X.diag())) * np.max(np.abs(run.Y.diag())))

        def evaluate(L: int):
            chi = chern.chern_marker_chi(run.P, run.X, run.Y, L, run.idx, C)
            pl = chern.chern_marker_pl(run.P, run.basis, run.X, run.Y, L, C)
            reduction = chern.trace_reduction_check(run.P, run.basis, run.X, run.Y, L, C)
            holder = chern.holder_chain(run.P, run.basis, run.X, run.Y, L, C)
            return chi, pl, reduction, holder

        results = self._map(evaluate, self.config.L_values)
        identity = chern.commutator_identity_residual(run.P, run.X, run.Y)
        whole = chern.whole_sample_trace(run.P, run.X, run.Y)
        manifest.checks[f"N{N}_commutator_identity"] = identity <= IDENTITY_TOL * max(1.0, scale)
        manifest.checks[f"N{N}_whole_sample_trace"] = abs(whole) <= 1e-8 * max(1.0, scale * run.P.rank)

        markers, identities = [], []
        for L, (chi, pl, reduction, holder) in zip(self.config.L_values, results):
            markers.extend([chi, pl])
            manifest.checks[f"N{N}_L{L}_trace_reduction"] = reduction.holds(TRACE_REDUCTION_TOL)
            manifest.checks[f"N{N}_L{L}_holder_chain"] = holder[0] <= holder[1] * (1 + 1e-10) + 1e-12
            identities.append((N, L, reduction.lhs.real, reduction.lhs.imag, reduction.rhs.real,
                               reduction.rhs.imag, holder[0], holder[1]))
        return chern.marker_rows(markers, run.spec.model_hash(), N), identities

    def cmd_marker_sweep(self) -> int:
        """Both marker forms at every window, the identity checks and the k-space oracle."""
        manifest = self._manifest("marker-sweep")
        with self.store.transaction():
            marker_rows, identity_rows = [], []
            for N in self.config.run_sizes:
                markers, identities = self._markers_at_size(N, manifest)
                marker_rows.extend(markers)
                identity_rows.extend(identities)
            self.store.write_csv(
                "markers.csv", ("model_hash", "N", "L", "form", "value", "imag_residual"), marker_rows)
            self.store.write_csv(
                "identities.csv",
                ("N", "L", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "holder_lhs", "holder_rhs"),
                identity_rows)

            model = self.config.model
            if model.kind is ModelKind.TWO_BAND_CHERN and model.W == 0:
                oracle = chern.fhs_chern_number(model.u, self.config.fhs_grid)
                self.store.write_json("fhs_oracle.json", {
                    "u": model.u, "grid": self.config.fhs_grid, "chern_number": oracle})
            return self._finish(manifest)

    def _localization_at_size(self, N: int) -> Dict[str, Any]:
        run = self.prepare(N, with_basis=True)
        s_list = sorted(set(self.config.s_values) | {1.0 + self.config.delta})
        reports = wannier.localization_profile(run.basis, s_list, run.idx)
        L = max(self.config.L_values)
        marker = chern.chern_marker_pl(run.P, run.basis, run.X, run.Y, L)
        return {
            "N": N,
            "basis": run.basis,
            "reports": reports,
            "span_residual": wannier.span_residual(run.basis, run.P),
            "bounded_density": wannier.bounded_density(run.basis.centers[~run.basis.padding]),
            "marker": marker,
        }

    def cmd_dichotomy_report(self) -> int:
        """Moments of the constructed basis across sizes next to the marker."""
        manifest = self._manifest("dichotomy")
        target = 1.0 + self.config.delta
        with self.store.transaction():
            per_size = self._map(self._localization_at_size, self.config.run_sizes)
            rows = []
            details: Dict[str, Any] = {}
            for result in per_size:
                N = result["N"]
                rows.extend((N, *row) for row in wannier.moment_rows(result["reports"]))
                self.store.write_basis(f"basis_N{N}.gwb", result["basis"], N)
                details[str(N)] = {
                    "degeneracy": result["basis"].degeneracy,
                    "bounded_density": result["bounded_density"],
                    "span_residual": result["span_residual"],
                    "marker_pl": result["marker"].value,
                    "max_moment": {format(r.s, "g"): r.max for r in result["reports"]},
                    "mean_moment": {format(r.s, "g"): r.mean for r in result["reports"]},
                }
                manifest.checks[f"N{N}_span"] = result["span_residual"] <= 1e-8

            def max_at_target(result) -> float:
                return next(r.max for r in result["reports"] if r.s == target)

            first, last = max_at_target(per_size[0]), max_at_target(per_size[-1])
            trend = (last - first) / first if len(per_size) > 1 else 0.0
            marker_value = per_size[-1]["marker"].value
            verdict = {
                "phase_guess": self._phase_guess(marker_value, trend, len(per_size) > 1),
                "max_moment_trend": trend,
                "marker_value": marker_value,
            }
            self.store.write_csv("moments.csv", ("N", "label_m1", "label_m2", "j", "s", "moment"), rows)
            self.store.write_json("localization.json", details)
            self.store.write_json("verdict.json", verdict)
            logger.info("dichotomy verdict: %s", verdict)
            return self._finish(manifest)

    @staticmethod
    def _phase_guess(marker_value: float, trend: float, has_trend: bool) -> str:
        if abs(marker_value) < TRIVIAL_MARKER and (not has_trend or trend < STABLE_GROWTH):
            return "trivial"
        if abs(marker_value) > 0.5 or (has_trend and trend > DELOCALIZED_GROWTH):
            return "topological"
        return "inconclusive"

    def _series_at_size(self, N: int):
        cfg = self.config
        run = self.prepare(N, with_basis=True)
        toggles = cfg.estimates
        L_values = sorted(set(cfg.L_values))
        tasks: List[Callable[[], Any]] = []
        if toggles.near_bd:
            tasks.append(lambda: [estimates.prop_near_bd(run.basis, cfg.a, cfg.b_values, run.idx, cfg.delta)])
        if toggles.far_bd:
            tasks.append(lambda: [estimates.prop_far_bd(run.basis, cfg.a, cfg.b_values, run.idx, cfg.delta)])
        if toggles.approx:
            tasks.append(lambda: [estimates.prop_approx_series(run.P, run.basis, L_values, run.idx, cfg.delta)])
        if toggles.pl_chern:
            tasks.append(lambda: [estimates.prop_pl_chern_diff(run.P, run.basis, run.X, run.Y, L_values)])
        if toggles.p_x_pl:
            tasks.append(lambda: list(estimates.prop_p_x_pl(run.P, run.basis, run.X, run.Y, L_values, cfg.delta)))
        series = [s for group in self._map(lambda task: task(), tasks) for s in group]
        decay = estimates.lemma_decay_trick(run.basis, cfg.a, run.idx, cfg.delta) if toggles.decay_trick else None
        return N, series, decay

    def cmd_estimates_suite(self) -> int:
        """All toggled estimate series per size, with invariants and the tolerance table."""
        manifest = self._manifest("estimates")
        with self.store.transaction():
            summary: Dict[str, Any] = {"sizes": {}, "witness_stability": {}}
            by_name: Dict[str, list] = {}
            for N, series_list, decay in (self._series_at_size(N) for N in self.config.run_sizes):
                entries = []
                for series in series_list:
                    self.store.write_csv(
                        f"series_{series.name}_N{N}.csv", ("series_name", "param", "value"),
                        estimates.series_rows(series))
                    entries.append(series.summary())
                    for key, ok in series.checks.items():
                        manifest.checks[f"N{N}_{series.name}_{key}"] = ok
                    for key, ok in series.tolerance.items():
                        manifest.tolerance[f"N{N}_{series.name}_{key}"] = ok
                    by_name.setdefault(series.name, []).append(series)
                if decay is not None:
                    self.store.write_csv(
                        f"decay_trick_N{N}.csv",
                        ("label_m1", "label_m2", "j", "region", "observable", "bound", "ratio"),
                        estimates.decay_trick_rows(decay))
                    entries.append(decay.summary())
                    for key, ok in decay.checks.items():
                        manifest.checks[f"N{N}_decay_trick_{key}"] = ok
                summary["sizes"][str(N)] = entries

            for name, group in by_name.items():
                if len(group) > 1:
                    stable = estimates.witness_stable(group[0], group[-1])
                    summary["witness_stability"][name] = stable
                    if stable is not None:
                        manifest.tolerance[f"{name}_witness_stable"] = stable
            self.store.write_json("estimates_summary.json", summary)
            return self._finish(manifest)
