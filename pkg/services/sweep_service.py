"""
Configuration-driven execution of single runs and parameter sweeps.
"""

import itertools
import logging
import math
import time
from collections import defaultdict
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

from config import settings
from schemas.domain import CouplingSet, DriveProtocol, SpinGraph, StateKind, TimeSeries
from schemas.request_schemas import RunConfig
from schemas.response_schemas import CellStatus, RunManifest
from services.analysis_service import (
    PhaseCell,
    PhaseDiagram,
    analyze_series,
    fit_combined_heating,
    fit_power_law,
    period_doubling_magnitude,
    rigidity_extent,
    run_phase_cell,
    seed_spread,
)
from services.lattice_service import (
    compute_couplings,
    default_scale_window,
    estimate_coupling_scale,
    generate_graph,
    sample_disorder,
)
from store.artifact_store import ArtifactStore
from utils.errors import ConfigError, FitError
from utils.file_utils import FileManager
from utils.naming import NamingUtils

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ["numpy", "scipy", "pandas", "pydantic", "joblib"]


class GraphContext(BaseModel):
    """A realized graph with its disorder and interaction scale."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    graph: SpinGraph
    couplings: CouplingSet
    disorder_seed: Optional[int] = None
    coupling_scale: Optional[float] = None


class SweepCell(BaseModel):
    """One point of the sweep grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    group: int
    graph_seed: int
    parameters: Dict[str, Any]
    protocol: DriveProtocol
    initial: StateKind


def _package_versions() -> Dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _run_partition(
    cells: Sequence[SweepCell],
    contexts: Dict[int, GraphContext],
    config: RunConfig,
    progress: bool,
) -> List[Tuple[int, PhaseCell]]:
    results = []
    for cell in tqdm(cells, desc="cells", disable=not progress, leave=False):
        context = contexts[cell.graph_seed]
        outcome = run_phase_cell(
            context.couplings,
            cell.protocol,
            config.hamiltonian,
            cell.initial,
            config.analysis.rectify,
            provenance=SweepService.provenance(cell, context, config),
            threshold=config.analysis.threshold,
        )
        results.append((cell.index, outcome))
    return results


class SweepService:
    """Builds graphs, runs every sweep cell and writes the artifact set."""

    def __init__(self, store: ArtifactStore):
        self.store = store

    @staticmethod
    def provenance(cell: SweepCell, context: GraphContext, config: RunConfig) -> Dict[str, str]:
        entries = {
            "app": f"{settings.APP_NAME} {settings.APP_VERSION}",
            "cell_index": str(cell.index),
            "graph_seed": str(context.graph.seed),
            "graph_L": str(context.graph.L),
            "disorder_seed": str(context.disorder_seed),
            "hamiltonian": config.hamiltonian,
            "initial_state": cell.initial.model_dump_json(),
        }
        if context.coupling_scale is not None:
            entries["coupling_scale_J"] = repr(context.coupling_scale)
        return entries

    def build_contexts(self, config: RunConfig) -> Dict[int, GraphContext]:
        """Realize every graph of the sweep, estimating J when τ is given in units of 1/J."""
        graph_config = config.graph
        needs_scale = config.protocol.tau_j is not None or bool(config.sweep.tau_j)
        contexts: Dict[int, GraphContext] = {}

        if graph_config.file is not None:
            if config.sweep.graph_seed:
                raise ConfigError("graph_seed sweeps need inline graph parameters")
            graph, couplings = FileManager.read_graph(Path(graph_config.file))
            contexts[graph.seed] = GraphContext(graph=graph, couplings=couplings)
        else:
            seeds = config.sweep.graph_seed or [graph_config.seed]
            for offset, seed in enumerate(seeds):
                graph = generate_graph(graph_config.L, graph_config.r_min, graph_config.r_max, seed)
                couplings = compute_couplings(graph, graph_config.field_axis)
                disorder_seed = graph_config.disorder.seed + offset
                b = couplings.median_coupling
                couplings = sample_disorder(
                    couplings, graph_config.disorder.mean_factor * b, graph_config.disorder.sigma_factor * b, disorder_seed
                )
                contexts[seed] = GraphContext(graph=graph, couplings=couplings, disorder_seed=disorder_seed)

        for context in contexts.values():
            if needs_scale:
                dt, t_max = default_scale_window(context.couplings)
                dt = config.coupling_scale.dt or dt
                t_max = config.coupling_scale.t_max or t_max
                context.coupling_scale = estimate_coupling_scale(context.couplings, dt, t_max)
            self.store.save_graph(context.graph, context.couplings)
        return contexts

    @staticmethod
    def build_cells(config: RunConfig, contexts: Dict[int, GraphContext]) -> List[SweepCell]:
        """Cartesian product in the order graph seed, N, τ, ϑ, t_d, γ."""
        template = config.protocol
        sweep = config.sweep
        if sweep.tau:
            timings = [("tau", v) for v in sweep.tau]
        elif sweep.tau_j:
            timings = [("tau_j", v) for v in sweep.tau_j]
        elif template.tau is not None:
            timings = [("tau", template.tau)]
        else:
            timings = [("tau_j", template.tau_j)]
        initials = (
            [StateKind(kind="evolved", t_d=t_d) for t_d in sweep.t_d] if sweep.t_d else [config.initial_state]
        )

        cells: List[SweepCell] = []
        group = -1
        outer = itertools.product(
            sorted(contexts), sweep.N or [template.N], timings, sweep.theta or [template.theta], initials
        )
        for seed, N, (timing, value), theta, initial in outer:
            group += 1
            context = contexts[seed]
            tau = value if timing == "tau" else value / context.coupling_scale
            for gamma in sweep.gamma_values() or [template.gamma]:
                protocol = DriveProtocol(
                    theta=theta,
                    gamma=gamma,
                    tau=tau,
                    N=N,
                    M=template.M,
                    slow_axis=template.slow_axis,
                    noise_fraction=template.noise_fraction,
                    noise_seed=template.noise_seed,
                    measure_every=template.measure_every,
                )
                parameters = {
                    "graph_seed": seed,
                    "N": N,
                    "tau": tau,
                    "tau_j": value if timing == "tau_j" else None,
                    "theta": theta,
                    "t_d": initial.t_d if initial.kind == "evolved" else None,
                    "gamma": gamma,
                }
                cells.append(
                    SweepCell(
                        index=len(cells),
                        group=group,
                        graph_seed=seed,
                        parameters=parameters,
                        protocol=protocol,
                        initial=initial,
                    )
                )
        return cells

    def execute(self, config: RunConfig, workers: Optional[int] = None, limit: Optional[int] = None) -> RunManifest:
        """Run every cell (or the first `limit`) and write all data products."""
        start = time.perf_counter()
        workers = workers or config.workers or settings.DEFAULT_WORKERS
        self.store.prepare()
        config_hash = self.store.save_config(config)

        contexts = self.build_contexts(config)
        cells = self.build_cells(config, contexts)
        if limit is not None:
            cells = cells[:limit]
        logger.info(f"Executing {len(cells)} cell(s) on {workers} worker(s)")

        # static partition by cell index
        partitions = [cells[w::workers] for w in range(workers)]
        chunks = Parallel(n_jobs=workers)(
            delayed(_run_partition)(part, contexts, config, workers == 1) for part in partitions if part
        )
        outcomes = dict(item for chunk in chunks for item in chunk)

        statuses = self._write_cells(cells, outcomes)
        if config.analysis.spectrum or config.analysis.heating_time:
            self._write_groups(cells, outcomes, config)
        fits = self._collect_fits(cells, outcomes, config)
        fits["provenance.config_hash"] = config_hash
        for status in statuses:
            if status.series_hash is not None:
                fits[f"provenance.series.{status.index:05d}"] = status.series_hash
        self.store.save_fits(fits)

        manifest = RunManifest(
            app=settings.APP_NAME,
            version=settings.APP_VERSION,
            schema_version=config.schema_version,
            config_hash=config_hash,
            wall_time_seconds=time.perf_counter() - start,
            workers=workers,
            versions=_package_versions(),
            cells=statuses,
        )
        self.store.save_manifest(manifest)
        logger.info(
            f"Sweep finished: {len(statuses) - len(manifest.failed_cells)} ok, "
            f"{len(manifest.failed_cells)} failed, {manifest.wall_time_seconds:.1f}s"
        )
        return manifest

    def analyze(self, config: RunConfig) -> List[CellStatus]:
        """Re-derive lifetimes, spectra, heatmaps and fits from saved series.

        Cells recorded as failed in the run manifest keep their failure reason.
        """
        saved = self.store.load_series()
        failed: Dict[int, str] = {}
        if self.store.manifest_path.exists():
            failed = {cell.index: cell.reason or "failed" for cell in self.store.load_manifest().failed_cells}
        contexts = self.load_contexts(config, saved)
        cells = [cell for cell in self.build_cells(config, contexts) if cell.index in saved or cell.index in failed]
        logger.info(f"Analyzing {len(saved)} saved series in {self.store.root} ({len(failed)} failed cell(s))")

        analysis = config.analysis
        outcomes = {}
        for cell in cells:
            if cell.index in saved:
                outcomes[cell.index] = analyze_series(saved[cell.index], analysis.rectify, analysis.threshold)
            else:
                outcomes[cell.index] = PhaseCell(gamma=cell.parameters["gamma"], error=failed[cell.index])
        statuses = self._write_cells(cells, outcomes, persist=False)
        if config.analysis.spectrum or config.analysis.heating_time:
            self._write_groups(cells, outcomes, config)
        fits = self._collect_fits(cells, outcomes, config)
        fits["provenance.config_hash"] = NamingUtils.content_hash(FileManager.dump_run_config(config))
        for status in statuses:
            if status.series_hash is not None:
                fits[f"provenance.series.{status.index:05d}"] = status.series_hash
        self.store.save_fits(fits)
        return statuses

    def load_contexts(self, config: RunConfig, saved: Dict[int, TimeSeries]) -> Dict[int, GraphContext]:
        """Graphs as written by a previous execution, with J recovered from series provenance."""
        if config.graph.file is not None:
            seeds = [FileManager.read_graph(Path(config.graph.file))[0].seed]
        else:
            seeds = config.sweep.graph_seed or [config.graph.seed]

        scales: Dict[int, float] = {}
        for series in saved.values():
            if "coupling_scale_J" in series.provenance:
                scales[int(series.provenance["graph_seed"])] = float(series.provenance["coupling_scale_J"])

        contexts = {}
        for seed in seeds:
            graph, couplings = self.store.load_graph(seed)
            contexts[seed] = GraphContext(graph=graph, couplings=couplings, coupling_scale=scales.get(seed))
        if (config.protocol.tau_j is not None or config.sweep.tau_j) and len(scales) < len(contexts):
            raise ConfigError("saved series lack the coupling scale needed to resolve tau_j")
        return contexts

    def _write_cells(
        self, cells: Sequence[SweepCell], outcomes: Dict[int, PhaseCell], persist: bool = True
    ) -> List[CellStatus]:
        statuses = []
        rows = []
        for cell in cells:
            outcome = outcomes[cell.index]
            status = CellStatus(index=cell.index, parameters=cell.parameters)
            if outcome.error is not None:
                status.status, status.reason = "failed", outcome.error
            else:
                if persist:
                    status.series_file, status.series_hash = self.store.save_series(cell.index, outcome.series)
                else:
                    status.series_file, status.series_hash = self.store.series_record(cell.index)
                status.lifetime, status.lifetime_error = outcome.lifetime, outcome.lifetime_error
            statuses.append(status)

            lifetime = outcome.lifetime
            rows.append(
                {
                    "cell": cell.index,
                    "group": cell.group,
                    **cell.parameters,
                    "status": status.status,
                    "lifetime_kicks": lifetime.kicks if lifetime else math.nan,
                    "lifetime_cycles": lifetime.cycles if lifetime else math.nan,
                    "lifetime_time": lifetime.time if lifetime else math.nan,
                    "pi_peak": period_doubling_magnitude(outcome.spectrum) if outcome.spectrum else math.nan,
                    "zero_peak": outcome.spectrum.magnitude_at(0.0) if outcome.spectrum else math.nan,
                }
            )
        self.store.save_lifetimes(pd.DataFrame(rows))
        return statuses

    def _write_groups(self, cells: Sequence[SweepCell], outcomes: Dict[int, PhaseCell], config: RunConfig) -> None:
        for group, members in itertools.groupby(cells, key=lambda c: c.group):
            diagram = PhaseDiagram(cells=[outcomes[c.index] for c in members])
            if config.analysis.heating_time:
                self.store.save_heatmap(group, diagram.heatmap_frame())
            if config.analysis.spectrum:
                self.store.save_spectra(group, diagram.spectra_frame())

    def _collect_fits(
        self, cells: Sequence[SweepCell], outcomes: Dict[int, PhaseCell], config: RunConfig
    ) -> Dict[str, object]:
        fits: Dict[str, object] = {"note.rectify": config.analysis.rectify}
        if not config.analysis.fits and not config.analysis.rigidity:
            return fits

        resolved = [(c, outcomes[c.index].lifetime) for c in cells if outcomes[c.index].lifetime is not None]
        by_group: Dict[int, List[SweepCell]] = defaultdict(list)
        for cell in cells:
            by_group[cell.group].append(cell)

        for group, members in sorted(by_group.items()):
            prefix = f"group.{group:03d}"
            first = members[0].parameters
            fits[f"{prefix}.params"] = ",".join(f"{k}={first[k]!r}" for k in sorted(first) if k != "gamma")
            if config.analysis.fits:
                self._epsilon_fits(fits, prefix, members, outcomes)
            if config.analysis.rigidity:
                self._rigidity(fits, prefix, members, outcomes, config.analysis.rigidity_threshold)

        if config.analysis.fits:
            self._scan_fits(fits, resolved, "tau", "fast_drive", lambda p: p["tau_j"] or p["tau"])
            self._scan_fits(fits, resolved, "N", "frequency", lambda p: p["N"])
            self._flip_angle(fits, resolved)
            self._seed_spread(fits, resolved)
        return fits

    @staticmethod
    def _epsilon_fits(fits, prefix, members, outcomes) -> None:
        branches: Dict[str, List[Tuple[float, float]]] = {"zero": [], "pi": []}
        for cell in members:
            lifetime = outcomes[cell.index].lifetime
            if lifetime is None:
                continue
            gamma = abs(cell.parameters["gamma"])
            branch, eps = ("zero", gamma) if gamma < math.pi / 2 else ("pi", abs(gamma - math.pi))
            if eps > 1e-12:
                branches[branch].append((eps, lifetime.kicks))

        for branch, points in branches.items():
            if len(points) < 4:
                continue
            key = f"{prefix}.eps_fit.{branch}"
            try:
                fit = fit_combined_heating([p[0] for p in points], [p[1] for p in points], members[0].parameters["N"])
            except FitError as e:
                logger.warning(f"Skipping {key}: {e}")
                fits[f"{key}.error"] = str(e)
                continue
            for name, value in fit.model_dump().items():
                fits[f"{key}.{name}"] = value

    @staticmethod
    def _rigidity(fits, prefix, members, outcomes, threshold) -> None:
        near = [c for c in members if c.parameters["gamma"] > math.pi / 2 and outcomes[c.index].spectrum is not None]
        gammas = [c.parameters["gamma"] for c in near]
        if len(gammas) < 3 or not min(gammas) < math.pi < max(gammas):
            return
        extent = rigidity_extent(gammas, [outcomes[c.index].spectrum for c in near], threshold)
        for name, value in extent.model_dump().items():
            fits[f"{prefix}.rigidity.{name}"] = value
        fits[f"{prefix}.rigidity.half_width_over_pi"] = extent.half_width / math.pi

    @staticmethod
    def _scan_fits(fits, resolved, axis: str, label: str, abscissa) -> None:
        scans: Dict[Tuple, List[Tuple[float, float, float]]] = defaultdict(list)
        for cell, lifetime in resolved:
            p = cell.parameters
            key = tuple((k, p[k]) for k in sorted(p) if k not in (axis, "tau_j" if axis == "tau" else axis))
            scans[key].append((abscissa(p), lifetime.kicks, lifetime.cycles))
        for index, (key, points) in enumerate(sorted(scans.items(), key=lambda kv: repr(kv[0]))):
            xs = [p[0] for p in points]
            if len(set(xs)) < 2:
                continue
            prefix = f"{label}.{index:03d}"
            fits[f"{prefix}.params"] = ",".join(f"{k}={v!r}" for k, v in key)
            for unit, column in (("kicks", 1), ("cycles", 2)):
                try:
                    fit = fit_power_law(xs, [p[column] for p in points])
                except FitError as e:
                    fits[f"{prefix}.{unit}.error"] = str(e)
                    continue
                fits[f"{prefix}.{unit}.exponent"] = fit.exponent
                fits[f"{prefix}.{unit}.stderr"] = fit.stderr

    @staticmethod
    def _flip_angle(fits, resolved) -> None:
        by_key: Dict[Tuple, Dict[str, float]] = defaultdict(dict)
        for cell, lifetime in resolved:
            p = cell.parameters
            for name, angle in (("pi", math.pi), ("half_pi", math.pi / 2)):
                if abs(p["theta"] - angle) < 1e-9:
                    key = tuple((k, p[k]) for k in sorted(p) if k != "theta")
                    by_key[key][name] = lifetime.kicks
        for index, (key, values) in enumerate(sorted(by_key.items(), key=lambda kv: repr(kv[0]))):
            if len(values) == 2:
                fits[f"flip_angle.{index:03d}.params"] = ",".join(f"{k}={v!r}" for k, v in key)
                fits[f"flip_angle.{index:03d}.lifetime_ratio"] = values["half_pi"] / values["pi"]

    @staticmethod
    def _seed_spread(fits, resolved) -> None:
        groups: Dict[Tuple, Dict[int, float]] = defaultdict(dict)
        for cell, lifetime in resolved:
            p = cell.parameters
            derived_tau = p["tau_j"] is not None
            key = tuple(
                (k, p[k]) for k in sorted(p) if k != "graph_seed" and not (k == "tau" and derived_tau)
            )
            groups[key][p["graph_seed"]] = lifetime.kicks
        for index, (key, lifetimes) in enumerate(sorted(groups.items(), key=lambda kv: repr(kv[0]))):
            if len(lifetimes) < 2:
                continue
            fits[f"seed_spread.{index:03d}.params"] = ",".join(f"{k}={v!r}" for k, v in key)
            for name, value in seed_spread(lifetimes).items():
                fits[f"seed_spread.{index:03d}.{name}"] = value
