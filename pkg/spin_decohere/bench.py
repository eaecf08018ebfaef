"""Run harness: trajectories, the algorithm comparison table and seed averages.

Every run writes a CSV with a header row, a fixed column order and values
formatted with 17 significant digits, so identical runs give identical files.
"""

import csv
import json
import logging
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import scipy

from spin_decohere.config import RunConfig, RunMode
from spin_decohere.errors import InvalidParameterError
from spin_decohere.hamiltonian import TermSet, build_model
from spin_decohere.hilbert import StateVector, inner_product, prepare_initial_state
from spin_decohere.oracle import (
    ExactParams,
    averaged_magnetization,
    envelope_deviation,
    exact_magnetization,
    rms_deviation,
)
from spin_decohere.propagators import (
    EDCache,
    PropagatorKind,
    PropagatorSpec,
    build_ed_cache,
    ed_propagate,
)
from spin_decohere.trajectory import (
    TRAJECTORY_COLUMNS,
    Trajectory,
    evolve,
    leap_then_refine,
    propagate,
    time_grid,
)

logger = logging.getLogger("spin-decohere")

BENCHMARK_COLUMNS = ("algorithm", "error", "error_phase_free", "wall_seconds")
AVERAGE_COLUMNS = ("t", "sz1_mean", "sz1_stderr", "sz1_exact")


def format_number(value: float) -> str:
    """Locale-independent text with 17 significant digits."""
    return format(float(value), ".17g")


def _write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(
                    [v if isinstance(v, str) else format_number(v) for v in row]
                )
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise
    logger.info(f"Wrote {path}")


def error_norm(a: StateVector, b: StateVector) -> float:
    """Euclidean norm of a - b; a global phase difference counts as error."""
    if a.num_spins != b.num_spins:
        raise InvalidParameterError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    return float(np.linalg.norm(a.amplitudes - b.amplitudes))


def phase_free_error(a: StateVector, b: StateVector) -> float:
    """Smallest ||a - exp(i phi) b|| over all global phases phi."""
    overlap = inner_product(b, a)
    phase = overlap / abs(overlap) if overlap else 1.0
    return float(np.linalg.norm(a.amplitudes - phase * b.amplitudes))


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class TrajectorySummary:
    label: str
    output_path: Path
    samples: int
    final_norm: float
    wall_seconds: float


def compute_trajectory(cfg: RunConfig) -> Trajectory:
    """Run the configured trajectory without writing anything."""
    terms = build_model(cfg.model)
    state = prepare_initial_state(cfg.model.L, cfg.seed)
    if cfg.leap_to is not None:
        return leap_then_refine(
            terms,
            state,
            cfg.leap_to,
            cfg.spec,
            cfg.t_final,
            sample_every=cfg.sample_every,
            norm_tolerance=cfg.norm_tolerance,
            dense_cap=cfg.dense_cap,
        )
    return propagate(
        cfg.spec,
        terms,
        state,
        cfg.t_final,
        sample_every=cfg.sample_every,
        cp_sampling=cfg.cp_sampling,
        dense_cap=cfg.dense_cap,
        norm_tolerance=cfg.norm_tolerance,
    )


def write_trajectory(trajectory: Trajectory, path: Path) -> None:
    _write_csv(
        path,
        TRAJECTORY_COLUMNS,
        (
            [getattr(record, column) for column in TRAJECTORY_COLUMNS]
            for record in trajectory.records
        ),
    )


def run_trajectory(cfg: RunConfig) -> TrajectorySummary:
    """Propagate the configured model and write the trajectory CSV."""
    start = time.perf_counter()
    trajectory = compute_trajectory(cfg)
    wall_seconds = time.perf_counter() - start
    write_trajectory(trajectory, cfg.output_path)
    return TrajectorySummary(
        label=trajectory.label,
        output_path=cfg.output_path,
        samples=len(trajectory.records),
        final_norm=trajectory.records[-1].norm,
        wall_seconds=wall_seconds,
    )


# ---------------------------------------------------------------------------
# Algorithm comparison


@dataclass(frozen=True)
class BenchRow:
    """One row of the comparison table."""

    algorithm: str
    error: float
    error_phase_free: float
    wall_seconds: float


@dataclass
class BenchReport:
    """Errors against exact diagonalization and wall times per algorithm."""

    rows: List[BenchRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def row(self, algorithm: str) -> BenchRow:
        for row in self.rows:
            if row.algorithm == algorithm:
                return row
        raise KeyError(algorithm)

    def to_csv(self, path: Path) -> None:
        _write_csv(
            path,
            BENCHMARK_COLUMNS,
            (
                [row.algorithm, row.error, row.error_phase_free, row.wall_seconds]
                for row in self.rows
            ),
        )

    def to_json(self, path: Path) -> None:
        document = {
            "metadata": self.metadata,
            "warnings": self.warnings,
            "rows": [asdict(row) for row in self.rows],
        }
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(document, f, indent=2)
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}")
            raise

    def save(self, path: Path) -> Path:
        """Write the CSV and its ``<path>.json`` sidecar; return the sidecar."""
        self.to_csv(path)
        sidecar = path.with_name(path.name + ".json")
        self.to_json(sidecar)
        return sidecar


def host_note() -> str:
    return (
        f"{platform.platform()}; python {platform.python_version()}; "
        f"numpy {np.__version__}; scipy {scipy.__version__}"
    )


def _bench_row(
    spec: PropagatorSpec,
    terms: TermSet,
    state: StateVector,
    t_final: float,
    reference: StateVector,
    ed_cache: EDCache,
) -> BenchRow:
    start = time.perf_counter()
    result = evolve(spec, terms, state, t_final, ed_cache=ed_cache)
    wall_seconds = time.perf_counter() - start
    if spec.kind is PropagatorKind.ED:
        error = phase_free = 0.0
    else:
        error = error_norm(reference, result)
        phase_free = phase_free_error(reference, result)
    logger.info(f"{spec.label}: error {error:.3e} in {wall_seconds:.3f}s")
    return BenchRow(spec.label, error, phase_free, wall_seconds)


def _timing_check(report: BenchReport) -> None:
    try:
        cp = report.row("CP")
        u4 = report.row("SP-Pair(U4)")
    except KeyError:
        return
    if cp.wall_seconds > u4.wall_seconds:
        message = (
            f"CP took {cp.wall_seconds:.3f}s, longer than SP-Pair(U4) "
            f"at {u4.wall_seconds:.3f}s"
        )
        logger.warning(message)
        report.warnings.append(message)


def compute_benchmark(cfg: RunConfig) -> BenchReport:
    """Compare every configured algorithm with exact diagonalization at t_final.

    The reference is diagonalized and evolved once, outside every timed call.
    Rows run sequentially unless ``workers > 1``; only sequential timings feed
    the CP versus SP-Pair(U4) soft check.
    """
    terms = build_model(cfg.model)
    state = prepare_initial_state(cfg.model.L, cfg.seed)
    ed_cache = build_ed_cache(terms, cfg.dense_cap)
    reference = ed_propagate(ed_cache, state, cfg.t_final)

    def run_row(spec: PropagatorSpec) -> BenchRow:
        return _bench_row(spec, terms, state, cfg.t_final, reference, ed_cache)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            rows = list(executor.map(run_row, cfg.specs))
    else:
        rows = [run_row(spec) for spec in cfg.specs]

    report = BenchReport(
        rows=rows,
        metadata={
            "L": cfg.model.L,
            "J0": cfg.model.J0,
            "couplings": list(cfg.model.couplings),
            "tau": cfg.tau,
            "t_final": cfg.t_final,
            "seed": cfg.seed,
            "dimension": cfg.dimension,
            "concurrent_rows": cfg.workers > 1,
            "host": host_note(),
        },
    )
    if cfg.workers > 1:
        logger.info("Rows ran concurrently; skipping the timing check")
    else:
        _timing_check(report)
    return report


def run_benchmark(cfg: RunConfig) -> BenchReport:
    """Build the comparison table and write it with its JSON sidecar."""
    report = compute_benchmark(cfg)
    report.save(cfg.output_path)
    return report


# ---------------------------------------------------------------------------
# Seed averages


@dataclass(frozen=True)
class AverageSummary:
    label: str
    output_path: Path
    seeds: int
    samples: int
    rms_to_exact: Optional[float]
    envelope_to_exact: Optional[float] = None


def run_average(cfg: RunConfig) -> AverageSummary:
    """Average <S1z> over the configured seeds and write it beside the closed form.

    The ``sz1_exact`` column is ``nan`` unless every bath coupling is equal.
    """
    times = time_grid(cfg.t_final, cfg.tau * cfg.sample_every)
    average = averaged_magnetization(
        cfg.model,
        cfg.spec,
        times,
        cfg.seeds,
        workers=cfg.workers,
        cp_sampling=cfg.cp_sampling,
        dense_cap=cfg.dense_cap,
        norm_tolerance=cfg.norm_tolerance,
    )
    rms_to_exact: Optional[float] = None
    envelope_to_exact: Optional[float] = None
    if cfg.model.uniform_coupling is not None:
        p = ExactParams.from_model(cfg.model)
        exact = np.asarray(exact_magnetization(p, times))
        rms_to_exact = rms_deviation(average.mean, exact)
        envelope_to_exact = envelope_deviation(average, p)
    else:
        exact = np.full(times.shape, math.nan)
    _write_csv(
        cfg.output_path,
        AVERAGE_COLUMNS,
        zip(times, average.mean, average.stderr, exact),
    )
    return AverageSummary(
        label=cfg.spec.label,
        output_path=cfg.output_path,
        seeds=len(cfg.seeds),
        samples=len(times),
        rms_to_exact=rms_to_exact,
        envelope_to_exact=envelope_to_exact,
    )


RunResult = Union[TrajectorySummary, BenchReport, AverageSummary]


def run(cfg: RunConfig) -> RunResult:
    """Dispatch on the configured mode."""
    logger.info(f"Starting {cfg.mode.value} run")
    if cfg.mode is RunMode.BENCHMARK:
        return run_benchmark(cfg)
    if cfg.mode is RunMode.AVERAGE:
        return run_average(cfg)
    return run_trajectory(cfg)
