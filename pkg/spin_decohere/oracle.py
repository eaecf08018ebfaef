"""Ground truths that do not depend on any propagator.

The closed-form magnetization of the first central spin holds for uniform bath
couplings in the large-bath limit and after averaging over bath realizations:

    <S1z(t)> = 1/6 [1 + 2 (1 - L J^2 t^2) exp(-L J^2 t^2 / 2)] cos(2 (J0 - J) t)

Single realizations fluctuate around it; the averaging helpers here produce the
ensemble side of the comparison.

The Hamiltonian sustains the late oscillation at frequency 2 J0 - J, not at
2 (J0 - J), so curves drift out of phase with the closed form over a few
tens of time units. envelope_deviation compares amplitudes only.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from spin_decohere.errors import InvalidParameterError, SeedFailure
from spin_decohere.hamiltonian import DENSE_CAP, ModelParams, TermSet, build_model
from spin_decohere.hilbert import prepare_initial_state
from spin_decohere.propagators import (
    EDCache,
    PropagatorKind,
    PropagatorSpec,
    build_ed_cache,
)
from spin_decohere.trajectory import CPSampling, sample_trajectory

logger = logging.getLogger("spin-decohere")

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class ExactParams:
    """Parameters of the closed form: bath size, uniform coupling J and J0."""

    L: int
    J: float
    J0: float

    def __post_init__(self) -> None:
        if self.L < 0:
            raise InvalidParameterError(f"L must be non-negative, got {self.L}")
        if not (math.isfinite(self.J) and math.isfinite(self.J0)):
            raise InvalidParameterError("couplings must be finite")

    @classmethod
    def from_model(cls, params: ModelParams) -> "ExactParams":
        """Raises InvalidParameterError unless every bath coupling is equal."""
        J = params.uniform_coupling
        if J is None:
            raise InvalidParameterError(
                "the closed form requires uniform bath couplings"
            )
        return cls(L=params.L, J=J, J0=params.J0)

    @property
    def period(self) -> float:
        """Period of the cos(2 (J0 - J) t) carrier; inf if it does not oscillate."""
        frequency = 2.0 * abs(self.J0 - self.J)
        return 2.0 * math.pi / frequency if frequency else math.inf


def envelope_bracket(p: ExactParams, t: ArrayLike) -> np.ndarray:
    """Return the decay factor 1 + 2 (1 - x) exp(-x / 2), x = L J^2 t^2."""
    x = p.L * p.J**2 * np.square(np.asarray(t, dtype=np.float64))
    return 1.0 + 2.0 * (1.0 - x) * np.exp(-0.5 * x)


def exact_magnetization(p: ExactParams, t: ArrayLike) -> Union[float, np.ndarray]:
    """Evaluate the closed-form <S1z(t)>; scalars in, scalar out."""
    times = np.asarray(t, dtype=np.float64)
    if np.any(times < 0):
        raise InvalidParameterError("t must be non-negative")
    value = envelope_bracket(p, times) * np.cos(2.0 * (p.J0 - p.J) * times) / 6.0
    if value.ndim == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class SeedAverage:
    """Seed-averaged <S1z> on a time grid."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    seeds: Tuple[int, ...]


def _seed_magnetization(
    seed: int,
    params: ModelParams,
    terms: TermSet,
    spec: PropagatorSpec,
    times: np.ndarray,
    ed_cache: Optional[EDCache],
    cp_sampling: CPSampling,
    dense_cap: int,
    norm_tolerance: Optional[float],
) -> np.ndarray:
    state = prepare_initial_state(params.L, seed)
    trajectory = sample_trajectory(
        spec,
        terms,
        state,
        times,
        cp_sampling=cp_sampling,
        ed_cache=ed_cache,
        dense_cap=dense_cap,
        norm_tolerance=norm_tolerance,
    )
    logger.info(f"Seed {seed} finished ({spec.label}, L={params.L})")
    return trajectory.column("sz1")


def averaged_magnetization(
    params: ModelParams,
    spec: PropagatorSpec,
    t_grid: Sequence[float],
    seeds: Sequence[int],
    workers: int = 1,
    cp_sampling: CPSampling = CPSampling.SUCCESSIVE,
    dense_cap: int = DENSE_CAP,
    norm_tolerance: Optional[float] = None,
) -> SeedAverage:
    """Average the first central spin's magnetization over bath realizations.

    The Hamiltonian is shared; each seed draws its own random bath state. With
    ``workers > 1`` seeds run in a thread pool, results are reduced in seed
    order so the output does not depend on scheduling.

    Raises:
        SeedFailure: If any seed fails; the first failing seed in seed order is
            reported.
    """
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise InvalidParameterError("at least one seed is required")
    if workers < 1:
        raise InvalidParameterError(f"workers must be >= 1, got {workers}")
    times = np.asarray(t_grid, dtype=np.float64)
    terms = build_model(params)
    ed_cache = None
    if spec.kind is PropagatorKind.ED:
        ed_cache = build_ed_cache(terms, dense_cap)

    def run_seed(seed: int) -> np.ndarray:
        return _seed_magnetization(
            seed,
            params,
            terms,
            spec,
            times,
            ed_cache,
            cp_sampling,
            dense_cap,
            norm_tolerance,
        )

    samples: List[np.ndarray] = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [(seed, executor.submit(run_seed, seed)) for seed in seeds]
        for seed, future in futures:
            try:
                samples.append(future.result())
            except Exception as e:
                logger.error(f"Seed {seed} failed: {e}")
                for _, pending in futures:
                    pending.cancel()
                raise SeedFailure(seed, e) from e

    stacked = np.vstack(samples)
    mean = stacked.mean(axis=0)
    if len(seeds) > 1:
        stderr = stacked.std(axis=0, ddof=1) / math.sqrt(len(seeds))
    else:
        stderr = np.zeros_like(mean)
    return SeedAverage(times=times, mean=mean, stderr=stderr, seeds=seeds)


def oscillation_envelope(
    times: Sequence[float], values: Sequence[float], period: float
) -> np.ndarray:
    """Return max |value| over a window of one period centred on each sample."""
    t = np.asarray(times, dtype=np.float64)
    v = np.abs(np.asarray(values, dtype=np.float64))
    if t.shape != v.shape:
        raise InvalidParameterError(
            f"times and values differ in shape: {t.shape} vs {v.shape}"
        )
    if not period > 0:
        raise InvalidParameterError(f"period must be positive, got {period}")
    lower = np.searchsorted(t, t - 0.5 * period, side="left")
    upper = np.searchsorted(t, t + 0.5 * period, side="right")
    return np.array([v[lo:hi].max() for lo, hi in zip(lower, upper)])


def rms_deviation(a: Sequence[float], b: Sequence[float]) -> float:
    """Root-mean-square difference of two equally sampled curves."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise InvalidParameterError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(np.sqrt(np.mean(np.square(x - y))))


def envelope_deviation(average: SeedAverage, p: ExactParams) -> float:
    """RMS distance between the envelope of an average and |bracket| / 6.

    Both sides use the same one-period window, so the comparison does not
    depend on the carrier frequency.
    """
    period = p.period
    measured = oscillation_envelope(average.times, average.mean, period)
    bracket = np.abs(envelope_bracket(p, average.times)) / 6.0
    reference = oscillation_envelope(average.times, bracket, period)
    return rms_deviation(measured, reference)


def convergence_study(
    L_values: Sequence[int],
    J: float,
    J0: float,
    spec: PropagatorSpec,
    t_grid: Sequence[float],
    seeds: Sequence[int],
    workers: int = 1,
    envelope: bool = False,
) -> List[Tuple[int, float]]:
    """RMS distance between seed averages and the closed form, per bath size.

    With ``envelope`` the envelopes are compared instead of the curves.
    """
    results = []
    for L in L_values:
        average = averaged_magnetization(
            ModelParams.uniform(L, J0, J), spec, t_grid, seeds, workers=workers
        )
        p = ExactParams(L=L, J=J, J0=J0)
        if envelope:
            deviation = envelope_deviation(average, p)
        else:
            exact = exact_magnetization(p, average.times)
            deviation = rms_deviation(average.mean, exact)
        logger.info(f"L={L}: rms deviation {deviation:.4g} over {len(seeds)} seeds")
        results.append((L, deviation))
    return results
