"""Uniform driver turning any propagator into a time series of observables."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from spin_decohere.errors import InvalidParameterError, NumericalError
from spin_decohere.hamiltonian import DENSE_CAP, TermSet, energy
from spin_decohere.hilbert import StateVector, measure_sz, total_sz
from spin_decohere.propagators import (
    EDCache,
    PropagatorKind,
    PropagatorSpec,
    build_ed_cache,
    chebyshev_array,
    ed_array,
    step_array,
)

logger = logging.getLogger("spin-decohere")

TRAJECTORY_COLUMNS = ("t", "sz1", "sz2", "sz_total", "norm", "energy")


class CPSampling(str, Enum):
    """How Chebyshev runs reach their sample times."""

    SUCCESSIVE = "successive"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class TrajectoryRecord:
    """Observables at one sample time."""

    t: float
    sz1: float
    sz2: float
    sz_total: float
    norm: float
    energy: float


@dataclass
class Trajectory:
    """Sampled observables of one run plus its final state."""

    label: str
    records: List[TrajectoryRecord] = field(default_factory=list)
    final_state: Optional[StateVector] = None

    def column(self, name: str) -> np.ndarray:
        """Return one observable over all records as an array."""
        if name not in TRAJECTORY_COLUMNS:
            raise KeyError(name)
        return np.array([getattr(record, name) for record in self.records])

    @property
    def times(self) -> np.ndarray:
        return self.column("t")


def observe(terms: TermSet, state: StateVector, t: float) -> TrajectoryRecord:
    """Evaluate the recorded observables of a state."""
    return TrajectoryRecord(
        t=t,
        sz1=measure_sz(state, 0),
        sz2=measure_sz(state, 1),
        sz_total=total_sz(state),
        norm=state.norm(),
        energy=energy(terms, state),
    )


def time_grid(t_final: float, interval: float) -> np.ndarray:
    """Return 0, interval, 2 interval, ... up to and including t_final."""
    if t_final < 0:
        raise InvalidParameterError(f"t_final must be non-negative, got {t_final}")
    if interval <= 0:
        raise InvalidParameterError(f"interval must be positive, got {interval}")
    count = int(math.floor(t_final / interval + 1e-9))
    grid = interval * np.arange(count + 1)
    if t_final - grid[-1] > 1e-12 * max(1.0, t_final):
        grid = np.append(grid, t_final)
    else:
        grid[-1] = t_final
    return grid


def _advance(
    spec: PropagatorSpec,
    terms: TermSet,
    psi: np.ndarray,
    dt: float,
    ed_cache: Optional[EDCache],
) -> np.ndarray:
    """Advance raw amplitudes by dt; may modify ``psi`` in place."""
    if dt == 0:
        return psi
    if spec.kind is PropagatorKind.ED:
        assert ed_cache is not None
        return ed_array(ed_cache, psi, dt)
    if spec.kind is PropagatorKind.CP:
        return chebyshev_array(terms, psi, dt)
    steps = max(1, math.ceil(dt / spec.tau - 1e-9))
    h = dt / steps
    for _ in range(steps):
        psi = step_array(spec, terms, psi, h)
    return psi


def _prepare(
    spec: PropagatorSpec,
    terms: TermSet,
    state: StateVector,
    ed_cache: Optional[EDCache],
    dense_cap: int,
) -> Optional[EDCache]:
    if terms.num_spins != state.num_spins:
        raise InvalidParameterError(
            f"dimension mismatch: Hamiltonian {terms.num_spins} spins, "
            f"state {state.num_spins} spins"
        )
    spec.validate(state.dimension)
    if spec.kind is PropagatorKind.ED and ed_cache is None:
        return build_ed_cache(terms, dense_cap)
    return ed_cache


def evolve(
    spec: PropagatorSpec,
    terms: TermSet,
    state: StateVector,
    t: float,
    ed_cache: Optional[EDCache] = None,
    dense_cap: int = DENSE_CAP,
) -> StateVector:
    """Return the state at time t without recording observables.

    CP reaches t in one leap; SP and SIL take ceil(t / tau) equal steps.
    """
    if t < 0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    ed_cache = _prepare(spec, terms, state, ed_cache, dense_cap)
    try:
        psi = _advance(spec, terms, state.writable_copy(), t, ed_cache)
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        logger.error(f"{spec.label} failed: {e}")
        raise NumericalError(str(e), spec.label) from e
    return state.with_amplitudes(psi)


def sample_trajectory(
    spec: PropagatorSpec,
    terms: TermSet,
    state: StateVector,
    times: Sequence[float],
    cp_sampling: CPSampling = CPSampling.SUCCESSIVE,
    ed_cache: Optional[EDCache] = None,
    dense_cap: int = DENSE_CAP,
    norm_tolerance: Optional[float] = None,
    time_origin: float = 0.0,
) -> Trajectory:
    """Record observables at the given times, measured from ``state``.

    Args:
        spec: Algorithm and parameters.
        terms: The Hamiltonian.
        state: State at relative time 0.
        times: Non-decreasing, non-negative sample times.
        cp_sampling: CP only; successive leaps between samples, or an
            independent leap from ``state`` to every sample.
        ed_cache: Reused ED decomposition, built on demand otherwise.
        dense_cap: Largest dimension ED may diagonalize.
        norm_tolerance: If set, a record with |norm - 1| above it aborts the
            run with NumericalError.
        time_origin: Added to every reported time.

    Returns:
        The sampled trajectory and the state at the last sample time.
    """
    grid = np.asarray(times, dtype=np.float64)
    if grid.size == 0:
        raise InvalidParameterError("at least one sample time is required")
    if grid[0] < 0 or np.any(np.diff(grid) < 0):
        raise InvalidParameterError("sample times must be non-negative and sorted")
    ed_cache = _prepare(spec, terms, state, ed_cache, dense_cap)

    from_start = spec.kind is PropagatorKind.ED or (
        spec.kind is PropagatorKind.CP and cp_sampling is CPSampling.INDEPENDENT
    )
    trajectory = Trajectory(label=spec.label)
    psi = state.writable_copy()
    previous = 0.0
    try:
        for t in grid:
            if from_start:
                psi = _advance(spec, terms, state.writable_copy(), t, ed_cache)
            else:
                psi = _advance(spec, terms, psi, t - previous, ed_cache)
            previous = t
            current = state.with_amplitudes(psi)
            record = observe(terms, current, time_origin + float(t))
            if norm_tolerance is not None and abs(record.norm - 1.0) > norm_tolerance:
                logger.error(f"{spec.label}: norm {record.norm!r} at t={record.t}")
                raise NumericalError(
                    f"norm drifted to {record.norm:.17g} at t={record.t:g}",
                    spec.label,
                )
            trajectory.records.append(record)
    except (np.linalg.LinAlgError, FloatingPointError) as e:
        logger.error(f"{spec.label} failed: {e}")
        raise NumericalError(str(e), spec.label) from e
    trajectory.final_state = state.with_amplitudes(psi)
    return trajectory


def propagate(
    spec: PropagatorSpec,
    terms: TermSet,
    state: StateVector,
    t_final: float,
    sample_every: int = 1,
    cp_sampling: CPSampling = CPSampling.SUCCESSIVE,
    ed_cache: Optional[EDCache] = None,
    dense_cap: int = DENSE_CAP,
    norm_tolerance: Optional[float] = None,
) -> Trajectory:
    """Run a propagator to t_final, recording every ``sample_every`` steps.

    Samples sit at multiples of tau * sample_every, plus t_final itself.
    """
    if sample_every < 1:
        raise InvalidParameterError(f"sample_every must be >= 1, got {sample_every}")
    spec.validate(state.dimension)
    return sample_trajectory(
        spec,
        terms,
        state,
        time_grid(t_final, spec.tau * sample_every),
        cp_sampling=cp_sampling,
        ed_cache=ed_cache,
        dense_cap=dense_cap,
        norm_tolerance=norm_tolerance,
    )


def leap_then_refine(
    terms: TermSet,
    state: StateVector,
    t_leap: float,
    refine_spec: PropagatorSpec,
    t_final: float,
    sample_every: int = 1,
    norm_tolerance: Optional[float] = None,
    dense_cap: int = DENSE_CAP,
) -> Trajectory:
    """Leap to t_leap with Chebyshev, then sample up to t_final with refine_spec.

    Reported times are absolute, starting at t_leap.
    """
    if not 0 <= t_leap <= t_final:
        raise InvalidParameterError(
            f"leap time {t_leap} must lie in [0, t_final={t_final}]"
        )
    if sample_every < 1:
        raise InvalidParameterError(f"sample_every must be >= 1, got {sample_every}")
    logger.info(f"Chebyshev leap to t={t_leap}, then {refine_spec.label}")
    leaped = evolve(PropagatorSpec(PropagatorKind.CP), terms, state, t_leap)
    refine_spec.validate(state.dimension)
    trajectory = sample_trajectory(
        refine_spec,
        terms,
        leaped,
        time_grid(t_final - t_leap, refine_spec.tau * sample_every),
        norm_tolerance=norm_tolerance,
        dense_cap=dense_cap,
        time_origin=t_leap,
    )
    trajectory.label = f"CP->{refine_spec.label}"
    return trajectory
