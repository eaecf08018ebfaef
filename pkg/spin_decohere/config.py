"""Run configuration documents.

A configuration is a flat ``key=value`` document, one entry per line. ``#``
starts a comment and blank lines are ignored. Only ``algorithm`` may repeat.
Values are decoded with YAML so numbers and flow lists (``J_list=[0.1, 0.2]``)
come out typed, then coerced to the type of their key.

Example:
    L=10
    J0=8
    J=0.128
    algorithm=CP
    t_final=20
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from spin_decohere.errors import ConfigError, DimensionError
from spin_decohere.hamiltonian import DENSE_CAP, ModelParams
from spin_decohere.hilbert import CENTRAL_SPINS, MAX_SPINS
from spin_decohere.propagators import PropagatorKind, PropagatorSpec
from spin_decohere.trajectory import CPSampling

logger = logging.getLogger("spin-decohere")

DEFAULT_TAU = 0.05
DEFAULT_KRYLOV_N = 10
DEFAULT_NORM_TOLERANCE = 1e-8

REPEATABLE_KEYS = {"algorithm"}
KNOWN_KEYS = (
    "L",
    "J0",
    "J",
    "J_list",
    "algorithm",
    "tau",
    "krylov_N",
    "t_final",
    "sample_every",
    "seed",
    "seeds",
    "mode",
    "output",
    "cp_sampling",
    "leap_to",
    "dense_cap",
    "norm_tolerance",
    "workers",
)
# Keys whose raw text is used verbatim instead of being decoded.
_TEXT_KEYS = {"algorithm", "mode", "output", "cp_sampling"}


class RunMode(str, Enum):
    TRAJECTORY = "trajectory"
    BENCHMARK = "benchmark"
    AVERAGE = "average"


BENCHMARK_ALGORITHMS = (
    "ED",
    "SP_PAIR_U2",
    "SP_PAIR_U4",
    "SP_XYZ_U2",
    "SP_XYZ_U4",
    "CP",
    "SIL:5",
    "SIL:10",
)


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run configuration."""

    model: ModelParams
    specs: Tuple[PropagatorSpec, ...]
    t_final: float
    mode: RunMode = RunMode.TRAJECTORY
    sample_every: int = 1
    seed: int = 0
    seeds: Tuple[int, ...] = (0,)
    output_path: Path = Path("trajectory.csv")
    cp_sampling: CPSampling = CPSampling.SUCCESSIVE
    leap_to: Optional[float] = None
    dense_cap: int = DENSE_CAP
    norm_tolerance: float = DEFAULT_NORM_TOLERANCE
    workers: int = 1

    @property
    def spec(self) -> PropagatorSpec:
        """The primary algorithm of trajectory and average runs."""
        return self.specs[0]

    @property
    def tau(self) -> float:
        return self.spec.tau

    @property
    def dimension(self) -> int:
        return 1 << (self.model.L + CENTRAL_SPINS)

    def summary(self) -> Dict[str, Any]:
        """Resolved settings as plain JSON-friendly values."""
        uniform = self.model.uniform_coupling
        return {
            "mode": self.mode.value,
            "L": self.model.L,
            "J0": self.model.J0,
            "J": uniform if uniform is not None else list(self.model.couplings),
            "dimension": self.dimension,
            "algorithms": [spec.label for spec in self.specs],
            "tau": self.tau,
            "t_final": self.t_final,
            "sample_every": self.sample_every,
            "seed": self.seed,
            "seeds": _describe_seeds(self.seeds),
            "output": str(self.output_path),
            "cp_sampling": self.cp_sampling.value,
            "leap_to": self.leap_to,
            "dense_cap": self.dense_cap,
            "norm_tolerance": self.norm_tolerance,
            "workers": self.workers,
        }


def _describe_seeds(seeds: Sequence[int]) -> str:
    if len(seeds) > 2 and list(seeds) == list(range(seeds[0], seeds[-1] + 1)):
        return f"{seeds[0]}..{seeds[-1]}"
    return ", ".join(str(s) for s in seeds)


@dataclass(frozen=True)
class _Entry:
    key: str
    raw: str
    line: Optional[int]


def _split_entry(text: str, line: Optional[int]) -> _Entry:
    if "=" not in text:
        raise ConfigError(text.strip() or "<empty>", "expected key=value", line)
    key, raw = text.split("=", 1)
    key = key.strip()
    if key not in KNOWN_KEYS:
        raise ConfigError(key, "unknown key", line)
    raw = raw.strip()
    if not raw:
        raise ConfigError(key, "missing value", line)
    return _Entry(key=key, raw=raw, line=line)


def _read_entries(text: str) -> List[_Entry]:
    entries = []
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if content:
            entries.append(_split_entry(content, number))
    return entries


def _decode(entry: _Entry) -> Any:
    if entry.key in _TEXT_KEYS:
        return entry.raw
    try:
        return yaml.safe_load(entry.raw)
    except yaml.YAMLError as e:
        raise ConfigError(
            entry.key, f"cannot parse {entry.raw!r}: {e}", entry.line
        ) from e


def _as_int(entry: _Entry, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(
            entry.key, f"expected an integer, got {entry.raw}", entry.line
        )
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    try:
        return int(str(value))
    except ValueError:
        raise ConfigError(
            entry.key, f"expected an integer, got {entry.raw}", entry.line
        ) from None


def _as_float(entry: _Entry, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(entry.key, f"expected a number, got {entry.raw}", entry.line)
    try:
        # YAML 1.1 reads exponents without a dot (1e-8) as strings.
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(
            entry.key, f"expected a number, got {entry.raw}", entry.line
        ) from None
    if not math.isfinite(number):
        raise ConfigError(entry.key, f"must be finite, got {entry.raw}", entry.line)
    return number


def _as_float_list(entry: _Entry, value: Any) -> Tuple[float, ...]:
    if not isinstance(value, list):
        raise ConfigError(entry.key, "expected a list like [0.1, 0.2]", entry.line)
    return tuple(_as_float(entry, item) for item in value)


def _as_seed_list(entry: _Entry, value: Any) -> Tuple[int, ...]:
    if isinstance(value, str) and ".." in value:
        start, _, stop = value.partition("..")
        first = _as_int(entry, start.strip())
        last = _as_int(entry, stop.strip())
        if last < first:
            raise ConfigError(entry.key, f"empty range {value}", entry.line)
        return tuple(range(first, last + 1))
    if isinstance(value, list):
        seeds = tuple(_as_int(entry, item) for item in value)
    else:
        seeds = (_as_int(entry, value),)
    if not seeds:
        raise ConfigError(entry.key, "at least one seed is required", entry.line)
    return seeds


def _parse_algorithm(entry: _Entry, tau: float, krylov_N: int) -> PropagatorSpec:
    token = entry.raw.strip().upper()
    name, _, size = token.partition(":")
    try:
        kind = PropagatorKind(name)
    except ValueError:
        choices = ", ".join(k.value for k in PropagatorKind)
        raise ConfigError(
            entry.key,
            f"unknown algorithm {entry.raw!r}; choose from {choices}",
            entry.line,
        ) from None
    if size:
        if kind is not PropagatorKind.SIL:
            raise ConfigError(
                entry.key, f"only SIL takes a Krylov size, got {entry.raw}", entry.line
            )
        krylov_N = _as_int(entry, size)
    return PropagatorSpec(kind=kind, tau=tau, krylov_N=krylov_N)


class _Document:
    """Entries grouped by key, with typed accessors."""

    def __init__(self, entries: Sequence[_Entry]):
        self.entries: Dict[str, List[_Entry]] = {}
        for entry in entries:
            existing = self.entries.setdefault(entry.key, [])
            if existing and entry.key not in REPEATABLE_KEYS:
                raise ConfigError(entry.key, "given more than once", entry.line)
            existing.append(entry)

    def override(self, entries: Sequence[_Entry]) -> None:
        replaced: Dict[str, List[_Entry]] = {}
        for entry in entries:
            replaced.setdefault(entry.key, []).append(entry)
        for key, values in replaced.items():
            if len(values) > 1 and key not in REPEATABLE_KEYS:
                raise ConfigError(key, "given more than once")
            self.entries[key] = values

    def get(self, key: str) -> Optional[_Entry]:
        values = self.entries.get(key)
        return values[-1] if values else None

    def all(self, key: str) -> List[_Entry]:
        return self.entries.get(key, [])

    def require(self, key: str) -> _Entry:
        entry = self.get(key)
        if entry is None:
            raise ConfigError(key, "required key is missing")
        return entry


def _check(condition: bool, entry: _Entry, reason: str) -> None:
    if not condition:
        raise ConfigError(entry.key, reason, entry.line)


def _model(doc: _Document) -> ModelParams:
    L_entry = doc.require("L")
    L = _as_int(L_entry, _decode(L_entry))
    _check(L >= 0, L_entry, f"must be non-negative, got {L}")
    _check(
        L + CENTRAL_SPINS <= MAX_SPINS,
        L_entry,
        f"L+2 must not exceed {MAX_SPINS} spins, got L={L}",
    )
    J0_entry = doc.require("J0")
    J0 = _as_float(J0_entry, _decode(J0_entry))

    J_entry = doc.get("J")
    list_entry = doc.get("J_list")
    if J_entry is not None and list_entry is not None:
        raise ConfigError(
            "J_list", "J and J_list are mutually exclusive", list_entry.line
        )
    if list_entry is not None:
        couplings = _as_float_list(list_entry, _decode(list_entry))
        _check(
            len(couplings) == L,
            list_entry,
            f"expected {L} couplings, got {len(couplings)}",
        )
        return ModelParams(L=L, J0=J0, couplings=couplings)
    if J_entry is None:
        if L == 0:
            return ModelParams.uniform(0, J0, 0.0)
        raise ConfigError("J", "required key is missing (or give J_list)")
    return ModelParams.uniform(L, J0, _as_float(J_entry, _decode(J_entry)))


def _specs(
    doc: _Document, mode: RunMode, dimension: int
) -> Tuple[PropagatorSpec, ...]:
    tau = DEFAULT_TAU
    tau_entry = doc.get("tau")
    if tau_entry is not None:
        tau = _as_float(tau_entry, _decode(tau_entry))
        _check(tau > 0, tau_entry, f"must be positive, got {tau}")

    krylov_N = DEFAULT_KRYLOV_N
    krylov_entry = doc.get("krylov_N")
    if krylov_entry is not None:
        krylov_N = _as_int(krylov_entry, _decode(krylov_entry))

    entries = doc.all("algorithm")
    if not entries:
        tokens = BENCHMARK_ALGORITHMS if mode is RunMode.BENCHMARK else ("CP",)
        entries = [_Entry("algorithm", token, None) for token in tokens]

    specs = []
    for entry in entries:
        spec = _parse_algorithm(entry, tau, krylov_N)
        if spec.kind is PropagatorKind.SIL:
            # The size comes from krylov_N unless the token carried its own.
            source = entry if ":" in entry.raw else (krylov_entry or entry)
            _check(
                2 <= spec.krylov_N <= dimension,
                source,
                f"Krylov size must lie in [2, {dimension}], got {spec.krylov_N}",
            )
        specs.append(spec)
    return tuple(specs)


def _optional_int(
    doc: _Document, key: str, default: int
) -> Tuple[int, Optional[_Entry]]:
    entry = doc.get(key)
    if entry is None:
        return default, None
    return _as_int(entry, _decode(entry)), entry


def _choice(doc: _Document, key: str, enum: Any, default: Any) -> Any:
    entry = doc.get(key)
    if entry is None:
        return default
    try:
        return enum(entry.raw.strip().lower())
    except ValueError:
        choices = ", ".join(member.value for member in enum)
        raise ConfigError(
            key, f"expected one of {choices}, got {entry.raw}", entry.line
        ) from None


def _build(doc: _Document) -> RunConfig:
    mode = _choice(doc, "mode", RunMode, RunMode.TRAJECTORY)
    model = _model(doc)
    dimension = 1 << (model.L + CENTRAL_SPINS)
    specs = _specs(doc, mode, dimension)

    t_entry = doc.require("t_final")
    t_final = _as_float(t_entry, _decode(t_entry))
    _check(t_final >= 0, t_entry, f"must be non-negative, got {t_final}")

    sample_every, entry = _optional_int(doc, "sample_every", 1)
    if entry is not None:
        _check(sample_every >= 1, entry, f"must be >= 1, got {sample_every}")

    seed, _ = _optional_int(doc, "seed", 0)
    seeds_entry = doc.get("seeds")
    seeds = (seed,)
    if seeds_entry is not None:
        seeds = _as_seed_list(seeds_entry, _decode(seeds_entry))
    mask = (1 << 64) - 1
    for value in seeds + (seed,):
        if not -(1 << 63) <= value <= mask:
            raise ConfigError("seeds", f"seed {value} does not fit in 64 bits")

    output_entry = doc.get("output")
    output_path = Path(output_entry.raw) if output_entry else Path(f"{mode.value}.csv")

    cp_sampling = _choice(doc, "cp_sampling", CPSampling, CPSampling.SUCCESSIVE)

    leap_to = None
    leap_entry = doc.get("leap_to")
    if leap_entry is not None:
        leap_to = _as_float(leap_entry, _decode(leap_entry))
        _check(
            mode is RunMode.TRAJECTORY,
            leap_entry,
            "only valid in trajectory mode",
        )
        _check(
            0 <= leap_to <= t_final,
            leap_entry,
            f"must lie in [0, t_final={t_final}], got {leap_to}",
        )
        _check(
            specs[0].kind.is_stepping,
            leap_entry,
            f"refinement needs a stepping algorithm, got {specs[0].label}",
        )

    dense_cap, entry = _optional_int(doc, "dense_cap", DENSE_CAP)
    if entry is not None:
        _check(dense_cap >= 4, entry, f"must be >= 4, got {dense_cap}")

    norm_tolerance = DEFAULT_NORM_TOLERANCE
    tolerance_entry = doc.get("norm_tolerance")
    if tolerance_entry is not None:
        norm_tolerance = _as_float(tolerance_entry, _decode(tolerance_entry))
        _check(norm_tolerance > 0, tolerance_entry, "must be positive")

    workers, entry = _optional_int(doc, "workers", 1)
    if entry is not None:
        _check(workers >= 1, entry, f"must be >= 1, got {workers}")

    needs_dense = mode is RunMode.BENCHMARK or any(
        spec.kind is PropagatorKind.ED for spec in specs
    )
    if needs_dense and dimension > dense_cap:
        raise DimensionError(
            f"L: dimension {dimension} exceeds dense_cap {dense_cap}; "
            "exact diagonalization is not possible"
        )

    return RunConfig(
        model=model,
        specs=specs,
        t_final=t_final,
        mode=mode,
        sample_every=sample_every,
        seed=seed,
        seeds=seeds,
        output_path=output_path,
        cp_sampling=cp_sampling,
        leap_to=leap_to,
        dense_cap=dense_cap,
        norm_tolerance=norm_tolerance,
        workers=workers,
    )


def parse_overrides(overrides: Sequence[str]) -> List[_Entry]:
    """Parse ``key=value`` strings given on the command line."""
    return [_split_entry(text, None) for text in overrides]


def parse_config(
    text: str, overrides: Sequence[str] = (), source: str = "<config>"
) -> RunConfig:
    """Parse and validate a configuration document.

    Args:
        text: The document.
        overrides: ``key=value`` strings; each replaces every document entry
            with the same key.
        source: Name used in log messages.

    Raises:
        ConfigError: Unknown key, type mismatch or constraint violation.
        DimensionError: The run needs a dense Hamiltonian larger than
            ``dense_cap``.
    """
    doc = _Document(_read_entries(text))
    doc.override(parse_overrides(overrides))
    config = _build(doc)
    logger.info(
        f"Loaded {source}: mode={config.mode.value}, L={config.model.L}, "
        f"algorithms={[s.label for s in config.specs]}"
    )
    return config


def load_run_config(path: Path, overrides: Sequence[str] = ()) -> RunConfig:
    """Read and parse a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to read config {path}: {e}")
        raise ConfigError("config", f"cannot read {path}: {e.strerror}") from e
    return parse_config(text, overrides, source=str(path))
