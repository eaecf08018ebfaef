"""Pure states of the central two-spin system plus its spin-1/2 bath.

Basis convention: bit ``s`` of a basis index holds the z-projection of spin
``s`` (1 = up, +1/2). Sites 0 and 1 are the central spins, sites 2..L+1 the
bath spins.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from spin_decohere.errors import DimensionError, InvalidParameterError

logger = logging.getLogger("spin-decohere")

# Basis indices are held in signed 64-bit integers.
MAX_SPINS = 62
CENTRAL_SPINS = 2


def dimension(L: int) -> int:
    """Return the Hilbert space dimension 2^(L+2) for a bath of L spins."""
    if L < 0:
        raise InvalidParameterError(f"bath size must be non-negative, got {L}")
    num_spins = L + CENTRAL_SPINS
    if num_spins > MAX_SPINS:
        raise DimensionError(
            f"{num_spins} spins exceed the {MAX_SPINS}-bit basis index width"
        )
    return 1 << num_spins


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes of a pure state of ``num_spins`` spin-1/2 particles."""

    amplitudes: np.ndarray
    num_spins: int

    def __post_init__(self) -> None:
        if self.num_spins < 1 or self.num_spins > MAX_SPINS:
            raise DimensionError(f"unsupported number of spins: {self.num_spins}")
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != (1 << self.num_spins,):
            raise InvalidParameterError(
                f"expected {1 << self.num_spins} amplitudes for {self.num_spins} "
                f"spins, got shape {amplitudes.shape}"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        """Euclidean norm of the amplitude vector."""
        return float(np.linalg.norm(self.amplitudes))

    def with_amplitudes(self, amplitudes: np.ndarray) -> "StateVector":
        """Return a state over the same spins with new amplitudes."""
        return StateVector(amplitudes, self.num_spins)

    def writable_copy(self) -> np.ndarray:
        """Return a mutable copy of the amplitudes for in-place kernels."""
        return np.array(self.amplitudes, dtype=np.complex128)


@lru_cache(maxsize=None)
def basis_indices(num_spins: int) -> np.ndarray:
    """Return the read-only index range 0..2^num_spins - 1."""
    indices = np.arange(1 << num_spins, dtype=np.int64)
    indices.setflags(write=False)
    return indices


@lru_cache(maxsize=None)
def _total_magnetization(num_spins: int) -> np.ndarray:
    indices = basis_indices(num_spins)
    ups = np.zeros(indices.shape, dtype=np.float64)
    for site in range(num_spins):
        ups += (indices >> site) & 1
    profile = ups - num_spins / 2.0
    profile.setflags(write=False)
    return profile


def check_site(num_spins: int, site: int) -> None:
    """Raise if ``site`` is not a valid spin index."""
    if not 0 <= site < num_spins:
        raise InvalidParameterError(f"site {site} out of range for {num_spins} spins")


def _bath_spinor(theta: float, phi: float) -> np.ndarray:
    # Component order follows the bit value: index 0 = down, index 1 = up.
    return np.array(
        [np.exp(1j * phi) * np.sin(theta / 2.0), np.cos(theta / 2.0)],
        dtype=np.complex128,
    )


def prepare_initial_state(L: int, seed: int) -> StateVector:
    """Prepare |up>_0 |down>_1 times L independent Haar-random bath spins.

    Args:
        L: Number of bath spins.
        seed: Seed of the bath realization; identical seeds give identical
            states on every platform.

    Returns:
        The normalized product state.
    """
    dimension(L)
    rng = np.random.default_rng(np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF))
    cos_theta = rng.uniform(-1.0, 1.0, size=L)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=L)

    # Central pair: bit0 = 1 (up), bit1 = 0 (down) -> index 1.
    amplitudes = np.zeros(4, dtype=np.complex128)
    amplitudes[1] = 1.0
    for n in range(L):
        # Higher sites are more significant bits, so they go on the left.
        spinor = _bath_spinor(np.arccos(cos_theta[n]), phi[n])
        amplitudes = np.kron(spinor, amplitudes)

    logger.debug(f"Prepared initial state for L={L}, seed={seed}")
    return StateVector(amplitudes, L + CENTRAL_SPINS)


def basis_state(num_spins: int, index: int) -> StateVector:
    """Return the computational basis state with the given index."""
    amplitudes = np.zeros(1 << num_spins, dtype=np.complex128)
    if not 0 <= index < amplitudes.shape[0]:
        raise InvalidParameterError(f"basis index {index} out of range")
    amplitudes[index] = 1.0
    return StateVector(amplitudes, num_spins)


def random_state(
    num_spins: int, rng: Optional[np.random.Generator] = None
) -> StateVector:
    """Return a normalized state with Gaussian random amplitudes."""
    rng = rng or np.random.default_rng()
    size = 1 << num_spins
    amplitudes = rng.normal(size=size) + 1j * rng.normal(size=size)
    return StateVector(amplitudes / np.linalg.norm(amplitudes), num_spins)


def measure_sz(state: StateVector, site: int) -> float:
    """Return <S^z> of one spin."""
    check_site(state.num_spins, site)
    probabilities = np.abs(state.amplitudes) ** 2
    up = ((basis_indices(state.num_spins) >> site) & 1).astype(bool)
    return 0.5 * float(probabilities[up].sum() - probabilities[~up].sum())


def total_sz(state: StateVector) -> float:
    """Return the sum of <S^z> over all spins."""
    probabilities = np.abs(state.amplitudes) ** 2
    return float(np.dot(probabilities, _total_magnetization(state.num_spins)))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """Return <a|b>, conjugate-linear in the first argument."""
    if a.num_spins != b.num_spins:
        raise InvalidParameterError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}"
        )
    return complex(np.vdot(a.amplitudes, b.amplitudes))
