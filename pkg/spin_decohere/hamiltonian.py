"""Central-spin Hamiltonian as a sum of two-spin couplings.

The model H = J0 (S1 + S2)^2 + sum_n J_n I_n . (S1 + S2) is stored as a
TermSet: a list of axis-resolved pair couplings plus a scalar offset, using
(S1 + S2)^2 = 3/2 + 2 S1 . S2 for spin-1/2. The action on a state is
evaluated matrix-free with bit arithmetic on basis indices.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spin_decohere.errors import (
    DimensionError,
    InvalidParameterError,
    NumericalError,
)
from spin_decohere.hilbert import (
    CENTRAL_SPINS,
    StateVector,
    basis_indices,
    check_site,
    dimension,
)

logger = logging.getLogger("spin-decohere")

# "about 14 S=1/2 spins" is the practical limit for dense storage.
DENSE_CAP = 1 << 14

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class ModelParams:
    """Bath size, central exchange J0 and the L bath couplings J_n."""

    L: int
    J0: float
    couplings: Tuple[float, ...]

    def __post_init__(self) -> None:
        couplings = tuple(float(j) for j in self.couplings)
        object.__setattr__(self, "couplings", couplings)
        if self.L < 0:
            raise InvalidParameterError(f"L must be non-negative, got {self.L}")
        if len(couplings) != self.L:
            raise InvalidParameterError(
                f"expected {self.L} bath couplings, got {len(couplings)}"
            )
        if not math.isfinite(self.J0) or not all(map(math.isfinite, couplings)):
            raise InvalidParameterError("couplings must be finite")

    @classmethod
    def uniform(cls, L: int, J0: float, J: float) -> "ModelParams":
        """Build parameters with every bath coupling equal to J."""
        return cls(L=L, J0=J0, couplings=(J,) * L)

    @property
    def uniform_coupling(self) -> Optional[float]:
        """The common bath coupling, or None if the couplings differ."""
        if not self.couplings:
            return 0.0
        first = self.couplings[0]
        return first if all(j == first for j in self.couplings) else None


@dataclass(frozen=True)
class PairTerm:
    """Coupling jx Sx_a Sx_b + jy Sy_a Sy_b + jz Sz_a Sz_b."""

    site_a: int
    site_b: int
    jx: float
    jy: float
    jz: float

    @property
    def is_isotropic(self) -> bool:
        return self.jx == self.jy == self.jz

    def coupling(self, axis: str) -> float:
        if axis not in AXES:
            raise InvalidParameterError(f"unknown axis {axis!r}")
        return {"x": self.jx, "y": self.jy, "z": self.jz}[axis]

    @property
    def pair(self) -> Tuple[int, int]:
        return (self.site_a, self.site_b)


@dataclass(frozen=True)
class TermSet:
    """Hamiltonian as ordered pair terms plus a scalar offset."""

    num_spins: int
    pair_terms: Tuple[PairTerm, ...]
    offset: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pair_terms", tuple(self.pair_terms))
        seen = set()
        for term in self.pair_terms:
            if term.site_a == term.site_b:
                raise InvalidParameterError(
                    f"pair term couples site {term.site_a} to itself"
                )
            check_site(self.num_spins, term.site_a)
            check_site(self.num_spins, term.site_b)
            key = frozenset(term.pair)
            if key in seen:
                raise InvalidParameterError(f"duplicate pair term {term.pair}")
            seen.add(key)

    @property
    def dimension(self) -> int:
        return 1 << self.num_spins


def build_model(params: ModelParams) -> TermSet:
    """Build the central-spin model in canonical term order.

    The central pair (0, 1) comes first, followed by (s, 0), (s, 1) for every
    bath site s = 2..L+1.
    """
    dimension(params.L)
    central = 2.0 * params.J0
    terms: List[PairTerm] = [PairTerm(0, 1, central, central, central)]
    for n, j in enumerate(params.couplings):
        site = n + CENTRAL_SPINS
        terms.append(PairTerm(site, 0, j, j, j))
        terms.append(PairTerm(site, 1, j, j, j))
    return TermSet(
        num_spins=params.L + CENTRAL_SPINS,
        pair_terms=tuple(terms),
        offset=1.5 * params.J0,
    )


@dataclass(frozen=True)
class _Kernel:
    """Precomputed bit-arithmetic action of a TermSet, offset excluded."""

    diagonal: np.ndarray
    flips: Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray], ...]


def _pair_flip_coefficients(
    term: PairTerm, indices: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    differ = (((indices >> term.site_a) ^ (indices >> term.site_b)) & 1).astype(bool)
    # Sz Sz = +1/4 on equal bits, -1/4 on differing bits.
    diagonal = np.where(differ, -0.25, 0.25) * term.jz
    # Sx Sx flips both bits with 1/4; Sy Sy does too, with sign -1 on equal bits.
    flip = np.where(differ, term.jx + term.jy, term.jx - term.jy) * 0.25
    return diagonal, flip


@lru_cache(maxsize=8)
def _kernel(terms: TermSet) -> _Kernel:
    indices = basis_indices(terms.num_spins)
    diagonal = np.zeros(indices.shape, dtype=np.float64)
    flips = []
    for term in terms.pair_terms:
        term_diagonal, coefficients = _pair_flip_coefficients(term, indices)
        diagonal += term_diagonal
        rows = np.flatnonzero(coefficients)
        if rows.size:
            mask = (1 << term.site_a) | (1 << term.site_b)
            flips.append((rows, rows ^ mask, coefficients[rows]))
    diagonal.setflags(write=False)
    return _Kernel(diagonal=diagonal, flips=tuple(flips))


def apply_array(
    terms: TermSet, psi: np.ndarray, include_offset: bool = True
) -> np.ndarray:
    """Return H psi for a raw amplitude array.

    Args:
        terms: The Hamiltonian.
        psi: Amplitudes of length 2^num_spins.
        include_offset: Whether to add offset * psi.
    """
    if psi.shape != (terms.dimension,):
        raise InvalidParameterError(
            f"dimension mismatch: state {psi.shape[0]} vs Hamiltonian "
            f"{terms.dimension}"
        )
    kernel = _kernel(terms)
    out = kernel.diagonal * psi
    if include_offset and terms.offset:
        out += terms.offset * psi
    for rows, partners, coefficients in kernel.flips:
        out[rows] += coefficients * psi[partners]
    return out


def apply(terms: TermSet, state: StateVector) -> StateVector:
    """Return H applied to a state, including the offset."""
    if state.num_spins != terms.num_spins:
        raise InvalidParameterError(
            f"dimension mismatch: {state.num_spins} spins vs {terms.num_spins}"
        )
    return StateVector(apply_array(terms, state.amplitudes), state.num_spins)


def dense_matrix(terms: TermSet, dense_cap: int = DENSE_CAP) -> np.ndarray:
    """Return the explicit D x D matrix of H.

    Every coupling in a TermSet has real matrix elements in the z basis, so
    the result is real symmetric, hence Hermitian.

    Raises:
        DimensionError: If D exceeds ``dense_cap``.
    """
    size = terms.dimension
    if size > dense_cap:
        raise DimensionError(f"dimension {size} exceeds the dense cap {dense_cap}")
    kernel = _kernel(terms)
    matrix = np.diag(kernel.diagonal + terms.offset)
    for rows, partners, coefficients in kernel.flips:
        matrix[rows, partners] += coefficients
    return matrix


def norm_bound(terms: TermSet) -> float:
    """Upper bound on the spectral norm of H - offset.

    Each axis product S^a_i S^a_j has spectral norm 1/4.
    """
    return sum(
        (abs(t.jx) + abs(t.jy) + abs(t.jz)) / 4.0 for t in terms.pair_terms
    )


def energy(terms: TermSet, state: StateVector) -> float:
    """Return Re <psi|H|psi>."""
    value = complex(np.vdot(state.amplitudes, apply(terms, state).amplitudes))
    if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
        raise NumericalError(
            f"energy has imaginary part {value.imag:.3e}; H is not Hermitian"
        )
    return value.real


def pair_operator(term: PairTerm) -> np.ndarray:
    """Return the 4x4 matrix of a pair term in the (bit_a, bit_b) basis."""
    sx = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=np.complex128)
    sy = np.array([[0.0, 0.5j], [-0.5j, 0.0]], dtype=np.complex128)
    sz = np.array([[-0.5, 0.0], [0.0, 0.5]], dtype=np.complex128)
    return (
        term.jx * np.kron(sx, sx)
        + term.jy * np.kron(sy, sy)
        + term.jz * np.kron(sz, sz)
    )


def terms_from_couplings(
    num_spins: int,
    couplings: Sequence[Tuple[int, int, float, float, float]],
    offset: float = 0.0,
) -> TermSet:
    """Build a TermSet from plain (a, b, jx, jy, jz) tuples."""
    return TermSet(
        num_spins=num_spins,
        pair_terms=tuple(PairTerm(*c) for c in couplings),
        offset=offset,
    )
