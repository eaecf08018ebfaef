"""Time-evolution algorithms for the central-spin model.

Seven propagators share one phase convention: the scalar offset of a TermSet
enters every algorithm as the global phase exp(-i t offset), so that state
differences between algorithms are meaningful including their phase.

- ED: full diagonalization, exact spectral phases.
- SP_PAIR_U2 / SP_PAIR_U4: Suzuki product formulas over pair couplings.
- SP_XYZ_U2 / SP_XYZ_U4: Suzuki product formulas over x, y, z components.
- CP: Chebyshev expansion with Bessel-function coefficients (one leap).
- SIL: short iterative Lanczos in an N-dimensional Krylov space.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import jv

from spin_decohere.errors import InvalidParameterError, NumericalError
from spin_decohere.hamiltonian import (
    AXES,
    DENSE_CAP,
    PairTerm,
    TermSet,
    apply_array,
    dense_matrix,
    norm_bound,
    pair_operator,
)
from spin_decohere.hilbert import StateVector, basis_indices, check_site

logger = logging.getLogger("spin-decohere")

# U4 substep weight, 4a + (1 - 4a) = 1.
SUZUKI_A = 1.0 / (4.0 - 4.0 ** (1.0 / 3.0))

# Bessel coefficients |J_k(z)| vanish to double precision beyond k = z + 100.
CHEBYSHEV_MARGIN = 100
BESSEL_MIN_MARGIN = 50
BESSEL_UNDERFLOW = 1e-300

BREAKDOWN_TOLERANCE = 1e-12
ORTHOGONALITY_WARNING = 1e-6


class Decomposition(str, Enum):
    """How the Hamiltonian is split into exactly exponentiable pieces."""

    PAIR = "PAIR"
    XYZ = "XYZ"


class PropagatorKind(str, Enum):
    """The seven time-evolution algorithms."""

    ED = "ED"
    SP_PAIR_U2 = "SP_PAIR_U2"
    SP_PAIR_U4 = "SP_PAIR_U4"
    SP_XYZ_U2 = "SP_XYZ_U2"
    SP_XYZ_U4 = "SP_XYZ_U4"
    CP = "CP"
    SIL = "SIL"

    @property
    def decomposition(self) -> Optional[Decomposition]:
        if self in (PropagatorKind.SP_PAIR_U2, PropagatorKind.SP_PAIR_U4):
            return Decomposition.PAIR
        if self in (PropagatorKind.SP_XYZ_U2, PropagatorKind.SP_XYZ_U4):
            return Decomposition.XYZ
        return None

    @property
    def suzuki_order(self) -> Optional[int]:
        if self in (PropagatorKind.SP_PAIR_U2, PropagatorKind.SP_XYZ_U2):
            return 2
        if self in (PropagatorKind.SP_PAIR_U4, PropagatorKind.SP_XYZ_U4):
            return 4
        return None

    @property
    def is_stepping(self) -> bool:
        """Whether the algorithm advances by steps of size tau."""
        return self.decomposition is not None or self is PropagatorKind.SIL


_SP_LABELS = {
    PropagatorKind.SP_PAIR_U2: "SP-Pair(U2)",
    PropagatorKind.SP_PAIR_U4: "SP-Pair(U4)",
    PropagatorKind.SP_XYZ_U2: "SP-XYZ(U2)",
    PropagatorKind.SP_XYZ_U4: "SP-XYZ(U4)",
}


@dataclass(frozen=True)
class PropagatorSpec:
    """Algorithm selector with its parameters.

    Attributes:
        kind: Which algorithm to run.
        tau: Time step for SP and SIL; sampling interval for ED and CP.
        krylov_N: Krylov space dimension for SIL.
    """

    kind: PropagatorKind
    tau: float = 0.05
    krylov_N: int = 10

    def validate(self, dimension: int) -> None:
        """Check the parameters against a Hilbert space dimension."""
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidParameterError(f"tau must be positive, got {self.tau}")
        if self.kind is PropagatorKind.SIL:
            if self.krylov_N < 2:
                raise InvalidParameterError(
                    f"krylov_N must be at least 2, got {self.krylov_N}"
                )
            if self.krylov_N > dimension:
                raise InvalidParameterError(
                    f"krylov_N={self.krylov_N} exceeds the dimension {dimension}"
                )

    @property
    def label(self) -> str:
        if self.kind is PropagatorKind.SIL:
            return f"SIL({self.krylov_N})"
        return _SP_LABELS.get(self.kind, self.kind.value)


# ---------------------------------------------------------------------------
# Exact diagonalization


@dataclass(frozen=True, eq=False)
class EDCache:
    """Eigen-decomposition H = V diag(E) V^T of a real symmetric Hamiltonian."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    num_spins: int


@lru_cache(maxsize=2)
def build_ed_cache(terms: TermSet, dense_cap: int = DENSE_CAP) -> EDCache:
    """Diagonalize H once; repeated calls with the same terms reuse the result."""
    matrix = dense_matrix(terms, dense_cap)
    logger.info(f"Diagonalizing H of dimension {matrix.shape[0]}")
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(matrix, overwrite_a=True)
    except np.linalg.LinAlgError as e:
        logger.error(f"Diagonalization failed: {e}")
        raise NumericalError(f"diagonalization failed: {e}", "ED") from e
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    logger.info("Diagonalization finished")
    return EDCache(eigenvalues, eigenvectors, terms.num_spins)


def ed_propagate(cache: EDCache, state: StateVector, t: float) -> StateVector:
    """Return V diag(exp(-i t E)) V^T psi."""
    if cache.num_spins != state.num_spins:
        raise InvalidParameterError(
            f"dimension mismatch: cache {cache.num_spins} spins, "
            f"state {state.num_spins} spins"
        )
    return state.with_amplitudes(ed_array(cache, state.amplitudes, t))


def ed_array(cache: EDCache, psi: np.ndarray, t: float) -> np.ndarray:
    coefficients = cache.eigenvectors.T @ psi
    return cache.eigenvectors @ (np.exp(-1j * t * cache.eigenvalues) * coefficients)


# ---------------------------------------------------------------------------
# Suzuki product formulas


@lru_cache(maxsize=None)
def _quadruples(
    num_spins: int, a: int, b: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Index sets (i00, i01, i10, i11), labelled by (bit a, bit b)."""
    indices = basis_indices(num_spins)
    base = indices[(((indices >> a) | (indices >> b)) & 1) == 0]
    i00 = base
    i01 = base | (1 << b)
    i10 = base | (1 << a)
    i11 = base | (1 << a) | (1 << b)
    for array in (i00, i01, i10, i11):
        array.setflags(write=False)
    return i00, i01, i10, i11


def _check_pair(num_spins: int, a: int, b: int) -> None:
    if a == b:
        raise InvalidParameterError(f"a pair factor needs two sites, got {a} twice")
    check_site(num_spins, a)
    check_site(num_spins, b)


def _mix(
    psi: np.ndarray,
    first: np.ndarray,
    second: np.ndarray,
    diagonal: complex,
    off_diagonal: complex,
) -> None:
    """Apply [[d, o], [o, d]] to every (first, second) amplitude pair."""
    u = psi[first]
    v = psi[second]
    psi[first] = diagonal * u + off_diagonal * v
    psi[second] = off_diagonal * u + diagonal * v


def _pair_factor_inplace(
    psi: np.ndarray, num_spins: int, a: int, b: int, J: float, tau: float
) -> None:
    i00, i01, i10, i11 = _quadruples(num_spins, a, b)
    triplet = np.exp(-0.25j * tau * J)
    singlet = np.exp(0.75j * tau * J)
    psi[i00] *= triplet
    psi[i11] *= triplet
    _mix(psi, i01, i10, 0.5 * (triplet + singlet), 0.5 * (triplet - singlet))


def _general_pair_inplace(
    psi: np.ndarray, num_spins: int, term: PairTerm, tau: float
) -> None:
    unitary = scipy.linalg.expm(-1j * tau * pair_operator(term))
    quadruple = _quadruples(num_spins, term.site_a, term.site_b)
    block = unitary @ np.stack([psi[i] for i in quadruple])
    for row, index in enumerate(quadruple):
        psi[index] = block[row]


def _axis_factor_inplace(
    psi: np.ndarray,
    num_spins: int,
    a: int,
    b: int,
    J: float,
    axis: str,
    tau: float,
) -> None:
    i00, i01, i10, i11 = _quadruples(num_spins, a, b)
    angle = 0.25 * tau * J
    if axis == "z":
        same = np.exp(-1j * angle)
        psi[i00] *= same
        psi[i11] *= same
        psi[i01] *= np.conj(same)
        psi[i10] *= np.conj(same)
        return
    cos, sin = math.cos(angle), math.sin(angle)
    # sigma_y sigma_y maps |11> to -|00>, so equal bits pick up the opposite sign.
    equal_sign = -1.0 if axis == "y" else 1.0
    _mix(psi, i00, i11, cos, -1j * sin * equal_sign)
    _mix(psi, i01, i10, cos, -1j * sin)


def pair_factor_apply(
    state: StateVector, a: int, b: int, J: float, tau: float
) -> StateVector:
    """Apply exp(-i tau J S_a . S_b) exactly.

    Triplet states acquire exp(-i tau J / 4), the singlet exp(+3i tau J / 4).
    """
    _check_pair(state.num_spins, a, b)
    psi = state.writable_copy()
    _pair_factor_inplace(psi, state.num_spins, a, b, J, tau)
    return state.with_amplitudes(psi)


def axis_factor_apply(
    state: StateVector, a: int, b: int, J: float, axis: str, tau: float
) -> StateVector:
    """Apply exp(-i tau J S^axis_a S^axis_b) exactly."""
    _check_pair(state.num_spins, a, b)
    if axis not in AXES:
        raise InvalidParameterError(f"unknown axis {axis!r}")
    psi = state.writable_copy()
    _axis_factor_inplace(psi, state.num_spins, a, b, J, axis, tau)
    return state.with_amplitudes(psi)


_Factor = Union[PairTerm, Tuple[int, int, float, str]]


@lru_cache(maxsize=16)
def _factors(terms: TermSet, decomposition: Decomposition) -> Tuple[_Factor, ...]:
    """Canonical factor order of a decomposition.

    PAIR: the terms in TermSet order. XYZ: all x parts, then all y, then all z,
    each in TermSet order; factors within one axis commute.
    """
    if decomposition is Decomposition.PAIR:
        return terms.pair_terms
    factors = []
    for axis in AXES:
        for term in terms.pair_terms:
            J = term.coupling(axis)
            if J != 0.0:
                factors.append((term.site_a, term.site_b, J, axis))
    return tuple(factors)


def _apply_factor(
    psi: np.ndarray, num_spins: int, factor: _Factor, tau: float
) -> None:
    if isinstance(factor, PairTerm):
        if factor.is_isotropic:
            _pair_factor_inplace(
                psi, num_spins, factor.site_a, factor.site_b, factor.jx, tau
            )
        else:
            _general_pair_inplace(psi, num_spins, factor, tau)
    else:
        a, b, J, axis = factor
        _axis_factor_inplace(psi, num_spins, a, b, J, axis, tau)


def _u2_inplace(
    psi: np.ndarray, terms: TermSet, decomposition: Decomposition, tau: float
) -> None:
    factors = _factors(terms, decomposition)
    if factors:
        half = 0.5 * tau
        # The two middle half-steps of the same factor merge into one full step.
        for factor in factors[:-1]:
            _apply_factor(psi, terms.num_spins, factor, half)
        _apply_factor(psi, terms.num_spins, factors[-1], tau)
        for factor in reversed(factors[:-1]):
            _apply_factor(psi, terms.num_spins, factor, half)
    if terms.offset:
        psi *= np.exp(-1j * tau * terms.offset)


def _u4_inplace(
    psi: np.ndarray, terms: TermSet, decomposition: Decomposition, tau: float
) -> None:
    outer = SUZUKI_A * tau
    for substep in (outer, outer, (1.0 - 4.0 * SUZUKI_A) * tau, outer, outer):
        _u2_inplace(psi, terms, decomposition, substep)


def _check_decomposition(decomposition: Decomposition) -> Decomposition:
    try:
        return Decomposition(decomposition)
    except ValueError as e:
        raise InvalidParameterError(f"unknown decomposition {decomposition!r}") from e


def u2_step(
    terms: TermSet, decomposition: Decomposition, state: StateVector, tau: float
) -> StateVector:
    """Advance by one second-order symmetric product step."""
    decomposition = _check_decomposition(decomposition)
    psi = state.writable_copy()
    _u2_inplace(psi, terms, decomposition, tau)
    return state.with_amplitudes(psi)


def u4_step(
    terms: TermSet, decomposition: Decomposition, state: StateVector, tau: float
) -> StateVector:
    """Advance by one fourth-order step built from five U2 substeps."""
    decomposition = _check_decomposition(decomposition)
    psi = state.writable_copy()
    _u4_inplace(psi, terms, decomposition, tau)
    return state.with_amplitudes(psi)


# ---------------------------------------------------------------------------
# Chebyshev polynomial expansion


def chebyshev_order(z: float) -> int:
    """Number of expansion terms K = floor(z) + 100."""
    return int(math.floor(z)) + CHEBYSHEV_MARGIN


def bessel_coefficients(z: float, K: int) -> np.ndarray:
    """Return J_0(z), ..., J_K(z).

    Values below 1e-300 in magnitude are flushed to zero.

    Raises:
        InvalidParameterError: If z is negative or K < z + 50.
    """
    if not (z >= 0 and math.isfinite(z)):
        raise InvalidParameterError(f"z must be finite and non-negative, got {z}")
    if K < z + BESSEL_MIN_MARGIN:
        raise InvalidParameterError(
            f"K={K} is too small for z={z}; need K >= z + {BESSEL_MIN_MARGIN}"
        )
    coefficients = jv(np.arange(K + 1), z)
    coefficients[np.abs(coefficients) < BESSEL_UNDERFLOW] = 0.0
    return coefficients


def chebyshev_array(terms: TermSet, psi: np.ndarray, t: float) -> np.ndarray:
    phase = np.exp(-1j * t * terms.offset)
    bound = norm_bound(terms)
    if t == 0 or bound == 0:
        return phase * psi

    z = t * bound
    K = chebyshev_order(z)
    coefficients = bessel_coefficients(z, K)
    last = int(np.flatnonzero(coefficients)[-1])
    logger.debug(f"Chebyshev leap t={t}: z={z:.6g}, K={K}, last nonzero {last}")

    def scaled(v: np.ndarray) -> np.ndarray:
        return apply_array(terms, v, include_offset=False) / bound

    previous = psi
    current = -1j * scaled(psi)
    result = coefficients[0] * psi + 2.0 * coefficients[1] * current
    for k in range(2, last + 1):
        following = -2j * scaled(current) + previous
        result += 2.0 * coefficients[k] * following
        previous, current = current, following
    return phase * result


def chebyshev_propagate(terms: TermSet, state: StateVector, t: float) -> StateVector:
    """Evolve to time t in a single Chebyshev leap.

    Intermediate times are not available; a shorter time needs its own leap.
    """
    if t < 0:
        raise InvalidParameterError(f"t must be non-negative, got {t}")
    _check_dimension(terms, state)
    return state.with_amplitudes(chebyshev_array(terms, state.amplitudes, t))


# ---------------------------------------------------------------------------
# Short iterative Lanczos


def _sil_array(terms: TermSet, psi: np.ndarray, tau: float, N: int) -> np.ndarray:
    size = psi.shape[0]
    if not 2 <= N <= size:
        raise InvalidParameterError(f"Krylov dimension N={N} must be in [2, {size}]")
    length = float(np.linalg.norm(psi))
    if length == 0.0:
        return np.zeros_like(psi)

    tolerance = BREAKDOWN_TOLERANCE * norm_bound(terms)
    basis = np.empty((N, size), dtype=np.complex128)
    basis[0] = psi / length
    alphas = []
    betas = []
    for j in range(N):
        w = apply_array(terms, basis[j], include_offset=False)
        alpha = float(np.vdot(basis[j], w).real)
        alphas.append(alpha)
        if j == N - 1:
            break
        w -= alpha * basis[j]
        if j > 0:
            w -= betas[-1] * basis[j - 1]
        beta = float(np.linalg.norm(w))
        if beta <= tolerance:
            logger.debug(f"Lanczos breakdown after {j + 1} vectors (beta={beta:.3e})")
            break
        betas.append(beta)
        basis[j + 1] = w / beta

    m = len(alphas)
    if m == N:
        overlap = abs(np.vdot(basis[0], basis[m - 1]))
        if overlap > ORTHOGONALITY_WARNING:
            logger.debug(f"Lanczos vectors lost orthogonality: |<q1,qN>|={overlap:.3e}")

    if m == 1:
        ritz_values = np.array(alphas)
        ritz_vectors = np.ones((1, 1))
    else:
        # stemr fails on nearly decoupled blocks (tiny beta); stev does not.
        ritz_values, ritz_vectors = scipy.linalg.eigh_tridiagonal(
            np.array(alphas), np.array(betas[: m - 1]), lapack_driver="stev"
        )
    weights = ritz_vectors @ (np.exp(-1j * tau * ritz_values) * ritz_vectors[0, :])
    phase = np.exp(-1j * tau * terms.offset)
    return (length * phase) * (weights @ basis[:m])


def sil_step(
    terms: TermSet, state: StateVector, tau: float, N: int
) -> StateVector:
    """Advance by exp(-i tau P_N H P_N) on the Krylov space of the state.

    The Lanczos vectors are not reorthogonalized.
    """
    _check_dimension(terms, state)
    return state.with_amplitudes(_sil_array(terms, state.amplitudes, tau, N))


def step_array(
    spec: PropagatorSpec, terms: TermSet, psi: np.ndarray, tau: float
) -> np.ndarray:
    """Advance raw amplitudes by one step of a stepping algorithm.

    SP kinds update ``psi`` in place; SIL returns a new array.
    """
    kind = spec.kind
    if kind is PropagatorKind.SIL:
        return _sil_array(terms, psi, tau, spec.krylov_N)
    decomposition = kind.decomposition
    if decomposition is None:
        raise InvalidParameterError(f"{kind.value} is not a stepping algorithm")
    if kind.suzuki_order == 2:
        _u2_inplace(psi, terms, decomposition, tau)
    else:
        _u4_inplace(psi, terms, decomposition, tau)
    return psi


def _check_dimension(terms: TermSet, state: StateVector) -> None:
    if terms.num_spins != state.num_spins:
        raise InvalidParameterError(
            f"dimension mismatch: Hamiltonian {terms.num_spins} spins, "
            f"state {state.num_spins} spins"
        )
