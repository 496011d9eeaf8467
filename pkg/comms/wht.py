"""
Walsh-Hadamard transform module

Hadamard/Walsh sign matrices, sequency ordering and the fast (inverse)
Walsh-Hadamard transform used as the digital stand-in for Walsh-domain
interleaved converters.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NATURAL = "natural"
SEQUENCY = "sequency"
ORTHONORMAL = "orthonormal"
ANALYSIS = "analysis"

ORDERINGS = (NATURAL, SEQUENCY)
SCALINGS = (ORTHONORMAL, ANALYSIS)


class InvalidOrderError(ValueError):
    """Transform order is not a power of two >= 2"""


class LengthMismatchError(ValueError):
    """Input length does not match the transform order"""


@dataclass(frozen=True)
class WalshSpec:
    """Transform order, row ordering and scaling convention"""

    order: int
    ordering: str = SEQUENCY
    scaling: str = ORTHONORMAL

    def __post_init__(self):
        check_order(self.order)
        if self.ordering not in ORDERINGS:
            raise ValueError(f"Unknown ordering: {self.ordering}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"Unknown scaling: {self.scaling}")


@dataclass(frozen=True)
class SignMatrix:
    """N x N matrix over {+1, -1} with its ordering tag"""

    entries: np.ndarray
    ordering: str

    @property
    def order(self):
        return self.entries.shape[0]


def is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def check_order(n):
    """Raise InvalidOrderError unless n is a power of two >= 2"""
    if not is_power_of_two(n) or n < 2:
        raise InvalidOrderError(f"Transform order must be a power of two >= 2, got {n}")
    return int(n)


def sign_changes(row):
    """Number of sign changes along a +/-1 row"""
    row = np.asarray(row)
    return int(np.count_nonzero(row[1:] != row[:-1]))


@lru_cache(maxsize=None)
def _hadamard_entries(n):
    h = np.array([[1, 1], [1, -1]], dtype=np.int8)
    base = h
    while h.shape[0] < n:
        h = np.kron(h, base)
    h.flags.writeable = False
    return h


def hadamard_matrix(n):
    """
    Natural-ordered Hadamard matrix H_N from the Kronecker recursion

    Args:
        n: Order (power of two, >= 2)

    Returns:
        SignMatrix: H_N, read-only
    """
    check_order(n)
    return SignMatrix(_hadamard_entries(n), NATURAL)


@lru_cache(maxsize=None)
def _sequency_permutation(n):
    h = _hadamard_entries(n)
    perm = np.empty(n, dtype=np.int64)
    for index in range(n):
        perm[sign_changes(h[index])] = index
    perm.flags.writeable = False
    return perm


def sequency_permutation(n):
    """
    Row permutation taking H_N to the sequency-ordered W_N

    Counted explicitly from the rows (done once per order, then cached).
    W_N row i is H_N row perm[i] and has exactly i sign changes.
    """
    check_order(n)
    return _sequency_permutation(n)


@lru_cache(maxsize=None)
def _walsh_entries(n):
    w = _hadamard_entries(n)[_sequency_permutation(n)]
    w.flags.writeable = False
    return w


def walsh_matrix(n):
    """Sequency-ordered Walsh matrix W_N"""
    check_order(n)
    return SignMatrix(_walsh_entries(n), SEQUENCY)


def transform_matrix(spec):
    """
    Dense matrix applied by fwht under a spec (slow reference)

    Args:
        spec: WalshSpec

    Returns:
        numpy.ndarray: float64 matrix M with fwht(x) == M @ x
    """
    if spec.ordering == SEQUENCY:
        m = _walsh_entries(spec.order).astype(np.float64)
    else:
        m = _hadamard_entries(spec.order).astype(np.float64)
    if spec.scaling == ORTHONORMAL:
        m = m / np.sqrt(spec.order)
    return m


def _butterfly(x):
    # In-place style Hadamard butterfly over the last axis, natural order
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = x.reshape(-1, n)
    rows = y.shape[0]
    h = 1
    while h < n:
        y = y.reshape(rows, n // (2 * h), 2, h)
        a = y[:, :, 0, :]
        b = y[:, :, 1, :]
        y = np.stack((a + b, a - b), axis=2)
        h *= 2
    return y.reshape(*lead, n)


def _check_input(x, spec):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != spec.order:
        raise LengthMismatchError(
            f"Expected last dimension {spec.order}, got shape {x.shape}"
        )
    return x


def fwht(x, spec):
    """
    Fast Walsh-Hadamard transform over the last axis

    Args:
        x: Real array whose last dimension equals spec.order
        spec: WalshSpec

    Returns:
        numpy.ndarray: Transform coefficients, same shape as x
    """
    x = _check_input(x, spec)
    y = _butterfly(x)
    if spec.ordering == SEQUENCY:
        y = y[..., _sequency_permutation(spec.order)]
    if spec.scaling == ORTHONORMAL:
        y = y / np.sqrt(spec.order)
    return y


def ifwht(xw, spec):
    """
    Inverse of fwht under the same spec

    Args:
        xw: Coefficients, last dimension spec.order
        spec: WalshSpec

    Returns:
        numpy.ndarray: Reconstructed samples
    """
    xw = _check_input(xw, spec)
    if spec.ordering == SEQUENCY:
        z = np.empty_like(xw)
        z[..., _sequency_permutation(spec.order)] = xw
    else:
        z = xw
    y = _butterfly(z)
    if spec.scaling == ORTHONORMAL:
        return y / np.sqrt(spec.order)
    return y / spec.order


def fwht_transpose(dy, spec):
    """Apply the transpose of the fwht matrix (used for backpropagation)"""
    if spec.scaling == ORTHONORMAL:
        return ifwht(dy, spec)
    return ifwht(dy, spec) * spec.order


def ifwht_transpose(dy, spec):
    """Apply the transpose of the ifwht matrix"""
    if spec.scaling == ORTHONORMAL:
        return fwht(dy, spec)
    return fwht(dy, spec) / spec.order
