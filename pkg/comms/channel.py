"""
AWGN channel, SNR conversions, Shannon capacity and the finite-blocklength
normal-approximation bound
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtri

LOG2_E = float(np.log2(np.e))

# Search window for threshold root-finding, dB
SEARCH_FLOOR_DB = -30.0
SEARCH_CEIL_DB = 60.0
COARSE_STEP_DB = 0.05
BISECTION_TOL_DB = 1e-6


class ChannelError(ValueError):
    """Invalid channel or bound parameters"""


@dataclass(frozen=True)
class ChannelParams:
    """SNR in dB and the matching noise standard deviation (gamma = 1 / sigma^2)"""

    snr_db: float
    sigma: float

    @classmethod
    def from_snr_db(cls, snr_db):
        return cls(float(snr_db), snr_db_to_sigma(snr_db))

    @classmethod
    def from_sigma(cls, sigma):
        return cls(sigma_to_snr_db(sigma), float(sigma))

    @property
    def gamma(self):
        return 1.0 / self.sigma**2


@dataclass(frozen=True)
class FblQuery:
    rate: float
    n: int
    pe: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ChannelError(f"Rate must be positive, got {self.rate}")
        if self.n < 1:
            raise ChannelError(f"Block length must be >= 1, got {self.n}")
        if not 0.0 < self.pe < 1.0:
            raise ChannelError(f"Target error probability must be in (0, 1), got {self.pe}")


def awgn(x, sigma, rng):
    """
    Add white Gaussian noise of standard deviation sigma

    Args:
        x: Real array of any shape
        sigma: Noise standard deviation (>= 0)
        rng: numpy Generator

    Returns:
        numpy.ndarray: x + z, a new array
    """
    if sigma < 0 or not np.isfinite(sigma):
        raise ChannelError(f"Noise standard deviation must be finite and >= 0, got {sigma}")
    x = np.array(x, dtype=np.float64)
    if sigma == 0:
        return x
    return x + sigma * rng.standard_normal(x.shape)


def snr_db_to_sigma(snr_db):
    return float(10.0 ** (-snr_db / 20.0))


def sigma_to_snr_db(sigma):
    if sigma <= 0:
        raise ChannelError(f"Noise standard deviation must be positive, got {sigma}")
    return float(-20.0 * np.log10(sigma))


def db_to_linear(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=np.float64) / 10.0)


def shannon_capacity(gamma):
    """AWGN capacity in bits per real channel use"""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < 0):
        raise ChannelError("SNR must be non-negative")
    c = 0.5 * np.log2(1.0 + gamma)
    return float(c) if c.ndim == 0 else c


def shannon_snr_db(rate):
    """Minimum SNR (dB) at which capacity reaches `rate`"""
    if rate <= 0:
        raise ChannelError(f"Rate must be positive, got {rate}")
    return float(10.0 * np.log10(2.0 ** (2.0 * rate) - 1.0))


def q_function(x):
    """Gaussian tail probability Q(x) = P(Z > x)"""
    x = np.asarray(x, dtype=np.float64)
    q = 0.5 * erfc(x / np.sqrt(2.0))
    return float(q) if q.ndim == 0 else q


def inv_q(p):
    """
    Inverse of q_function

    Starts from the inverse normal CDF and applies Newton steps until
    |Q(x) - p| is at round-off level.
    """
    if not 0.0 < p < 1.0:
        raise ChannelError(f"inv_q needs p in (0, 1), got {p}")
    x = float(-ndtri(p))
    for _ in range(3):
        density = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        if density == 0.0:
            break
        step = (q_function(x) - p) / density
        x += step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def channel_dispersion(gamma):
    """AWGN channel dispersion V(gamma) in bits^2"""
    gamma = np.asarray(gamma, dtype=np.float64)
    v = gamma * (gamma + 2.0) / (2.0 * (gamma + 1.0) ** 2) * LOG2_E**2
    return float(v) if v.ndim == 0 else v


def fbl_max_rate(gamma, pe, n):
    """
    Normal-approximation maximal rate R*(gamma, Pe, n) in bits per channel use

    The third-order term uses log2. Accepts scalar or array gamma.
    """
    gamma_arr = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma_arr <= 0):
        raise ChannelError("fbl_max_rate needs a positive SNR")
    if n < 1:
        raise ChannelError(f"Block length must be >= 1, got {n}")
    rate = (
        0.5 * np.log2(1.0 + gamma_arr)
        - np.sqrt(channel_dispersion(gamma_arr) / n) * inv_q(pe)
        + 3.0 * np.log2(n) / (2.0 * n)
    )
    return float(rate) if rate.ndim == 0 else rate


def fbl_threshold_snr_db(rate, pe, n):
    """
    Smallest SNR (dB) on the rising branch of R* at which R* >= rate

    R* is not monotone at very low SNR for short blocks (the third-order term
    keeps it positive as gamma -> 0), so the root is searched to the right of
    the coarse-grid minimum. If `rate` sits below that minimum the search
    floor is returned.
    """
    FblQuery(rate, n, pe)
    grid = np.arange(SEARCH_FLOOR_DB, SEARCH_CEIL_DB + COARSE_STEP_DB / 2, COARSE_STEP_DB)
    rates = fbl_max_rate(db_to_linear(grid), pe, n)
    lowest = int(np.argmin(rates))
    if rates[lowest] >= rate:
        return SEARCH_FLOOR_DB
    if rates[-1] < rate:
        raise ChannelError(f"Rate {rate} is not reachable below {SEARCH_CEIL_DB} dB")

    lo = float(grid[lowest])
    hi = SEARCH_CEIL_DB
    while hi - lo > BISECTION_TOL_DB:
        mid = 0.5 * (lo + hi)
        if fbl_max_rate(db_to_linear(mid), pe, n) >= rate:
            hi = mid
        else:
            lo = mid
    return hi


def rate_threshold_table(rates, pe, n):
    """
    Shannon and finite-blocklength threshold SNR for each rate

    Returns:
        list: (rate, shannon_snr_db, fbl_threshold_db) tuples
    """
    return [(r, shannon_snr_db(r), fbl_threshold_snr_db(r, pe, n)) for r in rates]


def antipodal_repetition_bler(gamma, k, repetitions):
    """
    Exact BLER of uncoded antipodal signaling with each bit repeated

    Each bit is sent `repetitions` times at unit power and combined, giving a
    bit error probability of Q(sqrt(2 * repetitions * gamma)).
    """
    ber = q_function(np.sqrt(2.0 * repetitions * gamma))
    return float(1.0 - (1.0 - ber) ** k)
