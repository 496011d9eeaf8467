"""
CRC-aided Polar code baseline: construction, CRC, encoding, BPSK and
successive-cancellation list decoding
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from comms.channel import awgn, db_to_linear, snr_db_to_sigma
from comms.wht import is_power_of_two

FIVE_G = "5g"
BHATTACHARYYA = "bhattacharyya"
CONSTRUCTIONS = (FIVE_G, BHATTACHARYYA)

# Universal reliability order of the 5G NR sequence restricted to indices < 32,
# least reliable first
NR_RELIABILITY_32 = (
    0, 1, 2, 4, 8, 16, 3, 5, 9, 6, 17, 10, 18, 12, 20, 24,
    7, 11, 19, 13, 14, 21, 26, 25, 22, 28, 15, 23, 27, 29, 30, 31,
)  # fmt: skip

# Generator taps below the leading term, highest degree first
CRC_TAPS = {
    6: (1, 0, 0, 0, 0, 1),  # x^6 + x^5 + 1
    11: (1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1),  # x^11 + x^10 + x^9 + x^5 + 1
    16: (0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1),  # x^16 + x^12 + x^5 + 1
}

DECODE_CHUNK = 1024


class PolarConfigError(ValueError):
    """Inconsistent Polar code parameters"""


@dataclass(frozen=True)
class PolarConfig:
    n_code: int
    k_info: int
    crc_len: int
    list_size: int
    frozen: Tuple[int, ...]
    construction: str = FIVE_G
    design_snr_db: float = 2.0

    def __post_init__(self):
        if not is_power_of_two(self.n_code) or self.n_code < 2:
            raise PolarConfigError(f"Code length must be a power of two >= 2, got {self.n_code}")
        if self.k_info < 1 or self.k_info + self.crc_len > self.n_code:
            raise PolarConfigError(
                f"Need 1 <= k_info and k_info + crc_len <= N, got "
                f"{self.k_info} + {self.crc_len} > {self.n_code}"
            )
        if self.crc_len and self.crc_len not in CRC_TAPS:
            raise PolarConfigError(f"No CRC polynomial for length {self.crc_len}")
        if self.list_size < 1:
            raise PolarConfigError(f"List size must be >= 1, got {self.list_size}")
        if len(self.frozen) != self.n_code - self.k_info - self.crc_len:
            raise PolarConfigError("Frozen set size does not match N - k_info - crc_len")
        if list(self.frozen) != sorted(set(self.frozen)) or any(
            not 0 <= i < self.n_code for i in self.frozen
        ):
            raise PolarConfigError("Frozen set must hold sorted, distinct channel indices")

    @property
    def order(self):
        return int(self.n_code).bit_length() - 1

    @property
    def frozen_mask(self):
        mask = np.zeros(self.n_code, dtype=bool)
        mask[list(self.frozen)] = True
        return mask

    @property
    def info_positions(self):
        """Information channel indices in ascending order (message, then CRC)"""
        return np.flatnonzero(~self.frozen_mask)


def reliability_order(n_code, construction=FIVE_G, design_snr_db=2.0):
    """
    Channel indices sorted from least to most reliable

    The 5G order is available for N <= 32; the Bhattacharyya order tracks
    Z-parameters at a design SNR through each polarization level.
    """
    if construction == FIVE_G:
        if n_code > 32:
            raise PolarConfigError("5G reliability order is tabulated up to N = 32")
        return np.array([i for i in NR_RELIABILITY_32 if i < n_code], dtype=np.int64)
    if construction == BHATTACHARYYA:
        z = np.array([np.exp(-float(db_to_linear(design_snr_db)) / 2.0)])
        while z.size < n_code:
            level = np.empty(2 * z.size)
            level[0::2] = 2.0 * z - z * z
            level[1::2] = z * z
            z = level
        return np.argsort(-z, kind="stable")
    raise PolarConfigError(f"Unknown construction: {construction}")


def construct(n_code, k_info, crc_len=6, list_size=8, construction=FIVE_G, design_snr_db=2.0):
    """
    Build a Polar code configuration

    The N - k_info - crc_len least reliable channels are frozen.

    Returns:
        PolarConfig
    """
    if not is_power_of_two(n_code) or n_code < 2:
        raise PolarConfigError(f"Code length must be a power of two >= 2, got {n_code}")
    if k_info + crc_len > n_code:
        raise PolarConfigError(f"k_info + crc_len = {k_info + crc_len} exceeds N = {n_code}")
    order = reliability_order(n_code, construction, design_snr_db)
    n_frozen = n_code - k_info - crc_len
    frozen = tuple(sorted(int(i) for i in order[:n_frozen]))
    return PolarConfig(
        n_code, k_info, crc_len, list_size, frozen, construction, float(design_snr_db)
    )


def crc_remainder(bits, crc_len=6):
    """CRC remainder of each row of a (batch, K) bit matrix"""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    if crc_len == 0:
        return np.zeros((bits.shape[0], 0), dtype=np.int8)
    if crc_len not in CRC_TAPS:
        raise PolarConfigError(f"No CRC polynomial for length {crc_len}")
    taps = np.array(CRC_TAPS[crc_len], dtype=np.int8)
    register = np.zeros((bits.shape[0], crc_len), dtype=np.int8)
    for column in range(bits.shape[1]):
        feedback = register[:, 0] ^ bits[:, column]
        register[:, :-1] = register[:, 1:]
        register[:, -1] = 0
        register ^= feedback[:, None] * taps
    return register


def crc_attach(bits, crc_len=6):
    """Append the CRC remainder to each message row"""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    return np.concatenate([bits, crc_remainder(bits, crc_len)], axis=1)


def crc_check(bits, crc_len=6):
    """True for each row whose trailing crc_len bits match its CRC"""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    if crc_len == 0:
        return np.ones(bits.shape[0], dtype=bool)
    expected = crc_remainder(bits[:, :-crc_len], crc_len)
    return np.all(expected == bits[:, -crc_len:], axis=1)


def polar_encode(u):
    """
    x = u G_N over GF(2), G_N the Kronecker power of [[1, 0], [1, 1]]

    Works on (N,) or (batch, N) arrays with an in-place XOR butterfly.
    """
    x = np.array(u, dtype=np.int8)
    n_code = x.shape[-1]
    if not is_power_of_two(n_code) or n_code < 2:
        raise PolarConfigError(f"Code length must be a power of two >= 2, got {n_code}")
    lead = x.shape[:-1]
    x = x.reshape(-1, n_code)
    rows = x.shape[0]
    h = 1
    while h < n_code:
        view = x.reshape(rows, n_code // (2 * h), 2, h)
        view[:, :, 0, :] ^= view[:, :, 1, :]
        h *= 2
    return x.reshape(*lead, n_code)


def generator_matrix(n_code):
    """Dense G_N (slow reference)"""
    kernel = np.array([[1, 0], [1, 1]], dtype=np.int8)
    g = kernel
    while g.shape[0] < n_code:
        g = np.kron(g, kernel)
    return g


def bpsk_modulate(codeword):
    """Bit 0 -> +1, bit 1 -> -1"""
    return 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)


def bpsk_llr(y, sigma):
    """Channel LLRs 2y / sigma^2 (positive favours bit 0)"""
    y = np.asarray(y, dtype=np.float64)
    if np.isinf(sigma):
        return np.zeros_like(y)
    return 2.0 * y / (sigma * sigma)


def _f(a, b):
    return (1 - 2 * (a < 0)) * (1 - 2 * (b < 0)) * np.minimum(np.abs(a), np.abs(b))


def _g(a, b, c):
    return b + (1 - 2 * c) * a


def _sc_node(llr, frozen):
    n_code = llr.shape[1]
    if n_code == 1:
        u = ((llr[:, 0] < 0) & ~frozen[0]).astype(np.int8)[:, None]
        return u, u
    half = n_code // 2
    a = llr[:, :half]
    b = llr[:, half:]
    u_left, x_left = _sc_node(_f(a, b), frozen[:half])
    u_right, x_right = _sc_node(_g(a, b, x_left), frozen[half:])
    return np.concatenate([u_left, u_right], axis=1), np.concatenate(
        [x_left ^ x_right, x_right], axis=1
    )


def sc_decode(llrs, cfg):
    """
    Classic successive-cancellation decoding (no list, no CRC selection)

    Returns:
        numpy.ndarray: (batch, k_info) message estimates
    """
    llrs = _check_llrs(llrs, cfg)
    u, _ = _sc_node(llrs, cfg.frozen_mask)
    return u[:, cfg.info_positions[: cfg.k_info]]


def _check_llrs(llrs, cfg):
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    if llrs.shape[-1] != cfg.n_code:
        raise PolarConfigError(f"Expected {cfg.n_code} LLRs per block, got {llrs.shape[-1]}")
    if not np.all(np.isfinite(llrs)):
        raise ValueError("LLRs must be finite")
    return llrs


class _ListState:
    """Per-batch SCL tree memory: LLRs and partial sums for every path"""

    def __init__(self, llrs, cfg):
        batch = llrs.shape[0]
        paths = cfg.list_size
        depth = cfg.order
        self.cfg = cfg
        self.frozen = cfg.frozen_mask
        self.depth = depth
        self.llr = np.zeros((batch, paths, depth + 1, cfg.n_code))
        self.llr[:, :, 0, :] = llrs[:, None, :]
        self.ucap = np.zeros((batch, paths, depth + 1, cfg.n_code), dtype=np.int8)
        self.metric = np.full((batch, paths), np.inf)
        self.metric[:, 0] = 0.0

    def leaf(self, index):
        dm = self.llr[:, :, self.depth, index]
        if self.frozen[index]:
            self.ucap[:, :, self.depth, index] = 0
            self.metric = self.metric + np.abs(dm) * (dm < 0)
            return
        paths = self.cfg.list_size
        decision = (dm < 0).astype(np.int8)
        candidates = np.concatenate([self.metric, self.metric + np.abs(dm)], axis=1)
        chosen = np.argsort(candidates, axis=1, kind="stable")[:, :paths]
        source = chosen % paths
        flipped = (chosen >= paths).astype(np.int8)
        self.metric = np.take_along_axis(candidates, chosen, axis=1)
        self.llr = np.take_along_axis(self.llr, source[:, :, None, None], axis=1)
        self.ucap = np.take_along_axis(self.ucap, source[:, :, None, None], axis=1)
        self.ucap[:, :, self.depth, index] = (
            np.take_along_axis(decision, source, axis=1) ^ flipped
        )

    def node(self, depth, index):
        if depth == self.depth:
            self.leaf(index)
            return
        size = 1 << (self.depth - depth)
        half = size // 2
        start = index * size
        left = 2 * index
        right = left + 1

        a = self.llr[:, :, depth, start : start + half]
        b = self.llr[:, :, depth, start + half : start + size]
        self.llr[:, :, depth + 1, left * half : (left + 1) * half] = _f(a, b)
        self.node(depth + 1, left)

        # paths were reordered inside the left subtree
        a = self.llr[:, :, depth, start : start + half]
        b = self.llr[:, :, depth, start + half : start + size]
        u_left = self.ucap[:, :, depth + 1, left * half : (left + 1) * half]
        self.llr[:, :, depth + 1, right * half : (right + 1) * half] = _g(a, b, u_left)
        self.node(depth + 1, right)

        u_left = self.ucap[:, :, depth + 1, left * half : (left + 1) * half]
        u_right = self.ucap[:, :, depth + 1, right * half : (right + 1) * half]
        self.ucap[:, :, depth, start : start + half] = u_left ^ u_right
        self.ucap[:, :, depth, start + half : start + size] = u_right


def scl_decode_paths(llrs, cfg):
    """
    Run the list decoder and return every surviving path

    Returns:
        tuple: (u estimates (batch, L, N), path metrics (batch, L))
    """
    state = _ListState(_check_llrs(llrs, cfg), cfg)
    state.node(0, 0)
    return state.ucap[:, :, state.depth, :], state.metric


def scl_decode(llrs, cfg):
    """
    CRC-aided successive-cancellation list decoding

    Keeps up to L paths ranked by the LLR-magnitude path metric (ties go to
    the lower path index). The answer is the lowest-metric path whose CRC
    checks, else the lowest-metric path with crc_ok False.

    Args:
        llrs: (N,) or (batch, N) channel LLRs
        cfg: PolarConfig

    Returns:
        tuple: (message bits (batch, k_info), crc_ok (batch,))
    """
    u, metric = scl_decode_paths(llrs, cfg)
    batch, paths, _ = u.shape
    words = u[:, :, cfg.info_positions].reshape(batch * paths, -1)
    passed = crc_check(words, cfg.crc_len).reshape(batch, paths)
    alive = np.isfinite(metric)

    ranked = np.where(passed & alive, metric, np.inf)
    best_passing = np.argmin(ranked, axis=1)
    any_passing = np.isfinite(ranked[np.arange(batch), best_passing])
    pick = np.where(any_passing, best_passing, np.argmin(metric, axis=1))

    chosen = u[np.arange(batch), pick][:, cfg.info_positions[: cfg.k_info]]
    return chosen.astype(np.int8), any_passing


def encode_messages(bits, cfg):
    """Message rows -> Polar codewords (CRC attached, frozen positions zero)"""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int8))
    if bits.shape[1] != cfg.k_info:
        raise PolarConfigError(f"Expected {cfg.k_info} message bits, got {bits.shape[1]}")
    u = np.zeros((bits.shape[0], cfg.n_code), dtype=np.int8)
    u[:, cfg.info_positions] = crc_attach(bits, cfg.crc_len)
    return polar_encode(u)


class PolarSystem:
    """bits -> bits over BPSK/AWGN with CRC-aided SCL decoding"""

    def __init__(self, cfg, chunk=DECODE_CHUNK):
        self.cfg = cfg
        self.chunk = chunk
        self.name = f"polar-L{cfg.list_size}"

    @property
    def k(self):
        return self.cfg.k_info

    @property
    def n(self):
        return self.cfg.n_code

    def transmit(self, bits, snr_db, rng):
        sigma = snr_db_to_sigma(snr_db)
        bits = np.atleast_2d(np.asarray(bits))
        decoded = np.empty(bits.shape, dtype=np.int8)
        for start in range(0, bits.shape[0], self.chunk):
            block = bits[start : start + self.chunk]
            y = awgn(bpsk_modulate(encode_messages(block, self.cfg)), sigma, rng)
            decoded[start : start + self.chunk], _ = scl_decode(bpsk_llr(y, sigma), self.cfg)
        return decoded
