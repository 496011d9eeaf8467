"""
Complexity counting, baseband and converter power, and system energy efficiency

Operations and stored parameters follow the per-layer table: activation,
dropout and transform layers cost nothing (the transforms are done by the
Walsh-domain converters), sigmoid heads count only their FC operations.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from comms.neural import (
    ACTIVATION,
    BATCH_NORM,
    DROPOUT,
    FULLY_CONNECTED,
    OUTPUT_HEAD,
    POWER_NORM,
)
from utils.file_utils import atomic_write_text

WALSH_CONVERTERS = "walsh"
TI_CONVERTERS = "ti"

# (dac_w, adc_w) per converter architecture
CONVERTER_POWER = {
    WALSH_CONVERTERS: (0.044, 0.046),
    TI_CONVERTERS: (0.145, 0.1586),
}

POLAR_REFERENCE_N = 256

# Per-block SCL decoding energy (J) at the reference block length; placeholder
# figures, replace through config for real comparisons
PLACEHOLDER_POLAR_ENERGY = {2: 12e-9, 4: 20e-9, 8: 36e-9}
PLACEHOLDER_PROVENANCE = "placeholder (non-normative)"

ZERO_COST_KINDS = (ACTIVATION, DROPOUT, "fwht", "ifwht")


class MissingEnergyEntryError(KeyError):
    """No per-block decoding energy configured for a list size"""


@dataclass(frozen=True)
class ConvSpec:
    """1-D convolution descriptor: input/output length, channels, filter size, stride"""

    i: int
    o: int
    c: int
    f: int
    s: int = 1


@dataclass
class ComplexityReport:
    layers: List[Tuple[str, int, int]] = field(default_factory=list)

    def add(self, name, ops, params):
        self.layers.append((name, ops, params))
        return self

    @property
    def ops(self):
        return sum(entry[1] for entry in self.layers)

    @property
    def params(self):
        return sum(entry[2] for entry in self.layers)


@dataclass(frozen=True)
class PowerConfig:
    eta: float = 8e14
    fs: float = 5e9
    n: int = 32
    converters: Dict[str, Tuple[float, float]] = field(
        default_factory=lambda: dict(CONVERTER_POWER)
    )
    polar_energy: Dict[int, float] = field(
        default_factory=lambda: dict(PLACEHOLDER_POLAR_ENERGY)
    )
    polar_reference_n: int = POLAR_REFERENCE_N
    polar_provenance: str = PLACEHOLDER_PROVENANCE

    def __post_init__(self):
        if self.eta <= 0 or self.fs <= 0 or self.n < 1:
            raise ValueError("eta, fs and n must be positive")

    @property
    def f_bb(self):
        """Baseband inference rate f_s / n"""
        return self.fs / self.n


@dataclass(frozen=True)
class PowerReport:
    p_bb: float
    p_adc: float
    p_dac: float
    throughput: float
    e_bb: float
    converters: str
    energy_scaling: float = 1.0
    provenance: str = ""

    @property
    def p_sys(self):
        return self.p_bb + self.p_adc + self.p_dac

    @property
    def ee(self):
        return self.throughput / self.p_sys


def layer_complexity(layer):
    """
    Operations and stored parameters of one layer

    Args:
        layer: LayerSpec or ConvSpec

    Returns:
        tuple: (ops, params)
    """
    if isinstance(layer, ConvSpec):
        if min(layer.i, layer.o, layer.c, layer.f, layer.s) < 1:
            raise ValueError(f"Convolution dimensions must be positive: {layer}")
        ops = (2 * layer.c * layer.f + 1) * layer.i * layer.o / layer.s - 1
        return (int(ops) if float(ops).is_integer() else ops), (layer.c * layer.f + 1) * layer.o

    i, o = layer.in_dim, layer.out_dim
    if i < 1 or o < 1:
        raise ValueError(f"Layer dimensions must be positive: {layer}")
    if layer.kind in (FULLY_CONNECTED, OUTPUT_HEAD):
        return 2 * i * o, (i + 1) * o
    if layer.kind == BATCH_NORM:
        return 4 * i, 4 * i
    if layer.kind == POWER_NORM:
        return i, i
    if layer.kind in ZERO_COST_KINDS:
        return 0, 0
    raise ValueError(f"Unknown layer kind: {layer.kind}")


def model_complexity(cfg):
    """
    Closed-form complexity of an autoencoder configuration

    Encoder: 2kQ + (V-1)2Q^2 + 2Qn + n ops; decoder: 2nQ + (V-1)2Q^2 + 2Qk ops;
    plus 4Q per batch-norm layer on either side.
    """
    q, v, n, k = cfg.q, cfg.v, cfg.n, cfg.k
    report = ComplexityReport()
    report.add("encoder input", 2 * k * q, (k + 1) * q)
    report.add("encoder hidden", (v - 1) * 2 * q * q, (v - 1) * (q + 1) * q)
    report.add("encoder output", 2 * q * n, (q + 1) * n)
    report.add("normalization", n, n)
    report.add("decoder input", 2 * n * q, (n + 1) * q)
    report.add("decoder hidden", (v - 1) * 2 * q * q, (v - 1) * (q + 1) * q)
    report.add("decoder head", 2 * q * k, (q + 1) * k)
    if cfg.batch_norm:
        report.add("batch norm", 2 * v * 4 * q, 2 * v * 4 * q)
    return report


def layer_walk_complexity(model):
    """Recount complexity by walking the built encoder and decoder layers"""
    report = ComplexityReport()
    for net in model.nets:
        for index, layer in enumerate(net.layers):
            ops, params = layer_complexity(layer.spec)
            report.add(f"{net.name}[{index}] {layer.kind}", ops, params)
    return report


def baseband_power(c_ai, pcfg):
    """
    Returns:
        tuple: (energy per inference in J, baseband power in W)
    """
    if c_ai < 0:
        raise ValueError(f"Operation count must be >= 0, got {c_ai}")
    e_bb = c_ai / pcfg.eta
    return e_bb, e_bb * pcfg.f_bb


def energy_efficiency(k, pcfg, p_sys):
    """Delivered bits per joule, k f_BB / P_sys"""
    if p_sys <= 0:
        raise ValueError(f"System power must be positive, got {p_sys}")
    return k * pcfg.f_bb / p_sys


def baseband_efficiency(k, c_ai, pcfg):
    """Bits per joule of baseband compute alone (converters excluded)"""
    return k * pcfg.eta / c_ai


def system_power(p_bb, converter_kind, pcfg, k, e_bb=0.0, energy_scaling=1.0, provenance=""):
    """
    Baseband plus converter power for k bits per inference

    Returns:
        PowerReport
    """
    if converter_kind not in pcfg.converters:
        raise ValueError(f"Unknown converter kind: {converter_kind}")
    dac_w, adc_w = pcfg.converters[converter_kind]
    return PowerReport(
        p_bb=p_bb,
        p_adc=adc_w,
        p_dac=dac_w,
        throughput=k * pcfg.f_bb,
        e_bb=e_bb,
        converters=converter_kind,
        energy_scaling=energy_scaling,
        provenance=provenance,
    )


def autoencoder_power(cfg, pcfg, converter_kind=None):
    """System power of an autoencoder configuration (walsh converters for the walsh domain)"""
    if converter_kind is None:
        converter_kind = WALSH_CONVERTERS if cfg.domain == "walsh" else TI_CONVERTERS
    e_bb, p_bb = baseband_power(model_complexity(cfg).ops, pcfg)
    return system_power(p_bb, converter_kind, pcfg, cfg.k, e_bb=e_bb)


def polar_power(pcfg, list_size, k=16):
    """
    Polar/SCL baseline with time-interleaved converters

    Configured per-block energies at the reference block length are scaled
    linearly to n.
    """
    if list_size not in pcfg.polar_energy:
        raise MissingEnergyEntryError(f"No decoding energy configured for L={list_size}")
    scaling = pcfg.n / pcfg.polar_reference_n
    e_bb = pcfg.polar_energy[list_size] * scaling
    return system_power(
        e_bb * pcfg.f_bb,
        TI_CONVERTERS,
        pcfg,
        k,
        e_bb=e_bb,
        energy_scaling=scaling,
        provenance=pcfg.polar_provenance,
    )


def power_csv(report):
    """Render a PowerReport as component,watts rows plus summary keys"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["component", "watts"])
    writer.writerow(["baseband", f"{report.p_bb:.12g}"])
    writer.writerow(["adc", f"{report.p_adc:.12g}"])
    writer.writerow(["dac", f"{report.p_dac:.12g}"])
    writer.writerow(["system", f"{report.p_sys:.12g}"])
    writer.writerow(["throughput_bps", f"{report.throughput:.12g}"])
    writer.writerow(["ee_bit_per_joule", f"{report.ee:.12g}"])
    writer.writerow(["e_bb_joule", f"{report.e_bb:.12g}"])
    writer.writerow(["energy_scaling", f"{report.energy_scaling:.12g}"])
    return buffer.getvalue()


def write_power_csv(path, report):
    """Write power_csv(report) to path atomically"""
    atomic_write_text(path, power_csv(report))
