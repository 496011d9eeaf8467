"""
Walsh-Hadamard domain channel autoencoder

encoder -> IFWHT (walsh domain only) -> power normalization -> AWGN ->
FWHT (walsh domain only) -> decoder, trained with alternating encoder and
decoder phases.
"""

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import List

import numpy as np

from comms import neural
from comms.channel import awgn, shannon_snr_db, snr_db_to_sigma
from comms.neural import (
    ACTIVATION,
    BATCH_NORM,
    DROPOUT,
    FULLY_CONNECTED,
    INFERENCE,
    LEAKY_RELU,
    OUTPUT_HEAD,
    POWER_NORM,
    RELU,
    TRAINING,
    AdamHyper,
    DegeneratePowerError,
    Layer,
    LayerSpec,
    NonFiniteError,
    Sequential,
    TrainingAborted,
)
from comms.wht import ORTHONORMAL, SCALINGS, SEQUENCY, WalshSpec, check_order, fwht
from comms.wht import fwht_transpose, ifwht, ifwht_transpose
from utils.progress import ProgressTracker
from utils.random_streams import INIT, TRAIN, VALIDATION, make_rng, random_bits

WALSH = "walsh"
TIME = "time"
DOMAINS = (WALSH, TIME)

FWHT_LAYER = "fwht"
IFWHT_LAYER = "ifwht"

LOG_COLUMNS = ["epoch", "enc_loss", "dec_loss", "val_loss", "val_acc", "lr"]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters of one autoencoder"""

    n: int = 32
    k: int = 16
    q: int = 500
    v: int = 4
    activation: str = LEAKY_RELU
    leaky_slope: float = 0.01
    batch_norm: bool = True
    dropout: float = 0.0
    l2: float = 1e-5
    domain: str = WALSH
    scaling: str = ORTHONORMAL

    def __post_init__(self):
        for name in ("n", "k", "q", "v"):
            if getattr(self, name) < 1:
                raise ValueError(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if self.activation not in (RELU, LEAKY_RELU):
            raise ValueError(f"Unknown activation: {self.activation}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {self.dropout}")
        if self.l2 < 0:
            raise ValueError(f"L2 weight must be >= 0, got {self.l2}")
        if self.domain not in DOMAINS:
            raise ValueError(f"Unknown domain: {self.domain}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"Unknown scaling: {self.scaling}")
        if self.domain == WALSH:
            check_order(self.n)

    @property
    def rate(self):
        return self.k / self.n

    @property
    def walsh_spec(self):
        return WalshSpec(self.n, SEQUENCY, self.scaling)

    def header(self):
        """Ordered string fields for checkpoint headers and config echoes"""
        return {f.name: _format_value(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_header(cls, header):
        values = {}
        for f in fields(cls):
            if f.name in header:
                values[f.name] = _parse_value(header[f.name], f.default)
        return cls(**values)


@dataclass(frozen=True)
class TrainConfig:
    """Alternating-training schedule"""

    s_db: float = 3.0
    delta_db: float = 2.0
    batch: int = 50000
    t_enc: int = 100
    t_dec: int = 300
    epochs: int = 500
    lr: float = 1e-3
    patience: int = 20
    lr_floor: float = 1e-10
    validation_size: int = 50000
    seed: int = 0

    def __post_init__(self):
        for name in ("batch", "t_enc", "t_dec", "epochs", "patience", "validation_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"train.{name} must be >= 1, got {getattr(self, name)}")
        if self.delta_db < 0:
            raise ValueError(f"train.delta_db must be >= 0, got {self.delta_db}")
        if self.lr <= 0:
            raise ValueError(f"train.lr must be positive, got {self.lr}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text, default):
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


class WalshTransform(Layer):
    """Parameter-free (inverse) fast Walsh-Hadamard transform layer"""

    def __init__(self, kind, spec):
        super().__init__(LayerSpec(kind, spec.order, spec.order))
        self.walsh = spec

    def attrs(self):
        return {"ordering": self.walsh.ordering, "scaling": self.walsh.scaling}

    def forward(self, x, mode, rng=None, update_state=False):
        if self.kind == FWHT_LAYER:
            return fwht(x, self.walsh), None
        return ifwht(x, self.walsh), None

    def backward(self, dy, cache):
        if self.kind == FWHT_LAYER:
            return fwht_transpose(dy, self.walsh), {}
        return ifwht_transpose(dy, self.walsh), {}


def _activation_gain(cfg):
    slope = cfg.leaky_slope if cfg.activation == LEAKY_RELU else 0.0
    return 2.0 / (1.0 + slope * slope)


def _intermediate_blocks(cfg, in_dim, rng):
    layers: List[Layer] = []
    for _ in range(cfg.v):
        layers.append(
            neural.make_layer(
                LayerSpec(FULLY_CONNECTED, in_dim, cfg.q), rng=rng, gain=_activation_gain(cfg)
            )
        )
        if cfg.batch_norm:
            layers.append(neural.make_layer(LayerSpec(BATCH_NORM, cfg.q, cfg.q)))
        layers.append(
            neural.make_layer(
                LayerSpec(
                    ACTIVATION, cfg.q, cfg.q, activation=cfg.activation, slope=cfg.leaky_slope
                )
            )
        )
        if cfg.dropout > 0:
            layers.append(neural.make_layer(LayerSpec(DROPOUT, cfg.q, cfg.q, rate=cfg.dropout)))
        in_dim = cfg.q
    return layers


class Autoencoder:
    """Encoder and decoder networks of one configured autoencoder"""

    def __init__(self, cfg, encoder, decoder):
        self.cfg = cfg
        self.encoder = encoder
        self.decoder = decoder

    @property
    def nets(self):
        return [self.encoder, self.decoder]

    @property
    def num_params(self):
        return self.encoder.num_params + self.decoder.num_params

    @property
    def power_norm(self):
        return self.encoder.layers[-1]


def build_model(cfg, seed=0):
    """
    Build encoder and decoder with seed-deterministic fan-in initialization

    Activated layers use a He-style uniform limit sqrt(6 / ((1 + a^2) fan_in)),
    the linear encoder output and the decoder head sqrt(3 / fan_in).
    Transform layers carry no parameters and draw no randomness, so both
    domains get identical tensors for the same seed.
    """
    rng = make_rng(seed, INIT)

    enc_layers = _intermediate_blocks(cfg, cfg.k, rng)
    enc_layers.append(neural.make_layer(LayerSpec(FULLY_CONNECTED, cfg.q, cfg.n), rng=rng))
    if cfg.domain == WALSH:
        enc_layers.append(WalshTransform(IFWHT_LAYER, cfg.walsh_spec))
    enc_layers.append(neural.make_layer(LayerSpec(POWER_NORM, cfg.n, cfg.n)))

    dec_layers: List[Layer] = []
    if cfg.domain == WALSH:
        dec_layers.append(WalshTransform(FWHT_LAYER, cfg.walsh_spec))
    dec_layers.extend(_intermediate_blocks(cfg, cfg.n, rng))
    dec_layers.append(neural.make_layer(LayerSpec(OUTPUT_HEAD, cfg.q, cfg.k), rng=rng))

    return Autoencoder(
        cfg,
        Sequential(enc_layers, name="encoder"),
        Sequential(dec_layers, name="decoder"),
    )


def training_snr_db(rate, s_db):
    """Training SNR: Shannon-limit SNR for the rate plus the offset S"""
    return shannon_snr_db(rate) + s_db


def end_to_end_pass(model, bits, sigma, mode, rng, update_state=False):
    """
    Transmit a batch of messages through the whole chain

    Args:
        model: Autoencoder
        bits: (batch, k) array of {0, 1}
        sigma: Channel noise standard deviation
        mode: TRAINING or INFERENCE
        rng: Generator for noise (and dropout in training mode)
        update_state: Whether training-mode statistics update stored state

    Returns:
        numpy.ndarray: (batch, k) bit probabilities
    """
    enc = neural.forward(model.encoder, bits, mode, rng=rng, update_state=update_state)
    y = awgn(enc.output, sigma, rng)
    dec = neural.forward(model.decoder, y, mode, rng=rng, update_state=update_state)
    return dec.output


def loss_and_gradients(model, bits, noise, sigma, owner=None, rng=None):
    """
    Training-mode loss and exact gradients for a fixed noise realization

    Args:
        model: Autoencoder
        bits: (batch, k) messages
        noise: (batch, n) standard-normal draws, scaled by sigma
        sigma: Noise standard deviation
        owner: "encoder", "decoder" or None; only the owner's running
            statistics are updated
        rng: Generator for dropout masks

    Returns:
        tuple: (bce loss + L2 penalty, encoder grads, decoder grads, codewords)
    """
    cfg = model.cfg
    try:
        enc = neural.forward(
            model.encoder, bits, TRAINING, rng=rng, update_state=owner == "encoder"
        )
        y = enc.output + sigma * noise
        dec = neural.forward(
            model.decoder, y, TRAINING, rng=rng, update_state=owner == "decoder"
        )
    except (NonFiniteError, DegeneratePowerError) as e:
        raise TrainingAborted(str(e)) from e
    loss = neural.bce_loss(dec.output, bits) + neural.l2_penalty(model.nets, cfg.l2)
    if not math.isfinite(loss):
        raise TrainingAborted(f"Non-finite loss {loss}")
    dec_grads, dy = neural.backward(model.decoder, dec, bits, l2=cfg.l2)
    enc_grads, _ = neural.backward_from(model.encoder, enc, dy, l2=cfg.l2)
    return loss, enc_grads, dec_grads, enc.output


@dataclass
class EpochRecord:
    epoch: int
    enc_loss: float
    dec_loss: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainLog:
    records: List[EpochRecord] = field(default_factory=list)
    stop_reason: str = ""

    def append(self, record):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def to_csv(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for record in self.records:
            row = asdict(record)
            writer.writerow(
                [row["epoch"]] + [f"{row[name]:.12g}" for name in LOG_COLUMNS[1:]]
            )
        return buffer.getvalue()

    @classmethod
    def from_csv(cls, text):
        reader = csv.DictReader(io.StringIO(text))
        log = cls()
        for row in reader:
            log.append(
                EpochRecord(
                    epoch=int(row["epoch"]),
                    **{name: float(row[name]) for name in LOG_COLUMNS[1:]},
                )
            )
        return log


class LearningRateSchedule:
    """Halve the rate after `patience` epochs without validation improvement"""

    def __init__(self, initial=1e-3, patience=20, floor=1e-10):
        self.lr = initial
        self.patience = patience
        self.floor = floor
        self.best = math.inf
        self.wait = 0

    def update(self, val_loss):
        if val_loss < self.best:
            self.best = val_loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr /= 2.0
                self.wait = 0
        return self.lr

    @property
    def exhausted(self):
        return self.lr < self.floor


def validation_set(cfg, tcfg):
    """Fixed validation messages and unit noise derived from the seed"""
    rng = make_rng(tcfg.seed, VALIDATION)
    bits = random_bits(rng, tcfg.validation_size, cfg.k)
    noise = rng.standard_normal((tcfg.validation_size, cfg.n))
    return bits, noise


def validate(model, cfg, tcfg, data=None):
    """
    Inference-mode loss and bit accuracy at the training SNR

    Returns:
        tuple: (loss, bit accuracy)
    """
    bits, noise = data if data is not None else validation_set(cfg, tcfg)
    sigma = snr_db_to_sigma(training_snr_db(cfg.rate, tcfg.s_db))
    enc = neural.forward(model.encoder, bits, INFERENCE)
    dec = neural.forward(model.decoder, enc.output + sigma * noise, INFERENCE)
    return neural.score_predictions(dec.output, bits)


def decoder_snr_db(rng, gamma_train_db, delta_db, size=None):
    """Decoder-phase SNR draw, uniform on gamma_train +/- delta dB"""
    return rng.uniform(gamma_train_db - delta_db, gamma_train_db + delta_db, size=size)


def all_messages(k):
    """Every k-bit message, one per row, in counting order"""
    indices = np.arange(2**k)[:, None]
    return ((indices >> np.arange(k)) & 1).astype(np.float64)


def power_reference_messages(cfg, tcfg, data):
    """All 2^k messages when they fit in the validation budget, else the validation messages"""
    if 2**cfg.k <= tcfg.validation_size:
        return all_messages(cfg.k)
    return data[0]


def refresh_power_factor(model, bits):
    """
    Re-estimate the stored power-norm factor from the current encoder weights

    The encoder runs in inference mode, so batch norm uses its running
    statistics exactly as transmission does.
    """
    layer = model.power_norm
    try:
        codewords = neural.forward(model.encoder, bits, INFERENCE).output
    except NonFiniteError as e:
        raise TrainingAborted(str(e)) from e
    power = float(np.mean(codewords * codewords))
    if not math.isfinite(power) or power == 0.0:
        raise TrainingAborted(f"Cannot refresh power normalization (power {power})")
    layer.state["factor"] = np.array([layer.factor * math.sqrt(power)])


def _encoder_step(model, hyper, bits, noise, sigma, rng):
    loss, enc_grads, _, _ = loss_and_gradients(
        model, bits, noise, sigma, owner="encoder", rng=rng
    )
    neural.adam_step(model.encoder, enc_grads, hyper)
    return loss


def _decoder_step(model, hyper, bits, noise, sigma, rng):
    loss, _, dec_grads, _ = loss_and_gradients(
        model, bits, noise, sigma, owner="decoder", rng=rng
    )
    neural.adam_step(model.decoder, dec_grads, hyper)
    return loss


def train(cfg, tcfg, verbose=False, model=None):
    """
    Alternating training

    Each epoch runs T_enc encoder steps at the fixed training SNR (gradients
    pass through the frozen decoder), then T_dec decoder steps with the SNR of
    every batch drawn uniformly from gamma_train +/- delta dB, then validates.
    The stored power-norm factor is re-estimated after each encoder phase so
    inference codewords keep unit power under the updated weights.

    Args:
        cfg: ModelConfig
        tcfg: TrainConfig
        verbose: Print a progress bar with per-epoch losses
        model: Optional pre-built Autoencoder to continue from

    Returns:
        tuple: (Autoencoder, TrainLog)
    """
    model = model if model is not None else build_model(cfg, tcfg.seed)
    rng = make_rng(tcfg.seed, TRAIN)
    gamma_train_db = training_snr_db(cfg.rate, tcfg.s_db)
    sigma_train = snr_db_to_sigma(gamma_train_db)
    data = validation_set(cfg, tcfg)
    messages = power_reference_messages(cfg, tcfg, data)
    schedule = LearningRateSchedule(tcfg.lr, tcfg.patience, tcfg.lr_floor)
    log = TrainLog()

    tracker = ProgressTracker(tcfg.epochs, "Training", enabled=verbose)
    tracker.start()
    for epoch in range(1, tcfg.epochs + 1):
        hyper = AdamHyper(lr=schedule.lr)
        lr_used = schedule.lr

        enc_losses = []
        for _ in range(tcfg.t_enc):
            bits = random_bits(rng, tcfg.batch, cfg.k)
            noise = rng.standard_normal((tcfg.batch, cfg.n))
            enc_losses.append(_encoder_step(model, hyper, bits, noise, sigma_train, rng))
        refresh_power_factor(model, messages)

        dec_losses = []
        for _ in range(tcfg.t_dec):
            bits = random_bits(rng, tcfg.batch, cfg.k)
            snr_db = decoder_snr_db(rng, gamma_train_db, tcfg.delta_db)
            noise = rng.standard_normal((tcfg.batch, cfg.n))
            dec_losses.append(
                _decoder_step(model, hyper, bits, noise, snr_db_to_sigma(snr_db), rng)
            )

        val_loss, val_acc = validate(model, cfg, tcfg, data)
        if not math.isfinite(val_loss):
            raise TrainingAborted(f"Non-finite validation loss at epoch {epoch}")
        log.append(
            EpochRecord(
                epoch=epoch,
                enc_loss=float(np.mean(enc_losses)),
                dec_loss=float(np.mean(dec_losses)),
                val_loss=val_loss,
                val_acc=val_acc,
                lr=lr_used,
            )
        )
        tracker.update(
            epoch,
            status=f"enc={log.records[-1].enc_loss:.4g} dec={log.records[-1].dec_loss:.4g} "
            f"val={val_loss:.4g} acc={val_acc:.4f} lr={lr_used:.2g}",
        )

        schedule.update(val_loss)
        if schedule.exhausted:
            log.stop_reason = "learning rate below floor"
            break
    else:
        log.stop_reason = "epoch budget exhausted"
    tracker.finish()
    return model, log


class AutoencoderSystem:
    """bits -> bits transmission through a trained autoencoder at a given SNR"""

    def __init__(self, model, name="autoencoder"):
        self.model = model
        self.name = name

    @property
    def k(self):
        return self.model.cfg.k

    @property
    def n(self):
        return self.model.cfg.n

    def transmit(self, bits, snr_db, rng):
        probs = end_to_end_pass(self.model, bits, snr_db_to_sigma(snr_db), INFERENCE, rng)
        return (probs > 0.5).astype(np.int8)


def save_model(path, model):
    """Write a model checkpoint"""
    return neural.save_checkpoint(path, model.cfg.header(), model.nets)


def load_model(path):
    """Rebuild a model from a checkpoint file"""
    header, records = neural.load_checkpoint(path)
    cfg = ModelConfig.from_header(header)
    model = build_model(cfg)
    neural.apply_records(model.nets, records)
    return model
