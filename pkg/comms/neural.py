"""
Minimal feed-forward neural-network engine

Fully-connected layers, batch normalization, (leaky) ReLU, dropout, the
transmit power-normalization layer and a sigmoid output head, with exact
reverse-mode gradients, per-bit binary cross-entropy, Adam with L2
regularization and a versioned text checkpoint format.

All arrays are float64 and batches are shaped (batch_size, features).
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.special import expit

TRAINING = "training"
INFERENCE = "inference"

FULLY_CONNECTED = "fully_connected"
BATCH_NORM = "batch_norm"
ACTIVATION = "activation"
DROPOUT = "dropout"
POWER_NORM = "power_norm"
OUTPUT_HEAD = "output_head"

RELU = "relu"
LEAKY_RELU = "leaky_relu"

PROB_CLAMP = 1e-12
BN_EPSILON = 1e-8
BN_MOMENTUM = 0.99

CHECKPOINT_MAGIC = "WHAE-CHECKPOINT"
CHECKPOINT_VERSION = 1


class DimensionError(ValueError):
    """Input or parameter shapes do not line up"""


class NonFiniteError(ValueError):
    """NaN or infinity where finite values are required"""


class DegeneratePowerError(ValueError):
    """Power normalization of an all-zero batch"""


class TrainingAborted(RuntimeError):
    """Non-finite loss or gradient; training cannot continue"""


class CheckpointError(ValueError):
    """Malformed or mismatching checkpoint text"""


@dataclass(frozen=True)
class LayerSpec:
    """Kind and dimensions of one layer"""

    kind: str
    in_dim: int
    out_dim: int
    activation: Optional[str] = None
    slope: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise DimensionError(
                f"{self.kind} dimensions must be positive, got {self.in_dim}x{self.out_dim}"
            )
        if self.kind not in (FULLY_CONNECTED, OUTPUT_HEAD) and self.in_dim != self.out_dim:
            raise DimensionError(f"{self.kind} layer must have in_dim == out_dim")
        if self.kind == DROPOUT and not 0.0 <= self.rate < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {self.rate}")
        if self.kind == ACTIVATION and self.activation not in (RELU, LEAKY_RELU):
            raise ValueError(f"Unknown activation: {self.activation}")


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def sigmoid(z):
    return expit(z)


class Layer:
    """
    One layer of a Sequential network

    Trainable arrays live in `params`, non-trainable statistics in `state`
    and Adam moments (m, v, step) per parameter name in `adam`.
    """

    def __init__(self, spec):
        self.spec = spec
        self.params: Dict[str, np.ndarray] = {}
        self.state: Dict[str, np.ndarray] = {}
        self.adam: Dict[str, list] = {}

    @property
    def kind(self):
        return self.spec.kind

    @property
    def param_count(self):
        """Stored values, counted the way the memory/complexity table books them"""
        return 0

    def attrs(self):
        """Extra key=value fields written to checkpoint layer records"""
        return {}

    def forward(self, x, mode, rng=None, update_state=False):
        raise NotImplementedError

    def backward(self, dy, cache):
        raise NotImplementedError


class Dense(Layer):
    """Fully-connected layer y = x W + b"""

    def __init__(self, spec, rng=None, gain=1.0):
        super().__init__(spec)
        fan_in = spec.in_dim
        limit = np.sqrt(3.0 * gain / fan_in)
        if rng is None:
            w = np.zeros((spec.in_dim, spec.out_dim))
        else:
            w = rng.uniform(-limit, limit, size=(spec.in_dim, spec.out_dim))
        self.params = {"W": w, "b": np.zeros(spec.out_dim)}

    @property
    def param_count(self):
        return (self.spec.in_dim + 1) * self.spec.out_dim

    def forward(self, x, mode, rng=None, update_state=False):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, dy, cache):
        x = cache
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads


class OutputHead(Dense):
    """Fully-connected layer followed by an element-wise sigmoid"""

    def forward(self, x, mode, rng=None, update_state=False):
        logits = x @ self.params["W"] + self.params["b"]
        return sigmoid(logits), x

    def backward(self, dlogits, cache):
        # receives the gradient with respect to the logits, not the probabilities
        return Dense.backward(self, dlogits, cache)


class BatchNorm(Layer):
    def __init__(self, spec):
        super().__init__(spec)
        dim = spec.in_dim
        self.params = {"gamma": np.ones(dim), "beta": np.zeros(dim)}
        self.state = {"running_mean": np.zeros(dim), "running_var": np.ones(dim)}

    @property
    def param_count(self):
        return 4 * self.spec.in_dim

    def forward(self, x, mode, rng=None, update_state=False):
        if mode == TRAINING:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            if update_state:
                self.state["running_mean"] = (
                    BN_MOMENTUM * self.state["running_mean"] + (1.0 - BN_MOMENTUM) * mean
                )
                self.state["running_var"] = (
                    BN_MOMENTUM * self.state["running_var"] + (1.0 - BN_MOMENTUM) * var
                )
        else:
            mean = self.state["running_mean"]
            var = self.state["running_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
        xhat = (x - mean) * inv_std
        y = self.params["gamma"] * xhat + self.params["beta"]
        return y, (xhat, inv_std, mode)

    def backward(self, dy, cache):
        xhat, inv_std, mode = cache
        grads = {"gamma": (dy * xhat).sum(axis=0), "beta": dy.sum(axis=0)}
        dxhat = dy * self.params["gamma"]
        if mode != TRAINING:
            return dxhat * inv_std, grads
        batch = dy.shape[0]
        dx = (inv_std / batch) * (
            batch * dxhat
            - dxhat.sum(axis=0)
            - xhat * (dxhat * xhat).sum(axis=0)
        )
        return dx, grads


class Activation(Layer):
    def __init__(self, spec):
        super().__init__(spec)
        self.slope = spec.slope if spec.activation == LEAKY_RELU else 0.0

    def attrs(self):
        return {"activation": self.spec.activation, "slope": repr(float(self.spec.slope))}

    def forward(self, x, mode, rng=None, update_state=False):
        return np.where(x > 0, x, self.slope * x), x

    def backward(self, dy, cache):
        return dy * np.where(cache > 0, 1.0, self.slope), {}


class Dropout(Layer):
    """Inverted dropout: scaled at train time, identity at inference"""

    def attrs(self):
        return {"rate": repr(float(self.spec.rate))}

    def forward(self, x, mode, rng=None, update_state=False):
        rate = self.spec.rate
        if mode != TRAINING or rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("Dropout in training mode needs a random generator")
        mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
        return x * mask, mask

    def backward(self, dy, cache):
        if cache is None:
            return dy, {}
        return dy * cache, {}


class PowerNorm(Layer):
    """
    Scales codewords to unit mean-square amplitude per channel use

    Training mode divides by the square root of the batch-mean element power
    and (when owning the update) stores that factor; inference reuses it.
    """

    def __init__(self, spec):
        super().__init__(spec)
        self.state = {"factor": np.array([1.0])}

    @property
    def param_count(self):
        return self.spec.in_dim

    @property
    def factor(self):
        return float(self.state["factor"][0])

    def forward(self, x, mode, rng=None, update_state=False):
        if mode != TRAINING:
            return x / self.factor, (None, self.factor)
        scale = float(np.sqrt(np.mean(x * x)))
        if scale == 0.0:
            raise DegeneratePowerError("Cannot normalize an all-zero batch")
        if not np.isfinite(scale):
            raise NonFiniteError("Non-finite codeword power")
        if update_state:
            self.state["factor"] = np.array([scale])
        return x / scale, (x, scale)

    def backward(self, dy, cache):
        x, scale = cache
        if x is None:
            return dy / scale, {}
        count = x.size
        dx = dy / scale - x * np.sum(dy * x) / (scale**3 * count)
        return dx, {}


_LAYER_CLASSES = {
    FULLY_CONNECTED: Dense,
    OUTPUT_HEAD: OutputHead,
    BATCH_NORM: BatchNorm,
    ACTIVATION: Activation,
    DROPOUT: Dropout,
    POWER_NORM: PowerNorm,
}


def make_layer(spec, rng=None, gain=1.0):
    """Instantiate the layer class for a spec"""
    if spec.kind in (FULLY_CONNECTED, OUTPUT_HEAD):
        return _LAYER_CLASSES[spec.kind](spec, rng=rng, gain=gain)
    if spec.kind not in _LAYER_CLASSES:
        raise ValueError(f"Unknown layer kind: {spec.kind}")
    return _LAYER_CLASSES[spec.kind](spec)


@dataclass
class Activations:
    """Per-layer caches from a forward pass plus the final output"""

    caches: List[object]
    outputs: List[np.ndarray]
    mode: str

    @property
    def output(self):
        return self.outputs[-1]


class Sequential:
    """Ordered list of layers sharing one forward/backward pass"""

    def __init__(self, layers, name="net"):
        self.layers = list(layers)
        self.name = name
        for before, after in zip(self.layers, self.layers[1:]):
            if before.spec.out_dim != after.spec.in_dim:
                raise DimensionError(
                    f"{name}: {before.kind} outputs {before.spec.out_dim} but "
                    f"{after.kind} expects {after.spec.in_dim}"
                )

    @property
    def in_dim(self):
        return self.layers[0].spec.in_dim

    @property
    def out_dim(self):
        return self.layers[-1].spec.out_dim

    @property
    def num_params(self):
        return sum(layer.param_count for layer in self.layers)

    def specs(self):
        return [layer.spec for layer in self.layers]

    def trainable_count(self):
        return sum(p.size for layer in self.layers for p in layer.params.values())


def forward(net, x, mode, rng=None, update_state=True):
    """
    Run a batch through a network, keeping every intermediate activation

    Args:
        net: Sequential
        x: (batch_size, in_dim) array
        mode: TRAINING or INFERENCE
        rng: Generator for dropout masks (training mode only)
        update_state: Whether batch statistics update running state

    Returns:
        Activations: caches for backward plus all layer outputs
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim or x.shape[0] < 1:
        raise DimensionError(f"{net.name} expects (batch, {net.in_dim}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{net.name} received non-finite input")
    caches = []
    outputs = []
    update = update_state and mode == TRAINING
    for layer in net.layers:
        x, cache = layer.forward(x, mode, rng=rng, update_state=update)
        caches.append(cache)
        outputs.append(x)
    return Activations(caches, outputs, mode)


def power_normalize(x, layer, mode, update_state=True):
    """
    Apply a PowerNorm layer on its own

    Training mode divides by the batch root-mean-square amplitude and stores
    it on the layer; inference divides by the stored factor.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("Non-finite codewords")
    y, _ = layer.forward(x, mode, update_state=update_state and mode == TRAINING)
    return y


def zero_grads(net):
    """Gradient dicts of zeros shaped like every trainable array of `net`"""
    return [
        {name: np.zeros_like(value) for name, value in layer.params.items()}
        for layer in net.layers
    ]


def backward_from(net, activations, dy, l2=0.0):
    """
    Backpropagate an output gradient through a network

    Args:
        net: Sequential that produced `activations`
        activations: Activations from a forward pass
        dy: Gradient with respect to the network output (logits for a head)
        l2: L2 weight on fully-connected weights

    Returns:
        tuple: (list of per-layer gradient dicts, gradient w.r.t. the input)
    """
    if activations is None or len(activations.caches) != len(net.layers):
        raise ValueError("Missing activations for backward pass")
    grads: List[Dict[str, np.ndarray]] = [dict() for _ in net.layers]
    for index in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[index]
        dy, layer_grads = layer.backward(dy, activations.caches[index])
        if l2 and "W" in layer_grads:
            layer_grads["W"] = layer_grads["W"] + 2.0 * l2 * layer.params["W"]
        grads[index] = layer_grads
    return grads, dy


def backward(net, activations, bits, l2=0.0):
    """
    Exact gradients of bce_loss + L2 penalty for a network ending in an output head

    Returns:
        tuple: (list of per-layer gradient dicts, gradient w.r.t. the input)
    """
    if net.layers[-1].kind != OUTPUT_HEAD:
        raise ValueError("backward() needs a network ending in an output head")
    probs = activations.output
    bits = np.asarray(bits, dtype=np.float64)
    if probs.shape != bits.shape:
        raise DimensionError(f"Shape mismatch: probs {probs.shape} vs bits {bits.shape}")
    dlogits = (probs - bits) / bits.shape[0]
    return backward_from(net, activations, dlogits, l2=l2)


def bce_loss(probs, bits):
    """
    Mean over the batch of the summed per-bit negative log-likelihood (nats)

    Probabilities are clamped to [1e-12, 1 - 1e-12].
    """
    probs = np.asarray(probs, dtype=np.float64)
    bits = np.asarray(bits, dtype=np.float64)
    if probs.shape != bits.shape:
        raise DimensionError(f"Shape mismatch: probs {probs.shape} vs bits {bits.shape}")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    nll = -(bits * np.log(p) + (1.0 - bits) * np.log1p(-p))
    return float(nll.sum(axis=-1).mean())


def l2_penalty(nets, l2):
    if not l2:
        return 0.0
    total = 0.0
    for net in nets:
        for layer in net.layers:
            if "W" in layer.params:
                total += float(np.sum(layer.params["W"] ** 2))
    return l2 * total


def score_predictions(probs, bits):
    """
    Loss and hard-decision bit accuracy of a batch of predictions

    Returns:
        tuple: (bce loss, fraction of bits with (p > 0.5) == bit)
    """
    loss = bce_loss(probs, bits)
    decided = (np.asarray(probs) > 0.5).astype(np.float64)
    accuracy = float(np.mean(decided == np.asarray(bits, dtype=np.float64)))
    return loss, accuracy


def adam_step(net, grads, hyper):
    """
    One Adam update of every trainable array in `net`

    Moments and step counts are kept per parameter on the layers, so a
    network that sits out a phase resumes with its own bias correction.
    Raises TrainingAborted before touching anything if a gradient is not finite.
    """
    if len(grads) != len(net.layers):
        raise DimensionError("Gradient list does not match the network")
    for layer_grads in grads:
        for name, g in layer_grads.items():
            if not np.all(np.isfinite(g)):
                raise TrainingAborted(f"Non-finite gradient for {net.name}.{name}")
    for layer, layer_grads in zip(net.layers, grads):
        for name, g in layer_grads.items():
            slot = layer.adam.get(name)
            if slot is None:
                slot = [np.zeros_like(g), np.zeros_like(g), 0]
                layer.adam[name] = slot
            slot[2] += 1
            step = slot[2]
            slot[0] = hyper.beta1 * slot[0] + (1.0 - hyper.beta1) * g
            slot[1] = hyper.beta2 * slot[1] + (1.0 - hyper.beta2) * g * g
            m_hat = slot[0] / (1.0 - hyper.beta1**step)
            v_hat = slot[1] / (1.0 - hyper.beta2**step)
            layer.params[name] = layer.params[name] - hyper.lr * m_hat / (
                np.sqrt(v_hat) + hyper.eps
            )
    return net


# Checkpoint text format


def _format_array(tag, name, array):
    array = np.asarray(array, dtype=np.float64)
    shape = ",".join(str(d) for d in array.shape)
    values = " ".join(repr(v) for v in array.ravel().tolist())
    return f"{tag} {name} {shape} {values}"


def format_checkpoint(header, nets):
    """
    Render networks as checkpoint text

    Args:
        header: Ordered dict of key -> value written on the first line
        nets: List of Sequential networks

    Returns:
        str: Checkpoint document
    """
    fields = " ".join(f"{key}={value}" for key, value in header.items())
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} {fields}".rstrip()]
    for net in nets:
        for index, layer in enumerate(net.layers):
            extra = " ".join(f"{key}={value}" for key, value in layer.attrs().items())
            record = (
                f"layer {net.name} {index} {layer.kind} "
                f"in={layer.spec.in_dim} out={layer.spec.out_dim} {extra}"
            )
            lines.append(record.rstrip())
            for name in sorted(layer.params):
                lines.append(_format_array("param", name, layer.params[name]))
            for name in sorted(layer.state):
                lines.append(_format_array("state", name, layer.state[name]))
    return "\n".join(lines) + "\n"


@dataclass
class LayerRecord:
    net: str
    index: int
    kind: str
    in_dim: int
    out_dim: int
    attrs: Dict[str, str] = field(default_factory=dict)
    params: Dict[str, np.ndarray] = field(default_factory=dict)
    state: Dict[str, np.ndarray] = field(default_factory=dict)


def _parse_array(tokens):
    shape = tuple(int(d) for d in tokens[2].split(",") if d)
    values = np.array([float(v) for v in tokens[3:]], dtype=np.float64)
    if values.size != int(np.prod(shape)):
        raise CheckpointError(f"Array {tokens[1]} has {values.size} values for shape {shape}")
    return values.reshape(shape)


def parse_checkpoint(text):
    """
    Parse checkpoint text

    Returns:
        tuple: (header dict of strings, list of LayerRecord)
    """
    lines = text.splitlines()
    if not lines:
        raise CheckpointError("Empty checkpoint")
    head = lines[0].split()
    if len(head) < 2 or head[0] != CHECKPOINT_MAGIC:
        raise CheckpointError("Not a checkpoint file")
    if int(head[1]) != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {head[1]}")
    header = dict(item.split("=", 1) for item in head[2:])
    records: List[LayerRecord] = []
    for line in lines[1:]:
        if not line.strip():
            continue
        tokens = line.split(" ")
        if tokens[0] == "layer":
            pairs = dict(item.split("=", 1) for item in tokens[4:])
            records.append(
                LayerRecord(
                    net=tokens[1],
                    index=int(tokens[2]),
                    kind=tokens[3],
                    in_dim=int(pairs.pop("in")),
                    out_dim=int(pairs.pop("out")),
                    attrs=pairs,
                )
            )
        elif tokens[0] in ("param", "state"):
            if not records:
                raise CheckpointError("Array record before any layer record")
            target = records[-1].params if tokens[0] == "param" else records[-1].state
            target[tokens[1]] = _parse_array(tokens)
        else:
            raise CheckpointError(f"Unknown record type: {tokens[0]}")
    return header, records


def apply_records(nets, records):
    """Load parsed layer records into freshly built networks of the same shape"""
    by_name = {net.name: net for net in nets}
    seen = 0
    for record in records:
        net = by_name.get(record.net)
        if net is None or record.index >= len(net.layers):
            raise CheckpointError(f"No layer {record.net}[{record.index}] in the model")
        layer = net.layers[record.index]
        if (
            layer.kind != record.kind
            or layer.spec.in_dim != record.in_dim
            or layer.spec.out_dim != record.out_dim
        ):
            raise CheckpointError(
                f"Layer {record.net}[{record.index}] is {layer.kind} "
                f"{layer.spec.in_dim}x{layer.spec.out_dim}, checkpoint has "
                f"{record.kind} {record.in_dim}x{record.out_dim}"
            )
        for name, value in record.params.items():
            if name not in layer.params or layer.params[name].shape != value.shape:
                raise CheckpointError(f"Parameter {name} does not fit {record.net}[{record.index}]")
            layer.params[name] = value
        for name, value in record.state.items():
            if name not in layer.state or layer.state[name].shape != value.shape:
                raise CheckpointError(f"State {name} does not fit {record.net}[{record.index}]")
            layer.state[name] = value
        seen += 1
    expected = sum(len(net.layers) for net in nets)
    if seen != expected:
        raise CheckpointError(f"Checkpoint has {seen} layers, model has {expected}")
    return nets


def save_checkpoint(path, header, nets):
    """Write networks to a checkpoint file (atomic replace)"""
    from utils.file_utils import atomic_write_text

    atomic_write_text(path, format_checkpoint(header, nets))
    return path


def load_checkpoint(path):
    """
    Read a checkpoint file

    Returns:
        tuple: (header dict, list of LayerRecord)
    """
    with open(path, "r", encoding="utf-8") as f:
        return parse_checkpoint(f.read())
