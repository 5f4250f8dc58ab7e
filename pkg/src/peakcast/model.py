"""Stacked LSTM demand predictor: parameters, forward pass, model file.

The recurrence runs through peakcast.kernels (compiled when available).
Gate math per cell and timestep:

    f, i, o = sigmoid(W x + U h_prev + b)        per gate
    g       = tanh(W_c x + U_c h_prev + b_c)
    c       = f * c_prev + i * g
    h       = o * tanh(c)

The dense head maps the final timestep's top-layer h to one normalized
demand estimate per target hour.
"""

import struct
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BadMagic, DimensionMismatch, TruncatedFile, VersionMismatch
from .features import FEATURE_LAYOUT_VERSION, NormalizationParams, denormalize

GATE_ORDER = ("f", "i", "o", "c")
MAGIC = b"PKFC"
FORMAT_VERSION = 1
MODEL_TYPE_LSTM = 0
MODEL_TYPE_LINEAR = 1
PRECISION_FULL = 0
PRECISION_HALF = 1
_DTYPES = {PRECISION_FULL: "<f8", PRECISION_HALF: "<f2"}

GateValues = namedtuple("GateValues", ["forget", "input", "output", "candidate"])


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


@dataclass
class LstmLayerParams:
    """One layer's gate weights: W_g (H, I), U_g (H, H), b_g (H,)."""

    w_f: np.ndarray
    u_f: np.ndarray
    b_f: np.ndarray
    w_i: np.ndarray
    u_i: np.ndarray
    b_i: np.ndarray
    w_o: np.ndarray
    u_o: np.ndarray
    b_o: np.ndarray
    w_c: np.ndarray
    u_c: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        h, i = self.w_f.shape
        for g in GATE_ORDER:
            w, u, b = (getattr(self, f"{k}_{g}") for k in ("w", "u", "b"))
            if w.shape != (h, i) or u.shape != (h, h) or b.shape != (h,):
                raise DimensionMismatch(
                    f"gate {g}: W {w.shape}, U {u.shape}, b {b.shape} "
                    f"inconsistent with hidden={h}, input={i}")

    @property
    def input_size(self):
        return self.w_f.shape[1]

    @property
    def hidden_size(self):
        return self.w_f.shape[0]

    def packed(self):
        """(w, u, b) with gates stacked column-wise in f|i|o|c order."""
        w = np.concatenate([getattr(self, f"w_{g}").T for g in GATE_ORDER], axis=1)
        u = np.concatenate([getattr(self, f"u_{g}").T for g in GATE_ORDER], axis=1)
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATE_ORDER])
        return _as_f64(w), _as_f64(u), _as_f64(b)


@dataclass
class LstmState:
    """Hidden and cell vectors; |h_j| <= 1 always, c unbounded."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size):
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


@dataclass
class ModelParams:
    """The full predictor: LSTM stack, dense head, i/o bookkeeping."""

    layers: list
    head_weights: np.ndarray   # (out, hidden of last layer)
    head_bias: np.ndarray      # (out,)
    normalization: NormalizationParams
    feature_layout_version: int = FEATURE_LAYOUT_VERSION

    def __post_init__(self):
        for below, above in zip(self.layers, self.layers[1:]):
            if above.input_size != below.hidden_size:
                raise DimensionMismatch(
                    f"layer input {above.input_size} != previous hidden "
                    f"{below.hidden_size}")
        if self.head_weights.shape[1] != self.layers[-1].hidden_size:
            raise DimensionMismatch("head width != last hidden size")
        if self.head_bias.shape != (self.head_weights.shape[0],):
            raise DimensionMismatch("head bias length != head rows")

    @property
    def input_size(self):
        return self.layers[0].input_size

    @property
    def output_size(self):
        return self.head_weights.shape[0]

    @property
    def layer_sizes(self):
        return tuple(layer.hidden_size for layer in self.layers)


@dataclass
class ForwardCache:
    """Per-layer activations kept by a train-mode forward for backprop."""

    x_seqs: list       # post-dropout input per layer, (T, B, I_l)
    gates: list        # (T, B, 4H_l)
    c_seqs: list
    tanhc_seqs: list
    h_seqs: list
    masks: list        # inverted-dropout mask after each non-final layer, or None
    head_input: np.ndarray
    prediction: np.ndarray


# --- construction ----------------------------------------------------------

def parameter_count(layer_sizes, input_size=39, output_size=24):
    """Closed-form count: 4*(H*(I+H)+H) per layer plus the affine head."""
    total = 0
    prev = input_size
    for h in layer_sizes:
        total += 4 * (h * (prev + h) + h)
        prev = h
    return total + output_size * prev + output_size


def init_model(layer_sizes, rng, input_size=39, output_size=24,
               normalization=None, feature_layout_version=FEATURE_LAYOUT_VERSION):
    """Seeded uniform init, scale 1/sqrt(fan_in) per matrix, zero biases."""
    rng = np.random.default_rng(rng)
    if normalization is None:
        normalization = NormalizationParams(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)

    def mat(rows, cols, fan):
        s = 1.0 / np.sqrt(fan)
        return rng.uniform(-s, s, (rows, cols))

    layers = []
    prev = input_size
    for h in layer_sizes:
        fields = {}
        for g in GATE_ORDER:
            fields[f"w_{g}"] = mat(h, prev, prev)
            fields[f"u_{g}"] = mat(h, h, h)
            fields[f"b_{g}"] = np.zeros(h)
        layers.append(LstmLayerParams(**fields))
        prev = h
    head_w = mat(output_size, prev, prev)
    return ModelParams(layers, head_w, np.zeros(output_size), normalization,
                       feature_layout_version)


def param_arrays(model):
    """The trainable arrays in canonical order (views, not copies).

    Order: per layer w_f,u_f,b_f,w_i,u_i,b_i,w_o,u_o,b_o,w_c,u_c,b_c,
    then head weights and head bias. Gradient lists use the same order.
    """
    arrays = []
    for layer in model.layers:
        for g in GATE_ORDER:
            arrays += [getattr(layer, f"w_{g}"), getattr(layer, f"u_{g}"),
                       getattr(layer, f"b_{g}")]
    arrays += [model.head_weights, model.head_bias]
    return arrays


def clone_model(model):
    layers = [LstmLayerParams(**{
        f"{k}_{g}": getattr(layer, f"{k}_{g}").copy()
        for g in GATE_ORDER for k in ("w", "u", "b")})
        for layer in model.layers]
    return ModelParams(layers, model.head_weights.copy(), model.head_bias.copy(),
                       model.normalization, model.feature_layout_version)


# --- forward ----------------------------------------------------------------

def lstm_cell_step(layer, x, state):
    """One cell update for a single timestep and sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.input_size,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected "
                                f"({layer.input_size},)")
    if state.h.shape != (layer.hidden_size,) or state.c.shape != (layer.hidden_size,):
        raise DimensionMismatch("state dims != hidden size")

    def sigmoid(z):
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    f = sigmoid(layer.w_f @ x + layer.u_f @ state.h + layer.b_f)
    i = sigmoid(layer.w_i @ x + layer.u_i @ state.h + layer.b_i)
    o = sigmoid(layer.w_o @ x + layer.u_o @ state.h + layer.b_o)
    g = np.tanh(layer.w_c @ x + layer.u_c @ state.h + layer.b_c)
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return LstmState(h, c), GateValues(f, i, o, g)


def forward_batch(model, inputs, train=False, dropout_rate=0.0, rng=None):
    """Run the stack over a batch.

    inputs: (B, T, input_size). Returns (predictions (B, out), cache);
    cache is None unless train=True. Inverted dropout is applied to each
    layer's output sequence before it feeds the next layer, never to the
    recurrent path or the head input.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != model.input_size:
        raise DimensionMismatch(f"inputs shape {inputs.shape} incompatible "
                                f"with input size {model.input_size}")
    if train and dropout_rate > 0.0 and rng is None:
        raise ValueError("train-mode dropout needs an rng or seed")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) \
        else rng

    x = np.ascontiguousarray(inputs.transpose(1, 0, 2))
    cache = ForwardCache([], [], [], [], [], [], None, None) if train else None

    n_layers = len(model.layers)
    for idx, layer in enumerate(model.layers):
        w, u, b = layer.packed()
        h_seq, c_seq, tanhc_seq, gates = kernels.lstm_layer_forward(x, w, u, b)
        mask = None
        out = h_seq
        if idx < n_layers - 1 and train and dropout_rate > 0.0:
            keep = rng.random(h_seq.shape) >= dropout_rate
            mask = keep / (1.0 - dropout_rate)
            out = h_seq * mask
        if train:
            cache.x_seqs.append(x)
            cache.gates.append(gates)
            cache.c_seqs.append(c_seq)
            cache.tanhc_seqs.append(tanhc_seq)
            cache.h_seqs.append(h_seq)
            cache.masks.append(mask)
        x = np.ascontiguousarray(out)

    head_input = x[-1]
    pred = head_input @ model.head_weights.T + model.head_bias
    if train:
        cache.head_input = head_input
        cache.prediction = pred
    return pred, cache


def forward(model, sample_inputs, train=False, dropout_rate=0.0, rng=None):
    """Single-sample forward: (T, input_size) -> 24 normalized estimates."""
    sample_inputs = np.asarray(sample_inputs, dtype=np.float64)
    if sample_inputs.ndim != 2:
        raise DimensionMismatch(f"expected (T, {model.input_size}) inputs, "
                                f"got shape {sample_inputs.shape}")
    pred, cache = forward_batch(model, sample_inputs[None], train=train,
                                dropout_rate=dropout_rate, rng=rng)
    return pred[0], cache


def predict_day(model, sample_inputs):
    """Infer-mode forward, denormalized to kW (no output clamping)."""
    pred, _ = forward(model, sample_inputs)
    n = model.normalization
    return denormalize(pred, n.demand_min, n.demand_max)


# --- serialization -----------------------------------------------------------

class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise TruncatedFile(f"need {n} bytes at offset {self.pos}, "
                                f"file has {len(self.blob)}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def array(self, shape, dtype):
        n = int(np.prod(shape))
        raw = self.take(n * np.dtype(dtype).itemsize)
        return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(np.float64)


def _norm_tuple(n):
    return (n.demand_min, n.demand_max, n.temp_min, n.temp_max,
            n.humidity_min, n.humidity_max)


def serialize(model, precision="full"):
    """Encode a model into the PKFC container.

    Layout (little-endian): magic "PKFC" | u16 format version | u16
    feature layout version | u8 model type | u8 precision | u64 parameter
    count | type-specific dims | tensors in canonical order | six f64
    normalization bounds. Half precision stores tensors as float16.
    """
    prec = {"full": PRECISION_FULL, "half": PRECISION_HALF}[precision]
    dtype = _DTYPES[prec]
    arrays = param_arrays(model)
    count = sum(a.size for a in arrays)

    out = [MAGIC, struct.pack("<HHBBQ", FORMAT_VERSION,
                              model.feature_layout_version, MODEL_TYPE_LSTM,
                              prec, count)]
    out.append(struct.pack("<B", len(model.layers)))
    for layer in model.layers:
        out.append(struct.pack("<II", layer.input_size, layer.hidden_size))
    out.append(struct.pack("<I", model.output_size))
    for a in arrays:
        out.append(np.ascontiguousarray(a).astype(dtype).tobytes())
    out.append(struct.pack("<6d", *_norm_tuple(model.normalization)))
    return b"".join(out)


def serialize_linear(linmodel, precision="full"):
    """Encode a linear baseline into the same container, model type 1."""
    prec = {"full": PRECISION_FULL, "half": PRECISION_HALF}[precision]
    dtype = _DTYPES[prec]
    n_out, n_feat = linmodel.weights.shape
    count = linmodel.weights.size + linmodel.intercept.size
    out = [MAGIC, struct.pack("<HHBBQ", FORMAT_VERSION,
                              linmodel.feature_layout_version,
                              MODEL_TYPE_LINEAR, prec, count)]
    out.append(struct.pack("<IId", n_feat, n_out, linmodel.ridge_lambda))
    out.append(np.ascontiguousarray(linmodel.weights).astype(dtype).tobytes())
    out.append(np.ascontiguousarray(linmodel.intercept).astype(dtype).tobytes())
    out.append(struct.pack("<6d", *_norm_tuple(linmodel.normalization)))
    return b"".join(out)


def deserialize(blob):
    """Decode a PKFC container into ModelParams or a LinRegModel."""
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise BadMagic("not a PKFC model file")
    fmt_version, layout_version, model_type, prec, count = r.unpack("HHBBQ")
    if fmt_version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {fmt_version}, "
                              f"expected {FORMAT_VERSION}")
    if prec not in _DTYPES:
        raise VersionMismatch(f"unknown precision flag {prec}")
    dtype = _DTYPES[prec]

    if model_type == MODEL_TYPE_LSTM:
        (n_layers,) = r.unpack("B")
        dims = [r.unpack("II") for _ in range(n_layers)]
        (n_out,) = r.unpack("I")
        layers = []
        for i_size, h_size in dims:
            fields = {}
            for g in GATE_ORDER:
                fields[f"w_{g}"] = r.array((h_size, i_size), dtype)
                fields[f"u_{g}"] = r.array((h_size, h_size), dtype)
                fields[f"b_{g}"] = r.array((h_size,), dtype)
            layers.append(LstmLayerParams(**fields))
        head_w = r.array((n_out, dims[-1][1]), dtype)
        head_b = r.array((n_out,), dtype)
        norm = NormalizationParams(*r.unpack("6d"))
        model = ModelParams(layers, head_w, head_b, norm, layout_version)
        actual = sum(a.size for a in param_arrays(model))
        if actual != count:
            raise TruncatedFile(f"declared {count} parameters, found {actual}")
        return model

    if model_type == MODEL_TYPE_LINEAR:
        from .baselines import LinRegModel

        n_feat, n_out, lam = r.unpack("IId")
        weights = r.array((n_out, n_feat), dtype)
        intercept = r.array((n_out,), dtype)
        norm = NormalizationParams(*r.unpack("6d"))
        return LinRegModel(weights, intercept, lam, norm, layout_version)

    raise VersionMismatch(f"unknown model type {model_type}")
