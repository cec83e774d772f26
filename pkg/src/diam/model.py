"""The detector network: sequence encoder, discrepancy-aware layers, classifier.

Matrices follow the column-vector convention ``y = W x + b``; batched code
keeps one node per row and multiplies by ``W.T``.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .tensor import Tensor

GRU_NAMES = ("W_r", "W_u", "W_n", "U_r", "U_u", "U_n", "b_r", "b_u", "b_n")
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def param_shapes(c, d, layers):
    """Name -> shape for every learnable block of a model with width ``c``."""
    if c % 2:
        raise ValueError("representation width c must be even")
    half = c // 2
    shapes = {}
    for direction in ("out", "in"):
        shapes[f"W_{direction}"] = (half, d)
        shapes[f"b_{direction}"] = (half,)
        for name in GRU_NAMES:
            shapes[f"gru_{direction}.{name}"] = (half,) if name.startswith("b") else (half, half)
    for layer in range(1, layers + 1):
        shapes[f"mgd{layer}.W2"] = (c, c)
        shapes[f"mgd{layer}.b2"] = (c,)
        shapes[f"mgd{layer}.W3"] = (c, 2 * c)
        shapes[f"mgd{layer}.q"] = (c,)
    shapes["cls.W1"] = (c, c)
    shapes["cls.b1"] = (c,)
    shapes["cls.W2"] = (1, c)
    shapes["cls.b2"] = (1,)
    return shapes


class ModelParams:
    """All learnable tensors, keyed by block name (see :func:`param_shapes`)."""

    def __init__(self, c, d, layers, arrays=None):
        self.c, self.d, self.layers = int(c), int(d), int(layers)
        self.shapes = param_shapes(self.c, self.d, self.layers)
        arrays = arrays or {}
        unknown = set(arrays) - set(self.shapes)
        if unknown:
            raise CheckpointError(f"unexpected parameter blocks: {sorted(unknown)}")
        self.tensors = {}
        for name, shape in self.shapes.items():
            value = np.array(arrays.get(name, np.zeros(shape)), dtype=np.float64)
            if value.shape != shape:
                raise CheckpointError(f"{name}: shape {value.shape}, expected {shape}")
            self.tensors[name] = Tensor(value, requires_grad=True)

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def gru(self, direction):
        return {k: self.tensors[f"gru_{direction}.{k}"] for k in GRU_NAMES}

    def layer(self, index):
        return {k: self.tensors[f"mgd{index}.{k}"] for k in ("W2", "b2", "W3", "q")}

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def arrays(self):
        return {k: t.data.copy() for k, t in self.tensors.items()}

    def copy(self):
        return ModelParams(self.c, self.d, self.layers, self.arrays())

    @property
    def size(self):
        return sum(t.data.size for t in self.tensors.values())


def linear(x, W, b=None):
    y = x @ W.T
    return y if b is None else y + b


# ---------------------------------------------------------------- sequence encoder

def gru_cell(z, h, p):
    """One GRU step with the reset gate applied before the candidate's recurrent matrix."""
    r = tn.sigmoid(linear(z, p["W_r"]) + linear(h, p["U_r"]) + p["b_r"])
    u = tn.sigmoid(linear(z, p["W_u"]) + linear(h, p["U_u"]) + p["b_u"])
    cand = tn.tanh(linear(z, p["W_n"]) + linear(r * h, p["U_n"]) + p["b_n"])
    return (1.0 - u) * cand + u * h


def encode_direction(attrs, lengths, W, b, gru):
    """Encode padded sequences ``attrs`` (n, T, d) of the given lengths to (n, c/2).

    Rows are processed in decreasing-length order so that step ``t`` only
    touches sequences that are still running; max pooling then sees exactly
    the valid states of every row.
    """
    lengths = np.asarray(lengths)
    n = len(lengths)
    order = np.argsort(-lengths, kind="stable")
    sorted_len = lengths[order]
    half = W.shape[0]
    W_gates = tn.concat([gru["W_r"], gru["W_u"], gru["W_n"]], axis=0).T
    b_gates = tn.concat([gru["b_r"], gru["b_u"], gru["b_n"]])
    U_ru = tn.concat([gru["U_r"], gru["U_u"]], axis=0).T
    U_n = gru["U_n"].T
    W_T = W.T
    h = Tensor(np.zeros((n, half)))
    states = []
    for t in range(int(sorted_len[0])):
        active = int(np.count_nonzero(sorted_len > t))
        x_t = Tensor(attrs[order[:active], t])
        gi = (x_t @ W_T + b) @ W_gates + b_gates
        h_prev = h if h.shape[0] == active else h[:active]
        gates = tn.sigmoid(gi[:, :2 * half] + h_prev @ U_ru)
        r, u = gates[:, :half], gates[:, half:]
        cand = tn.tanh(gi[:, 2 * half:] + (r * h_prev) @ U_n)
        h = cand + u * (h_prev - cand)
        states.append(h)
    pooled = tn.reduce_max_over_sequence(states)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(n)
    return pooled[inverse]


def edge2seq(bank, nodes, params):
    """Representations ``h_out || h_in`` (n, c) for ``nodes`` from a :class:`SequenceBank`."""
    nodes = np.asarray(nodes, dtype=np.int64)
    halves = []
    for direction in ("out", "in"):
        table = getattr(bank, f"{direction}_attrs")
        lengths = getattr(bank, f"{direction}_len")[nodes]
        width = int(lengths.max())
        halves.append(encode_direction(table[nodes, :width], lengths,
                                       params[f"W_{direction}"], params[f"b_{direction}"],
                                       params.gru(direction)))
    return tn.concat(halves, axis=1)


def edge2seq_encode(seqs, params):
    """Single-node encoder over an :class:`~diam.seqgen.EdgeSequences` record; returns (c,)."""
    halves = []
    for direction, x in (("out", seqs.x_out), ("in", seqs.x_in)):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != params.d:
            raise ValueError(f"attribute dimension {x.shape[-1]} does not match d={params.d}")
        halves.append(encode_direction(x[None], np.array([len(x)]),
                                       params[f"W_{direction}"], params[f"b_{direction}"],
                                       params.gru(direction)))
    return tn.concat(halves, axis=1)[0]


# ---------------------------------------------------------------- message passing

def attention_weights(z, r_in, r_out, q, slope=tn.LEAKY_SLOPE, disabled=False):
    """Softmax over LeakyReLU(<x, q>) for x in (z, r_in, r_out).

    Works for single vectors (returns shape (3,)) or row batches (n, 3).  With
    ``disabled`` every weight is exactly 1.
    """
    if disabled:
        return Tensor(np.ones(z.shape[:-1] + (3,)))
    logits = tn.stack([z @ q, r_in @ q, r_out @ q], axis=-1)
    return tn.softmax(tn.leaky_relu(logits, slope))


def mgd_layer(h_prev, hop, n_centers, p, no_attention=False):
    """One discrepancy-aware layer over a sampled hop.

    ``h_prev`` holds rows for every node the hop touches; the result has one
    row per centre (the first ``n_centers`` rows).  Returns ``(h, alpha)``.
    """
    z = linear(h_prev, p["W2"], p["b2"])
    z_center = z[hop.center]
    z_nbr = z[hop.neighbor]
    messages = tn.concat([z_nbr, z_center - z_nbr], axis=1) @ p["W3"].T
    slot = hop.center + n_centers * hop.direction.astype(np.int64)
    r = tn.segment_sum(messages, slot, 2 * n_centers)
    r_in, r_out = r[:n_centers], r[n_centers:]
    z_v = z if z.shape[0] == n_centers else z[:n_centers]
    alpha = attention_weights(z_v, r_in, r_out, p["q"], disabled=no_attention)
    if no_attention:
        return z_v + r_in + r_out, alpha
    h = (tn.scale_rows(z_v, alpha[:, 0]) + tn.scale_rows(r_in, alpha[:, 1])
         + tn.scale_rows(r_out, alpha[:, 2]))
    return h, alpha


# ---------------------------------------------------------------- head and loss

def dropout(x, rate, rng):
    if rate <= 0 or rng is None:
        return x
    keep = rng.random(x.shape) >= rate
    return x * (keep / (1.0 - rate))


def classify(h, params, rate=0.0, rng=None):
    """Illicit probability per row: sigmoid(MLP(h)) with one ReLU hidden layer."""
    hidden = tn.relu(linear(h, params["cls.W1"], params["cls.b1"]))
    hidden = dropout(hidden, rate, rng)
    logit = linear(hidden, params["cls.W2"], params["cls.b2"])
    return tn.sigmoid(logit[..., 0])


def bce_loss(p, y, eps=1e-12):
    return tn.binary_cross_entropy(p, y, eps)


@dataclass
class ForwardResult:
    probs: Tensor
    nodes: np.ndarray          # global ids of the rows of ``probs``
    attention: list            # per layer, alpha tensor (n_centers, 3)
    h0: Tensor                 # Edge2Seq output for every block node


def forward(block, bank, params, no_attention=False, rate=0.0, rng=None):
    """Probabilities for the (deduplicated) targets of ``block``.

    Uses as many layers as the block has hops; ``params.layers`` must match.
    A zero-hop block classifies the Edge2Seq output directly.
    """
    L = params.layers
    if block.depth != L:
        raise ValueError(f"block has {block.depth} hops but the model has {L} layers")
    h0 = edge2seq(bank, block.nodes, params)
    h = h0
    attention = []
    for layer in range(1, L + 1):
        k = L - layer
        h, alpha = mgd_layer(h, block.hops[k], block.sizes[k], params.layer(layer), no_attention)
        attention.append(alpha)
        if layer < L:
            h = dropout(h, rate, rng)
    if h.shape[0] != block.sizes[0]:
        h = h[:block.sizes[0]]
    probs = classify(h, params, rate, rng)
    return ForwardResult(probs, block.nodes[:block.sizes[0]], attention, h0)


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, params, config, extras=None):
    """Write an ``.npz`` holding every block, the config JSON and optional arrays."""
    payload = {f"param/{k}": v for k, v in params.arrays().items()}
    for k, v in (extras or {}).items():
        payload[f"extra/{k}"] = np.asarray(v)
    meta = {"version": CHECKPOINT_VERSION, "c": params.c, "d": params.d,
            "layers": params.layers, "config": config}
    payload["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Return ``(params, config, extras)``; shapes are validated against the stored config."""
    try:
        with np.load(path, allow_pickle=False) as npz:
            meta = json.loads(str(npz["meta"]))
            arrays = {k[6:]: npz[k] for k in npz.files if k.startswith("param/")}
            extras = {k[6:]: npz[k] for k in npz.files if k.startswith("extra/")}
    except (OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
    missing = set(param_shapes(meta["c"], meta["d"], meta["layers"])) - set(arrays)
    if missing:
        raise CheckpointError(f"checkpoint lacks blocks {sorted(missing)}")
    params = ModelParams(meta["c"], meta["d"], meta["layers"], arrays)
    return params, meta["config"], extras
