"""Mini-batch training loop, Adam, Xavier initialisation and inference."""

import csv
import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from ._seeding import derive_seed, rng_for
from .model import CheckpointError, ModelParams, bce_loss, forward, param_shapes
from .sampler import batches, sample_block
from .seqgen import SequenceBank
from .tensor import NumericalFault, Tape

log = logging.getLogger(__name__)

ABLATIONS = ("none", "no_attention", "no_mgd")


@dataclass
class TrainConfig:
    c: int = 128
    layers: int = 2
    t_max: int = 32
    lr: float = 0.001
    dropout: float = 0.2
    batch_size: int = 128
    epochs: int = 30
    fanouts: tuple = (25, 10)
    seed: int = 0
    ablation: str = "none"
    standardize: bool = True
    full_neighborhood: bool = False
    threshold: float = 0.5
    eval_batch_size: int = 512

    def __post_init__(self):
        self.fanouts = tuple(int(f) for f in self.fanouts)
        if self.c < 2 or self.c % 2:
            raise ValueError("c must be a positive even integer")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.t_max < 1 or self.batch_size < 1 or self.eval_batch_size < 1:
            raise ValueError("t_max and batch sizes must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")
        if self.effective_layers and len(self.fanouts) < self.effective_layers:
            raise ValueError(f"need {self.effective_layers} fanouts, got {len(self.fanouts)}")
        if any(f < 1 for f in self.fanouts):
            raise ValueError("fanouts must be at least 1")

    @property
    def effective_layers(self):
        return 0 if self.ablation == "no_mgd" else self.layers

    def hop_fanouts(self, full=None):
        full = self.full_neighborhood if full is None else full
        if full:
            return [None] * self.effective_layers
        return list(self.fanouts[:self.effective_layers])

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["fanouts"] = list(self.fanouts)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------- init and optimiser

def xavier_init(c, d, layers, seed=0):
    """Uniform Xavier weights in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
    arrays = {}
    for name, shape in param_shapes(c, d, layers).items():
        rng = rng_for(seed, "init", name)
        if name.endswith(".q"):
            fan_in, fan_out = shape[0], 1
        elif len(shape) == 2:
            fan_out, fan_in = shape
        else:
            arrays[name] = np.zeros(shape)
            continue
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        arrays[name] = rng.uniform(-bound, bound, shape)
    return ModelParams(c, d, layers, arrays)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr):
    """In-place bias-corrected Adam update; missing gradients count as zero."""
    for name, g in grads.items():
        if g is not None and not np.isfinite(g).all():
            raise NumericalFault(f"non-finite gradient for {name}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** state.step, 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(name, np.zeros_like(p.data))
        v = state.v.get(name, np.zeros_like(p.data))
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# ---------------------------------------------------------------- data preparation

def attribute_stats(g):
    """Per-column mean and standard deviation over all edges (std floored at 1e-12)."""
    if g.edge_count == 0:
        return np.zeros(g.attr_dim), np.ones(g.attr_dim)
    return g.attrs.mean(axis=0), np.maximum(g.attrs.std(axis=0), 1e-12)


def make_bank(g, config, stats=None):
    """Sequence bank for ``g``; returns ``(bank, stats)`` where stats may be None."""
    if config.standardize:
        mean, std = stats if stats is not None else attribute_stats(g)
        return SequenceBank(g, config.t_max, (g.attrs - mean) / std), (mean, std)
    return SequenceBank(g, config.t_max), None


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_precision: float
    val_recall: float
    val_f1: float
    val_auc: float
    seconds: float


@dataclass
class TrainResult:
    params: ModelParams
    history: list
    best_epoch: int
    stats: tuple
    config: TrainConfig


class TrainingAborted(RuntimeError):
    """Numerical fault during training; the best checkpoint so far is attached."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def train_step(g, bank, params, targets, y, config, state, seed):
    block = sample_block(g, targets, config.hop_fanouts(full=False), derive_seed(seed, "sample"))
    drop_rng = rng_for(seed, "dropout")
    params.zero_grad()
    with Tape() as tape:
        out = forward(block, bank, params, no_attention=config.ablation == "no_attention",
                      rate=config.dropout, rng=drop_rng)
        loss = bce_loss(out.probs, y)
    tape.backward(loss)
    adam_step(params, {k: t.grad for k, t in params.items()}, state, config.lr)
    return float(loss.data)


def predict(params, g, nodes, config, bank=None, stats=None, seed=None, full=None, workers=1):
    """Illicit probability for each of ``nodes`` (dropout off, no tape).

    With ``workers > 1`` the evaluation chunks run on a thread pool; parameters
    are only read.
    """
    if params.layers != config.effective_layers:
        raise CheckpointError(f"checkpoint has {params.layers} layers, config expects "
                              f"{config.effective_layers}")
    if params.c != config.c or params.d != g.attr_dim:
        raise CheckpointError(f"checkpoint shape (c={params.c}, d={params.d}) does not match "
                              f"config c={config.c} and data d={g.attr_dim}")
    if bank is None:
        bank, _ = make_bank(g, config, stats)
    nodes = np.asarray(nodes, dtype=np.int64)
    uniq, inverse = np.unique(nodes, return_inverse=True)
    seed = config.seed if seed is None else seed
    fanouts = config.hop_fanouts(full)
    starts = range(0, len(uniq), config.eval_batch_size)

    def run_chunk(i):
        chunk = uniq[i:i + config.eval_batch_size]
        block = sample_block(g, chunk, fanouts, derive_seed(seed, "predict", i))
        return forward(block, bank, params,
                       no_attention=config.ablation == "no_attention").probs.data

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run_chunk, starts))
    else:
        parts = [run_chunk(i) for i in starts]
    out = np.concatenate(parts) if parts else np.empty(0)
    return out[inverse]


def evaluate(params, g, labels, nodes, config, bank=None, stats=None, seed=None, full=None):
    probs = predict(params, g, nodes, config, bank, stats, seed, full)
    return metrics.evaluate(probs, labels.label_of(nodes), config.threshold)


def train(config, g, labels, splits, callback=None):
    """Run the configured number of epochs and keep the best-validation-F1 parameters."""
    bank, stats = make_bank(g, config)
    params = xavier_init(config.c, g.attr_dim, config.effective_layers, config.seed)
    best = params.copy()
    best_f1, best_epoch = -1.0, 0
    state = AdamState()
    history = []
    train_nodes = splits.train
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        epoch_rng = rng_for(config.seed, "epoch", epoch)
        total = 0.0
        try:
            for b, targets in enumerate(batches(train_nodes, config.batch_size, epoch_rng)):
                y = labels.label_of(targets).astype(np.float64)
                total += train_step(g, bank, params, targets, y, config, state,
                                    derive_seed(config.seed, "step", epoch, b))
            report = evaluate(params, g, labels, splits.val, config, bank,
                              seed=derive_seed(config.seed, "val", epoch))
        except NumericalFault as exc:
            result = TrainResult(best, history, best_epoch, stats, config)
            raise TrainingAborted(f"epoch {epoch}: {exc}", result) from exc
        record = EpochRecord(epoch, total, report.precision, report.recall, report.f1,
                             report.auc, time.perf_counter() - start)
        history.append(record)
        if report.f1 > best_f1:
            best_f1, best_epoch, best = report.f1, epoch, params.copy()
        log.info("epoch %d loss %.4f val f1 %.4f auc %.4f (%.1fs)", epoch, total,
                 report.f1, report.auc, record.seconds)
        if callback is not None:
            callback(record)
    return TrainResult(best, history, best_epoch, stats, config)


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "val_precision", "val_recall", "val_f1", "val_auc",
                         "seconds"])
        for r in history:
            writer.writerow([r.epoch, repr(r.loss), repr(r.val_precision), repr(r.val_recall),
                             repr(r.val_f1), repr(r.val_auc), f"{r.seconds:.3f}"])
