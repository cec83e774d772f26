"""Central finite-difference check of the full model gradient on a tiny instance."""

from dataclasses import dataclass

import numpy as np

from ._seeding import rng_for
from .model import bce_loss, forward
from .sampler import full_block
from .synth import SynthConfig, generate
from .tensor import Tape
from .train import TrainConfig, make_bank, xavier_init

STEP = 1e-5
TOLERANCE = 1e-4
# relative error denominators are floored here so that coordinates whose
# true gradient sits at the finite-difference noise level are judged on
# absolute error (FLOOR * tolerance)
FLOOR = 1e-6


@dataclass
class Coordinate:
    block: str
    index: tuple
    analytic: float
    numeric: float

    @property
    def rel_error(self):
        return abs(self.analytic - self.numeric) / max(abs(self.analytic), abs(self.numeric), FLOOR)


@dataclass
class GradcheckReport:
    coords: list
    tolerance: float
    seconds: float = 0.0

    @property
    def failures(self):
        return [c for c in self.coords if not c.rel_error < self.tolerance]

    @property
    def passed(self):
        return not self.failures

    def worst(self, k=10):
        return sorted(self.coords, key=lambda c: -c.rel_error)[:k]

    def per_block(self):
        out = {}
        for c in self.coords:
            n, worst = out.get(c.block, (0, 0.0))
            out[c.block] = (n + 1, max(worst, c.rel_error))
        return out


def tiny_instance(seed=0, n_nodes=20, c=8, d=3, t_max=4, layers=2):
    """Graph, labels, bank, block and parameters for the gradient check."""
    n_illicit = max(2, n_nodes * 3 // 10)
    g, labels = generate(SynthConfig(n_normal=n_nodes - n_illicit, n_illicit=n_illicit,
                                     mean_out_degree=3.0, attr_dim=d, seed=seed))
    config = TrainConfig(c=c, layers=layers, t_max=t_max, dropout=0.0, seed=seed)
    bank, _ = make_bank(g, config)
    params = xavier_init(c, d, layers, seed)
    rng = rng_for(seed, "gradcheck-bias")
    for name, t in params.items():
        if t.ndim == 1 and not name.endswith(".q"):
            t.data = rng.normal(0.0, 0.1, t.shape)
    block = full_block(g, labels.nodes, layers)
    y = labels.label_of(block.nodes[:block.sizes[0]]).astype(np.float64)
    return g, labels, bank, block, params, y


def run(seed=0, coords_per_block=100, tolerance=TOLERANCE, step=STEP, **instance):
    """Compare analytic and central-difference gradients on random coordinates of every block."""
    import time

    start = time.perf_counter()
    _, _, bank, block, params, y = tiny_instance(seed, **instance)

    def loss_value():
        return float(bce_loss(forward(block, bank, params).probs, y).data)

    params.zero_grad()
    with Tape() as tape:
        loss = bce_loss(forward(block, bank, params).probs, y)
    tape.backward(loss)
    rng = rng_for(seed, "gradcheck-coords")
    coords = []
    for name, t in params.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        size = t.data.size
        picks = rng.choice(size, min(size, coords_per_block), replace=False)
        for flat in np.sort(picks):
            idx = np.unravel_index(flat, t.shape)
            orig = t.data[idx]
            t.data[idx] = orig + step
            up = loss_value()
            t.data[idx] = orig - step
            down = loss_value()
            t.data[idx] = orig
            coords.append(Coordinate(name, tuple(int(i) for i in idx), float(analytic[idx]),
                                     (up - down) / (2 * step)))
    return GradcheckReport(coords, tolerance, time.perf_counter() - start)
