"""Seeded transaction multigraphs with planted illicit behaviour.

Every edge is generated from its sender's side.  Each sender draws a small
contact list and then picks a contact per transaction, so repeated pairs
(parallel edges) arise naturally.

* Receivers are drawn in proportion to a class-independent Pareto
  "popularity" weight (hubs), with illicit nodes' weight multiplied by
  ``in_skew``.
* Illicit senders make ``out_skew`` times more transactions.  Each of their
  contacts is, with probability ``camouflage``, drawn like a normal sender's
  contact; otherwise it is another illicit node (a collusion ring).
* Amounts are log-normal.  Afterwards the amounts that normal nodes send to
  each illicit node are rescaled so the node's total received amount is about
  ``amount_ratio`` times its total sent amount.
* Timestamps are integer ticks uniform on ``[0, time_horizon)``; extra
  attribute columns beyond ``[amount, timestamp]`` are standard normal noise.

Edges are emitted in chronological order and nodes are numbered by first
appearance, so writing and re-reading a dataset reproduces it exactly.
"""

import os
from dataclasses import dataclass

import numpy as np

from ._seeding import rng_for
from .graph import LabelSet, Multigraph
from .ingest import NodeIds, split, write_edges, write_labels, write_split

CONTACT_FRACTION = 0.6


@dataclass(frozen=True)
class SynthConfig:
    n_normal: int = 4000
    n_illicit: int = 1000
    mean_out_degree: float = 6.0
    attr_dim: int = 2
    amount_ratio: float = 3.0
    out_skew: float = 1.5
    in_skew: float = 0.5
    camouflage: float = 0.3
    time_horizon: int = 1_000_000
    seed: int = 7

    def __post_init__(self):
        if self.n_normal < 1 or self.n_illicit < 1:
            raise ValueError("n_normal and n_illicit must both be at least 1")
        if self.amount_ratio <= 0:
            raise ValueError("amount_ratio must be positive")
        if not 0.0 <= self.camouflage <= 1.0:
            raise ValueError("camouflage must lie in [0, 1]")
        if self.attr_dim < 2:
            raise ValueError("attr_dim must be at least 2 (amount, timestamp)")
        if self.mean_out_degree <= 0 or self.out_skew <= 0 or self.in_skew <= 0:
            raise ValueError("degree parameters must be positive")
        if self.n_illicit < 2 and self.camouflage < 1.0:
            raise ValueError("a collusion ring needs at least 2 illicit nodes")


def _weighted_draw(rng, weights, size, exclude):
    cdf = np.cumsum(weights)
    picks = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
    picks = np.minimum(picks, len(weights) - 1)
    clash = picks == exclude
    while clash.any():
        picks[clash] = np.minimum(
            np.searchsorted(cdf, rng.random(clash.sum()) * cdf[-1], side="right"), len(weights) - 1)
        clash = picks == exclude
    return picks


def _generate_once(cfg, rng):
    n = cfg.n_normal + cfg.n_illicit
    is_illicit = np.zeros(n, dtype=bool)
    is_illicit[rng.choice(n, cfg.n_illicit, replace=False)] = True
    illicit_ids = np.flatnonzero(is_illicit)
    popularity = rng.pareto(2.0, n) + 1.0
    popularity[is_illicit] *= cfg.in_skew

    rate = np.where(is_illicit, cfg.mean_out_degree * cfg.out_skew, cfg.mean_out_degree)
    n_tx = np.maximum(rng.poisson(rate), 1)
    n_contacts = np.maximum(np.ceil(CONTACT_FRACTION * n_tx).astype(np.int64), 1)

    owner = np.repeat(np.arange(n), n_contacts)
    contacts = _weighted_draw(rng, popularity, len(owner), owner)
    ring = is_illicit[owner] & (rng.random(len(owner)) >= cfg.camouflage)
    if ring.any():
        # uniform over the other illicit nodes
        pos = np.searchsorted(illicit_ids, owner[ring])
        other = rng.integers(0, len(illicit_ids) - 1, ring.sum())
        contacts[ring] = illicit_ids[other + (other >= pos)]

    contact_start = np.cumsum(n_contacts) - n_contacts
    src = np.repeat(np.arange(n), n_tx)
    pick = (rng.random(len(src)) * n_contacts[src]).astype(np.int64)
    dst = contacts[contact_start[src] + pick]

    # every illicit node needs at least one normal sender to carry the amount ratio
    has_normal_in = np.zeros(n, dtype=bool)
    has_normal_in[dst[~is_illicit[src]]] = True
    lacking = illicit_ids[~has_normal_in[illicit_ids]]
    if len(lacking):
        normal_pop = np.where(is_illicit, 0.0, popularity)
        senders = _weighted_draw(rng, normal_pop, len(lacking), lacking)
        src = np.concatenate([src, senders])
        dst = np.concatenate([dst, lacking])

    m = len(src)
    amount = rng.lognormal(3.0, 1.0, m)
    out_total = np.bincount(src, weights=amount, minlength=n)
    from_normal = ~is_illicit[src] & is_illicit[dst]
    from_illicit = is_illicit[src] & is_illicit[dst]
    ring_in = np.bincount(dst[from_illicit], weights=amount[from_illicit], minlength=n)
    normal_in = np.bincount(dst[from_normal], weights=amount[from_normal], minlength=n)
    noise = rng.lognormal(-0.005, 0.1, n)
    target = cfg.amount_ratio * out_total * noise
    need = np.maximum(target - ring_in, 0.05 * target)
    factor = np.ones(n)
    factor[illicit_ids] = need[illicit_ids] / normal_in[illicit_ids]
    amount[from_normal] *= factor[dst[from_normal]]

    timestamp = rng.integers(0, cfg.time_horizon, m).astype(np.float64)
    extra = rng.standard_normal((m, cfg.attr_dim - 2))

    order = np.lexsort((np.arange(m), timestamp))
    src, dst, amount, timestamp, extra = src[order], dst[order], amount[order], timestamp[order], extra[order]
    # renumber nodes by first appearance in the chronological edge list
    seen, first = np.unique(np.column_stack([src, dst]).ravel(), return_index=True)
    relabel = np.empty(n, dtype=np.int64)
    relabel[seen[np.argsort(first)]] = np.arange(n)
    attrs = np.column_stack([amount, timestamp, extra])
    g = Multigraph.from_arrays(n, relabel[src], relabel[dst], timestamp, attrs)
    labels = np.zeros(n, dtype=np.int8)
    labels[relabel[illicit_ids]] = 1
    return g, LabelSet(np.arange(n), labels)


def has_parallel_edges(g):
    pairs = g.src * max(g.node_count, 1) + g.dst
    return len(np.unique(pairs)) < len(pairs)


def generate(config=None, max_attempts=10):
    """Return ``(graph, labels)`` for ``config`` (defaults to :class:`SynthConfig`)."""
    cfg = config or SynthConfig()
    for attempt in range(max_attempts):
        g, labels = _generate_once(cfg, rng_for(cfg.seed, "synth", attempt))
        if has_parallel_edges(g) or g.edge_count < 2:
            return g, labels
    return g, labels


def node_names(n):
    return NodeIds(f"n{i}" for i in range(n))


def write(g, labels, directory, split_seed=0):
    """Write ``edges.csv``, ``labels.csv`` and a stratified ``splits.csv`` into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    ids = node_names(g.node_count)
    paths = {name: os.path.join(directory, f"{name}.csv") for name in ("edges", "labels", "splits")}
    write_edges(g, paths["edges"], ids)
    write_labels(labels, paths["labels"], ids)
    write_split(split(labels, split_seed), paths["splits"], ids)
    return paths
