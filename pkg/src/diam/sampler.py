"""Fixed fan-out L-hop neighbourhood sampling over both edge directions.

Sampling is counter-based: every candidate edge gets a 64-bit key hashed from
``(seed, hop, direction, edge id)`` and each centre keeps its ``fanout``
smallest keys.  That is uniform sampling without replacement, with parallel
edges as distinct units, and it does not depend on iteration order.
"""

from dataclasses import dataclass

import numpy as np

from ._seeding import derive_seed, splitmix64

IN, OUT = 0, 1


@dataclass(frozen=True)
class Hop:
    """Sampled edges of one hop, in block-local node indices.

    ``direction == IN`` means the edge runs neighbor -> center.
    """

    center: np.ndarray
    neighbor: np.ndarray
    edge: np.ndarray
    direction: np.ndarray

    def __len__(self):
        return len(self.edge)


@dataclass(frozen=True)
class Block:
    """Targets plus their sampled L-hop closure.

    ``nodes`` lists global ids, targets first, then nodes in order of first
    discovery.  Hop ``k`` (0-based, hop 1 = immediate neighbours of the
    targets) has centres ``nodes[:sizes[k]]`` and neighbours inside
    ``nodes[:sizes[k + 1]]``, so centres of hop ``k`` are a prefix of the
    centres of hop ``k + 1``.
    """

    targets: np.ndarray
    nodes: np.ndarray
    sizes: tuple
    hops: tuple

    @property
    def depth(self):
        return len(self.hops)


def _gather(offsets, edges, centers):
    starts = offsets[centers]
    counts = offsets[centers + 1] - starts
    owner = np.repeat(np.arange(len(centers), dtype=np.int64), counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    idx = np.arange(counts.sum(), dtype=np.int64) - first + np.repeat(starts, counts)
    return owner, edges[idx], counts


def _choose(owner, eids, counts, fanout, salt):
    if fanout is None or counts.max(initial=0) <= fanout:
        return owner, eids
    keys = splitmix64(splitmix64(eids.astype(np.uint64)) ^ np.uint64(salt))
    order = np.lexsort((keys, owner))
    group_start = np.repeat(np.cumsum(counts) - counts, counts)
    keep = order[(np.arange(len(order)) - group_start) < fanout]
    keep = keep[np.lexsort((eids[keep], owner[keep]))]
    return owner[keep], eids[keep]


def sample_block(g, targets, fanouts, seed=0):
    """Sample ``len(fanouts)`` hops around ``targets``.

    ``fanouts[k]`` bounds the edges kept per centre and direction at hop
    ``k + 1``; ``None`` keeps every edge (exact full-neighbourhood limit).
    """
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if len(targets) == 0:
        raise ValueError("cannot sample a block for zero targets")
    if any(f is not None and f < 1 for f in fanouts):
        raise ValueError("fanouts must be at least 1")
    if targets.min() < 0 or targets.max() >= g.node_count:
        raise IndexError("target node out of range")
    _, first = np.unique(targets, return_index=True)
    nodes = targets[np.sort(first)]
    local = np.full(g.node_count, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    sizes = [len(nodes)]
    hops = []
    for k, fanout in enumerate(fanouts):
        centers = nodes[:sizes[k]]
        parts = []
        for direction, offsets, edges, far in ((IN, g.in_offsets, g.in_edges, g.src),
                                               (OUT, g.out_offsets, g.out_edges, g.dst)):
            owner, eids, counts = _gather(offsets, edges, centers)
            owner, eids = _choose(owner, eids, counts, fanout, derive_seed(seed, "hop", k, direction))
            parts.append((owner, eids, np.full(len(eids), direction, dtype=np.int8), far[eids]))
        owner, eids, dirs, nbr = (np.concatenate(p) for p in zip(*parts))
        fresh = nbr[local[nbr] < 0]
        if len(fresh):
            _, first = np.unique(fresh, return_index=True)
            fresh = fresh[np.sort(first)]
            local[fresh] = np.arange(len(nodes), len(nodes) + len(fresh))
            nodes = np.concatenate([nodes, fresh])
        sizes.append(len(nodes))
        hops.append(Hop(owner, local[nbr], eids, dirs))
    return Block(targets=targets, nodes=nodes, sizes=tuple(sizes), hops=tuple(hops))


def full_block(g, targets, depth):
    """Block with every edge kept at every hop."""
    return sample_block(g, targets, [None] * depth)


def batches(nodes, batch_size, rng):
    """Random permutation of ``nodes`` cut into consecutive chunks of ``batch_size``."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    perm = rng.permutation(np.asarray(nodes, dtype=np.int64))
    return [perm[i:i + batch_size] for i in range(0, len(perm), batch_size)]
