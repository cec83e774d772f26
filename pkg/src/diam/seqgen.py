"""Chronological per-node edge-attribute sequences for the sequence encoder.

For each node the outgoing (resp. incoming) edges are sorted by
``(timestamp, edge id)`` and only the ``t_max`` most recent are kept.  A
direction with no edges is replaced by a single self-loop record whose
attribute vector is all zeros.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EdgeSequences:
    node: int
    x_in: np.ndarray        # (T_in, d), oldest first
    x_out: np.ndarray       # (T_out, d), oldest first
    in_edges: np.ndarray    # edge ids behind x_in; -1 marks the self-loop pad
    out_edges: np.ndarray


def _ordered(g, eids, t_max):
    if len(eids) == 0:
        return np.zeros((1, g.attr_dim)), np.array([-1], dtype=np.int64)
    order = np.lexsort((eids, g.timestamp[eids]))
    eids = eids[order][-t_max:]
    return g.attrs[eids], eids


def build_sequences(g, v, t_max):
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    x_in, in_e = _ordered(g, g.in_edge_ids(v), t_max)
    x_out, out_e = _ordered(g, g.out_edge_ids(v), t_max)
    return EdgeSequences(int(v), x_in, x_out, in_e, out_e)


def build_all(g, t_max, nodes=None):
    """Map node -> :class:`EdgeSequences` for ``nodes`` (default: every node)."""
    if nodes is None:
        nodes = range(g.node_count)
    return {int(v): build_sequences(g, int(v), t_max) for v in nodes}


class SequenceBank:
    """Padded sequences for every node of a graph, built once per run.

    ``out_attrs[v, :out_len[v]]`` is node ``v``'s outgoing sequence (oldest
    first); positions past the length are zero.  Same layout for ``in``.
    """

    def __init__(self, g, t_max, attrs=None):
        if t_max < 1:
            raise ValueError("t_max must be at least 1")
        self.t_max = int(t_max)
        self.node_count = g.node_count
        attrs = g.attrs if attrs is None else np.asarray(attrs, dtype=np.float64)
        self.attr_dim = attrs.shape[1]
        self.out_attrs, self.out_len = self._pack(g, g.src, attrs)
        self.in_attrs, self.in_len = self._pack(g, g.dst, attrs)

    def _pack(self, g, owner, attrs):
        n, m, T = g.node_count, g.edge_count, self.t_max
        degree = np.bincount(owner, minlength=n)
        lengths = np.maximum(np.minimum(degree, T), 1)
        width = int(lengths.max()) if n else 1
        table = np.zeros((n, width, self.attr_dim))
        if m:
            order = np.lexsort((np.arange(m), g.timestamp, owner))
            sorted_owner = owner[order]
            starts = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(degree, out=starts[1:])
            # position counted from the end of each node's run: 0 = most recent
            from_end = starts[sorted_owner + 1] - 1 - np.arange(m)
            keep = from_end < T
            rows = sorted_owner[keep]
            cols = lengths[rows] - 1 - from_end[keep]
            table[rows, cols] = attrs[order[keep]]
        table.setflags(write=False)
        lengths.setflags(write=False)
        return table, lengths

    def sequences(self, v):
        return (self.in_attrs[v, :self.in_len[v]], self.out_attrs[v, :self.out_len[v]])
