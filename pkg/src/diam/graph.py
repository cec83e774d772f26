"""Immutable directed multigraph with per-edge attribute vectors.

Edges are stored column-wise (``src``, ``dst``, ``timestamp``, ``attrs``) and
indexed twice in CSR form, once by source and once by destination.  Parallel
edges are kept as distinct records; every neighbourhood query is a multiset.
"""

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised when edge records are inconsistent with the graph being built."""


class EdgeRecord(NamedTuple):
    src: int
    dst: int
    timestamp: float
    attrs: Sequence[float]


@dataclass(frozen=True)
class LabelSet:
    """Observed node labels (1 = illicit, 0 = normal)."""

    nodes: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int8)
        if nodes.shape != labels.shape or nodes.ndim != 1:
            raise ValueError("nodes and labels must be 1-D arrays of equal length")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if len(np.unique(nodes)) != len(nodes):
            raise ValueError("duplicate node in label set")
        order = np.argsort(nodes, kind="stable")
        object.__setattr__(self, "nodes", _frozen(nodes[order]))
        object.__setattr__(self, "labels", _frozen(labels[order]))

    @classmethod
    def from_mapping(cls, mapping):
        items = sorted(mapping.items())
        return cls(np.array([k for k, _ in items], dtype=np.int64),
                   np.array([v for _, v in items], dtype=np.int8))

    def __len__(self):
        return len(self.nodes)

    def as_dict(self):
        return dict(zip(self.nodes.tolist(), self.labels.tolist()))

    def label_of(self, nodes):
        """Vectorised lookup; raises KeyError for unlabeled nodes."""
        nodes = np.asarray(nodes, dtype=np.int64)
        pos = np.searchsorted(self.nodes, nodes)
        pos = np.minimum(pos, max(len(self.nodes) - 1, 0))
        if len(self.nodes) == 0 or not np.array_equal(self.nodes[pos], nodes):
            missing = sorted(set(nodes.tolist()) - set(self.nodes.tolist()))
            raise KeyError(f"unlabeled nodes: {missing[:10]}")
        return self.labels[pos]

    def counts(self):
        n_illicit = int(self.labels.sum())
        return {"illicit": n_illicit, "normal": len(self) - n_illicit}

    def check_range(self, node_count):
        if len(self.nodes) and (self.nodes.min() < 0 or self.nodes.max() >= node_count):
            raise GraphError(f"labeled node id out of range for a graph with {node_count} nodes")


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _csr(keys, n):
    # stable sort keeps ascending edge id inside every bucket
    order = np.argsort(keys, kind="stable")
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=offsets[1:])
    return offsets, order.astype(np.int64)


class Multigraph:
    """Directed multigraph ``G = (V, E, X_E)`` with dense node ids ``0..n-1``.

    Build with :meth:`build` (records) or :meth:`from_arrays` (columns).  The
    arrays are read-only after construction.
    """

    def __init__(self, node_count, src, dst, timestamp, attrs):
        src = np.asarray(src, dtype=np.int64).reshape(-1)
        dst = np.asarray(dst, dtype=np.int64).reshape(-1)
        timestamp = np.asarray(timestamp, dtype=np.float64).reshape(-1)
        attrs = np.asarray(attrs, dtype=np.float64)
        m = len(src)
        if attrs.ndim != 2 or attrs.shape[0] != m:
            raise GraphError(f"attrs must have shape (m, d); got {attrs.shape} for m={m}")
        if attrs.shape[1] < 1:
            raise GraphError("attribute dimension must be positive")
        if len(dst) != m or len(timestamp) != m:
            raise GraphError("src, dst and timestamp lengths differ")
        node_count = int(node_count)
        if node_count < 0:
            raise GraphError("node_count must be non-negative")
        for name, ends in (("src", src), ("dst", dst)):
            bad = np.flatnonzero((ends < 0) | (ends >= node_count))
            if len(bad):
                e = int(bad[0])
                raise GraphError(
                    f"edge {e}: {name}={int(ends[e])} out of range for {node_count} nodes")
        self.node_count = node_count
        self.src = _frozen(src)
        self.dst = _frozen(dst)
        self.timestamp = _frozen(timestamp)
        self.attrs = _frozen(attrs)
        out_off, out_edges = _csr(src, node_count)
        in_off, in_edges = _csr(dst, node_count)
        self.out_offsets = _frozen(out_off)
        self.out_edges = _frozen(out_edges)
        self.in_offsets = _frozen(in_off)
        self.in_edges = _frozen(in_edges)

    @classmethod
    def build(cls, node_count, records: Iterable[EdgeRecord], attr_dim=None):
        records = list(records)
        if attr_dim is None:
            if not records:
                raise GraphError("attr_dim is required for a graph with no edges")
            attr_dim = len(records[0][3])
        attrs = np.empty((len(records), attr_dim))
        src = np.empty(len(records), dtype=np.int64)
        dst = np.empty(len(records), dtype=np.int64)
        ts = np.empty(len(records))
        for i, rec in enumerate(records):
            s, d, t, a = rec
            if len(a) != attr_dim:
                raise GraphError(f"edge {i} ({s}->{d}): {len(a)} attributes, expected {attr_dim}")
            if not (0 <= s < node_count and 0 <= d < node_count):
                raise GraphError(f"edge {i} ({s}->{d}): endpoint out of range for {node_count} nodes")
            src[i], dst[i], ts[i] = s, d, t
            attrs[i] = a
        return cls(node_count, src, dst, ts, attrs)

    @classmethod
    def from_arrays(cls, node_count, src, dst, timestamp, attrs):
        return cls(node_count, src, dst, timestamp, attrs)

    @property
    def edge_count(self):
        return len(self.src)

    @property
    def attr_dim(self):
        return self.attrs.shape[1]

    def __repr__(self):
        return f"Multigraph(n={self.node_count}, m={self.edge_count}, d={self.attr_dim})"

    def edge(self, e):
        return EdgeRecord(int(self.src[e]), int(self.dst[e]), float(self.timestamp[e]),
                          tuple(self.attrs[e].tolist()))

    def _check_node(self, v):
        if not 0 <= v < self.node_count:
            raise IndexError(f"node {v} out of range for {self.node_count} nodes")

    def out_edge_ids(self, v):
        self._check_node(v)
        return self.out_edges[self.out_offsets[v]:self.out_offsets[v + 1]]

    def in_edge_ids(self, v):
        self._check_node(v)
        return self.in_edges[self.in_offsets[v]:self.in_offsets[v + 1]]

    def out_neighbors(self, v):
        """One ``(neighbor, edge id)`` pair per outgoing edge, ascending edge id."""
        eids = self.out_edge_ids(v)
        return list(zip(self.dst[eids].tolist(), eids.tolist()))

    def in_neighbors(self, v):
        """One ``(neighbor, edge id)`` pair per incoming edge, ascending edge id."""
        eids = self.in_edge_ids(v)
        return list(zip(self.src[eids].tolist(), eids.tolist()))

    def out_degree(self):
        return np.diff(self.out_offsets)

    def in_degree(self):
        return np.diff(self.in_offsets)

    def with_attrs(self, attrs):
        """Same topology and timestamps with replaced attribute matrix."""
        return Multigraph(self.node_count, self.src, self.dst, self.timestamp, attrs)

    def equals(self, other):
        return (self.node_count == other.node_count
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.timestamp, other.timestamp)
                and np.array_equal(self.attrs, other.attrs))


def build(node_count, records, attr_dim=None):
    return Multigraph.build(node_count, records, attr_dim)
