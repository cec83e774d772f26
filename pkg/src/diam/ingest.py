"""CSV transaction logs and label files to :class:`Multigraph` / :class:`LabelSet`.

Edge schemas (UTF-8 CSV with header):

``ethereum``
    ``src,dst,timestamp,amount[,extra_1..extra_k]`` -- one edge per row,
    attributes ``[amount, timestamp, extra...]``.
``bitcoin``
    ``tx_id,senders,receivers,timestamp[,extra_1..extra_k]`` where senders and
    receivers are ``addr:amount`` lists joined by ``|``.  Every (sender,
    receiver) pair becomes an edge with attributes ``[sent amount, received
    amount, timestamp, extra...]``.

Node string ids become dense integers in order of first appearance.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .graph import GraphError, LabelSet, Multigraph

ETHEREUM_HEADER = ["src", "dst", "timestamp", "amount"]
BITCOIN_HEADER = ["tx_id", "senders", "receivers", "timestamp"]
SPLITS = ("train", "val", "test")


class DataError(ValueError):
    """Malformed input file; the message names the file and line."""


class NodeIds:
    """Bidirectional string id <-> dense integer map, first appearance order."""

    def __init__(self, names=()):
        self.names = []
        self.index = {}
        for name in names:
            self.add(name)

    def add(self, name):
        idx = self.index.get(name)
        if idx is None:
            idx = self.index[name] = len(self.names)
            self.names.append(name)
        return idx

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name):
        return self.index[name]

    def __contains__(self, name):
        return name in self.index

    def name(self, idx):
        return self.names[idx]


@dataclass(frozen=True)
class SplitAssignment:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int = 0

    def __post_init__(self):
        for part in SPLITS:
            object.__setattr__(self, part, np.sort(np.asarray(getattr(self, part), dtype=np.int64)))
        seen = np.concatenate([self.train, self.val, self.test])
        if len(np.unique(seen)) != len(seen):
            raise ValueError("split parts overlap")

    def part(self, name):
        if name not in SPLITS:
            raise KeyError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)


def _check_header(header, expected, path):
    if header[:len(expected)] != expected:
        raise DataError(f"{path}: header {header} does not start with {expected}")
    extras = header[len(expected):]
    for i, col in enumerate(extras, start=1):
        if col != f"extra_{i}":
            raise DataError(f"{path}: unexpected column {col!r} (expected extra_{i})")
    return len(extras)


def _float(text, path, line, what):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: bad {what} {text!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{path}:{line}: non-finite {what}")
    return value


def _parties(text, path, line):
    out = []
    for item in text.split("|"):
        addr, sep, amount = item.rpartition(":")
        if not sep or not addr:
            raise DataError(f"{path}:{line}: malformed party {item!r} (want addr:amount)")
        out.append((addr, _float(amount, path, line, "amount")))
    return out


def detect_schema(path):
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header[:4] == ETHEREUM_HEADER:
        return "ethereum"
    if header[:4] == BITCOIN_HEADER:
        return "bitcoin"
    raise DataError(f"{path}: unrecognised header {header}")


def load_edges(path, schema=None, ids=None):
    """Parse an edge file; returns ``(graph, ids)``.

    ``ids`` may be an existing :class:`NodeIds` to extend.
    """
    schema = schema or detect_schema(path)
    if schema not in ("ethereum", "bitcoin"):
        raise ValueError(f"unknown schema {schema!r}")
    ids = NodeIds() if ids is None else ids
    src, dst, ts, attrs = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file (missing header)")
        base = ETHEREUM_HEADER if schema == "ethereum" else BITCOIN_HEADER
        k = _check_header(header, base, path)
        width = len(base) + k
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}:{line}: {len(row)} fields, expected {width}")
            t = _float(row[3] if schema == "bitcoin" else row[2], path, line, "timestamp")
            extra = [_float(x, path, line, f"extra_{i}") for i, x in enumerate(row[len(base):], 1)]
            if schema == "ethereum":
                s, d = ids.add(row[0]), ids.add(row[1])
                src.append(s)
                dst.append(d)
                ts.append(t)
                attrs.append([_float(row[3], path, line, "amount"), t] + extra)
            else:
                senders = _parties(row[1], path, line)
                receivers = _parties(row[2], path, line)
                for s_name, sent in senders:
                    s = ids.add(s_name)
                    for r_name, received in receivers:
                        src.append(s)
                        dst.append(ids.add(r_name))
                        ts.append(t)
                        attrs.append([sent, received, t] + extra)
    d = (2 if schema == "ethereum" else 3) + k
    attrs = np.array(attrs, dtype=np.float64).reshape(-1, d)
    try:
        g = Multigraph.from_arrays(len(ids), src, dst, ts, attrs)
    except GraphError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return g, ids


def _num(x):
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 2 ** 53 else repr(x)


def write_edges(g, path, ids=None):
    """Write ``g`` in the ethereum schema (attrs must be ``[amount, timestamp, extra...]``)."""
    if g.attr_dim < 2 or not np.array_equal(g.attrs[:, 1], g.timestamp):
        raise ValueError("graph attributes are not in [amount, timestamp, ...] layout")
    name = (lambda v: ids.name(v)) if ids is not None else str
    k = g.attr_dim - 2
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ETHEREUM_HEADER + [f"extra_{i}" for i in range(1, k + 1)])
        for e in range(g.edge_count):
            a = g.attrs[e]
            writer.writerow([name(int(g.src[e])), name(int(g.dst[e])), _num(g.timestamp[e]),
                             repr(float(a[0]))] + [repr(float(x)) for x in a[2:]])


def load_labels(path, ids):
    """Parse ``node,label`` rows; node names are resolved through ``ids``."""
    mapping = {}
    unknown = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node", "label"]:
            raise DataError(f"{path}: header must be node,label (got {header})")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{line}: expected 2 fields")
            node, label = row
            if label not in ("0", "1"):
                raise DataError(f"{path}:{line}: label {label!r} not in {{0,1}}")
            if node not in ids:
                unknown.append(node)
                continue
            v, y = ids[node], int(label)
            if mapping.setdefault(v, y) != y:
                raise DataError(f"{path}:{line}: conflicting labels for node {node!r}")
    if unknown:
        raise DataError(f"{path}: unknown node ids {unknown[:20]}"
                        + (f" (+{len(unknown) - 20} more)" if len(unknown) > 20 else ""))
    return LabelSet.from_mapping(mapping)


def write_labels(labels, path, ids=None):
    name = (lambda v: ids.name(v)) if ids is not None else str
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "label"])
        for v, y in zip(labels.nodes.tolist(), labels.labels.tolist()):
            writer.writerow([name(v), y])


def split(labels, seed=0):
    """Stratified 2:1:1 train/val/test split; per class, remainders go to train."""
    rng = np.random.default_rng(seed)
    parts = {name: [] for name in SPLITS}
    for cls in (0, 1):
        members = labels.nodes[labels.labels == cls]
        if len(members) == 0:
            raise ValueError(f"class {cls} has no labeled nodes")
        members = rng.permutation(members)
        q = len(members) // 4
        parts["val"].append(members[:q])
        parts["test"].append(members[q:2 * q])
        parts["train"].append(members[2 * q:])
    return SplitAssignment(*(np.concatenate(parts[name]) for name in SPLITS), seed=seed)


def subsample_illicit(assignment, labels, ratio, seed=0):
    """Drop training illicit nodes until illicit/(illicit+normal) in train is about ``ratio``."""
    y = labels.label_of(assignment.train)
    illicit, normal = assignment.train[y == 1], assignment.train[y == 0]
    current = len(illicit) / len(assignment.train)
    if not 0 < ratio <= current + 1e-12:
        raise ValueError(f"illicit ratio {ratio} infeasible (training fraction is {current:.4f})")
    keep = min(len(illicit), max(1, int(round(ratio * len(normal) / (1.0 - ratio)))))
    if keep == len(illicit):
        return assignment
    kept = np.random.default_rng(seed).choice(illicit, size=keep, replace=False)
    return SplitAssignment(np.concatenate([normal, kept]), assignment.val, assignment.test,
                           assignment.seed)


def write_split(assignment, path, ids=None):
    name = (lambda v: ids.name(v)) if ids is not None else str
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "split"])
        for part in SPLITS:
            for v in getattr(assignment, part).tolist():
                writer.writerow([name(v), part])


def load_split(path, ids):
    parts = {name: [] for name in SPLITS}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["node", "split"]:
            raise DataError(f"{path}: header must be node,split")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or row[1] not in parts:
                raise DataError(f"{path}:{line}: malformed split row {row}")
            if row[0] not in ids:
                raise DataError(f"{path}:{line}: unknown node {row[0]!r}")
            parts[row[1]].append(ids[row[0]])
    try:
        return SplitAssignment(*(parts[name] for name in SPLITS))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
