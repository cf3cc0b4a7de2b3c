"""Citation-network ingestion: ``.content``/``.cites`` parsing, CSR graph construction,
deterministic splits, and minority masks.
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numcore import Tensor

log = logging.getLogger(__name__)

CACHE_MAGIC = b"IGAT1"
CACHE_ENV = "IMBALGAT_CACHE_DIR"

# Class-string order behind the L0..Ln labels of the published class-distribution table.
# The percentages there only line up with the raw files under this order; lexicographic
# order does not (it would mark Genetic_Algorithms, 15% of Cora, as a minority class).
TABLE_LABEL_ORDER = {
    "cora": [
        "Neural_Networks",
        "Reinforcement_Learning",
        "Probabilistic_Methods",
        "Theory",
        "Genetic_Algorithms",
        "Case_Based",
        "Rule_Learning",
    ],
    "citeseer": ["Agents", "IR", "DB", "AI", "HCI", "ML"],
}
DEFAULT_MINORITY_LABELS = {"cora": [1, 3, 5, 6], "citeseer": [3, 4]}
TABLE_PERCENTAGES = {
    "cora": [29, 9, 16, 13, 15, 11, 7],
    "citeseer": [18, 20, 21, 8, 15, 18],
}


class DatasetError(Exception):
    """Unreadable or malformed dataset input."""


@dataclass(frozen=True, eq=False)
class GraphDataset:
    name: str
    features: np.ndarray  # (V, m), row-normalized
    labels: np.ndarray  # (V,) int64
    row_offsets: np.ndarray  # (V + 1,) int64
    col_indices: np.ndarray  # (nnz,) int64, sorted within each row
    class_names: tuple[str, ...]
    node_ids: tuple[str, ...]
    raw_edge_count: int  # distinct undirected citation pairs, self-citations excluded
    raw_edge_lines: int = 0
    skipped_edge_lines: int = 0
    fingerprint: str = field(init=False)
    slot_rows: np.ndarray = field(init=False)

    def __post_init__(self):
        for arr in (self.features, self.labels, self.row_offsets, self.col_indices):
            arr.setflags(write=False)
        h = hashlib.sha256()
        h.update(self.row_offsets.tobytes())
        h.update(self.col_indices.tobytes())
        object.__setattr__(self, "fingerprint", h.hexdigest()[:16])
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.row_offsets))
        rows.setflags(write=False)
        object.__setattr__(self, "slot_rows", rows)

    @property
    def num_nodes(self) -> int:
        return int(self.labels.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_slots(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def X(self) -> Tensor:
        return Tensor(self.features)

    def degrees(self) -> np.ndarray:
        """Segment sizes, self-loop included."""
        return np.diff(self.row_offsets)

    def segment(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def class_counts(self, nodes: np.ndarray | None = None) -> np.ndarray:
        labels = self.labels if nodes is None else self.labels[nodes]
        return np.bincount(labels, minlength=self.num_classes)

    def table_label_order(self) -> list[int]:
        """Class ids listed in published-table order (L0, L1, ...).

        Falls back to lexicographic order of the class strings for unknown datasets.
        """
        names = TABLE_LABEL_ORDER.get(self.name.lower())
        if names is None or sorted(names) != sorted(self.class_names):
            names = sorted(self.class_names)
        return [self.class_names.index(n) for n in names]


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    policy_name: str


@dataclass(frozen=True)
class MinorityMask:
    minority_classes: frozenset[int]
    minority_rows: np.ndarray
    edge_slots: np.ndarray

    @property
    def empty(self) -> bool:
        return self.edge_slots.size == 0


# --- parsing --------------------------------------------------------------------------------


def parse_content(path) -> tuple[np.ndarray, np.ndarray, dict[str, int], list[str]]:
    """Read ``<id>\\t<f_1>...\\t<f_m>\\t<class>`` lines.

    Returns the 0/1 feature matrix and label ids in file order, the node-id → row map, and the
    class strings indexed by id (ids assigned in order of first appearance).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    rows: list[list[str]] = []
    labels: list[int] = []
    id_index: dict[str, int] = {}
    class_index: dict[str, int] = {}
    width = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) < 3:
            parts = line.split()
        if len(parts) < 3:
            raise DatasetError(f"{path}:{lineno}: expected id, features and class")
        node_id, feats, cls = parts[0], parts[1:-1], parts[-1]
        if width is None:
            width = len(feats)
        elif len(feats) != width:
            raise DatasetError(f"{path}:{lineno}: {len(feats)} features, expected {width}")
        if node_id in id_index:
            raise DatasetError(f"{path}:{lineno}: duplicate node id {node_id!r}")
        id_index[node_id] = len(rows)
        rows.append(feats)
        labels.append(class_index.setdefault(cls, len(class_index)))
    if not rows:
        raise DatasetError(f"{path}: empty content file")
    try:
        features = np.array(rows, dtype=np.float64)
    except ValueError as e:
        raise DatasetError(f"{path}: non-numeric feature value ({e})") from e
    return features, np.array(labels, dtype=np.int64), id_index, list(class_index)


@dataclass
class CitesResult:
    edges: list[tuple[int, int]]
    lines: int
    skipped: int


def parse_cites(path, id_index: dict[str, int]) -> CitesResult:
    """Read ``<cited>\\t<citing>`` lines into row-index pairs; unknown ids are counted and skipped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    edges = []
    lines = skipped = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DatasetError(f"{path}:{lineno}: expected two ids, got {len(parts)} fields")
        lines += 1
        u, v = id_index.get(parts[0]), id_index.get(parts[1])
        if u is None or v is None:
            skipped += 1
            continue
        edges.append((u, v))
    if skipped:
        log.info("%s: skipped %d edge lines with unknown ids", path.name, skipped)
    return CitesResult(edges, lines, skipped)


# --- construction ---------------------------------------------------------------------------


def row_normalize(features: np.ndarray) -> np.ndarray:
    sums = features.sum(axis=1, keepdims=True)
    return np.divide(features, sums, out=np.zeros_like(features), where=sums != 0)


def build_graph(
    features: np.ndarray,
    labels: np.ndarray,
    edges,
    *,
    class_names=None,
    node_ids=None,
    name: str = "graph",
    raw_edge_lines: int | None = None,
    skipped_edge_lines: int = 0,
) -> GraphDataset:
    """Deduplicate, drop self-citations, symmetrize, add self-loops, row-normalize features."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if features.shape[0] != n:
        raise DatasetError(f"{features.shape[0]} feature rows for {n} labels")
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise DatasetError("edge endpoint out of range")
    e = e[e[:, 0] != e[:, 1]]
    und = np.unique(np.sort(e, axis=1), axis=0)
    loops = np.arange(n, dtype=np.int64)
    src = np.concatenate([und[:, 0], und[:, 1], loops])
    dst = np.concatenate([und[:, 1], und[:, 0], loops])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    if class_names is None:
        class_names = [str(c) for c in range(int(labels.max()) + 1 if n else 0)]
    if node_ids is None:
        node_ids = [str(i) for i in range(n)]
    return GraphDataset(
        name=name,
        features=row_normalize(features),
        labels=labels,
        row_offsets=offsets,
        col_indices=np.ascontiguousarray(dst),
        class_names=tuple(class_names),
        node_ids=tuple(node_ids),
        raw_edge_count=int(und.shape[0]),
        raw_edge_lines=int(len(e) if raw_edge_lines is None else raw_edge_lines),
        skipped_edge_lines=int(skipped_edge_lines),
    )


def dataset_paths(directory, name: str | None = None) -> tuple[Path, Path, str]:
    """Locate ``<name>.content`` and ``<name>.cites`` in ``directory``."""
    directory = Path(directory)
    if name is None:
        found = sorted(directory.glob("*.content"))
        if len(found) != 1:
            raise DatasetError(f"expected exactly one .content file in {directory}, found {len(found)}")
        name = found[0].stem
    content, cites = directory / f"{name}.content", directory / f"{name}.cites"
    for p in (content, cites):
        if not p.is_file():
            raise DatasetError(f"missing dataset file: {p}")
    return content, cites, name


def load_dataset(directory, name: str | None = None, cache_dir=None) -> GraphDataset:
    """Parse a dataset from text, going through the binary cache when one is configured."""
    content, cites, name = dataset_paths(directory, name)
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    cache_file = None
    if cache_dir:
        h = hashlib.sha256()
        for p in (content, cites):
            h.update(p.read_bytes())
        cache_file = Path(cache_dir) / f"{name}-{h.hexdigest()[:16]}.igat"
        if cache_file.is_file():
            try:
                return load_cache(cache_file)
            except DatasetError as e:
                log.warning("ignoring unreadable cache %s: %s", cache_file, e)
    features, labels, id_index, class_names = parse_content(content)
    cited = parse_cites(cites, id_index)
    ds = build_graph(
        features,
        labels,
        cited.edges,
        class_names=class_names,
        node_ids=list(id_index),
        name=name,
        raw_edge_lines=cited.lines,
        skipped_edge_lines=cited.skipped,
    )
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        save_cache(ds, cache_file)
    return ds


# --- binary cache ---------------------------------------------------------------------------

_ARRAYS = ("features", "labels", "row_offsets", "col_indices")


def save_cache(ds: GraphDataset, path) -> None:
    """Layout: magic, u32 header length, JSON header, then the raw little-endian arrays."""
    header = {
        "name": ds.name,
        "class_names": list(ds.class_names),
        "node_ids": list(ds.node_ids),
        "raw_edge_count": ds.raw_edge_count,
        "raw_edge_lines": ds.raw_edge_lines,
        "skipped_edge_lines": ds.skipped_edge_lines,
        "arrays": [],
    }
    blobs = []
    for key in _ARRAYS:
        arr = np.ascontiguousarray(getattr(ds, key))
        dtype = "<f8" if arr.dtype.kind == "f" else "<i8"
        blob = arr.astype(dtype).tobytes()
        header["arrays"].append({"name": key, "dtype": dtype, "shape": list(arr.shape), "nbytes": len(blob)})
        blobs.append(blob)
    hbytes = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<I", len(hbytes)))
        f.write(hbytes)
        for blob in blobs:
            f.write(blob)


def load_cache(path) -> GraphDataset:
    raw = Path(path).read_bytes()
    if raw[: len(CACHE_MAGIC)] != CACHE_MAGIC:
        raise DatasetError(f"{path}: not a dataset cache (bad magic)")
    buf = io.BytesIO(raw[len(CACHE_MAGIC) :])
    try:
        (hlen,) = struct.unpack("<I", buf.read(4))
        header = json.loads(buf.read(hlen))
        arrays = {}
        for spec in header["arrays"]:
            data = buf.read(spec["nbytes"])
            if len(data) != spec["nbytes"]:
                raise DatasetError(f"{path}: truncated array {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(data, dtype=spec["dtype"]).reshape(spec["shape"]).copy()
    except (struct.error, ValueError, KeyError) as e:
        raise DatasetError(f"{path}: corrupt cache ({e})") from e
    return GraphDataset(
        name=header["name"],
        class_names=tuple(header["class_names"]),
        node_ids=tuple(header["node_ids"]),
        raw_edge_count=header["raw_edge_count"],
        raw_edge_lines=header["raw_edge_lines"],
        skipped_edge_lines=header["skipped_edge_lines"],
        **arrays,
    )


# --- splits and masks -----------------------------------------------------------------------


def make_split(
    ds: GraphDataset,
    policy: str = "standard",
    seed: int = 0,
    *,
    ratio: float = 1.0,
    minority_classes=None,
    per_class: int = 20,
    val_size: int = 500,
    test_size: int = 1000,
) -> Split:
    """File-order split: first ``per_class`` nodes of each class train, last ``test_size``
    non-train nodes test, first ``val_size`` remaining nodes validation.

    ``policy="imbalanced"`` keeps only ``ceil(per_class * ratio)`` training nodes of each minority
    class. The split does not depend on ``seed``; it is accepted so every policy has one signature.
    """
    if policy not in ("standard", "imbalanced"):
        raise ValueError(f"unknown split policy {policy!r}")
    counts = ds.class_counts()
    short = [ds.class_names[c] for c in range(ds.num_classes) if counts[c] < per_class]
    if short:
        raise DatasetError(f"classes with fewer than {per_class} nodes: {short}")
    train = []
    for c in range(ds.num_classes):
        train.extend(np.flatnonzero(ds.labels == c)[:per_class].tolist())
    train_set = set(train)
    if policy == "imbalanced":
        if not 0 < ratio <= 1:
            raise ValueError(f"imbalance ratio must be in (0, 1], got {ratio}")
        if minority_classes is None:
            minority_classes = default_minority_classes(ds)
        keep = math.ceil(per_class * ratio)
        train = []
        for c in range(ds.num_classes):
            members = np.flatnonzero(ds.labels == c)[:per_class]
            train.extend(members[:keep].tolist() if c in set(minority_classes) else members.tolist())
    rest = [v for v in range(ds.num_nodes) if v not in train_set]
    if len(rest) < val_size + test_size:
        raise DatasetError(f"{len(rest)} non-train nodes, need {val_size + test_size}")
    test = rest[len(rest) - test_size :]
    val = rest[:val_size]
    name = "standard" if policy == "standard" else f"imbalanced({ratio:g})"
    return Split(
        np.array(sorted(train), dtype=np.int64),
        np.array(val, dtype=np.int64),
        np.array(test, dtype=np.int64),
        name,
    )


def default_minority_classes(ds: GraphDataset) -> list[int]:
    """Class ids for the published minority labels of known datasets, else an empty list."""
    labels = DEFAULT_MINORITY_LABELS.get(ds.name.lower())
    if labels is None:
        return []
    order = ds.table_label_order()
    return sorted(order[i] for i in labels if i < len(order))


def resolve_classes(ds: GraphDataset, spec) -> list[int]:
    """Accept class ids, class strings, or ``"L<k>"`` table labels."""
    out = set()
    order = ds.table_label_order()
    for item in spec:
        if isinstance(item, (int, np.integer)):
            cid = int(item)
        elif isinstance(item, str) and item in ds.class_names:
            cid = ds.class_names.index(item)
        elif isinstance(item, str) and item[:1] == "L" and item[1:].isdigit() and int(item[1:]) < len(order):
            cid = order[int(item[1:])]
        else:
            raise ValueError(f"unknown class {item!r}")
        if not 0 <= cid < ds.num_classes:
            raise ValueError(f"class id {cid} out of range")
        out.add(cid)
    return sorted(out)


def minority_mask(ds: GraphDataset, split: Split, minority_classes) -> MinorityMask:
    classes = frozenset(int(c) for c in minority_classes)
    bad = [c for c in classes if not 0 <= c < ds.num_classes]
    if bad:
        raise ValueError(f"minority classes out of range: {bad}")
    train = split.train_idx
    rows = np.sort(train[np.isin(ds.labels[train], list(classes))]) if classes else np.zeros(0, np.int64)
    if rows.size:
        slots = np.concatenate([np.arange(ds.row_offsets[v], ds.row_offsets[v + 1]) for v in rows])
    else:
        slots = np.zeros(0, dtype=np.int64)
    return MinorityMask(classes, rows.astype(np.int64), slots.astype(np.int64))


def describe(ds: GraphDataset) -> dict:
    """Summary used by ``inspect``: sizes, class shares in table order, label mapping."""
    counts = ds.class_counts()
    order = ds.table_label_order()
    return {
        "name": ds.name,
        "nodes": ds.num_nodes,
        "edges_raw_lines": ds.raw_edge_lines,
        "edges_skipped_lines": ds.skipped_edge_lines,
        "edges_undirected": ds.raw_edge_count,
        "features": ds.num_features,
        "classes": ds.num_classes,
        "csr_slots": ds.num_slots,
        "labels": [
            {
                "label": f"L{k}",
                "class_id": cid,
                "class_name": ds.class_names[cid],
                "count": int(counts[cid]),
                "percent": 100.0 * counts[cid] / ds.num_nodes,
            }
            for k, cid in enumerate(order)
        ],
    }
