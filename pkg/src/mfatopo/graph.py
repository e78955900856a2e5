"""Extracted-descriptor graphs and their evaluation metrics.

A :class:`TopoGraph` is the final product of every extraction: vertices with
positions/field values/kind flags, undirected edges, and (for ridge-valley
graphs) per-vertex arc-class labels. Metrics follow the usual conventions:
the number of connected components, the graph cycle rank
``loops = E - V + CC``, and residual statistics |field - isovalue| over all
vertices.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

KIND_REGULAR = 0
KIND_MINIMUM = 1
KIND_MAXIMUM = 2
KIND_SADDLE = 3
KIND_DEGENERATE = 4

KIND_NAMES = {
    KIND_REGULAR: "regular",
    KIND_MINIMUM: "minimum",
    KIND_MAXIMUM: "maximum",
    KIND_SADDLE: "saddle",
    KIND_DEGENERATE: "degenerate",
}
KIND_CODES = {name: code for code, name in KIND_NAMES.items()}

LABEL_UNCLASSIFIED = 0
LABEL_RIDGE = 1
LABEL_VALLEY = 2
LABEL_PSEUDO_RIDGE = 3
LABEL_PSEUDO_VALLEY = 4

LABEL_NAMES = {
    LABEL_UNCLASSIFIED: "unclassified",
    LABEL_RIDGE: "ridge",
    LABEL_VALLEY: "valley",
    LABEL_PSEUDO_RIDGE: "pseudo-ridge",
    LABEL_PSEUDO_VALLEY: "pseudo-valley",
}
LABEL_CODES = {name: code for code, name in LABEL_NAMES.items()}


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int8)

    def find(self, i: int) -> int:
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def n_components(self) -> int:
        return int(sum(1 for i in range(len(self.parent))
                       if self.find(i) == i))


@dataclass(eq=False)
class TopoGraph:
    """Vertices + edges of one extracted descriptor."""

    positions: np.ndarray                 # (n, 2)
    values: np.ndarray                    # (n,)
    kinds: np.ndarray                     # (n,) int8, KIND_* codes
    edges: np.ndarray                     # (m, 2) int64
    labels: np.ndarray | None = None      # (n,) int8, LABEL_* codes

    @classmethod
    def empty(cls) -> "TopoGraph":
        return cls(np.empty((0, 2)), np.empty(0), np.empty(0, dtype=np.int8),
                   np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        self.kinds = np.asarray(self.kinds, dtype=np.int8).reshape(-1)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)
        self.validate()

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def validate(self) -> None:
        n = self.n_vertices
        if self.values.shape[0] != n or self.kinds.shape[0] != n:
            raise ValueError("vertex attribute length mismatch")
        if self.labels is not None and self.labels.shape[0] != n:
            raise ValueError("label length mismatch")
        if self.n_edges:
            if self.edges.min() < 0 or self.edges.max() >= n:
                raise ValueError("edge index out of range")
            if np.any(self.edges[:, 0] == self.edges[:, 1]):
                raise ValueError("self edges are not allowed")
            canon = np.sort(self.edges, axis=1)
            if np.unique(canon, axis=0).shape[0] != self.n_edges:
                raise ValueError("duplicate edges are not allowed")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        if self.n_edges:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def save(self, path) -> None:
        doc = {
            "nodes": [
                {"id": i,
                 "x1": float(self.positions[i, 0]),
                 "x2": float(self.positions[i, 1]),
                 "value": float(self.values[i]),
                 "kind": KIND_NAMES[int(self.kinds[i])]}
                for i in range(self.n_vertices)
            ],
            "edges": [[int(a), int(b)] for a, b in self.edges],
            "arc_labels": (
                None if self.labels is None
                else [LABEL_NAMES[int(c)] for c in self.labels]),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    def save_segments_csv(self, path) -> None:
        """Per-edge segment list: x1a,x2a,x1b,x2b,label."""
        with open(path, "w") as fh:
            fh.write("x1a,x2a,x1b,x2b,label\n")
            for a, b in self.edges:
                label = ""
                if self.labels is not None:
                    la, lb = int(self.labels[a]), int(self.labels[b])
                    code = la if la != LABEL_UNCLASSIFIED else lb
                    label = LABEL_NAMES[code]
                fh.write(f"{self.positions[a, 0]!r},{self.positions[a, 1]!r},"
                         f"{self.positions[b, 0]!r},{self.positions[b, 1]!r},"
                         f"{label}\n")


def load_graph(path) -> TopoGraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid graph file {path}",
                             context=f"line {exc.lineno}") from exc
    try:
        nodes = doc["nodes"]
        positions = np.array([[n["x1"], n["x2"]] for n in nodes],
                             dtype=np.float64).reshape(-1, 2)
        values = np.array([n["value"] for n in nodes], dtype=np.float64)
        kinds = np.array([KIND_CODES[n["kind"]] for n in nodes],
                         dtype=np.int8)
        edges = np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2)
        labels = doc.get("arc_labels")
        if labels is not None:
            labels = np.array([LABEL_CODES[c] for c in labels], dtype=np.int8)
    except (KeyError, ValueError) as exc:
        raise ParseError(f"inconsistent graph file: {exc}") from exc
    return TopoGraph(positions, values, kinds, edges, labels)


# -- metrics -----------------------------------------------------------------

def components(graph: TopoGraph) -> int:
    """Number of connected components (isolated vertices count)."""
    if graph.n_vertices == 0:
        return 0
    uf = UnionFind(graph.n_vertices)
    for a, b in graph.edges:
        uf.union(int(a), int(b))
    return uf.n_components()


def loops(graph: TopoGraph) -> int:
    """Cycle rank E - V + CC (the number of independent loops)."""
    if graph.n_vertices == 0:
        return 0
    return graph.n_edges - graph.n_vertices + components(graph)


def residuals(graph: TopoGraph, field, isovalue: float) -> tuple[float, float]:
    """(max, mean) of |field - isovalue| over all graph vertices."""
    if graph.n_vertices == 0:
        return 0.0, 0.0
    err = np.abs(field.value(graph.positions) - isovalue)
    return float(err.max()), float(err.mean())


@dataclass
class MetricsReport:
    """One row of quantitative evaluation for an extracted graph."""

    e_max: float
    e_avg: float
    n_loop: int
    n_cc: int
    n_vertices: int
    n_edges: int
    wall_time: float = 0.0
    task: str = ""
    isovalue: float | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.e_avg > self.e_max + 1e-300:
            raise ValueError("e_avg cannot exceed e_max")
        if self.n_loop < 0:
            raise ValueError("negative loop count")

    @classmethod
    def from_graph(cls, graph: TopoGraph, field, isovalue: float,
                   wall_time: float = 0.0, task: str = "",
                   params: dict | None = None) -> "MetricsReport":
        e_max, e_avg = residuals(graph, field, isovalue)
        n_cc = components(graph)
        return cls(e_max=e_max, e_avg=e_avg,
                   n_loop=graph.n_edges - graph.n_vertices + n_cc,
                   n_cc=n_cc, n_vertices=graph.n_vertices,
                   n_edges=graph.n_edges, wall_time=wall_time, task=task,
                   isovalue=isovalue, params=dict(params or {}))

    CSV_HEADER = ("task,isovalue,e_max,e_avg,n_loop,n_cc,"
                  "n_vertices,n_edges,wall_time_s,params")

    def to_csv_row(self) -> str:
        iso = "" if self.isovalue is None else repr(float(self.isovalue))
        params = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return (f"{self.task},{iso},{self.e_max:.6e},{self.e_avg:.6e},"
                f"{self.n_loop},{self.n_cc},{self.n_vertices},{self.n_edges},"
                f"{self.wall_time:.4f},{params}")

    def to_json(self) -> str:
        doc = {
            "task": self.task, "isovalue": self.isovalue,
            "e_max": self.e_max, "e_avg": self.e_avg,
            "n_loop": self.n_loop, "n_cc": self.n_cc,
            "n_vertices": self.n_vertices, "n_edges": self.n_edges,
            "wall_time_s": self.wall_time, "params": self.params,
        }
        return json.dumps(doc)


class Stopwatch:
    """Wall-clock timer for the extraction phase of a command."""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
