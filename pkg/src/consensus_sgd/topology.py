"""Agent communication graphs and their doubly stochastic mixing matrices.

Parameters of all agents are stored as an ``(N, d)`` array, so mixing with
``Pi (x) I_d`` is just ``pi @ theta``; the Kronecker product is never formed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TopologyError",
    "Graph",
    "InteractionMatrix",
    "build_graph",
    "make_interaction_matrix",
    "spectrum",
    "lifted_spectrum_q",
    "read_edge_list",
    "write_edge_list",
    "save_matrix_csv",
    "EXAMPLE_RING_MATRIX",
]

STOCHASTIC_TOL = 1e-12

# 5-agent sparse ring used for every experiment in the original study.
EXAMPLE_RING_MATRIX = np.array(
    [
        [0.34, 0.33, 0.0, 0.0, 0.33],
        [0.33, 0.34, 0.33, 0.0, 0.0],
        [0.0, 0.33, 0.34, 0.33, 0.0],
        [0.0, 0.0, 0.33, 0.34, 0.33],
        [0.33, 0.0, 0.0, 0.33, 0.34],
    ]
)


class TopologyError(ValueError):
    """Raised for disconnected graphs or matrices that break the mixing invariants."""


def _canonical_edge(j: int, l: int) -> tuple[int, int]:
    return (j, l) if j < l else (l, j)


@dataclass(frozen=True)
class Graph:
    """Static undirected agent graph. Self-loops are never stored."""

    n_agents: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n_agents < 2:
            raise TopologyError(f"need at least 2 agents, got {self.n_agents}")
        clean = set()
        for j, l in self.edges:
            j, l = int(j), int(l)
            if not (0 <= j < self.n_agents and 0 <= l < self.n_agents):
                raise TopologyError(f"edge ({j}, {l}) out of range for {self.n_agents} agents")
            if j != l:
                clean.add(_canonical_edge(j, l))
        object.__setattr__(self, "edges", frozenset(clean))
        unreachable = self._unreachable()
        if unreachable:
            raise TopologyError(
                f"graph is disconnected: agent(s) {sorted(unreachable)} unreachable from agent 0"
            )

    def neighbors(self, j: int) -> list[int]:
        return sorted(l if a == j else a for a, l in self.edges if j in (a, l))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_agents, dtype=int)
        for j, l in self.edges:
            deg[j] += 1
            deg[l] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n_agents, self.n_agents), dtype=bool)
        for j, l in self.edges:
            adj[j, l] = adj[l, j] = True
        return adj

    def _unreachable(self) -> set[int]:
        adj = [[] for _ in range(self.n_agents)]
        for j, l in self.edges:
            adj[j].append(l)
            adj[l].append(j)
        seen = {0}
        queue = deque([0])
        while queue:
            j = queue.popleft()
            for l in adj[j]:
                if l not in seen:
                    seen.add(l)
                    queue.append(l)
        return set(range(self.n_agents)) - seen


def build_graph(kind: str, n: int, edges=None) -> Graph:
    """Build a connected graph.

    Parameters
    ----------
    kind : {"ring", "complete", "star", "custom"}
        Topology family. ``"custom"`` takes its edges from ``edges``.
    n : int
        Number of agents, at least 2.
    edges : iterable of (int, int), optional
        Undirected edge list for ``kind="custom"``.
    """
    kind = kind.lower().replace("_", "-")
    if kind == "ring":
        pairs = [(j, (j + 1) % n) for j in range(n)]
    elif kind == "complete":
        pairs = [(j, l) for j in range(n) for l in range(j + 1, n)]
    elif kind == "star":
        pairs = [(0, l) for l in range(1, n)]
    elif kind in ("custom", "custom-edge-list"):
        if edges is None:
            raise TopologyError("custom graph requires an edge list")
        pairs = [tuple(e) for e in edges]
    else:
        raise TopologyError(f"unknown topology kind {kind!r}")
    return Graph(n, frozenset(pairs))


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric doubly stochastic mixing matrix with its sorted spectrum."""

    pi: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.pi.setflags(write=False)
        self.eigenvalues.setflags(write=False)

    @property
    def n_agents(self) -> int:
        return self.pi.shape[0]

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambdaN(self) -> float:
        return float(self.eigenvalues[-1])

    @classmethod
    def from_array(cls, pi, graph: Graph | None = None) -> "InteractionMatrix":
        pi = np.array(pi, dtype=float)
        check_interaction_matrix(pi, graph)
        return cls(pi, spectrum(pi))


def check_interaction_matrix(pi: np.ndarray, graph: Graph | None = None, tol: float = STOCHASTIC_TOL):
    """Raise TopologyError unless ``pi`` is square, symmetric, doubly stochastic
    and (when ``graph`` is given) supported on the graph's edges."""
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise TopologyError(f"interaction matrix must be square, got shape {pi.shape}")
    if np.any(pi < -tol):
        raise TopologyError("interaction matrix has negative entries")
    if np.max(np.abs(pi - pi.T)) > tol:
        raise TopologyError("interaction matrix is not symmetric")
    if np.max(np.abs(pi.sum(axis=1) - 1.0)) > tol or np.max(np.abs(pi.sum(axis=0) - 1.0)) > tol:
        raise TopologyError("interaction matrix is not doubly stochastic")
    if graph is not None:
        if graph.n_agents != pi.shape[0]:
            raise TopologyError("matrix size does not match the graph")
        off = ~graph.adjacency()
        np.fill_diagonal(off, False)
        if np.any(pi[off] != 0.0):
            raise TopologyError("interaction matrix has weight on a non-edge")


def _metropolis(graph: Graph) -> np.ndarray:
    deg = graph.degrees()
    pi = np.zeros((graph.n_agents, graph.n_agents))
    for j, l in graph.edges:
        w = 1.0 / (1.0 + max(deg[j], deg[l]))
        pi[j, l] = pi[l, j] = w
    # Diagonal computed last so each row sums to one after rounding.
    np.fill_diagonal(pi, 0.0)
    np.fill_diagonal(pi, 1.0 - pi.sum(axis=1))
    return pi


def make_interaction_matrix(graph: Graph, scheme: str = "metropolis", laziness: float = 0.5) -> InteractionMatrix:
    """Doubly stochastic interaction matrix for ``graph``.

    Parameters
    ----------
    graph : Graph
    scheme : {"metropolis", "lazy-metropolis", "example-ring"}
        ``metropolis`` uses ``1/(1+max(deg_j, deg_l))`` on edges.
        ``lazy-metropolis`` returns ``laziness*I + (1-laziness)*W`` for the
        Metropolis matrix ``W``; it shifts the spectrum towards 1, which makes
        the smallest eigenvalue positive.
        ``example-ring`` is the fixed 5-agent ring matrix (0.34 on the
        diagonal, 0.33 to each ring neighbour) and only accepts that ring.
    laziness : float
        Self-weight mixing for ``lazy-metropolis``, in [0, 1).
    """
    scheme = scheme.lower().replace("_", "-")
    if scheme == "metropolis":
        pi = _metropolis(graph)
    elif scheme == "lazy-metropolis":
        if not 0.0 <= laziness < 1.0:
            raise TopologyError(f"laziness must lie in [0, 1), got {laziness}")
        pi = laziness * np.eye(graph.n_agents) + (1.0 - laziness) * _metropolis(graph)
        np.fill_diagonal(pi, 0.0)
        np.fill_diagonal(pi, 1.0 - pi.sum(axis=1))
    elif scheme == "example-ring":
        if graph != build_graph("ring", 5):
            raise TopologyError("example-ring weights are only defined for the 5-agent ring")
        pi = EXAMPLE_RING_MATRIX.copy()
    else:
        raise TopologyError(f"unknown weight scheme {scheme!r}")
    return InteractionMatrix.from_array(pi, graph)


def spectrum(pi) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted in descending order."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
        raise TopologyError(f"expected a square matrix, got shape {pi.shape}")
    if np.max(np.abs(pi - pi.T), initial=0.0) > STOCHASTIC_TOL:
        raise TopologyError("spectrum() requires a symmetric matrix")
    return np.linalg.eigvalsh(pi)[::-1].copy()


def lifted_spectrum_q(pi, omega: float) -> tuple[float, np.ndarray]:
    """Spectrum of ``Q = (1 - omega) * Pi + omega * I``.

    Returns ``(lambda2_hat, eigenvalues)``; each eigenvalue is the affine image
    ``(1 - omega) * lam + omega`` of an eigenvalue of ``Pi``, so ordering is kept.
    """
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    eig = pi.eigenvalues if isinstance(pi, InteractionMatrix) else spectrum(pi)
    lifted = (1.0 - omega) * eig + omega
    return float(lifted[1]), lifted


def read_edge_list(path) -> Graph:
    """Read a graph from a text file: first line ``n``, then one ``j l`` pair per line."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise TopologyError(f"{path}: empty edge-list file")
    n = int(lines[0])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise TopologyError(f"{path}: malformed edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_graph("custom", n, edges)


def write_edge_list(graph: Graph, path) -> None:
    rows = [str(graph.n_agents)] + [f"{j} {l}" for j, l in sorted(graph.edges)]
    Path(path).write_text("\n".join(rows) + "\n")


def save_matrix_csv(matrix: InteractionMatrix | np.ndarray, path) -> None:
    pi = matrix.pi if isinstance(matrix, InteractionMatrix) else np.asarray(matrix)
    np.savetxt(path, pi, delimiter=",", fmt="%.17g")
