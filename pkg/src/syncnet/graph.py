"""Undirected weighted communication graphs and their spectral quantities."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ZERO_EIG_RTOL = 1e-8


class GraphError(ValueError):
    """Invalid topology or generator parameters."""


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected graph on nodes ``0..n-1`` with positive edge weights.

    Edges are stored once per pair with ``tails < heads``; the lower index is
    the tail of the fixed orientation used by the incidence matrix.
    """

    n: int
    tails: np.ndarray
    heads: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_edges(cls, n, edges) -> "Topology":
        """Build from ``(i, j)`` or ``(i, j, weight)`` tuples in any order."""
        n = int(n)
        if n < 1:
            raise GraphError(f"node count must be positive, got {n}")
        seen = {}
        for edge in edges:
            if len(edge) == 2:
                i, j = edge
                w = 1.0
            else:
                i, j, w = edge
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            if not w > 0 or not math.isfinite(w):
                raise GraphError(f"edge ({i}, {j}) has non-positive weight {w}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen[key] = w
        keys = sorted(seen)
        tails = np.array([k[0] for k in keys], dtype=np.int64)
        heads = np.array([k[1] for k in keys], dtype=np.int64)
        weights = np.array([seen[k] for k in keys], dtype=np.float64)
        for arr in (tails, heads, weights):
            arr.setflags(write=False)
        return cls(n, tails, heads, weights)

    @property
    def n_edges(self) -> int:
        return int(self.tails.shape[0])

    def edges(self):
        return [(int(i), int(j), float(w))
                for i, j, w in zip(self.tails, self.heads, self.weights)]

    def degrees(self) -> np.ndarray:
        """Weighted degree of every node."""
        return (np.bincount(self.tails, self.weights, self.n)
                + np.bincount(self.heads, self.weights, self.n))

    def neighbor_counts(self) -> np.ndarray:
        return (np.bincount(self.tails, minlength=self.n)
                + np.bincount(self.heads, minlength=self.n))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.tails, self.heads] = self.weights
        a[self.heads, self.tails] = self.weights
        return a

    def with_weights(self, weights) -> "Topology":
        weights = np.asarray(weights, dtype=float)
        return Topology.from_edges(
            self.n, zip(self.tails, self.heads, weights))

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.tails, other.tails)
                and np.array_equal(self.heads, other.heads)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.n, self.tails.tobytes(), self.heads.tobytes(),
                     self.weights.tobytes()))


def incidence(topology: Topology) -> np.ndarray:
    """N x E incidence matrix: -1 at the tail (lower index), +1 at the head."""
    b = np.zeros((topology.n, topology.n_edges), dtype=np.int64)
    cols = np.arange(topology.n_edges)
    b[topology.tails, cols] = -1
    b[topology.heads, cols] = 1
    return b


def weighted_laplacian(topology: Topology, weights=None) -> np.ndarray:
    """Weighted Laplacian ``B diag(w) B^T``, assembled edge by edge.

    ``weights`` overrides the topology's edge weights (same edge order).
    """
    w = topology.weights if weights is None else np.asarray(weights, dtype=float)
    n = topology.n
    lap = np.zeros((n, n))
    t, h = topology.tails, topology.heads
    np.add.at(lap, (t, t), w)
    np.add.at(lap, (h, h), w)
    np.add.at(lap, (t, h), -w)
    np.add.at(lap, (h, t), -w)
    return lap


def laplacian_spectrum(lap: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(lap)


def _zero_tol(eigs) -> float:
    return ZERO_EIG_RTOL * max(1.0, float(eigs[-1]))


def algebraic_connectivity(lap: np.ndarray) -> float:
    """Second smallest Laplacian eigenvalue (clamped at 0)."""
    lap = np.asarray(lap, dtype=float)
    if lap.shape[0] < 2:
        raise GraphError("algebraic connectivity needs at least 2 nodes")
    eigs = laplacian_spectrum(lap)
    return max(float(eigs[1]), 0.0)


def zero_eigenvalue_count(lap: np.ndarray) -> int:
    eigs = laplacian_spectrum(np.asarray(lap, dtype=float))
    return int(np.sum(eigs < _zero_tol(eigs)))


def max_degree(topology: Topology) -> float:
    return float(topology.degrees().max()) if topology.n_edges else 0.0


def min_degree(topology: Topology) -> float:
    return float(topology.degrees().min()) if topology.n_edges else 0.0


def connected_components(topology: Topology) -> list[list[int]]:
    adj = [[] for _ in range(topology.n)]
    for i, j in zip(topology.tails, topology.heads):
        adj[i].append(int(j))
        adj[j].append(int(i))
    label = [-1] * topology.n
    comps = []
    for start in range(topology.n):
        if label[start] >= 0:
            continue
        label[start] = len(comps)
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if label[v] < 0:
                    label[v] = label[start]
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def is_connected(topology: Topology) -> bool:
    return len(connected_components(topology)) == 1


def generalized_inverse(lap: np.ndarray) -> np.ndarray:
    """Pseudo-inverse from the N-1 positive eigenpairs of a connected Laplacian."""
    lap = np.asarray(lap, dtype=float)
    eigs, vecs = np.linalg.eigh(lap)
    positive = eigs >= _zero_tol(eigs)
    if positive.sum() != lap.shape[0] - 1:
        raise GraphError(
            f"Laplacian has rank {int(positive.sum())}, expected {lap.shape[0] - 1}"
            " (graph not connected)")
    u = vecs[:, positive]
    return (u / eigs[positive]) @ u.T


# ----------------------------------------------------------------- generators

def gen_ring(n: int, d: int) -> Topology:
    """Regular ring: node i linked to i +- 1, ..., i +- d/2 (mod n)."""
    if d <= 0 or d % 2 or d >= n:
        raise GraphError(f"ring degree must be even with 0 < d < n, got d={d}, n={n}")
    edges = [(i, (i + k) % n) for i in range(n) for k in range(1, d // 2 + 1)]
    return Topology.from_edges(n, edges)


def grid_positions(rows: int, cols: int) -> np.ndarray:
    """Integer (row, col) coordinates, node index ``r * cols + c``."""
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.column_stack([r, c]).astype(float)


def gen_grid(rows: int, cols: int, radius: float) -> Topology:
    """Unit-spaced planar grid; unit-weight edges between nodes within ``radius``."""
    if rows < 2 or cols < 2:
        raise GraphError(f"grid needs rows, cols >= 2, got {rows}x{cols}")
    pos = grid_positions(rows, cols)
    reach = int(math.floor(radius + 1e-9))
    r2 = radius * radius + 1e-9
    offsets = [(dr, dc) for dr in range(0, reach + 1) for dc in range(-reach, reach + 1)
               if (dr > 0 or dc > 0) and dr * dr + dc * dc <= r2]
    edges = []
    for node in range(rows * cols):
        r, c = int(pos[node, 0]), int(pos[node, 1])
        for dr, dc in offsets:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                edges.append((node, rr * cols + cc))
    topo = Topology.from_edges(rows * cols, edges)
    if not is_connected(topo):
        raise GraphError(f"radius {radius} leaves the {rows}x{cols} grid disconnected")
    return topo


def gen_scale_free(n: int, m0: int, m: int, seed: int) -> Topology:
    """Barabasi-Albert growth from a complete graph on ``m0`` nodes.

    Each new node attaches to ``m`` distinct existing nodes drawn with
    probability proportional to their current degree.
    """
    if not (1 <= m <= m0 <= n) or m0 < 2:
        raise GraphError(f"need 1 <= m <= m0 <= n and m0 >= 2, got n={n}, m0={m0}, m={m}")
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i in range(m0) for j in range(i + 1, m0)]
    deg = np.zeros(n)
    deg[:m0] = m0 - 1
    for new in range(m0, n):
        p = deg[:new] / deg[:new].sum()
        targets = rng.choice(new, size=m, replace=False, p=p)
        for t in targets:
            edges.append((int(t), new))
            deg[t] += 1
        deg[new] = m
    return Topology.from_edges(n, edges)


def gen_erdos_renyi(n: int, p: float, seed: int, max_tries: int = 1000) -> Topology:
    """Connected G(n, p) sample (rejection on connectivity)."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    for _ in range(max_tries):
        keep = rng.random(iu.shape[0]) < p
        topo = Topology.from_edges(n, zip(iu[keep], ju[keep]))
        if topo.n_edges and is_connected(topo):
            return topo
    raise GraphError(f"no connected G({n}, {p}) sample in {max_tries} tries")


def ring_lambda2(n: int, d: int) -> float:
    """Closed-form algebraic connectivity of the unweighted degree-d ring."""
    i = np.arange(1, d // 2 + 1)
    return float(4.0 * np.sum(np.sin(np.pi * i / n) ** 2))


def ring_lambda2_approx(n: int, d: int) -> float:
    return math.pi ** 2 * d * (d + 1) * (d + 2) / (6.0 * n ** 2)


def fiedler_lower_bound(topology: Topology) -> float:
    """``2 (1 - cos(pi/N)) * min degree``.

    Fiedler's inequality is stated for edge connectivity; the minimum degree
    version can fail on graphs with a bottleneck (e.g. barbells).
    """
    return 2.0 * (1.0 - math.cos(math.pi / topology.n)) * min_degree(topology)


# ------------------------------------------------------------- serialization

def write_edge_list(topology: Topology, path) -> None:
    lines = [f"{topology.n} {topology.n_edges}"]
    lines += [f"{i} {j} {w!r}" for i, j, w in topology.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> Topology:
    rows = [ln.split() for ln in Path(path).read_text().splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise GraphError(f"{path}: empty edge list")
    n, e = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != e:
        raise GraphError(f"{path}: header declares {e} edges, found {len(body)}")
    return Topology.from_edges(n, [(int(r[0]), int(r[1]), float(r[2])) for r in body])
