"""Topologies and the structural analysis used by the protocols and the harness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from . import kernels

ID_BITS = 128
EXHAUSTIVE_CAP = 24


class ParameterError(ValueError):
    pass


class CapacityError(RuntimeError):
    pass


class TopologyFormatError(ValueError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def random_ids(n: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Distinct uniform 128-bit identifiers; collisions are redrawn."""
    ids: list[int] = []
    seen: set[int] = set()
    while len(ids) < n:
        words = rng.integers(0, 2**64, size=(n - len(ids), 2), dtype=np.uint64)
        for hi, lo in words.tolist():
            value = (hi << 64) | lo
            if value not in seen:
                seen.add(value)
                ids.append(value)
    return tuple(ids)


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected multigraph with ports and opaque per-vertex IDs.

    ``edges`` lists every edge occurrence once, in a canonical order; port
    numbers are assigned by walking that list and appending each endpoint to
    the other's adjacency.  ``cycles`` keeps the Hamiltonian cycles of an
    H(n, d) instance when the topology came from :func:`generate_hnd`.
    """

    n: int
    d_max: int
    edges: tuple[tuple[int, int], ...]
    ids: tuple[int, ...]
    cycles: Optional[tuple[tuple[int, ...], ...]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("topology needs at least one vertex")
        if len(self.ids) != self.n:
            raise ParameterError(f"expected {self.n} ids, got {len(self.ids)}")
        if len(set(self.ids)) != self.n:
            raise ParameterError("vertex ids must be pairwise distinct")
        for value in self.ids:
            if not 0 <= value < 2**ID_BITS:
                raise ParameterError(f"id {value:#x} is not a 128-bit value")
        deg = [0] * self.n
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ParameterError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise ParameterError(f"self-loop at {u}")
            deg[u] += 1
            deg[v] += 1
        worst = max(deg, default=0)
        if worst > self.d_max:
            raise ParameterError(f"degree {worst} exceeds bound {self.d_max}")

    # -- ports ---------------------------------------------------------------

    @cached_property
    def adj(self) -> tuple[tuple[int, ...], ...]:
        """Neighbour per port for every vertex."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(a) for a in adj)

    @cached_property
    def rev_port(self) -> tuple[tuple[int, ...], ...]:
        """``rev_port[u][p]`` is the port at ``adj[u][p]`` leading back to ``u``."""
        rev: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            pu, pv = len(rev[u]), len(rev[v])
            rev[u].append(pv)
            rev[v].append(pu)
        return tuple(tuple(r) for r in rev)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def neighbors(self, v: int) -> frozenset[int]:
        return frozenset(self.adj[v])

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Multigraph CSR in port order."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.adj])
        indices = np.fromiter((x for a in self.adj for x in a), dtype=np.int64, count=int(indptr[-1]))
        return indptr, indices

    @cached_property
    def padded_adj(self) -> np.ndarray:
        """``(n, d_max)`` neighbour table, ``-1`` past each vertex's degree."""
        table = np.full((self.n, max(self.d_max, 1)), -1, dtype=np.int64)
        for v, a in enumerate(self.adj):
            table[v, :len(a)] = a
        return table

    @cached_property
    def id_index(self) -> dict[int, int]:
        return {value: v for v, value in enumerate(self.ids)}

    def is_regular(self) -> Optional[int]:
        degs = {len(a) for a in self.adj}
        return degs.pop() if len(degs) == 1 else None

    def edge_multiset(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for u, v in self.edges:
            key = (min(u, v), max(u, v))
            out[key] = out.get(key, 0) + 1
        return out


def from_adjacency(adj: Iterable[Iterable[int]], ids=None, d_max=None, seed: int = 0) -> Topology:
    """Build a topology from neighbour lists (each undirected edge listed at both ends)."""
    adj = [list(a) for a in adj]
    n = len(adj)
    remaining = [list(a) for a in adj]
    edges = []
    for u in range(n):
        for v in list(remaining[u]):
            if v < u:
                continue
            if v == u:
                raise ParameterError(f"self-loop at {u}")
            remaining[u].remove(v)
            try:
                remaining[v].remove(u)
            except ValueError:
                raise ParameterError(f"edge {u}-{v} is not listed at {v}") from None
            edges.append((u, v))
    if any(remaining[u] for u in range(n)):
        raise ParameterError("adjacency lists are not symmetric")
    return from_edges(n, edges, ids=ids, d_max=d_max, seed=seed)


def from_edges(n: int, edges, ids=None, d_max=None, seed: int = 0) -> Topology:
    edges = tuple((int(u), int(v)) for u, v in edges)
    if ids is None:
        ids = random_ids(n, _id_rng(seed))
    if d_max is None:
        deg = [0] * n
        for u, v in edges:
            deg[u] += 1
            deg[v] += 1
        d_max = max(deg, default=0)
    return Topology(n=n, d_max=d_max, edges=edges, ids=tuple(ids))


def _id_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def generate_hnd(n: int, d: int, seed: int) -> Topology:
    """Union of d/2 independent uniformly random Hamiltonian cycles on n vertices."""
    if n < 3:
        raise ParameterError(f"H(n,d) needs n >= 3, got {n}")
    if d < 2 or d % 2:
        raise ParameterError(f"H(n,d) needs an even d >= 2, got {d}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    cycles = []
    edges = []
    for _ in range(d // 2):
        perm = rng.permutation(n)
        cycles.append(tuple(int(x) for x in perm))
        nxt = np.roll(perm, -1)
        edges.extend(zip(perm.tolist(), nxt.tolist()))
    ids = random_ids(n, _id_rng(seed))
    return Topology(n=n, d_max=d, edges=tuple(edges), ids=ids, cycles=tuple(cycles))


# ---------------------------------------------------------------------------
# edge-list files
# ---------------------------------------------------------------------------

def save_topology(t: Topology, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{t.n} {t.d_max}\n")
        for u, v in t.edges:
            fh.write(f"{u} {v}\n")
        for v, value in enumerate(t.ids):
            fh.write(f"id {v} {value:032x}\n")


def load_topology(path) -> Topology:
    """Parse the edge-list format.

    Header ``n d_max`` (optionally followed by ``arcs`` when each edge is
    given as two directed arcs), then ``u v`` lines, then optional
    ``id u HEX128`` lines.  Blank lines and ``#`` comments are ignored.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = None
    arcs_mode = False
    raw_edges: list[tuple[int, int, int]] = []
    ids: dict[int, int] = {}
    deg: list[int] = []
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if header is None:
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "arcs"):
                raise TopologyFormatError(lineno, "header must be 'n d_max' or 'n d_max arcs'")
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise TopologyFormatError(lineno, "header values must be integers") from None
            if header[0] < 1 or header[1] < 0:
                raise TopologyFormatError(lineno, "header values out of range")
            arcs_mode = len(parts) == 3
            deg = [0] * header[0]
            continue
        n, d_max = header
        if parts[0] == "id":
            if len(parts) != 3:
                raise TopologyFormatError(lineno, "id lines are 'id u HEX128'")
            try:
                v, value = int(parts[1]), int(parts[2], 16)
            except ValueError:
                raise TopologyFormatError(lineno, "malformed id line") from None
            if not 0 <= v < n:
                raise TopologyFormatError(lineno, f"vertex {v} out of range")
            if not 0 <= value < 2**ID_BITS:
                raise TopologyFormatError(lineno, "id is not a 128-bit value")
            if v in ids:
                raise TopologyFormatError(lineno, f"duplicate id line for vertex {v}")
            ids[v] = value
            continue
        if len(parts) != 2:
            raise TopologyFormatError(lineno, "edge lines are 'u v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyFormatError(lineno, "edge endpoints must be integers") from None
        if not (0 <= u < n and 0 <= v < n):
            raise TopologyFormatError(lineno, f"edge ({u}, {v}) out of range")
        if u == v:
            raise TopologyFormatError(lineno, f"self-loop at {u}")
        if arcs_mode:
            deg[u] += 1
            if deg[u] > d_max:
                raise TopologyFormatError(lineno, f"degree of {u} exceeds bound {d_max}")
        else:
            deg[u] += 1
            deg[v] += 1
            if deg[u] > d_max or deg[v] > d_max:
                bad = u if deg[u] > d_max else v
                raise TopologyFormatError(lineno, f"degree of {bad} exceeds bound {d_max}")
        raw_edges.append((lineno, u, v))
    if header is None:
        raise TopologyFormatError(len(lines) or 1, "missing header")
    n, d_max = header

    if arcs_mode:
        pending: dict[tuple[int, int], list[int]] = {}
        edges = []
        for lineno, u, v in raw_edges:
            back = pending.get((v, u))
            if back:
                back.pop()
                edges.append((v, u))
            else:
                pending.setdefault((u, v), []).append(lineno)
        for (u, v), open_lines in pending.items():
            if open_lines:
                raise TopologyFormatError(open_lines[0], f"arc {u}->{v} has no matching {v}->{u}")
    else:
        edges = [(u, v) for _, u, v in raw_edges]

    if ids and len(ids) != n:
        missing = min(set(range(n)) - set(ids))
        raise TopologyFormatError(len(lines), f"id lines present but vertex {missing} has none")
    id_tuple = tuple(ids[v] for v in range(n)) if ids else random_ids(n, _id_rng(0))
    if len(set(id_tuple)) != n:
        raise TopologyFormatError(len(lines), "vertex ids are not distinct")
    return Topology(n=n, d_max=d_max, edges=tuple(edges), ids=id_tuple)


# ---------------------------------------------------------------------------
# expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionReport:
    value: Fraction
    witness: frozenset


def _as_vertex_set(t: Topology, s) -> frozenset:
    if isinstance(s, (int, np.integer)):
        s = (int(s),)
    members = frozenset(int(x) for x in s)
    for x in members:
        if not 0 <= x < t.n:
            raise ParameterError(f"vertex {x} out of range [0, {t.n})")
    return members


def out_set(t: Topology, s) -> frozenset:
    s = _as_vertex_set(t, s)
    return frozenset(x for v in s for x in t.adj[v] if x not in s)


def subset_expansion(t: Topology, s) -> Fraction:
    """|Out(s)| / |s| with Out(s) the distinct outside neighbours of s."""
    s = _as_vertex_set(t, s)
    if not s:
        raise ParameterError("subset_expansion needs a nonempty set")
    return Fraction(len(out_set(t, s)), len(s))


def _induced_scan(t: Topology, members, max_size):
    """Run the subset kernel on the subgraph induced by ``members`` (sorted)."""
    members = sorted(members)
    local = {v: i for i, v in enumerate(members)}
    indptr = [0]
    indices: list[int] = []
    for v in members:
        nbrs = sorted({local[x] for x in t.adj[v] if x in local})
        indices.extend(nbrs)
        indptr.append(len(indices))
    out, size, mask = kernels.subset_scan(len(members), len(members), indptr, indices, max_size)
    if out < 0:
        return None
    witness = frozenset(members[b] for b in range(len(members)) if (mask >> b) & 1)
    return ExpansionReport(Fraction(out, size), witness)


def vertex_expansion_exact(t: Topology, cap: int = EXHAUSTIVE_CAP) -> ExpansionReport:
    if t.n > cap:
        raise CapacityError(
            f"exhaustive expansion is limited to n <= {cap} (got {t.n}); "
            "use a smaller topology or raise the cap knowingly"
        )
    if t.n < 2:
        raise ParameterError("vertex expansion needs at least two vertices")
    return _induced_scan(t, range(t.n), t.n // 2)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def distances(t: Topology, sources, max_depth: int = -1) -> np.ndarray:
    src = np.asarray(sorted(_as_vertex_set(t, sources)), dtype=np.int64)
    indptr, indices = t.csr
    return kernels.bfs_distances(t.n, indptr, indices, src, max_depth)


def ball(t: Topology, u, r: int) -> frozenset:
    """Vertices within distance r of u (u may be a vertex or a set)."""
    if r < 0:
        raise ParameterError("radius must be >= 0")
    dist = distances(t, u, r)
    return frozenset(np.flatnonzero(dist >= 0).tolist())


def boundary(t: Topology, u, r: int) -> frozenset:
    if r < 0:
        raise ParameterError("radius must be >= 0")
    dist = distances(t, u, r)
    return frozenset(np.flatnonzero(dist == r).tolist())


def diameter(t: Topology) -> int:
    indptr, indices = t.csr
    ecc, connected = kernels.eccentricities(t.n, indptr, indices)
    if not connected:
        raise ParameterError("diameter is undefined for a disconnected topology")
    return int(ecc.max())


# ---------------------------------------------------------------------------
# locally tree-like
# ---------------------------------------------------------------------------

def default_tree_radius(n: int, d: int) -> int:
    return int(math.floor(math.log(n) / math.log(d) / 10)) if n > 1 and d > 1 else 0


def _tree_degree(t: Topology, d: Optional[int]) -> int:
    if d is not None:
        return d
    d = t.is_regular()
    if d is None:
        raise ParameterError("tree-like test needs a regular topology (or an explicit d)")
    return d


def is_locally_tree_like(t: Topology, w: int, r: Optional[int] = None, d: Optional[int] = None) -> bool:
    """True iff ball(w, r) induces a tree whose vertices short of radius r all have degree d.

    ``d`` defaults to the common degree of a regular topology; pass it
    explicitly for non-regular graphs such as finite trees.
    """
    d = _tree_degree(t, d)
    if r is None:
        r = default_tree_radius(t.n, d)
    if r < 0:
        raise ParameterError("radius must be >= 0")
    w = int(w)
    if not 0 <= w < t.n:
        raise ParameterError(f"vertex {w} out of range")
    indptr, indices = t.csr
    dist = kernels.bfs_distances(t.n, indptr, indices, np.array([w], dtype=np.int64), r)
    inside = dist >= 0
    for v in np.flatnonzero(inside & (dist < r)):
        if len(t.adj[v]) != d:
            return False
    twice = sum(1 for v in np.flatnonzero(inside) for x in t.adj[v] if inside[x])
    return twice == 2 * (int(inside.sum()) - 1)


def tree_like_fraction(t: Topology, r: Optional[int] = None) -> Fraction:
    d = _tree_degree(t, None)
    if r is None:
        r = default_tree_radius(t.n, d)
    if r < 0:
        raise ParameterError("radius must be >= 0")
    return Fraction(int(tree_like_vertices(t, r, d).sum()), t.n)


def tree_like_vertices(t: Topology, r: Optional[int] = None, d: Optional[int] = None) -> np.ndarray:
    """Boolean mask of locally tree-like vertices."""
    d = _tree_degree(t, d)
    if r is None:
        r = default_tree_radius(t.n, d)
    indptr, indices = t.csr
    return kernels.tree_like_flags(t.n, indptr, indices, d, r).astype(bool)


# ---------------------------------------------------------------------------
# pruning and good sets
# ---------------------------------------------------------------------------

def prune_size_bound(n: int, removed: int, c, phi) -> Fraction:
    """Lower bound on the surviving vertex count after pruning."""
    c, phi = Fraction(c), Fraction(phi)
    return n - removed * (1 + 1 / (phi * (1 - c)))


def prune(t: Topology, f, c, phi, cap: int = EXHAUSTIVE_CAP) -> frozenset:
    """Drop ``f``, then repeatedly cut the worst-expanding small subset.

    While some S with 0 < |S| <= |V(G_i)|/2 expands by less than c*phi in the
    current induced subgraph, the minimising S (smallest, then lowest
    bitmask) is removed.  Returns the surviving vertex set.
    """
    c, phi = Fraction(c), Fraction(phi)
    if not 0 < c < 1:
        raise ParameterError("c must lie in (0, 1)")
    if phi <= 0:
        raise ParameterError("phi must be positive")
    f = _as_vertex_set(t, f)
    if len(f) >= t.n:
        raise ParameterError("cannot remove every vertex")
    if t.n > cap:
        raise CapacityError(f"pruning needs exact expansion checks; n={t.n} exceeds cap {cap}")
    current = set(range(t.n)) - f
    threshold = c * phi
    while len(current) >= 2:
        rep = _induced_scan(t, current, len(current) // 2)
        if rep is None or rep.value >= threshold:
            break
        current -= rep.witness
    return frozenset(current)


def good_radius(n: int, d_max: int, gamma) -> int:
    if n <= 1 or d_max <= 1:
        return 0
    return max(0, int(math.floor(float(gamma) / 2 * math.log(n) / math.log(d_max))))


def good_set(t: Topology, byz, gamma, c, phi, cap: int = EXHAUSTIVE_CAP) -> frozenset:
    """Pruned survivors that have no Byzantine vertex within the good radius."""
    byz = _as_vertex_set(t, byz)
    h = prune(t, byz, c, phi, cap=cap)
    if not byz:
        return h
    return h - ball(t, byz, good_radius(t.n, t.d_max, gamma))


def good_set_distance_only(t: Topology, byz, gamma) -> frozenset:
    """Large-n fallback: skip pruning, keep only the distance condition."""
    byz = _as_vertex_set(t, byz)
    everyone = frozenset(range(t.n))
    if not byz:
        return everyone
    return everyone - ball(t, byz, good_radius(t.n, t.d_max, gamma))
