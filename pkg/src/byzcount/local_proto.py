"""Deterministic LOCAL counting by neighbourhood-view exchange.

Each vertex floods its current picture of the network, decides as soon as
that picture becomes self-contradictory or a neighbour falls silent, and
otherwise decides at the first radius where some subset of what it knows
fails to expand into what it has just learned.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from . import kernels
from .engine import Protocol
from .graph import CapacityError, ParameterError, vertex_expansion_exact

SUBSET_CAP = 20


@dataclass(frozen=True)
class ViewGraph:
    """A vertex's picture of the network.

    ``entries`` maps a vertex ID to ``(edges, learned)`` where ``edges`` is the
    frozenset of claimed neighbour IDs (None while only the ID is known) and
    ``learned`` is the round the edge set arrived.  Parallel edges collapse.
    """

    entries: dict = field(default_factory=dict)
    radius: int = 1

    def vertices(self) -> frozenset:
        return frozenset(self.entries)

    def edges_of(self, v) -> Optional[frozenset]:
        entry = self.entries.get(v)
        return None if entry is None else entry[0]

    def adjacency(self) -> dict:
        """Symmetric adjacency over all known vertices."""
        adj = {v: set() for v in self.entries}
        for v, (edges, _) in self.entries.items():
            if edges is None:
                continue
            for w in edges:
                adj[v].add(w)
                adj.setdefault(w, set()).add(v)
        return adj

    def payload(self) -> tuple:
        """Broadcast form: sorted ``(id, sorted neighbour ids)`` for known edge sets."""
        return tuple(sorted((v, tuple(sorted(e))) for v, (e, _) in self.entries.items() if e is not None))


@dataclass(frozen=True)
class LocalState:
    me: int
    i: int
    view: ViewGraph
    alpha_prime: Fraction
    delta: int
    decided: Optional[int] = None
    cause: Optional[str] = None


def local_init(me: int, neighbor_ids, alpha_prime, delta: int) -> LocalState:
    alpha_prime = Fraction(alpha_prime)
    if alpha_prime <= 0:
        raise ParameterError("alpha_prime must be positive")
    nbrs = frozenset(neighbor_ids)
    entries = {me: (nbrs, 0)}
    for w in sorted(nbrs):
        entries[w] = (None, 0)
    return LocalState(me=me, i=1, view=ViewGraph(entries, 1), alpha_prime=alpha_prime, delta=delta)


def _claims(incoming):
    """Yield ``(v, frozenset(edges))`` pairs; raises ValueError on junk."""
    for payload in incoming:
        for item in payload:
            v, edges = item
            if not isinstance(v, int):
                raise ValueError("vertex ids must be integers")
            edges = frozenset(edges)
            if not all(isinstance(w, int) for w in edges):
                raise ValueError("neighbour ids must be integers")
            yield v, edges


def inconsistent(view: ViewGraph, incoming, delta: int) -> bool:
    """True iff ``incoming`` contradicts the view or claims a degree above ``delta``.

    Contradictions: an edge set for a vertex whose edge set is already known
    and differs, two different edge sets for one vertex in the same round,
    or an edge one endpoint claims and the other endpoint's known set lacks.
    """
    try:
        claims = list(_claims(incoming))
    except (TypeError, ValueError):
        return True
    fresh: dict = {}
    for v, edges in claims:
        if len(edges) > delta or v in edges:
            return True
        known = view.edges_of(v)
        if known is not None and known != edges:
            return True
        if v in fresh and fresh[v] != edges:
            return True
        fresh[v] = edges

    def known_edges(x):
        e = view.edges_of(x)
        return e if e is not None else fresh.get(x)

    for v, edges in fresh.items():
        for w in edges:
            ew = known_edges(w)
            if ew is not None and v not in ew:
                return True
    for x, (ex, _) in view.entries.items():
        if ex is None:
            continue
        for w in ex:
            if w in fresh and x not in fresh[w]:
                return True
    return False


def merge(view: ViewGraph, incoming, learned: int) -> ViewGraph:
    entries = dict(view.entries)
    for v, edges in _claims(incoming):
        if entries.get(v, (None, 0))[0] is None:
            entries[v] = (edges, learned)
    for v, (edges, _) in list(entries.items()):
        if edges is None:
            continue
        for w in edges:
            if w not in entries:
                entries[w] = (None, learned)
    return ViewGraph(entries, view.radius + 1)


def expansion_check(view_prev: ViewGraph, view_next: ViewGraph, alpha_prime, cap: int = SUBSET_CAP) -> bool:
    """Pass iff every nonempty S within view_prev has |Out(S)| >= alpha' |S| in view_next."""
    inner = sorted(view_prev.vertices())
    if len(inner) > cap:
        raise CapacityError(
            f"expansion check over {len(inner)} known vertices exceeds the subset cap {cap}; "
            "run on a smaller topology or raise subset_cap knowingly")
    adj = view_next.adjacency()
    outer = sorted(set(adj) - set(inner))
    index = {v: k for k, v in enumerate(inner + outer)}
    indptr = [0]
    indices: list[int] = []
    for v in inner:
        indices.extend(sorted(index[w] for w in adj.get(v, ()) if w != v))
        indptr.append(len(indices))
    out, size, _ = kernels.subset_scan(len(inner), len(index), indptr, indices, len(inner))
    if out < 0:
        return True
    return Fraction(out, size) >= Fraction(alpha_prime)


def local_round(state: LocalState, inbox: dict, ports: int, cap: int = SUBSET_CAP):
    """One round of processing.

    ``inbox`` maps port to the list of view payloads received on it; a port
    with nothing on it is a mute neighbour.  Returns ``(state, payload)``
    where payload is the view to broadcast next or None once decided.
    """
    if state.decided is not None:
        return state, None
    payloads = [p for port in range(ports) for p in inbox.get(port, ())]
    mute = any(not inbox.get(port) for port in range(ports))
    if mute:
        return replace(state, decided=state.i, cause="mute"), None
    if inconsistent(state.view, payloads, state.delta):
        return replace(state, decided=state.i, cause="inconsistent"), None
    view_next = merge(state.view, payloads, state.i)
    if not expansion_check(state.view, view_next, state.alpha_prime, cap):
        return replace(state, decided=state.i, cause="expansion"), None
    state = replace(state, i=state.i + 1, view=view_next)
    return state, view_next.payload()


class LocalProtocol(Protocol):
    protocol_id = "local"
    strategies = ("silent", "fake-subnetwork", "inconsistent-edge", "copy-stitch")

    def __init__(self, alpha_prime=None, subset_cap: int = SUBSET_CAP, delta: Optional[int] = None):
        self.alpha_prime = None if alpha_prime is None else Fraction(str(alpha_prime))
        self.subset_cap = int(subset_cap)
        self.delta = delta
        self.init_params = dict(alpha_prime=alpha_prime, subset_cap=self.subset_cap, delta=delta)

    def setup(self, sim) -> None:
        topo = sim.topo
        if self.alpha_prime is None:
            self.alpha_prime = vertex_expansion_exact(topo).value / 2
        if self.delta is None:
            self.delta = topo.d_max
        self.init_params.update(alpha_prime=str(self.alpha_prime), delta=self.delta)
        self._init_stats(topo.n)
        self.states: list[Optional[LocalState]] = [None] * topo.n
        for v in range(topo.n):
            if sim.honest[v]:
                nbrs = [topo.ids[w] for w in topo.adj[v]]
                self.states[v] = local_init(topo.ids[v], nbrs, self.alpha_prime, self.delta)
        self.out: list = [None] * topo.n
        self._dec = np.full(topo.n, -1, dtype=np.int64)
        self._dec_round = np.full(topo.n, -1, dtype=np.int64)
        self.causes: dict[int, str] = {}

    def step(self, rnd: int, injected: dict) -> None:
        topo = self.sim.topo
        honest = self.sim.honest
        prev = self.out
        new: list = [None] * topo.n
        for v in range(topo.n):
            state = self.states[v]
            if state is None or state.decided is not None:
                continue
            if rnd == 1:
                new[v] = state.view.payload()
                continue
            inbox: dict = {}
            extra = injected.get(v, {})
            for p, w in enumerate(topo.adj[v]):
                if honest[w]:
                    if prev[w] is not None:
                        inbox[p] = [prev[w]]
                else:
                    got = extra.get(p)
                    if got:
                        inbox[p] = list(got)
            state, payload = local_round(state, inbox, len(topo.adj[v]), self.subset_cap)
            self.states[v] = state
            if state.decided is not None:
                self._dec[v] = state.decided
                self._dec_round[v] = rnd
                self.causes[v] = state.cause
            new[v] = payload
        self.out = new
        senders = np.array([v for v in range(topo.n) if new[v] is not None], dtype=np.int64)
        ids = np.array([self.payload_ids(new[v]) for v in senders], dtype=np.int64)
        self._account(senders, ids)

    def outgoing(self, v: int):
        return self.out[v]

    def decisions(self) -> np.ndarray:
        return self._dec

    def decision_rounds(self) -> np.ndarray:
        return self._dec_round

    def payload_ids(self, payload) -> int:
        try:
            return sum(1 + len(edges) for _, edges in payload)
        except (TypeError, ValueError):
            return 0

    def extra_aggregates(self) -> dict:
        causes: dict = {}
        for c in self.causes.values():
            causes[c] = causes.get(c, 0) + 1
        return {"alpha_prime": str(self.alpha_prime), "decision_causes": dict(sorted(causes.items()))}


def true_view(topo, v: int, radius: int) -> tuple:
    """Payload an honest vertex would broadcast at round ``radius`` in an all-honest run."""
    from .graph import distances
    dist = distances(topo, v, radius)
    ids = topo.ids
    return tuple(sorted(
        (ids[x], tuple(sorted({ids[w] for w in topo.adj[x]})))
        for x in np.flatnonzero((dist >= 0) & (dist < radius)).tolist()))
