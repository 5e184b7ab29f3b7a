"""Byzantine placements and round strategies.

A strategy sees everything (topology, honest state, the whole random tape)
but can only speak through the real edges of Byzantine vertices; the engine
stamps every envelope with the true sender ID.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .engine import ConfigError, Simulation
from .graph import ParameterError, Topology, distances, from_edges, generate_hnd, random_ids

# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------

PLACEMENTS = ("none", "random-k", "surround", "explicit")


@dataclass(frozen=True)
class PlacementSpec:
    kind: str = "none"
    budget: int = 0
    target: tuple = ()
    vertices: tuple = ()

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "PlacementSpec":
        d = dict(d or {})
        kind = d.pop("kind", "none")
        spec = cls(kind=kind, budget=int(d.pop("budget", 0)),
                   target=tuple(int(x) for x in d.pop("target", ())),
                   vertices=tuple(int(x) for x in d.pop("vertices", ())))
        if d:
            raise ConfigError(f"unknown placement keys: {sorted(d)}")
        return spec


def place_byzantine(t: Topology, spec: PlacementSpec, seed: int) -> frozenset:
    """Deterministic in ``seed``; see :class:`PlacementSpec` for the kinds."""
    if spec.kind not in PLACEMENTS:
        raise ConfigError(f"unknown placement {spec.kind!r}; expected one of {PLACEMENTS}")
    if spec.kind == "none":
        return frozenset()
    if spec.kind == "explicit":
        for v in spec.vertices:
            if not 0 <= v < t.n:
                raise ParameterError(f"explicit Byzantine vertex {v} outside 0..{t.n - 1}")
        return frozenset(spec.vertices)
    if not 0 <= spec.budget <= t.n:
        raise ParameterError(f"budget {spec.budget} outside 0..{t.n}")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(11,)))
    if spec.kind == "random-k":
        return frozenset(int(x) for x in rng.choice(t.n, size=spec.budget, replace=False))
    # surround: fill BFS layers around the target, nearest layer first
    if not spec.target:
        raise ConfigError("surround placement needs a non-empty target")
    for v in spec.target:
        if not 0 <= v < t.n:
            raise ParameterError(f"target vertex {v} outside 0..{t.n - 1}")
    dist = distances(t, list(spec.target))
    chosen: list[int] = []
    for layer in range(1, int(dist.max()) + 1):
        members = np.flatnonzero(dist == layer)
        rng.shuffle(members)
        for v in members.tolist():
            if len(chosen) == spec.budget:
                return frozenset(chosen)
            chosen.append(v)
    return frozenset(chosen)


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

class Strategy:
    strategy_id = ""

    def setup(self, sim: Simulation) -> None:
        self.sim = sim

    def emit(self, view) -> list:
        """``(byzantine vertex, port, payload)`` triples for this round."""
        return []


def _local_view(t: Topology, v: int, radius: int, ids=None) -> tuple:
    ids = t.ids if ids is None else ids
    dist = distances(t, v, radius)
    inside = np.flatnonzero((dist >= 0) & (dist < radius)).tolist()
    return tuple(sorted((ids[x], tuple(sorted({ids[w] for w in t.adj[x]}))) for x in inside))


class Silent(Strategy):
    """Say nothing from ``from_round`` on.

    Before that round a Byzantine vertex under the local protocol behaves
    like an honest one that never decides (it sends its true neighbourhood
    view); under other protocols it is silent throughout.
    """

    strategy_id = "silent"

    def __init__(self, from_round: int = 1):
        self.from_round = int(from_round)

    def emit(self, view) -> list:
        if view.round >= self.from_round or view.protocol.protocol_id != "local":
            return []
        out = []
        for b in sorted(view.byz):
            payload = _local_view(view.topo, b, view.round)
            out.extend((b, p, payload) for p in range(view.topo.degree(b)))
        return out


class InconsistentEdge(Strategy):
    """Local protocol: honest until ``round``, then restate its own edges differently.

    At ``round`` each Byzantine vertex sends its true view except that its
    own edge set swaps one neighbour (never the receiver) for a fabricated
    ID, so a receiver that already learned the true set sees a conflict.
    """

    strategy_id = "inconsistent-edge"

    def __init__(self, round: int = 3):
        if int(round) < 1:
            raise ConfigError("inconsistent-edge round must be >= 1")
        self.at = int(round)

    def emit(self, view) -> list:
        if view.round > self.at:
            return []
        topo = view.topo
        out = []
        for b in sorted(view.byz):
            payload = _local_view(topo, b, view.round)
            if view.round < self.at:
                out.extend((b, p, payload) for p in range(topo.degree(b)))
                continue
            me = topo.ids[b]
            fake = view.registry.fresh()
            true = sorted({topo.ids[w] for w in topo.adj[b]})
            for p, w in enumerate(topo.adj[b]):
                entries = dict(payload)
                others = [x for x in true if x != topo.ids[w]]
                claim = set(true) - set(others[:1]) | {fake}
                entries[me] = tuple(sorted(claim))
                out.append((b, p, tuple(sorted(entries.items()))))
        return out


class BeaconSpam(Strategy):
    """Congest: a beacon with a fresh fabricated origin on every edge, each iteration."""

    strategy_id = "beacon-spam"

    def __init__(self, length: int = 1):
        if int(length) < 1:
            raise ConfigError("beacon-spam path length must be >= 1")
        self.length = int(length)

    def emit(self, view) -> list:
        from .congest_proto import beacon

        pos = view.protocol.position(view.round)
        if pos["t"] != 1:
            return []
        length = min(self.length, pos["phase"] + 1)
        out = []
        for b in sorted(view.byz):
            for p in range(view.topo.degree(b)):
                path = tuple(view.registry.fresh() for _ in range(length))
                out.append((b, p, beacon(path[0], path)))
        return out


class PathTamper(Strategy):
    """Congest: relay intercepted beacons with all but the last ``keep`` trail entries replaced."""

    strategy_id = "path-tamper"

    def __init__(self, keep: int = 1):
        if int(keep) < 0:
            raise ConfigError("path-tamper keep must be >= 0")
        self.keep = int(keep)

    def emit(self, view) -> list:
        from .congest_proto import beacon, classify

        pos = view.protocol.position(view.round)
        i, t = pos["phase"], pos["t"]
        if not 2 <= t <= i + 2:
            return []
        out = []
        for b in sorted(view.byz):
            heard = []
            for env in view.inbox_of(b):
                msg = classify(env.payload, env.sender_id, i)
                if msg is not None and msg[0] == "beacon":
                    heard.append((env.port, msg[1], msg[2], env.sender_id))
            if not heard:
                continue
            _, origin, path, sender = min(heard)
            trail = path + (sender,)
            if len(trail) > i + 1:
                continue
            cut = max(len(trail) - self.keep, 0)
            forged = tuple(view.registry.fresh() for _ in range(cut)) + trail[cut:]
            payload = beacon(forged[0] if cut else origin, forged)
            out.extend((b, p, payload) for p in range(view.topo.degree(b)))
        return out


class InjectMax(Strategy):
    """Geometric baseline: announce ``value`` on every edge in round 1."""

    strategy_id = "inject-max"

    def __init__(self, value: int = 10**6):
        self.value = int(value)

    def emit(self, view) -> list:
        if view.round != 1:
            return []
        return [(b, p, self.value) for b in sorted(view.byz) for p in range(view.topo.degree(b))]


# -- fake subnetwork ----------------------------------------------------------

class FakeWorld(NamedTuple):
    topo: Topology            # the world the target set is meant to believe in
    index: dict               # real vertex -> world vertex, for target and Byzantine vertices
    synthetic: int            # number of synthetic vertices


def build_fake_world(t: Topology, target, byz, size: int, seed: int) -> FakeWorld:
    """Target set plus its Byzantine boundary, spliced onto a synthetic H(size, d).

    Each Byzantine edge that does not lead into the target is replaced by an
    edge into the synthetic graph; synthetic edges are cut to free the stubs.
    """
    target = sorted(set(int(v) for v in target))
    byz = sorted(set(int(v) for v in byz))
    tset, bset = set(target), set(byz)
    for u in target:
        for w in t.adj[u]:
            if w not in tset and w not in bset:
                raise ConfigError(f"target vertex {u} has an honest neighbour {w} outside the target; "
                                  "place Byzantine vertices on the whole boundary first")
    d = t.d_max if t.d_max % 2 == 0 else t.d_max + 1
    synth = generate_hnd(size, d, seed)
    real = target + byz
    index = {v: k for k, v in enumerate(real)}
    base = len(real)
    edges = [(index[u], index[w]) for u, w in t.edges
             if (u in tset and (w in tset or w in bset)) or (w in tset and u in bset)]
    stubs = [index[b] for b in byz for w in t.adj[b] if w not in tset]
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(13,)))
    cut = (len(stubs) + 1) // 2
    if cut > len(synth.edges):
        raise ConfigError("synthetic graph too small for the Byzantine boundary")
    drop = set(rng.choice(len(synth.edges), size=cut, replace=False).tolist())
    free = []
    for k, (x, y) in enumerate(synth.edges):
        if k in drop:
            free.extend((base + x, base + y))
        else:
            edges.append((base + x, base + y))
    for s, x in zip(stubs, free):
        edges.append((s, x))
    for x, y in zip(free[len(stubs)::2], free[len(stubs) + 1::2]):
        edges.append((x, y))
    taken = set(t.ids)
    extra = [x for x in synth.ids if x not in taken]
    while len(extra) < size:
        more = random_ids(size, np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(14, len(extra)))))
        extra.extend(x for x in more if x not in taken and x not in extra)
    ids = [t.ids[v] for v in real] + extra[:size]
    world = from_edges(base + size, edges, ids=ids, d_max=max(d, t.d_max))
    return FakeWorld(world, index, size)


class FakeSubnetwork(Strategy):
    """Local protocol: show the target set a large synthetic network behind the boundary.

    Byzantine vertices answer target-side ports with their neighbourhood
    view in the fake world and every other port with their true view.
    """

    strategy_id = "fake-subnetwork"

    def __init__(self, size: int = 1000, target=(), seed: Optional[int] = None):
        self.size = int(size)
        self.target = tuple(int(v) for v in target)
        self.world_seed = seed

    def setup(self, sim) -> None:
        super().setup(sim)
        if not self.target:
            raise ConfigError("fake-subnetwork needs the target vertex set")
        seed = sim.seed if self.world_seed is None else int(self.world_seed)
        self.world = build_fake_world(sim.topo, self.target, sim.byz, self.size, seed)

    def emit(self, view) -> list:
        topo = view.topo
        world = self.world
        tset = set(self.target)
        out = []
        for b in sorted(view.byz):
            fake = _local_view(world.topo, world.index[b], view.round)
            true = None
            for p, w in enumerate(topo.adj[b]):
                if w in tset:
                    out.append((b, p, fake))
                else:
                    if true is None:
                        true = _local_view(topo, b, view.round)
                    out.append((b, p, true))
        return out


# -- copy stitching -------------------------------------------------------------

class Stitched(NamedTuple):
    topo: Topology
    base: Topology
    hub: int                   # index of the shared vertex in the stitched topology
    copies: int
    index: tuple               # index[k][v] = stitched vertex of base vertex v in copy k
    copy_ids: tuple            # copy_ids[k] = ID tuple of the base graph as seen in copy k


def stitch_copies(base: Topology, b: int, copies: int, seed: int = 0) -> Stitched:
    """``copies`` disjoint copies of ``base`` glued at vertex ``b``.

    Copy 0 keeps the base IDs; later copies get fresh IDs, except that ``b``
    keeps its own everywhere.  Every vertex keeps its base port order, and
    port ``p`` of ``b`` in copy ``k`` becomes port ``k * deg(b) + p``.
    """
    if not 0 <= b < base.n:
        raise ParameterError(f"hub {b} outside 0..{base.n - 1}")
    if copies < 1:
        raise ParameterError("need at least one copy")
    others = [v for v in range(base.n) if v != b]
    index = []
    for k in range(copies):
        m = {b: 0}
        for r, v in enumerate(others):
            m[v] = 1 + k * len(others) + r
        index.append(m)
    used = set(base.ids)
    copy_ids = [tuple(base.ids)]
    for k in range(1, copies):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(17, k)))
        fresh = [x for x in random_ids(base.n + 8, rng) if x not in used]
        if len(fresh) < base.n - 1:
            raise ParameterError("could not draw distinct copy IDs")
        ids = list(fresh[:base.n])
        ids[b] = base.ids[b]
        used.update(ids)
        copy_ids.append(tuple(ids))
    n = 1 + copies * len(others)
    ids = [0] * n
    edges = []
    for k in range(copies):
        for v in range(base.n):
            ids[index[k][v]] = copy_ids[k][v]
        edges.extend((index[k][u], index[k][v]) for u, v in base.edges)
    topo = from_edges(n, edges, ids=ids, d_max=max(base.d_max, copies * base.degree(b)))
    return Stitched(topo, base, 0, copies, tuple(index), tuple(copy_ids))


class CopyStitch(Strategy):
    """Replay, on each copy's ports, what the hub sends in an honest run of that copy alone.

    One reference simulation per copy runs in lockstep: the base graph with
    that copy's IDs, all honest, same seed.  The shared Byzantine hub
    forwards the reference hub's broadcast on the copy's ports.
    """

    strategy_id = "copy-stitch"

    def __init__(self, stitched: Optional[Stitched] = None, base: Optional[Topology] = None,
                 hub: int = 0, copies: int = 2, watch=()):
        self.stitched = stitched
        self.watch = tuple(int(v) for v in watch)
        self.base = base
        self.hub = int(hub)
        self.copies = int(copies)

    def setup(self, sim) -> None:
        super().setup(sim)
        st = self.stitched
        if st is None:
            if self.base is None:
                raise ConfigError("copy-stitch needs the stitched topology or its base graph")
            st = stitch_copies(self.base, self.hub, self.copies, sim.seed)
            if st.topo.edges != sim.topo.edges or st.topo.ids != sim.topo.ids:
                raise ConfigError("simulation topology is not the stitched graph of the given base")
            self.stitched = st
        if sim.byz != frozenset([st.hub]):
            raise ConfigError("copy-stitch needs exactly the hub as Byzantine vertex")
        self.hub_base = next(v for v, s in st.index[0].items() if s == st.hub)
        self.refs = []
        for k in range(st.copies):
            ref_topo = from_edges(st.base.n, st.base.edges, ids=st.copy_ids[k], d_max=st.base.d_max)
            ref = Simulation(ref_topo, sim.protocol.clone(), seed=sim.seed,
                             watch_inboxes=self.watch)
            self.refs.append(ref)

    def emit(self, view) -> list:
        st = self.stitched
        deg = st.base.degree(self.hub_base)
        out = []
        for k, ref in enumerate(self.refs):
            while ref.round < view.round:
                ref.step_round()
            payload = ref.protocol.outgoing(self.hub_base)
            if payload is None:
                continue
            out.extend((st.hub, k * deg + p, payload) for p in range(deg))
        return out


STRATEGIES = {
    "silent": Silent,
    "inconsistent-edge": InconsistentEdge,
    "beacon-spam": BeaconSpam,
    "path-tamper": PathTamper,
    "inject-max": InjectMax,
    "fake-subnetwork": FakeSubnetwork,
    "copy-stitch": CopyStitch,
}


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "silent"
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "StrategySpec":
        d = dict(d or {})
        kind = d.pop("kind", "silent")
        params = dict(d.pop("params", {}) or {})
        params.update(d)
        return cls(kind, params)


def make_strategy(kind: str = "silent", params: Optional[dict] = None) -> Strategy:
    cls = STRATEGIES.get(kind)
    if cls is None:
        raise ConfigError(f"unknown strategy {kind!r}; expected one of {sorted(STRATEGIES)}")
    try:
        return cls(**dict(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for strategy {kind!r}: {exc}") from None
