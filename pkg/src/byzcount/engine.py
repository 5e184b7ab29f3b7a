"""Synchronous round engine.

Honest vertices broadcast one payload per round; those payloads are held in
the protocol's outbox and delivered along the edges, so the sender of an
honest message is the far end of the edge by construction.  Byzantine
vertices speak only through envelopes that the engine stamps with their
true ID.  The adversary runs first in every round and may read all honest
state and the whole randomness tape.
"""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .graph import ParameterError, Topology

PURPOSES = {"activation": 1, "geometric": 2, "tiebreak": 3}
FAKE_TAG = 1 << 128


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------

class RandomTape:
    """Per-vertex, per-purpose uniform streams derived from the run seed.

    A stream is keyed by (seed, purpose, vertex ID), so two runs that share a
    vertex ID and seed see the same values for that vertex.  Values are
    materialised in blocks on first access; entry ``k`` of a stream does not
    depend on when or in which order it is read.
    """

    BLOCK = 64

    def __init__(self, seed: int, ids):
        self.seed = int(seed)
        self.ids = tuple(ids)
        self._gens: dict[str, list[np.random.Generator]] = {}
        self._cache: dict[str, np.ndarray] = {}

    def _generators(self, purpose: str) -> list[np.random.Generator]:
        if purpose not in PURPOSES:
            raise ParameterError(f"unknown tape purpose {purpose!r}")
        gens = self._gens.get(purpose)
        if gens is None:
            code = PURPOSES[purpose]
            gens = [
                np.random.Generator(np.random.PCG64(np.random.SeedSequence(
                    self.seed, spawn_key=(code, value >> 64, value & (2**64 - 1)))))
                for value in self.ids
            ]
            self._gens[purpose] = gens
            self._cache[purpose] = np.empty((len(self.ids), 0))
        return gens

    def block(self, purpose: str, count: int) -> np.ndarray:
        """First ``count`` entries of every vertex's stream, shape ``(n, count)``."""
        gens = self._generators(purpose)
        have = self._cache[purpose]
        if have.shape[1] < count:
            extra = max(count - have.shape[1], self.BLOCK)
            more = np.stack([g.random(extra) for g in gens]) if gens else np.empty((0, extra))
            have = np.concatenate([have, more], axis=1)
            self._cache[purpose] = have
        return have[:, :count]

    def value(self, purpose: str, v: int, k: int) -> float:
        return float(self.block(purpose, k + 1)[v, k])


class IdRegistry:
    """Maps 128-bit IDs (real or fabricated) to dense integer handles.

    Handles ``0..n-1`` are the real vertices.  Fabricated IDs live above
    ``2**128`` so they can never collide with a real ID.
    """

    def __init__(self, topo: Topology):
        self.n = topo.n
        self._handle = dict(topo.id_index)
        self._ids = list(topo.ids)
        self._fresh = 0

    def fresh(self) -> int:
        value = FAKE_TAG | self._fresh
        self._fresh += 1
        self.intern(value)
        return value

    def intern(self, value: int) -> int:
        h = self._handle.get(value)
        if h is None:
            h = len(self._ids)
            self._handle[value] = h
            self._ids.append(value)
        return h

    def id_of(self, handle: int) -> int:
        return self._ids[handle]

    def __len__(self) -> int:
        return len(self._ids)


# ---------------------------------------------------------------------------
# messages and traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    sender_id: int
    port: int
    payload: Any
    round: int
    receiver: int = -1


@dataclass
class RoundTrace:
    round: int
    digest: str
    honest_messages: int
    byzantine_envelopes: int
    decided: int
    envelopes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "digest": self.digest,
            "honest_messages": self.honest_messages,
            "byzantine_envelopes": self.byzantine_envelopes,
            "decided": self.decided,
        }


@dataclass
class StopCondition:
    kind: str = "all-decided"
    max_rounds: int = 10_000
    watch: Optional[frozenset] = None

    KINDS = ("all-decided", "all-terminated", "max-rounds")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown stop condition {self.kind!r}; expected one of {self.KINDS}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")


@dataclass
class RunReport:
    config: dict
    seed: int
    rounds: int
    per_vertex: list
    aggregates: dict

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "rounds": self.rounds,
            "per_vertex": self.per_vertex,
            "aggregates": self.aggregates,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# protocol contract
# ---------------------------------------------------------------------------

class Protocol:
    """Batch protocol driven by :class:`Simulation`.

    ``step`` advances every honest vertex by one round: it consumes what the
    neighbours broadcast in the previous round (its own outbox) plus the
    Byzantine envelopes addressed to honest vertices, and refills the outbox.
    """

    protocol_id = ""
    strategies: tuple[str, ...] = ()

    init_params: dict = {}

    def setup(self, sim: "Simulation") -> None:
        raise NotImplementedError

    def clone(self) -> "Protocol":
        """Fresh, un-setup instance with the same (resolved) parameters."""
        return type(self)(**self.init_params)

    def _init_stats(self, n: int) -> None:
        self.msgs_sent = np.zeros(n, dtype=np.int64)
        self.max_ids = np.zeros(n, dtype=np.int64)
        self.id_hist: Counter = Counter()
        self._round_msgs = 0

    def _account(self, senders: np.ndarray, ids: np.ndarray) -> None:
        """Record one broadcast per sender carrying ``ids`` IDs each."""
        self._round_msgs = len(senders)
        if not len(senders):
            return
        self.msgs_sent[senders] += 1
        np.maximum.at(self.max_ids, senders, ids)
        values, counts = np.unique(ids, return_counts=True)
        for k, c in zip(values.tolist(), counts.tolist()):
            self.id_hist[k] += c

    def messages_this_round(self) -> int:
        return self._round_msgs

    def step(self, rnd: int, injected: dict) -> None:
        raise NotImplementedError

    def outgoing(self, v: int):
        """Payload honest ``v`` broadcast in the current round, or None."""
        raise NotImplementedError

    def decisions(self) -> np.ndarray:
        raise NotImplementedError

    def decision_rounds(self) -> np.ndarray:
        raise NotImplementedError

    def terminated(self) -> np.ndarray:
        return self.decisions() >= 0

    def payload_ids(self, payload) -> int:
        return 0

    def canonical(self, payload):
        return payload

    def digest_update(self, h) -> None:
        for v in range(self.sim.topo.n):
            if self.sim.honest[v]:
                h.update(repr(self.canonical(self.outgoing(v))).encode())

    def extra_aggregates(self) -> dict:
        return {}

    def position(self, rnd: int) -> dict:
        return {"round": rnd}


def payload_bits(ids: int) -> int:
    # 2 tag bits plus 128 bits for each embedded ID
    return 2 + 128 * ids


def make_protocol(protocol_id: str, params: Optional[dict] = None) -> Protocol:
    params = dict(params or {})
    if protocol_id == "local":
        from .local_proto import LocalProtocol
        return LocalProtocol(**params)
    if protocol_id == "congest":
        from .congest_proto import CongestProtocol
        return CongestProtocol(**params)
    if protocol_id == "congest-ref":
        from .congest_proto import ReferenceCongestProtocol
        return ReferenceCongestProtocol(**params)
    if protocol_id == "geometric":
        from .baseline import GeometricProtocol
        return GeometricProtocol(**params)
    raise ConfigError(f"unknown protocol {protocol_id!r}")


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

class AdversaryView:
    """Read-only handle the strategy gets each round."""

    def __init__(self, sim: "Simulation"):
        self._sim = sim

    @property
    def topo(self) -> Topology:
        return self._sim.topo

    @property
    def byz(self) -> frozenset:
        return self._sim.byz

    @property
    def round(self) -> int:
        return self._sim.round + 1

    @property
    def tape(self) -> RandomTape:
        return self._sim.tape

    @property
    def protocol(self) -> Protocol:
        return self._sim.protocol

    @property
    def registry(self) -> IdRegistry:
        return self._sim.registry

    @property
    def seed(self) -> int:
        return self._sim.seed

    def inbox_of(self, b: int) -> list[Envelope]:
        """What honest neighbours sent to Byzantine ``b`` in the last round."""
        return self._sim.inbox(b, honest_only=True)


class Simulation:
    def __init__(self, topo: Topology, protocol: Protocol, byz=(), adversary=None, seed: int = 0,
                 record_envelopes: bool = False, watch_inboxes=()):
        from .adversary import make_strategy

        self.topo = topo
        self.seed = int(seed)
        byz = frozenset(int(b) for b in byz)
        for b in byz:
            if not 0 <= b < topo.n:
                raise ParameterError(f"Byzantine vertex {b} is not a vertex of the topology")
        self.byz = byz
        self.honest = np.ones(topo.n, dtype=bool)
        self.honest[list(byz)] = False
        self.tape = RandomTape(self.seed, topo.ids)
        self.registry = IdRegistry(topo)
        self.protocol = protocol
        if adversary is None:
            adversary = make_strategy("silent")
        self.adversary = adversary
        if adversary.strategy_id not in ("silent", "copy-stitch") and \
                adversary.strategy_id not in protocol.strategies:
            raise ConfigError(
                f"strategy {adversary.strategy_id!r} does not apply to protocol {protocol.protocol_id!r}")
        self.round = 0
        self.pending: dict[int, dict[int, list]] = {}
        self.record_envelopes = record_envelopes
        self.watch = tuple(int(v) for v in watch_inboxes)
        self.inbox_log: dict[int, list] = {v: [] for v in self.watch}
        self.byz_msgs = 0
        self.byz_max_ids = 0
        self.byz_hist: Counter = Counter()
        self.traces: list[RoundTrace] = []
        protocol.sim = self
        protocol.setup(self)
        adversary.setup(self)

    # -- delivery ------------------------------------------------------------

    def inbox(self, v: int, honest_only: bool = False) -> list[Envelope]:
        """Envelopes delivered to ``v`` at the end of the current round, by port."""
        topo = self.topo
        out = []
        injected = self.pending.get(v, {})
        for p, w in enumerate(topo.adj[v]):
            if self.honest[w]:
                payload = self.protocol.outgoing(w)
                if payload is not None:
                    out.append(Envelope(topo.ids[w], p, payload, self.round, v))
            elif not honest_only:
                for payload in injected.get(p, ()):
                    out.append(Envelope(topo.ids[w], p, payload, self.round, v))
        return out

    def step_round(self) -> RoundTrace:
        topo = self.topo
        rnd = self.round + 1
        emitted = self.adversary.emit(AdversaryView(self)) or []
        envelopes = []
        for b, port, payload in emitted:
            if b not in self.byz:
                raise ConfigError(f"strategy tried to send from non-Byzantine vertex {b}")
            if not 0 <= port < len(topo.adj[b]):
                raise ConfigError(f"vertex {b} has no port {port}")
            receiver = topo.adj[b][port]
            env = Envelope(topo.ids[b], topo.rev_port[b][port], payload, rnd, receiver)
            assert env.sender_id == topo.ids[topo.adj[receiver][env.port]]
            envelopes.append(env)
            ids = self.protocol.payload_ids(payload)
            self.byz_msgs += 1
            self.byz_max_ids = max(self.byz_max_ids, ids)
            self.byz_hist[ids] += 1

        self.protocol.step(rnd, self.pending)

        pending: dict[int, dict[int, list]] = {}
        for env in envelopes:
            if self.honest[env.receiver]:
                pending.setdefault(env.receiver, {}).setdefault(env.port, []).append(env.payload)
        self.pending = pending
        self.round = rnd

        for v in self.watch:
            self.inbox_log[v].append(tuple(
                (e.port, e.sender_id, self.protocol.canonical(e.payload)) for e in self.inbox(v)))

        h = hashlib.blake2b(digest_size=16)
        h.update(str(rnd).encode())
        self.protocol.digest_update(h)
        for env in envelopes:
            h.update(repr((env.sender_id, env.receiver, env.port, self.protocol.canonical(env.payload))).encode())
        decided = int(((self.protocol.decisions() >= 0) & self.honest).sum())
        trace = RoundTrace(rnd, h.hexdigest(), self.protocol.messages_this_round(), len(envelopes), decided,
                           envelopes if self.record_envelopes else [])
        self.traces.append(trace)
        return trace

    # -- running -------------------------------------------------------------

    def _done(self, stop: StopCondition) -> Optional[str]:
        if stop.kind == "max-rounds":
            return None
        mask = self.honest.copy()
        if stop.watch is not None:
            mask[:] = False
            mask[list(stop.watch)] = True
            mask &= self.honest
        if stop.kind == "all-decided":
            if np.all(self.protocol.decisions()[mask] >= 0):
                return "all-decided"
        elif stop.kind == "all-terminated":
            if np.all(self.protocol.terminated()[mask]):
                return "all-terminated"
        return None

    def run_until(self, stop: Optional[StopCondition] = None, config: Optional[dict] = None) -> RunReport:
        stop = stop or StopCondition()
        cause = self._done(stop) if self.round else None
        while cause is None:
            if self.round >= stop.max_rounds:
                cause = "max-rounds"
                break
            self.step_round()
            cause = self._done(stop)
        return self.report(cause, config)

    def report(self, cause: str, config: Optional[dict] = None) -> RunReport:
        topo = self.topo
        proto = self.protocol
        dec = proto.decisions()
        drd = proto.decision_rounds()
        term = proto.terminated()
        per_vertex = []
        for v in range(topo.n):
            honest = bool(self.honest[v])
            per_vertex.append({
                "vertex": v,
                "id": f"{topo.ids[v]:032x}",
                "byzantine": not honest,
                "decision": int(dec[v]) if honest and dec[v] >= 0 else None,
                "decision_round": int(drd[v]) if honest and dec[v] >= 0 else None,
                "terminated": bool(term[v]) if honest else None,
                "messages_sent": int(proto.msgs_sent[v]) if honest else 0,
                "max_payload_ids": int(proto.max_ids[v]) if honest else 0,
                "max_payload_bits": payload_bits(int(proto.max_ids[v])) if honest and proto.msgs_sent[v] else 0,
            })
        aggregates = summarize(per_vertex)
        aggregates.update({
            "rounds": self.round,
            "termination_cause": cause,
            "message_histogram": {str(k): int(c) for k, c in sorted(proto.id_hist.items())},
            "byzantine_messages": self.byz_msgs,
            "byzantine_max_payload_ids": self.byz_max_ids,
            "byzantine_message_histogram": {str(k): int(c) for k, c in sorted(self.byz_hist.items())},
            "final_digest": self.traces[-1].digest if self.traces else None,
        })
        aggregates.update(proto.extra_aggregates())
        return RunReport(config=dict(config or {}), seed=self.seed, rounds=self.round,
                         per_vertex=per_vertex, aggregates=aggregates)

    def dump_trace(self, path) -> None:
        with open(path, "w") as fh:
            for tr in self.traces:
                fh.write(json.dumps(tr.to_json(), sort_keys=True) + "\n")


def summarize(per_vertex: list) -> dict:
    """Aggregates that are recomputable from the per-vertex records alone."""
    honest = [r for r in per_vertex if not r["byzantine"]]
    decided = [r for r in honest if r["decision"] is not None]
    values = [r["decision"] for r in decided]
    hist = Counter(values)
    return {
        "honest": len(honest),
        "decided": len(decided),
        "fraction_decided": len(decided) / len(honest) if honest else 0.0,
        "decision_histogram": {str(k): hist[k] for k in sorted(hist)},
        "min_decision": min(values) if values else None,
        "max_decision": max(values) if values else None,
        "max_decision_round": max((r["decision_round"] for r in decided), default=None),
        "honest_messages": sum(r["messages_sent"] for r in honest),
        "max_honest_payload_ids": max((r["max_payload_ids"] for r in honest), default=0),
    }


def new_simulation(t: Topology, protocol, byz=(), adversary=None, seed: int = 0, **kw) -> Simulation:
    """Factory accepting ``(id, params)`` pairs or ready objects."""
    from .adversary import make_strategy

    if isinstance(protocol, tuple):
        protocol = make_protocol(*protocol)
    elif isinstance(protocol, str):
        protocol = make_protocol(protocol)
    if isinstance(adversary, tuple):
        adversary = make_strategy(*adversary)
    elif isinstance(adversary, str):
        adversary = make_strategy(adversary)
    return Simulation(t, protocol, byz=byz, adversary=adversary, seed=seed, **kw)

