"""Geometric-maximum size estimation (no fault tolerance).

Every vertex counts coin flips until the first head and the network floods
the maximum.  The maximum of n geometric(1/2) draws is about log2 n, which
is the estimate.  A single Byzantine vertex can announce any value it likes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .engine import Protocol
from .graph import diameter


def geometric_sample(flips) -> int:
    """1-based index of the first head in ``flips`` (True/1 = heads)."""
    for k, f in enumerate(flips, start=1):
        if f:
            return k
    raise ValueError("no head among the supplied flips")


def draws_from_tape(tape, n: int) -> np.ndarray:
    """One geometric draw per vertex from the ``geometric`` tape stream (u < 1/2 is heads)."""
    width = 64
    while True:
        heads = tape.block("geometric", width) < 0.5
        hit = heads.any(axis=1)
        if hit.all() or width >= 4096:
            break
        width *= 2
    x = heads.argmax(axis=1) + 1
    x[~hit] = width
    return x.astype(np.int64)


@dataclass(frozen=True)
class GeoState:
    draw: int
    best: int
    improved: bool = True


def geo_round(state: GeoState, inbox) -> tuple[GeoState, Optional[int]]:
    """Absorb received values; broadcast ``best`` only if it just went up.

    The first call (``improved`` set at init) broadcasts the vertex's own draw.
    """
    best = max([state.best] + [int(x) for x in inbox])
    if state.improved:
        return replace(state, best=best, improved=False), best
    if best > state.best:
        return replace(state, best=best), best
    return state, None


def valid_value(payload) -> bool:
    return isinstance(payload, (int, np.integer)) and not isinstance(payload, bool) and payload >= 1


class GeometricProtocol(Protocol):
    protocol_id = "geometric"
    strategies = ("silent", "inject-max")

    def __init__(self, rounds: Optional[int] = None):
        self.rounds = None if rounds is None else int(rounds)
        self.init_params = {"rounds": self.rounds}

    def setup(self, sim) -> None:
        topo = sim.topo
        if self.rounds is None:
            self.rounds = max(1, 2 * diameter(topo))
        self.init_params = {"rounds": self.rounds}
        self._init_stats(topo.n)
        self.nbr = topo.padded_adj
        self.draw = draws_from_tape(sim.tape, topo.n)
        self.best = self.draw.copy()
        self.sent = np.zeros(topo.n, dtype=bool)
        self.dropped = 0
        self._round = 0

    def _heard(self, injected: dict, count_drops: bool) -> np.ndarray:
        """Largest value delivered to each honest vertex at the end of the last round."""
        honest = self.sim.honest
        shout = np.where(self.sent, self.best, 0)
        padded = np.where(self.nbr >= 0, shout[np.maximum(self.nbr, 0)], 0)
        padded[~honest[np.maximum(self.nbr, 0)] | (self.nbr < 0)] = 0
        heard = padded.max(axis=1)
        for v, ports in injected.items():
            for payloads in ports.values():
                for x in payloads:
                    if valid_value(x):
                        heard[v] = max(heard[v], int(x))
                    elif count_drops:
                        self.dropped += 1
        heard[~honest] = 0
        return heard

    def step(self, rnd: int, injected: dict) -> None:
        self._round = rnd
        if rnd == 1:
            sent = self.sim.honest.copy()
        else:
            heard = self._heard(injected, True)
            sent = heard > self.best
            self.best = np.maximum(self.best, heard)
        self.sent = sent
        senders = np.flatnonzero(sent)
        self._account(senders, np.zeros(len(senders), dtype=np.int64))

    def outgoing(self, v: int):
        return int(self.best[v]) if self.sent[v] else None

    def decisions(self) -> np.ndarray:
        if self._round < self.rounds:
            return np.full(len(self.best), -1, dtype=np.int64)
        # values that arrived by the end of the final round count too
        out = np.maximum(self.best, self._heard(self.sim.pending, False))
        out[~self.sim.honest] = -1
        return out

    def decision_rounds(self) -> np.ndarray:
        return np.where(self.decisions() >= 0, self.rounds, -1)

    def quiet(self) -> bool:
        return not self.sent.any()

    def extra_aggregates(self) -> dict:
        honest = self.sim.honest
        return {"global_max_draw": int(self.draw[honest].max()) if honest.any() else None,
                "flood_rounds": self.rounds, "dropped_messages": self.dropped}
