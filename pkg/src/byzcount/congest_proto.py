"""Randomized counting with beacons, hop trails and suffix blacklisting.

Time is split into phases i = c, c+1, ...; phase i runs
``floor(exp((1 - gamma) i)) + 1`` iterations of ``2i + 5`` rounds.  In each
iteration a vertex wakes up with probability ``c1 i / d**i`` and floods a
beacon for ``i + 2`` rounds.  A vertex that hears no acceptable beacon
decides ``i``; undecided vertices then flood a continue signal for ``i + 3``
rounds so decided vertices stay in the loop.  Beacons carry the trail of
IDs they travelled; everything but the last few hops of the accepted trail
is blacklisted for the rest of the phase.

Two implementations share the same semantics: :func:`congest_round` is a
pure per-vertex transition used as the reference, and
:class:`CongestProtocol` runs every vertex at once in a jitted kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from ._accel import njit
from .engine import Protocol
from .graph import ParameterError

NONE, BEACON, CONTINUE = 0, 1, 2


# ---------------------------------------------------------------------------
# parameters and schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CongestParams:
    gamma: float
    delta: float
    eta: float
    c1: float
    d: int
    c: int
    epsilon: float
    c_min: int

    @property
    def below_bound(self) -> bool:
        return self.c < self.c_min

    def suffix_len(self, i: int) -> int:
        return suffix_length(i, self.epsilon)

    def iterations(self, i: int) -> int:
        return iterations_in_phase(i, self.gamma)


def _num(x, name):
    try:
        return float(str(x))
    except ValueError:
        raise ParameterError(f"{name} must be a number, got {x!r}") from None


def min_start_phase(delta: float, eta: float) -> int:
    return max(4, math.ceil(2 * math.log(2) / ((2 - delta) * eta)))


def congest_params(gamma, delta, eta, c1, d, c: Optional[int] = None) -> CongestParams:
    """Validate constants and derive epsilon and the start phase.

    ``c`` may be set below the analysed minimum (small graphs finish long
    before that phase); :attr:`CongestParams.below_bound` records it.
    """
    gamma, delta, eta, c1 = (_num(x, k) for x, k in ((gamma, "gamma"), (delta, "delta"), (eta, "eta"), (c1, "c1")))
    d = int(d)
    if not 0 < delta <= 0.5:
        raise ParameterError(f"delta must lie in (0, 1/2], got {delta}")
    if eta <= 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if c1 <= 0:
        raise ParameterError(f"c1 must be positive, got {c1}")
    if d < 2:
        raise ParameterError(f"degree must be at least 2, got {d}")
    gamma_min = 1 / (2 - delta) + eta
    if gamma < gamma_min - 1e-12:
        raise ParameterError(f"gamma must be at least 1/(2-delta)+eta = {gamma_min:.6f}, got {gamma}")
    epsilon = 1 - (1 - delta) * gamma / math.log(d)
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon = 1-(1-delta)gamma/ln d = {epsilon:.6f} must lie in (0, 1)")
    c_min = min_start_phase(delta, eta)
    if c is None:
        c = c_min
    c = int(c)
    if c < 1:
        raise ParameterError(f"start phase must be >= 1, got {c}")
    return CongestParams(gamma, delta, eta, c1, d, c, epsilon, c_min)


class PhaseSchedule(NamedTuple):
    phase: int
    iterations: int
    beacon_window: int
    continue_window: int

    @property
    def rounds_per_iteration(self) -> int:
        return self.beacon_window + self.continue_window


def iterations_in_phase(i: int, gamma: float) -> int:
    return math.floor(math.exp((1 - gamma) * i)) + 1


def schedule(i: int, params) -> PhaseSchedule:
    gamma = params.gamma if isinstance(params, CongestParams) else float(params)
    return PhaseSchedule(i, iterations_in_phase(i, gamma), i + 2, i + 3)


class Position(NamedTuple):
    round: int
    phase: int
    iteration: int   # 1-based within the phase
    t: int           # 1-based round within the iteration
    index: int       # 0-based iteration count since the start of the run


class Clock:
    """Maps a global round number to its phase/iteration/round position."""

    def __init__(self, params: CongestParams):
        self.params = params
        self._starts = [(1, params.c, 0)]   # (first round, phase, iterations before)

    def at(self, rnd: int) -> Position:
        if rnd < 1:
            raise ValueError("rounds are numbered from 1")
        while True:
            start, i, before = self._starts[-1]
            sched = schedule(i, self.params)
            end = start + sched.iterations * sched.rounds_per_iteration
            if rnd < end or len(self._starts) > 10_000:
                break
            self._starts.append((end, i + 1, before + sched.iterations))
        lo, hi = 0, len(self._starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._starts[mid][0] <= rnd:
                lo = mid
            else:
                hi = mid - 1
        start, i, before = self._starts[lo]
        per = 2 * i + 5
        j, t = divmod(rnd - start, per)
        return Position(rnd, i, j + 1, t + 1, before + j)


def activation_probability(i: int, d: int, c1: float) -> float:
    return min(1.0, c1 * i / float(d) ** i)


def activation_draw(u: float, i: int, d: int, c1: float) -> bool:
    return u < activation_probability(i, d, c1)


def suffix_length(i: int, epsilon: float) -> int:
    return math.floor((1 - epsilon) * i + 1e-12)


def suffix_split(path, i: int, epsilon: float):
    path = tuple(path)
    keep = suffix_length(i, epsilon)
    cut = max(len(path) - keep, 0)
    return path[:cut], path[cut:]


# ---------------------------------------------------------------------------
# messages
# ---------------------------------------------------------------------------

def beacon(origin: int, path=()) -> tuple:
    return ("beacon", origin, tuple(path))


CONTINUE_MSG = ("continue",)


def classify(payload, sender_id: int, i: int):
    """Return ``("beacon", origin, path)``, ``("continue",)`` or None if malformed.

    Malformed: anything not shaped like the two message kinds, a beacon with
    an empty trail whose origin is not the sender, a trail that does not
    start at its origin, or a trail longer than ``i + 1`` entries.
    """
    if payload == CONTINUE_MSG:
        return CONTINUE_MSG
    if not (isinstance(payload, tuple) and len(payload) == 3 and payload[0] == "beacon"):
        return None
    _, origin, path = payload
    if not isinstance(origin, int) or isinstance(origin, bool) or origin < 0:
        return None
    if not isinstance(path, tuple) or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 0 for x in path):
        return None
    if not path:
        if origin != sender_id:
            return None
    elif path[0] != origin:
        return None
    if len(path) > i + 1:
        return None
    return payload


def in_beacon_window(t: int, i: int) -> bool:
    return 2 <= t <= i + 3


def in_continue_window(t: int, i: int, rnd: int) -> bool:
    return (t == 1 and rnd > 1) or t >= i + 4


# ---------------------------------------------------------------------------
# reference per-vertex transition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CongestState:
    me: int
    blacklist: frozenset = frozenset()
    shortest_path: Optional[tuple] = None
    decided: Optional[int] = None
    decided_round: Optional[int] = None
    in_loop: bool = True
    continue_seen: bool = False
    continue_sent: bool = False
    dropped: int = 0


def congest_round(state: CongestState, inbox, pos: Position, params: CongestParams, draw: float):
    """Advance one vertex by one round.

    ``inbox`` is a sequence of ``(port, sender_id, payload)`` for the
    messages delivered this round; ``draw`` is the vertex's uniform tape
    entry for the current iteration (read only at ``t == 1``).  Returns the
    new state and the payload to broadcast (None for silence).
    """
    i, t, rnd = pos.phase, pos.t, pos.round
    s = params.suffix_len(i)
    dropped = state.dropped
    beacons = []
    got_continue = False
    for port, sender, payload in inbox:
        msg = classify(payload, sender, i)
        if msg is None:
            dropped += 1
        elif msg is CONTINUE_MSG or msg == CONTINUE_MSG:
            got_continue = got_continue or in_continue_window(t, i, rnd)
        elif in_beacon_window(t, i):
            beacons.append((port, msg[1], msg[2], sender))
    st = replace(state, dropped=dropped)
    out = None

    if t == 1:
        if rnd > 1:
            if got_continue:
                st = replace(st, continue_seen=True, in_loop=True)
            if st.in_loop and st.decided is not None and not st.continue_seen:
                st = replace(st, in_loop=False)
        if pos.iteration == 1:
            st = replace(st, blacklist=frozenset())
        st = replace(st, shortest_path=None, continue_seen=False, continue_sent=False)
        if st.in_loop and activation_draw(draw, i, params.d, params.c1):
            st = replace(st, shortest_path=(st.me,))
            out = beacon(st.me)
        return st, out

    if t <= i + 3:
        if not st.in_loop:
            return st, None
        if beacons:
            port, origin, path, sender = min(beacons)
            trail = path + (sender,)
            if t <= i + 2 and len(trail) <= i + 1:
                out = beacon(origin, trail)
            if st.shortest_path is None:
                prefix, _ = suffix_split(trail, i, params.epsilon)
                if not st.blacklist.intersection(prefix):
                    st = replace(st, shortest_path=trail)
        if t == i + 3:
            if st.shortest_path is None and st.decided is None:
                st = replace(st, decided=i, decided_round=rnd)
            if st.shortest_path is not None and s > 0:
                prefix, _ = suffix_split(st.shortest_path, i, params.epsilon)
                st = replace(st, blacklist=st.blacklist | frozenset(prefix))
            if st.decided is None:
                st = replace(st, continue_sent=True)
                out = CONTINUE_MSG
        return st, out

    if got_continue:
        st = replace(st, continue_seen=True, in_loop=True)
        if not st.continue_sent:
            st = replace(st, continue_sent=True)
            out = CONTINUE_MSG
    return st, out


def estimate_of(state) -> Optional[int]:
    return state.decided


# ---------------------------------------------------------------------------
# batch kernel
# ---------------------------------------------------------------------------

@njit
def _incoming_continue(v, nbr, honest, okind, inj_idx, icont):
    for p in range(nbr.shape[1]):
        w = nbr[v, p]
        if w < 0:
            break
        if honest[w]:
            if okind[w] == 2:
                return True
        else:
            k = inj_idx[v, p]
            if k >= 0 and icont[k]:
                return True
    return False


@njit
def congest_kernel(t, i, s, rnd, nbr, honest,
                   okind, oorigin, opath, oplen,
                   inj_idx, ibeacon, iorigin, ipath, iplen, icont,
                   activate, clear_bl,
                   in_loop, decided, dec_round, sp_len, sp_path,
                   cont_seen, cont_sent, bl, bl_count,
                   nkind, norigin, npath, nplen):
    n = nbr.shape[0]
    dmax = nbr.shape[1]
    for v in range(n):
        if not honest[v]:
            continue
        if t == 1:
            if rnd > 1:
                if _incoming_continue(v, nbr, honest, okind, inj_idx, icont):
                    cont_seen[v] = 1
                    in_loop[v] = 1
                if in_loop[v] == 1 and decided[v] >= 0 and cont_seen[v] == 0:
                    in_loop[v] = 0
            if clear_bl:
                bl_count[v] = 0
            sp_len[v] = 0
            cont_seen[v] = 0
            cont_sent[v] = 0
            if in_loop[v] == 1 and activate[v]:
                sp_len[v] = 1
                sp_path[v, 0] = v
                nkind[v] = 1
                norigin[v] = v
                nplen[v] = 0
        elif t <= i + 3:
            if in_loop[v] == 0:
                continue
            # lowest port carrying a beacon wins
            src = -1
            k = -1
            sender = -1
            for p in range(dmax):
                w = nbr[v, p]
                if w < 0:
                    break
                if honest[w]:
                    if okind[w] == 1:
                        src = w
                        sender = w
                        break
                else:
                    q = inj_idx[v, p]
                    if q >= 0 and ibeacon[q]:
                        k = q
                        sender = w
                        break
            if sender >= 0:
                if k >= 0:
                    length = iplen[k]
                    for x in range(length):
                        npath[v, x] = ipath[k, x]
                    origin = iorigin[k]
                else:
                    length = oplen[src]
                    for x in range(length):
                        npath[v, x] = opath[src, x]
                    origin = oorigin[src]
                npath[v, length] = sender
                length += 1
                if t <= i + 2 and length <= i + 1:
                    nkind[v] = 1
                    norigin[v] = origin
                    nplen[v] = length
                if sp_len[v] == 0:
                    ok = True
                    for x in range(length - s):
                        h = npath[v, x]
                        for y in range(bl_count[v]):
                            if bl[v, y] == h:
                                ok = False
                                break
                        if not ok:
                            break
                    if ok:
                        for x in range(length):
                            sp_path[v, x] = npath[v, x]
                        sp_len[v] = length
            if t == i + 3:
                if sp_len[v] == 0 and decided[v] < 0:
                    decided[v] = i
                    dec_round[v] = rnd
                if sp_len[v] > 0 and s > 0:
                    for x in range(sp_len[v] - s):
                        h = sp_path[v, x]
                        seen = False
                        for y in range(bl_count[v]):
                            if bl[v, y] == h:
                                seen = True
                                break
                        if not seen:
                            bl[v, bl_count[v]] = h
                            bl_count[v] += 1
                if decided[v] < 0:
                    nkind[v] = 2
                    cont_sent[v] = 1
        else:
            if _incoming_continue(v, nbr, honest, okind, inj_idx, icont):
                cont_seen[v] = 1
                in_loop[v] = 1
                if cont_sent[v] == 0:
                    cont_sent[v] = 1
                    nkind[v] = 2


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------

class _CongestBase(Protocol):
    strategies = ("silent", "beacon-spam", "path-tamper", "copy-stitch")

    def __init__(self, gamma="0.72", delta="0.5", eta="0.05", c1="8", c=None, d=None):
        self.raw = dict(gamma=gamma, delta=delta, eta=eta, c1=c1, c=c, d=d)
        self.init_params = dict(self.raw)

    def _setup_params(self, sim):
        raw = self.raw
        d = raw["d"] if raw["d"] is not None else sim.topo.d_max
        self.params = congest_params(raw["gamma"], raw["delta"], raw["eta"], raw["c1"], d, raw["c"])
        self.init_params.update(d=self.params.d, c=self.params.c)
        self.clock = Clock(self.params)
        self.activations: list[tuple[int, int, int]] = []
        self.bl_sizes: dict[int, dict] = {}

    def position(self, rnd: int) -> dict:
        return self.clock.at(rnd)._asdict()

    def payload_ids(self, payload) -> int:
        if isinstance(payload, tuple) and len(payload) == 3 and payload[0] == "beacon":
            path = payload[2]
            return 1 + (len(path) if isinstance(path, tuple) else 0)
        return 0

    def _draws(self, pos: Position) -> np.ndarray:
        return self.sim.tape.block("activation", pos.index + 1)[:, pos.index]

    def extra_aggregates(self) -> dict:
        p = self.params
        return {
            "params": {"gamma": p.gamma, "delta": p.delta, "eta": p.eta, "c1": p.c1, "d": p.d,
                       "c": p.c, "epsilon": p.epsilon, "c_min": p.c_min,
                       "c_below_analysis_bound": p.below_bound},
            "blacklist_sizes": {str(k): v for k, v in sorted(self.bl_sizes.items())},
            "activations": [list(a) for a in self.activations],
            "dropped_messages": int(self.dropped_total()),
        }

    def honest_activity(self) -> dict:
        """Honest activation count per phase."""
        out: dict[int, int] = {}
        for phase, _, count in self.activations:
            out[phase] = out.get(phase, 0) + count
        return out


class CongestProtocol(_CongestBase):
    protocol_id = "congest"

    def setup(self, sim) -> None:
        self._setup_params(sim)
        topo = sim.topo
        n = topo.n
        self._init_stats(n)
        self.nbr = topo.padded_adj
        self.honest_u8 = sim.honest.astype(np.uint8)
        self.in_loop = np.ones(n, dtype=np.uint8)
        self.decided = np.full(n, -1, dtype=np.int64)
        self.dec_round = np.full(n, -1, dtype=np.int64)
        self.sp_len = np.zeros(n, dtype=np.int64)
        self.sp_path = np.zeros((n, 1), dtype=np.int64)
        self.cont_seen = np.zeros(n, dtype=np.uint8)
        self.cont_sent = np.zeros(n, dtype=np.uint8)
        self.bl = np.zeros((n, 1), dtype=np.int64)
        self.bl_count = np.zeros(n, dtype=np.int64)
        self.dropped = np.zeros(n, dtype=np.int64)
        self.kind = np.zeros(n, dtype=np.int8)
        self.origin = np.zeros(n, dtype=np.int64)
        self.path = np.zeros((n, 1), dtype=np.int64)
        self.plen = np.zeros(n, dtype=np.int64)
        self.inj_idx = np.full(self.nbr.shape, -1, dtype=np.int64)
        self._phase = None

    def _record_bl(self, phase) -> None:
        counts = self.bl_count[self.sim.honest]
        self.bl_sizes[phase] = {"max": int(counts.max()) if len(counts) else 0,
                                "mean": float(counts.mean()) if len(counts) else 0.0}

    def _injected(self, injected: dict, pos: Position):
        """Validate Byzantine payloads and pack one winner per (vertex, port)."""
        topo = self.sim.topo
        reg = self.sim.registry
        self.inj_idx.fill(-1)
        beacons, origins, paths, conts = [], [], [], []
        for v, ports in injected.items():
            for p, payloads in ports.items():
                sender = topo.ids[topo.adj[v][p]]
                best = None
                cont = False
                for payload in payloads:
                    msg = classify(payload, sender, pos.phase)
                    if msg is None:
                        self.dropped[v] += 1
                    elif msg == CONTINUE_MSG:
                        cont = cont or in_continue_window(pos.t, pos.phase, pos.round)
                    elif in_beacon_window(pos.t, pos.phase):
                        key = (msg[1], msg[2])
                        if best is None or key < best:
                            best = key
                if best is None and not cont:
                    continue
                self.inj_idx[v, p] = len(beacons)
                beacons.append(best is not None)
                conts.append(cont)
                if best is None:
                    origins.append(0)
                    paths.append(())
                else:
                    origins.append(reg.intern(best[0]))
                    paths.append(tuple(reg.intern(x) for x in best[1]))
        m = len(beacons)
        width = max([1] + [len(q) for q in paths])
        ipath = np.zeros((max(m, 1), width), dtype=np.int64)
        iplen = np.zeros(max(m, 1), dtype=np.int64)
        for k, q in enumerate(paths):
            ipath[k, :len(q)] = q
            iplen[k] = len(q)
        pad = [False] if m == 0 else []
        return (np.array(beacons + pad, dtype=np.bool_), np.array(origins + [0] * len(pad), dtype=np.int64),
                ipath, iplen, np.array(conts + pad, dtype=np.bool_))

    def step(self, rnd: int, injected: dict) -> None:
        pos = self.clock.at(rnd)
        i, t = pos.phase, pos.t
        n = self.sim.topo.n
        width = i + 2
        activate = np.zeros(n, dtype=np.bool_)
        clear_bl = False
        if t == 1:
            if pos.iteration == 1:
                if self._phase is not None:
                    self._record_bl(self._phase)
                self._phase = i
                clear_bl = True
                cap = self.params.iterations(i) * width
                self.bl = np.zeros((n, max(cap, 1)), dtype=np.int64)
                self.bl_count[:] = 0
                self.sp_path = np.zeros((n, width), dtype=np.int64)
            draws = self._draws(pos)
            activate = draws < activation_probability(i, self.params.d, self.params.c1)
        ibeacon, iorigin, ipath, iplen, icont = self._injected(injected, pos)
        nkind = np.zeros(n, dtype=np.int8)
        norigin = np.zeros(n, dtype=np.int64)
        npath = np.zeros((n, width), dtype=np.int64)
        nplen = np.zeros(n, dtype=np.int64)
        congest_kernel(t, i, self.params.suffix_len(i), rnd, self.nbr, self.honest_u8,
                       self.kind, self.origin, self.path, self.plen,
                       self.inj_idx, ibeacon, iorigin, ipath, iplen, icont,
                       activate, clear_bl,
                       self.in_loop, self.decided, self.dec_round, self.sp_len, self.sp_path,
                       self.cont_seen, self.cont_sent, self.bl, self.bl_count,
                       nkind, norigin, npath, nplen)
        if t == 1:
            active = int(((nkind == BEACON) & self.sim.honest).sum())
            self.activations.append((i, pos.iteration, active))
        self.kind, self.origin, self.path, self.plen = nkind, norigin, npath, nplen
        senders = np.flatnonzero(nkind != NONE)
        ids = np.where(nkind[senders] == BEACON, 1 + nplen[senders], 0)
        self._account(senders, ids)

    def outgoing(self, v: int):
        k = self.kind[v]
        if k == NONE:
            return None
        if k == CONTINUE:
            return CONTINUE_MSG
        reg = self.sim.registry
        return beacon(reg.id_of(int(self.origin[v])),
                      tuple(reg.id_of(int(h)) for h in self.path[v, :self.plen[v]]))

    def digest_update(self, h) -> None:
        h.update(self.kind.tobytes())
        h.update(self.origin.tobytes())
        h.update(self.plen.tobytes())
        h.update(np.ascontiguousarray(self.path).tobytes())

    def decisions(self) -> np.ndarray:
        return self.decided

    def decision_rounds(self) -> np.ndarray:
        return self.dec_round

    def terminated(self) -> np.ndarray:
        return self.in_loop == 0

    def blacklist(self, v: int) -> frozenset:
        reg = self.sim.registry
        return frozenset(reg.id_of(int(h)) for h in self.bl[v, :self.bl_count[v]])

    def shortest_path(self, v: int) -> Optional[tuple]:
        if self.sp_len[v] == 0:
            return None
        reg = self.sim.registry
        return tuple(reg.id_of(int(h)) for h in self.sp_path[v, :self.sp_len[v]])

    def dropped_total(self) -> int:
        return int(self.dropped.sum())

    def extra_aggregates(self) -> dict:
        if self._phase is not None and self._phase not in self.bl_sizes:
            self._record_bl(self._phase)
        return super().extra_aggregates()


class ReferenceCongestProtocol(_CongestBase):
    """Vertex-by-vertex driver over :func:`congest_round`; slow, for cross-checks."""

    protocol_id = "congest-ref"

    def setup(self, sim) -> None:
        self._setup_params(sim)
        topo = sim.topo
        self._init_stats(topo.n)
        self.states = [CongestState(topo.ids[v]) if sim.honest[v] else None for v in range(topo.n)]
        self.out: list = [None] * topo.n
        self._phase = None

    def step(self, rnd: int, injected: dict) -> None:
        topo = self.sim.topo
        honest = self.sim.honest
        pos = self.clock.at(rnd)
        if pos.t == 1 and pos.iteration == 1:
            if self._phase is not None:
                self._record_bl(self._phase)
            self._phase = pos.phase
        draws = self._draws(pos) if pos.t == 1 else None
        prev = self.out
        new: list = [None] * topo.n
        for v in range(topo.n):
            st = self.states[v]
            if st is None:
                continue
            inbox = []
            extra = injected.get(v, {})
            for p, w in enumerate(topo.adj[v]):
                if honest[w]:
                    if prev[w] is not None:
                        inbox.append((p, topo.ids[w], prev[w]))
                else:
                    for payload in extra.get(p, ()):
                        inbox.append((p, topo.ids[w], payload))
            draw = float(draws[v]) if draws is not None else 1.0
            st, out = congest_round(st, inbox, pos, self.params, draw)
            self.states[v] = st
            new[v] = out
        if pos.t == 1:
            self.activations.append((pos.phase, pos.iteration,
                                     sum(1 for v in range(topo.n) if new[v] is not None and honest[v])))
        self.out = new
        senders = np.array([v for v in range(topo.n) if new[v] is not None], dtype=np.int64)
        ids = np.array([self.payload_ids(new[v]) for v in senders], dtype=np.int64)
        self._account(senders, ids)

    def _record_bl(self, phase) -> None:
        counts = [len(s.blacklist) for s in self.states if s is not None]
        self.bl_sizes[phase] = {"max": max(counts, default=0),
                                "mean": float(np.mean(counts)) if counts else 0.0}

    def outgoing(self, v: int):
        return self.out[v]

    def decisions(self) -> np.ndarray:
        return np.array([-1 if s is None or s.decided is None else s.decided for s in self.states], dtype=np.int64)

    def decision_rounds(self) -> np.ndarray:
        return np.array([-1 if s is None or s.decided_round is None else s.decided_round for s in self.states],
                        dtype=np.int64)

    def terminated(self) -> np.ndarray:
        return np.array([s is not None and not s.in_loop for s in self.states], dtype=bool)

    def blacklist(self, v: int) -> frozenset:
        return self.states[v].blacklist

    def shortest_path(self, v: int) -> Optional[tuple]:
        return self.states[v].shortest_path

    def dropped_total(self) -> int:
        return sum(s.dropped for s in self.states if s is not None)

    def extra_aggregates(self) -> dict:
        if self._phase is not None and self._phase not in self.bl_sizes:
            self._record_bl(self._phase)
        return super().extra_aggregates()
