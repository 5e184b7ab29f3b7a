import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from byzcount.congest_proto import (CONTINUE_MSG, Clock, CongestState, Position, activation_draw,
                                    activation_probability, beacon, classify, congest_params, congest_round,
                                    estimate_of, schedule, suffix_length, suffix_split)
from byzcount.engine import StopCondition, new_simulation
from byzcount.graph import ParameterError, distances, generate_hnd

P = dict(gamma=0.72, delta=0.5, eta=0.05, c1=8, d=8)


# -- parameters --------------------------------------------------------------

def test_gamma_lower_bound():
    bound = 1 / 1.5 + 0.05
    assert bound == pytest.approx(0.7167, abs=1e-4)
    congest_params(0.7167, 0.5, 0.05, 8, 8)
    with pytest.raises(ParameterError, match="gamma"):
        congest_params(0.716, 0.5, 0.05, 8, 8)


def test_epsilon_value():
    p = congest_params(**P)
    assert p.epsilon == pytest.approx(1 - 0.36 / math.log(8))
    assert p.epsilon == pytest.approx(0.8268, abs=1e-4)


@pytest.mark.parametrize("kw,word", [
    (dict(delta=0.6), "delta"),
    (dict(delta=0), "delta"),
    (dict(eta=0), "eta"),
    (dict(gamma=3, d=2), "epsilon"),
])
def test_bad_parameters_name_the_constraint(kw, word):
    with pytest.raises(ParameterError, match=word):
        congest_params(**dict(P, **kw))


def test_default_start_phase():
    p = congest_params(**P)
    assert p.c == max(4, math.ceil(2 * math.log(2) / (1.5 * 0.05))) == 19
    assert not p.below_bound
    low = congest_params(**P, c=1)
    assert low.c == 1 and low.below_bound


def test_decimal_strings_accepted():
    assert congest_params("0.72", "0.5", "0.05", "8", 8) == congest_params(**P)


# -- schedule ----------------------------------------------------------------

@pytest.mark.parametrize("i,gamma,iters,rounds", [(10, 0.7, 21, 25), (5, 0.72, None, 15), (4, 0.75, 3, 13)])
def test_schedule_examples(i, gamma, iters, rounds):
    s = schedule(i, gamma)
    assert s.rounds_per_iteration == rounds == 2 * i + 5
    assert s.beacon_window == i + 2 and s.continue_window == i + 3
    if iters is not None:
        assert s.iterations == iters


@given(st.integers(1, 40), st.floats(0.5, 0.99))
def test_schedule_has_two_iterations(i, gamma):
    assert schedule(i, gamma).iterations >= 2


def test_clock_walks_the_schedule():
    p = congest_params(**P, c=3)
    clock = Clock(p)
    rnd = 1
    index = 0
    for i in range(3, 7):
        for j in range(1, p.iterations(i) + 1):
            for t in range(1, 2 * i + 6):
                assert clock.at(rnd) == Position(rnd, i, j, t, index)
                rnd += 1
            index += 1
    assert clock.at(5) == Position(5, 3, 1, 5, 0)


# -- activation and suffixes --------------------------------------------------

def test_activation_probability_examples():
    assert activation_probability(5, 8, 2) == pytest.approx(10 / 32768)
    assert activation_probability(1, 8, 8) == 1.0
    assert activation_draw(0.99, 1, 8, 8)
    assert not activation_draw(0.5, 5, 8, 2)


def test_activation_is_reproducible():
    t = generate_hnd(64, 8, 0)
    runs = []
    for _ in range(2):
        sim = new_simulation(t, ("congest", {"c": 2}), seed=4)
        sim.run_until(StopCondition("all-terminated", 2000))
        runs.append(sim.protocol.activations)
    assert runs[0] == runs[1]


def test_suffix_split_examples():
    eps = congest_params(**P).epsilon
    assert suffix_length(10, eps) == 1
    prefix, suffix = suffix_split(range(10), 10, eps)
    assert len(prefix) == 9 and suffix == (9,)
    assert suffix_split((1,), 10, eps) == ((), (1,))
    assert suffix_split((), 10, eps) == ((), ())
    assert suffix_length(5, eps) == 0


# -- message checks -----------------------------------------------------------

@pytest.mark.parametrize("payload,ok", [
    (beacon(7), True),
    (beacon(5), False),                 # empty trail must come from its origin
    (beacon(5, (5, 6)), True),
    (beacon(5, (6, 5)), False),         # trail must start at the origin
    (beacon(5, tuple(range(5, 10))), False),   # longer than i + 1 = 4
    (CONTINUE_MSG, True),
    (("continue", 1), False),
    ("junk", False),
    (("beacon", -1, ()), False),
])
def test_classify(payload, ok):
    assert (classify(payload, 7, 3) is not None) == ok


# -- single-vertex transitions -------------------------------------------------

def _pos(i, t, j=1, rnd=None):
    return Position(rnd or 100 + t, i, j, t, 0)


def test_active_vertex_sends_empty_trail():
    p = congest_params(**P, c=1)
    st_, out = congest_round(CongestState(42), [], _pos(3, 1), p, 0.0)
    assert out == beacon(42) and st_.shortest_path == (42,)


def test_receiver_appends_sender():
    p = congest_params(**P, c=1)
    st_, out = congest_round(CongestState(1), [(0, 42, beacon(42))], _pos(3, 2), p, 1.0)
    assert out == beacon(42, (42,)) and st_.shortest_path == (42,)


def test_only_one_beacon_survives():
    p = congest_params(**P, c=1)
    inbox = [(2, 30, beacon(30)), (0, 10, beacon(10)), (1, 20, beacon(20))]
    st_, out = congest_round(CongestState(1), inbox, _pos(3, 2), p, 1.0)
    assert out == beacon(10, (10,)) and st_.shortest_path == (10,)


def test_same_port_ties_go_to_lowest_origin():
    p = congest_params(**P, c=1)
    inbox = [(0, 9, beacon(8, (8, 7))), (0, 9, beacon(3, (3,)))]
    _, out = congest_round(CongestState(1), inbox, _pos(3, 3), p, 1.0)
    assert out == beacon(3, (3, 9))


def test_forwarding_stops_at_hop_limit():
    p = congest_params(**P, c=1)
    i = 3
    long = beacon(5, (5, 6, 7, 8))         # i + 1 entries: appending makes i + 2
    st_, out = congest_round(CongestState(1), [(0, 9, long)], _pos(i, 4), p, 1.0)
    assert out is None and st_.shortest_path == (5, 6, 7, 8, 9)


def test_no_beacon_means_decision_and_no_continue():
    p = congest_params(**P, c=1)
    i = 3
    st_, out = congest_round(CongestState(1), [], _pos(i, i + 3), p, 1.0)
    assert st_.decided == i and estimate_of(st_) == i and out is None


def test_undecided_sends_continue():
    p = congest_params(**P, c=1)
    st_ = CongestState(1, shortest_path=(4,))
    st_, out = congest_round(st_, [], _pos(3, 6), p, 1.0)
    assert st_.decided is None and out == CONTINUE_MSG and estimate_of(st_) is None


def test_blacklist_blocks_and_commits():
    p = congest_params(**P, c=1)
    i = 12                              # suffix of 2
    assert p.suffix_len(i) == 2
    st_ = CongestState(1, blacklist=frozenset({5}))
    st_, _ = congest_round(st_, [(0, 9, beacon(5, (5, 6)))], _pos(i, 4), p, 1.0)
    assert st_.shortest_path is None
    st_, _ = congest_round(st_, [(0, 9, beacon(4, (4, 6)))], _pos(i, 5), p, 1.0)
    assert st_.shortest_path == (4, 6, 9)
    st_, _ = congest_round(st_, [], _pos(i, i + 3), p, 1.0)
    assert st_.blacklist == {5, 4}
    # a new phase clears it
    st_, _ = congest_round(st_, [], _pos(i + 1, 1, j=1), p, 1.0)
    assert st_.blacklist == frozenset()


def test_decided_without_continue_exits_and_reenters():
    p = congest_params(**P, c=1)
    st_ = CongestState(1, decided=3)
    st_, _ = congest_round(st_, [], _pos(3, 1, j=2), p, 1.0)
    assert not st_.in_loop
    st_, out = congest_round(st_, [(0, 2, CONTINUE_MSG)], _pos(3, 8, j=2), p, 1.0)
    assert st_.in_loop and out == CONTINUE_MSG
    st_, out = congest_round(st_, [(0, 2, CONTINUE_MSG)], _pos(3, 9, j=2), p, 1.0)
    assert out is None                  # forwarded once per window


def test_malformed_payloads_are_counted():
    p = congest_params(**P, c=1)
    st_, _ = congest_round(CongestState(1), [(0, 9, "junk"), (0, 9, beacon(3))], _pos(3, 2), p, 1.0)
    assert st_.dropped == 2 and st_.shortest_path is None


# -- batch kernel vs reference ---------------------------------------------------

def _trace(t, proto, byz=(), adversary=None, seed=0, rounds=400):
    sim = new_simulation(t, proto, byz=byz, adversary=adversary, seed=seed)
    outs = []
    for _ in range(rounds):
        sim.step_round()
        outs.append(tuple(sim.protocol.outgoing(v) for v in range(t.n)))
        if np.all(sim.protocol.terminated()[sim.honest]):
            break
    return sim, outs


@settings(max_examples=12)
@given(st.integers(0, 1000), st.integers(12, 40), st.sampled_from([
    ((), None), ((0,), "silent"), ((0, 5), ("beacon-spam", {"length": 2})), ((3,), ("path-tamper", {"keep": 1}))]))
def test_batch_matches_reference(seed, n, attack):
    t = generate_hnd(n, 4, seed)
    byz, adversary = attack
    params = {"c": 2, "c1": "3", "gamma": "0.7", "delta": "0.5", "eta": "0.03"}
    a, outs_a = _trace(t, ("congest", params), byz, adversary, seed)
    b, outs_b = _trace(t, ("congest-ref", params), byz, adversary, seed)
    assert outs_a == outs_b
    ra = a.report("x").per_vertex
    rb = b.report("x").per_vertex
    assert ra == rb
    assert a.protocol.dropped_total() == b.protocol.dropped_total()
    for v in range(t.n):
        if a.honest[v]:
            assert a.protocol.blacklist(v) == b.protocol.blacklist(v)


# -- invariants -----------------------------------------------------------------

def _honest_run(seed, n=300, c1="300", c=6):
    t = generate_hnd(n, 8, seed)
    sim = new_simulation(t, ("congest", {"c": c, "c1": c1}), seed=seed)
    return t, sim


@settings(max_examples=4)
@given(st.integers(0, 1000))
def test_blacklist_invariants_in_honest_runs(seed):
    t, sim = _honest_run(seed)
    p = sim.protocol
    prev = [frozenset()] * t.n
    dist = {}
    for _ in range(1500):
        sim.step_round()
        pos = p.clock.at(sim.round)
        s = p.params.suffix_len(pos.phase)
        now = [p.blacklist(v) for v in range(t.n)]
        if pos.t == 1 and pos.iteration == 1:
            assert all(not b for b in now)
        else:
            assert all(a <= b for a, b in zip(prev, now))
        if pos.t == pos.phase + 3 and s > 0:
            for v in range(t.n):
                new = now[v] - prev[v]
                if not new:
                    continue
                if v not in dist:
                    dist[v] = distances(t, v)
                ds = [dist[v][t.id_index[x]] for x in new]
                assert min(ds) >= s
                assert sum(1 for x in ds if x == s) <= 1
        prev = now
        if np.all(p.terminated()):
            break
    assert np.all(p.terminated())


def test_message_sizes_stay_small():
    t, sim = _honest_run(3, n=200, c1="50", c=2)
    p = sim.protocol
    for _ in range(800):
        sim.step_round()
        i = p.clock.at(sim.round).phase
        for v in range(t.n):
            out = p.outgoing(v)
            if out is not None and out[0] == "beacon":
                assert len(out[2]) <= i + 1          # at most i + 2 hops travelled
                assert p.payload_ids(out) <= i + 3
        if np.all(p.terminated()):
            break
    rep = sim.report("x")
    assert rep.aggregates["max_honest_payload_ids"] <= max(int(k) for k in rep.aggregates["decision_histogram"]) + 3


def test_benign_run_terminates_with_everyone_decided():
    t = generate_hnd(256, 8, 1)
    rep = new_simulation(t, ("congest", {"c": 1}), seed=1).run_until(StopCondition("all-terminated", 5000))
    assert rep.aggregates["termination_cause"] == "all-terminated"
    assert rep.aggregates["fraction_decided"] == 1.0
    assert rep.aggregates["params"]["c_below_analysis_bound"]
