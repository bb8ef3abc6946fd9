"""Randomized bus traffic for the arbiter property checks."""

import numpy as np

from oracles import ArrivalChecker
from xcorrsim.interconnect import Arbiter


def run_trace(num_masters, cycles, seed, latency=3, max_beats=8, request_prob=None):
    """Drive the arbiter with random requests and random burst lengths.

    A master holds its request line until granted, then stays quiet until
    its own transaction completes. Returns a dict of violation lists and
    summary numbers.
    """
    rng = np.random.default_rng(seed)
    prob = rng.uniform(0.02, 0.6, num_masters) if request_prob is None else np.full(num_masters, request_prob)
    arb = Arbiter(num_masters)
    checker = ArrivalChecker(num_masters)
    requesting = np.zeros(num_masters, dtype=bool)
    free_at = np.zeros(num_masters, dtype=np.int64)  # when the master's own burst completes
    busy_until = 0
    intervals = []
    longest_wait = 0
    max_txn = latency + max_beats
    overlap = []
    for t in range(cycles):
        raise_now = (~requesting) & (free_at <= t) & (rng.random(num_masters) < prob)
        requesting |= raise_now
        bus_busy = t < busy_until
        req = requesting.copy()
        grant = arb.step(req, bus_busy)
        checker.check(t, req.tolist(), bus_busy, grant, arb.wait_counters.tolist())
        if grant is not None:
            longest_wait = max(longest_wait, checker.last_wait)
            dur = latency + int(rng.integers(1, max_beats + 1))
            if intervals and intervals[-1][1] > t:
                overlap.append(t)
            intervals.append((t, t + dur))
            busy_until = t + dur
            free_at[grant] = t + dur
            requesting[grant] = False
    occupancy = sum(min(b, cycles) - a for a, b in intervals)
    return {
        "violations": checker.violations,
        "overlaps": overlap,
        "occupancy": occupancy,
        "cycles": cycles,
        "grants": len(intervals),
        "longest_wait": longest_wait,
        "wait_bound": (num_masters - 1) * max_txn,
    }

