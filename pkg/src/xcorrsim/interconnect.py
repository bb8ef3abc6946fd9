"""Shared memory system: FCFS wait-counter arbiter, DRAM bursts, spectrum cache.

The jitted helpers here (:func:`arbiter_step`, :func:`transaction_cycles`,
:func:`fill_length`) are the ones the simulator loop calls; the classes are
thin stateful wrappers around them for direct use and testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit

BEAT_BYTES = 64
CACHE_SIZES = (512, 1024, 2048, 4096)

READ = 0
WRITE = 1
KIND_NAMES = {READ: "read", WRITE: "write"}


class OutOfBounds(ValueError):
    pass


@njit
def arbiter_step(counters, requests, bus_busy):
    """One arbitration cycle. Returns the granted master or -1.

    With the bus idle, the requester with the largest wait counter wins
    (lowest id on ties) and its counter resets. Every other requester's
    counter goes up by one; non-requesters sit at zero.
    """
    grant = -1
    if not bus_busy:
        best = -1
        for i in range(requests.shape[0]):
            if requests[i] and counters[i] > best:
                grant = i
                best = counters[i]
    for i in range(requests.shape[0]):
        if not requests[i] or i == grant:
            counters[i] = 0
        else:
            counters[i] += 1
    return grant


@njit
def transaction_cycles(latency, length):
    """Bus occupancy of one burst: latency plus one cycle per 64-byte beat."""
    return latency + (length + BEAT_BYTES - 1) // BEAT_BYTES


@njit
def fill_length(capacity, spectrum_bytes, start_packet):
    """Bytes moved when the cache window is loaded starting at ``start_packet``."""
    remaining = spectrum_bytes - start_packet * BEAT_BYTES
    if remaining <= 0:
        return 0
    return min(capacity, remaining)


class Arbiter:
    """First-come first-serve arbiter built from per-master wait counters."""

    def __init__(self, num_masters: int):
        if num_masters < 1:
            raise ValueError("need at least one bus master")
        self.wait_counters = np.zeros(num_masters, dtype=np.int64)
        self.request_lines = np.zeros(num_masters, dtype=np.bool_)
        self.grant = None

    def step(self, requests, bus_busy: bool = False):
        self.request_lines[:] = np.asarray(requests, dtype=np.bool_)
        g = arbiter_step(self.wait_counters, self.request_lines, bool(bus_busy))
        self.grant = None if g < 0 else int(g)
        return self.grant


@dataclass
class BusTransaction:
    pe_id: int
    kind: str
    address: int
    length_bytes: int
    issue_cycle: int = 0
    grant_cycle: int = -1
    completion_cycle: int = -1

    @property
    def busy_cycles(self):
        return self.completion_cycle - self.grant_cycle


class DramModel:
    """Byte-addressable DRAM behind a single bus: one transaction at a time."""

    def __init__(self, size: int, latency_cycles: int = 30):
        if latency_cycles < 1:
            raise ValueError("latency_cycles must be >= 1")
        self.contents = np.zeros(size, dtype=np.uint8)
        self.latency_cycles = latency_cycles
        self.beat_bytes = BEAT_BYTES
        self.busy_until = 0
        self._pending = None

    def bus_busy(self, cycle: int) -> bool:
        return cycle < self.busy_until

    def access(self, txn: BusTransaction, cycle: int, data=None) -> int:
        """Start ``txn`` at ``cycle``; returns its completion cycle."""
        if txn.length_bytes <= 0:
            raise OutOfBounds(f"invalid transaction length {txn.length_bytes}")
        if txn.address < 0 or txn.address + txn.length_bytes > self.contents.size:
            raise OutOfBounds(f"[{txn.address}, {txn.address + txn.length_bytes}) outside DRAM of {self.contents.size} bytes")
        if self.bus_busy(cycle):
            raise RuntimeError("bus already occupied")
        txn.grant_cycle = cycle
        txn.completion_cycle = cycle + transaction_cycles(self.latency_cycles, txn.length_bytes)
        self.busy_until = txn.completion_cycle
        self._pending = (txn, data)
        return txn.completion_cycle

    def complete(self):
        """Retire the in-flight transaction; reads return their bytes."""
        txn, data = self._pending
        self._pending = None
        lo, hi = txn.address, txn.address + txn.length_bytes
        if txn.kind == "write":
            self.contents[lo:hi] = np.frombuffer(bytes(data), dtype=np.uint8)
            return None
        return self.contents[lo:hi].tobytes()


class SpectrumCache:
    """On-chip window over one spectrum's CSR stream (no tags, no ways)."""

    def __init__(self, capacity_bytes: int = 2048):
        if capacity_bytes < BEAT_BYTES or capacity_bytes % BEAT_BYTES:
            raise ValueError("cache capacity must be a positive multiple of 64 bytes")
        self.capacity_bytes = capacity_bytes
        self.window_start = 0  # packet index
        self.window_bytes = 0

    def holds(self, packet: int) -> bool:
        lo = self.window_start
        hi = lo + (self.window_bytes + BEAT_BYTES - 1) // BEAT_BYTES
        return lo <= packet < hi

    def load(self, start_packet: int, length: int) -> None:
        self.window_start = start_packet
        self.window_bytes = length


def cache_fill(cache: SpectrumCache, spectrum_bytes: int, window_start: int, pe_id: int = 0, base_address: int = 0):
    """Transactions needed to make the window at ``window_start`` resident.

    ``window_start`` is a packet index. Returns an empty list when there is
    nothing left to load or the window is already resident.
    """
    if window_start < 0:
        raise ValueError("window_start must be non-negative")
    if cache.holds(window_start) and cache.window_start == window_start:
        return []
    n = fill_length(cache.capacity_bytes, spectrum_bytes, window_start)
    if n == 0:
        return []
    return [BusTransaction(pe_id, "read", base_address + window_start * BEAT_BYTES, int(n))]


def fills_per_pass(capacity_bytes: int, spectrum_bytes: int) -> list[int]:
    """Fill lengths for one sequential pass over the spectrum from a cold window."""
    out = []
    packet = 0
    per_window = capacity_bytes // BEAT_BYTES
    while True:
        n = fill_length(capacity_bytes, spectrum_bytes, packet)
        if n == 0:
            return out
        out.append(int(n))
        packet += per_window
