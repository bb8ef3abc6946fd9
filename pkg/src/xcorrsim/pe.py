"""Processing-element building blocks: controller phases, binary search
probing, and the 16-wide ion-matching kernel.

The simulator loop in :mod:`xcorrsim.simulator` drives these per cycle; the
Python classes below run the same jitted steps stand-alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .interconnect import BEAT_BYTES

IDLE, FETCH_SPECTRUM, SEARCH, FETCH_PEPTIDE, GENERATE_IONS, SCORE, WRITEBACK, DONE = range(8)
PHASE_NAMES = ("IDLE", "FETCH_SPECTRUM", "SEARCH", "FETCH_PEPTIDE", "GENERATE_IONS", "SCORE", "WRITEBACK", "DONE")

# Legal controller transitions. IDLE is left at the start of a cycle, so a PE
# never spends a whole cycle there.
TRANSITIONS = {
    IDLE: {FETCH_SPECTRUM, DONE},
    FETCH_SPECTRUM: {SEARCH},
    SEARCH: {FETCH_PEPTIDE, WRITEBACK},
    FETCH_PEPTIDE: {GENERATE_IONS},
    GENERATE_IONS: {SCORE},
    SCORE: {FETCH_PEPTIDE, WRITEBACK},
    WRITEBACK: {IDLE},
    DONE: set(),
}

LANES = 16  # entries per 64-byte packet
PAD_BIN = 0xFFFF
MASSES_PER_PACKET = BEAT_BYTES // 8
FIFO_DEPTH = 2

# search_advance outcomes
COMPARED, NEED_PROBE, SEARCH_DONE = 0, 1, 2
# search state vector layout
S_BOUND, S_LO, S_HI, S_FIRST, S_PKT = range(5)
SEARCH_FIELDS = 5


# -- ion-matching kernel -----------------------------------------------------


@njit
def kernel_step(ion_bin, ion_val, bins, vals, base, acc):
    """One kernel cycle against the packet at ``bins[base:base + 16]``.

    Returns ``(acc, next_packet)``. When the theoretical bin lies beyond the
    packet's last entry the packet counter should advance; otherwise every
    lane is compared, matches are multiplied and accumulated in float32, and
    the caller moves on to the next theoretical ion.
    """
    if ion_bin > bins[base + LANES - 1]:
        return acc, True
    for lane in range(LANES):
        if bins[base + lane] == ion_bin:
            acc = np.float32(acc + np.float32(ion_val * vals[base + lane]))
    return acc, False


def make_packets(spectrum):
    """Split a binned spectrum into (n, 16) bin / float32 value arrays.

    The tail packet is padded with bin 0xFFFF and value 0.
    """
    n = len(spectrum)
    npk = (n + LANES - 1) // LANES
    bins = np.full(npk * LANES, PAD_BIN, dtype=np.int64)
    vals = np.zeros(npk * LANES, dtype=np.float32)
    bins[:n] = spectrum.bins
    vals[:n] = spectrum.intensities.astype(np.float32)
    return bins.reshape(npk, LANES), vals.reshape(npk, LANES)


@dataclass
class IonMatchingKernel:
    """Stand-alone kernel: walks theoretical ions against resident packets."""

    packet_bins: np.ndarray
    packet_vals: np.ndarray
    ion_bins: np.ndarray
    ion_vals: np.ndarray
    ion: int = 0
    packet: int = 0
    accumulator: np.float32 = field(default_factory=lambda: np.float32(0.0))
    cycles: int = 0

    @classmethod
    def for_pair(cls, theoretical, spectrum):
        pb, pv = make_packets(spectrum)
        return cls(pb, pv, theoretical.bins.astype(np.int64), theoretical.intensities.astype(np.float32))

    @property
    def finished(self):
        return self.ion >= self.ion_bins.size or self.packet >= self.packet_bins.shape[0]

    def step(self):
        if self.finished:
            raise RuntimeError("kernel already finished")
        acc, advance = kernel_step(
            self.ion_bins[self.ion],
            self.ion_vals[self.ion],
            self.packet_bins.reshape(-1),
            self.packet_vals.reshape(-1),
            self.packet * LANES,
            self.accumulator,
        )
        self.accumulator = np.float32(acc)
        if advance:
            self.packet += 1
        else:
            self.ion += 1
        self.cycles += 1
        return advance

    def run(self):
        while not self.finished:
            self.step()
        return self.accumulator


# -- binary search -----------------------------------------------------------


@njit
def search_init(sv, n):
    sv[S_BOUND] = 0
    sv[S_LO] = 0
    sv[S_HI] = n
    sv[S_FIRST] = 0


@njit
def search_advance(sv, n, probe, precursor, tolerance):
    """One SEARCH cycle.

    ``probe`` holds the 8 masses of packet ``sv[S_PKT]``. Returns
    (outcome, packet_to_fetch). Finishing the lower bound falls straight
    through to the first comparison of the upper bound in the same cycle.
    """
    while True:
        if sv[S_LO] == sv[S_HI]:
            if sv[S_BOUND] == 0:
                sv[S_FIRST] = sv[S_LO]
                sv[S_BOUND] = 1
                sv[S_HI] = n
                continue
            return SEARCH_DONE, -1
        mid = (sv[S_LO] + sv[S_HI]) // 2
        pkt = mid // MASSES_PER_PACKET
        if pkt != sv[S_PKT]:
            return NEED_PROBE, pkt
        m = probe[mid - pkt * MASSES_PER_PACKET]
        if sv[S_BOUND] == 0:
            if precursor - m > tolerance:
                sv[S_LO] = mid + 1
            else:
                sv[S_HI] = mid
        else:
            if m - precursor > tolerance:
                sv[S_HI] = mid
            else:
                sv[S_LO] = mid + 1
        return COMPARED, -1


@dataclass
class SearchTrace:
    lo: int
    hi: int
    probes: list  # packet indices fetched, in order
    cycles: int


def binary_search_sim(mass_index, precursor_mass: float, tolerance: float) -> SearchTrace:
    """Run the probe protocol against an in-memory mass index.

    Each probe models one 64-byte read holding eight float64 masses; the
    most recent probe stays in a register and is reused when possible.
    """
    masses = np.asarray(mass_index, dtype=np.float64)
    n = masses.size
    sv = np.zeros(SEARCH_FIELDS, dtype=np.int64)
    sv[S_PKT] = -1
    search_init(sv, n)
    probe = np.zeros(MASSES_PER_PACKET, dtype=np.float64)
    probes = []
    cycles = 0
    while True:
        cycles += 1
        outcome, pkt = search_advance(sv, n, probe, float(precursor_mass), float(tolerance))
        if outcome == SEARCH_DONE:
            return SearchTrace(int(sv[S_FIRST]), int(sv[S_LO]), probes, cycles)
        if outcome == NEED_PROBE:
            probes.append(int(pkt))
            chunk = masses[pkt * MASSES_PER_PACKET:(pkt + 1) * MASSES_PER_PACKET]
            probe[:] = np.inf
            probe[: chunk.size] = chunk
            sv[S_PKT] = pkt
