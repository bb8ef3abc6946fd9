"""Cycle-level model of the whole accelerator.

All processing elements, the FCFS memory-bus arbiter, DRAM, and the peptide
broadcast bus advance together under one clock. Each cycle runs in a fixed
order:

1. the transaction finishing this cycle delivers its data (read) or commits
   its bytes (write); the peptide bus delivers everything due;
2. PEs that are IDLE take the next unassigned spectrum, or go DONE;
3. every PE acts once, in PE-id order, and may raise a request;
4. the memory-bus arbiter grants at most one pending request if the bus is
   free; the broadcast bus first lets requests snoop an identical read in
   flight, then accepts one new read (it is pipelined);
5. each PE's cycle lands in exactly one bucket: compute if its ion generator
   or kernel did work, else io if its own transaction holds the memory bus,
   else wait if it has a pending memory-bus request, else idle.

A transaction granted at cycle g for B bytes holds the bus for
``latency + ceil(B / 64)`` cycles and its data is usable at the cycle it
completes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .config import SimConfig
from .halfprec import HALF_TO_F32
from .interconnect import BEAT_BYTES, READ, WRITE, arbiter_step, fill_length, transaction_cycles
from .pe import (
    DONE,
    FETCH_PEPTIDE,
    FETCH_SPECTRUM,
    GENERATE_IONS,
    IDLE,
    LANES,
    MASSES_PER_PACKET,
    NEED_PROBE,
    PAD_BIN,
    S_FIRST,
    S_LO,
    S_PKT,
    SCORE,
    SEARCH,
    SEARCH_DONE,
    SEARCH_FIELDS,
    WRITEBACK,
    kernel_step,
    search_advance,
    search_init,
)
from .peptides import CODE_MASSES, MAX_LENGTH, RECORD_BYTES, PeptideDb, ions_from_record
from .spectra import ENTRY_BYTES, BinnedSpectrum, encode_csr

# per-PE integer state
(
    PHASE, SPEC, LO, HI, CUR, NBYTES, NPKTS, WIN_START, WIN_PKTS,
    ION, PKT, NIONS, GEN_LEFT, FIFO_N, NSCORES,
    RQ, RQ_PURPOSE, RQ_ADDR, RQ_LEN, RQ_ISSUE, RQ_DONE, RQ_ARG,
    PB, PB_PURPOSE, PB_ADDR, PB_LEN, PB_ISSUE, PB_DONE, PB_ARG,
) = range(29)
NFIELDS = 29

# request line states
LINE_FREE, LINE_PENDING, LINE_INFLIGHT = 0, 1, 2
# request purposes
FILL, PROBE, PEPTIDE, SCORES = 0, 1, 2, 3
PURPOSE_NAMES = ("fill", "probe", "peptide", "writeback")

# metric buckets
COMPUTE, IO, WAIT, IDLE_BUCKET = 0, 1, 2, 3

# trace columns
T_PE, T_KIND, T_PURPOSE, T_ADDR, T_LEN, T_ISSUE, T_GRANT, T_DONE, T_BUS = range(9)
TRACE_COLS = 9
MEMORY_BUS, BROADCAST_BUS = 0, 1

# counters
(
    ST_FILLS, ST_FILL_BYTES, ST_MEM_BYTES, ST_PB_READS, ST_PB_BYTES,
    ST_SNOOPS, ST_PROBES, ST_PREFETCHES, ST_PAIRS, ST_STATUS, ST_SCORE_PTR,
) = range(11)
NSTATS = 11

STATUS_OK, STATUS_OUT_OF_BOUNDS, STATUS_CYCLE_LIMIT = 0, 1, 2


@njit
def _request(st, pe, broadcast, purpose, addr, length, arg, t):
    base = PB if broadcast else RQ
    st[pe, base] = LINE_PENDING
    st[pe, base + 1] = purpose
    st[pe, base + 2] = addr
    st[pe, base + 3] = length
    st[pe, base + 4] = t
    st[pe, base + 6] = arg


@njit
def _deliver(pe, purpose, addr, length, arg, st, sv, probe, fifo_rec, fifo_idx, cbins, cvals, dram, half_lut, nmass):
    if purpose == FILL:
        npk = (length + BEAT_BYTES - 1) // BEAT_BYTES
        st[pe, WIN_START] = arg
        st[pe, WIN_PKTS] = npk
        nent = length // ENTRY_BYTES
        for e in range(nent):
            a = addr + ENTRY_BYTES * e
            b = np.int64(dram[a]) | (np.int64(dram[a + 1]) << 8)
            bits = np.int64(dram[a + 2]) | (np.int64(dram[a + 3]) << 8)
            cbins[pe, e] = b
            cvals[pe, e] = half_lut[bits]
        for e in range(nent, npk * LANES):
            cbins[pe, e] = PAD_BIN
            cvals[pe, e] = np.float32(0.0)
        if st[pe, PHASE] == FETCH_SPECTRUM:
            st[pe, PHASE] = SEARCH
            search_init(sv[pe], nmass)
    elif purpose == PROBE:
        words = dram[addr:addr + length].view(np.float64)
        for k in range(MASSES_PER_PACKET):
            probe[pe, k] = words[k] if k < words.shape[0] else np.inf
        sv[pe, S_PKT] = arg
    elif purpose == PEPTIDE:
        slot = st[pe, FIFO_N]
        fifo_rec[pe, slot, :] = dram[addr:addr + RECORD_BYTES]
        fifo_idx[pe, slot] = arg
        st[pe, FIFO_N] = slot + 1


@njit
def _prefetch(st, pe, broadcast, rec_base, t, stats):
    nxt = st[pe, CUR] + 1
    line = PB if broadcast else RQ
    if nxt < st[pe, HI] and st[pe, FIFO_N] < 2 and st[pe, line] == LINE_FREE:
        _request(st, pe, broadcast, PEPTIDE, rec_base + nxt * RECORD_BYTES, RECORD_BYTES, nxt, t)
        stats[ST_PREFETCHES] += 1


# One small function per phase keeps the per-cycle call cheap; the SCORE
# step is the hot path.


@njit
def _fetch_spectrum(pe, t, st, sv, cap, spec_addr, nmass):
    if st[pe, NBYTES] == 0:
        st[pe, PHASE] = SEARCH
        search_init(sv[pe], nmass)
    elif st[pe, RQ] == LINE_FREE:
        n = fill_length(cap, st[pe, NBYTES], 0)
        _request(st, pe, False, FILL, spec_addr[st[pe, SPEC]], n, 0, t)


@njit
def _search(pe, t, st, sv, probe, broadcast, tol, spec_prec, nmass, mass_base, stats):
    if st[pe, PB if broadcast else RQ] != LINE_FREE:
        return
    outcome, pkt = search_advance(sv[pe], nmass, probe[pe], spec_prec[st[pe, SPEC]], tol)
    if outcome == NEED_PROBE:
        n = min(BEAT_BYTES, nmass * 8 - pkt * BEAT_BYTES)
        _request(st, pe, broadcast, PROBE, mass_base + pkt * BEAT_BYTES, n, pkt, t)
        stats[ST_PROBES] += 1
    elif outcome == SEARCH_DONE:
        st[pe, LO] = sv[pe, S_FIRST]
        st[pe, HI] = sv[pe, S_LO]
        st[pe, CUR] = st[pe, LO]
        st[pe, PHASE] = FETCH_PEPTIDE if st[pe, LO] < st[pe, HI] else WRITEBACK


@njit
def _fetch_peptide(pe, t, st, fifo_rec, ibins, broadcast, bin_width, rec_base, code_masses):
    if st[pe, FIFO_N] > 0:
        rec = fifo_rec[pe, 0]
        length = 0
        while length < RECORD_BYTES and rec[length] != 0:
            length += 1
        st[pe, NIONS] = ions_from_record(rec, code_masses, bin_width, ibins[pe])
        st[pe, GEN_LEFT] = max(1, 2 * (length - 1))
        st[pe, PHASE] = GENERATE_IONS
    elif st[pe, PB if broadcast else RQ] == LINE_FREE:
        k = st[pe, CUR]
        _request(st, pe, broadcast, PEPTIDE, rec_base + k * RECORD_BYTES, RECORD_BYTES, k, t)


@njit
def _generate(pe, t, st, acc, broadcast, rec_base, stats):
    st[pe, GEN_LEFT] -= 1
    if st[pe, GEN_LEFT] == 0:
        st[pe, PHASE] = SCORE
        st[pe, ION] = 0
        st[pe, PKT] = 0
        acc[pe] = np.float32(0.0)
    _prefetch(st, pe, broadcast, rec_base, t, stats)


@njit
def _finish_pair(pe, st, acc, sidx, sacc, fifo_rec, fifo_idx, stats):
    j = st[pe, NSCORES]
    sidx[pe, j] = st[pe, CUR]
    sacc[pe, j] = acc[pe]
    st[pe, NSCORES] = j + 1
    fifo_rec[pe, 0, :] = fifo_rec[pe, 1, :]
    fifo_idx[pe, 0] = fifo_idx[pe, 1]
    st[pe, FIFO_N] -= 1
    st[pe, CUR] += 1
    st[pe, PHASE] = FETCH_PEPTIDE if st[pe, CUR] < st[pe, HI] else WRITEBACK
    stats[ST_PAIRS] += 1


@njit
def _writeback(pe, t, st, stats):
    if st[pe, NSCORES] == 0:
        st[pe, PHASE] = IDLE
    elif st[pe, RQ] == LINE_FREE:
        n = st[pe, NSCORES] * 8
        addr = stats[ST_SCORE_PTR]
        stats[ST_SCORE_PTR] += n
        _request(st, pe, False, SCORES, addr, n, 0, t)


@njit
def _blocked(pe, st, broadcast, cap):
    """True when the PE cannot change state until one of its transfers lands."""
    phase = st[pe, PHASE]
    pline = PB if broadcast else RQ
    if phase == DONE:
        return True
    if phase == FETCH_SPECTRUM:
        return st[pe, NBYTES] > 0 and st[pe, RQ] != LINE_FREE
    if phase == SEARCH:
        return st[pe, pline] != LINE_FREE
    if phase == FETCH_PEPTIDE:
        return st[pe, FIFO_N] == 0 and st[pe, pline] != LINE_FREE
    if phase == SCORE:
        pkt = st[pe, PKT]
        if pkt == st[pe, NPKTS] or (st[pe, ION] == st[pe, NIONS] and st[pe, NBYTES] <= cap):
            return False
        if st[pe, WIN_START] <= pkt < st[pe, WIN_START] + st[pe, WIN_PKTS]:
            return False
        if st[pe, RQ] == LINE_FREE:
            return False
        return not (st[pe, CUR] + 1 < st[pe, HI] and st[pe, FIFO_N] < 2 and st[pe, pline] == LINE_FREE)
    if phase == WRITEBACK:
        return st[pe, NSCORES] > 0 and st[pe, RQ] != LINE_FREE
    return False


@njit
def _next_event(st, n_pes, bus_owner, busy_until, broadcast):
    """Earliest cycle at which a transfer completes, or -1 if none is in flight.

    Returns -2 when some request is still waiting for a grant the arbiter
    could give right now, which rules out skipping.
    """
    ev = busy_until if bus_owner >= 0 else -1
    for pe in range(n_pes):
        if bus_owner < 0 and st[pe, RQ] == LINE_PENDING:
            return -2
        if broadcast:
            if st[pe, PB] == LINE_PENDING:
                return -2
            if st[pe, PB] == LINE_INFLIGHT and (ev < 0 or st[pe, PB_DONE] < ev):
                ev = st[pe, PB_DONE]
    return ev


@njit
def _append(trace, ntr, pe, kind, purpose, addr, length, issue, grant, done, bus):
    if ntr == trace.shape[0]:
        bigger = np.empty((2 * trace.shape[0], TRACE_COLS), np.int64)
        bigger[:ntr] = trace[:ntr]
        trace = bigger
    trace[ntr, T_PE] = pe
    trace[ntr, T_KIND] = kind
    trace[ntr, T_PURPOSE] = purpose
    trace[ntr, T_ADDR] = addr
    trace[ntr, T_LEN] = length
    trace[ntr, T_ISSUE] = issue
    trace[ntr, T_GRANT] = grant
    trace[ntr, T_DONE] = done
    trace[ntr, T_BUS] = bus
    return trace


@njit
def _simulate(n_pes, cap, latency, broadcast, tol, bin_width, max_cycles, dram, spec_addr, spec_nbytes,
              spec_prec, nmass, mass_base, rec_base, score_base, maxc, half_lut, code_masses):
    nspec = spec_addr.shape[0]
    st = np.zeros((n_pes, NFIELDS), np.int64)
    sv = np.zeros((n_pes, SEARCH_FIELDS), np.int64)
    probe = np.zeros((n_pes, MASSES_PER_PACKET), np.float64)
    fifo_rec = np.zeros((n_pes, 2, RECORD_BYTES), np.uint8)
    fifo_idx = np.zeros((n_pes, 2), np.int64)
    cent = cap // ENTRY_BYTES
    cbins = np.zeros((n_pes, cent), np.int64)
    cvals = np.zeros((n_pes, cent), np.float32)
    ibins = np.zeros((n_pes, 2 * MAX_LENGTH), np.int64)
    ivals = np.ones((n_pes, 2 * MAX_LENGTH), np.float32)
    acc = np.zeros(n_pes, np.float32)
    sidx = np.zeros((n_pes, maxc), np.int64)
    sacc = np.zeros((n_pes, maxc), np.float32)
    buckets = np.zeros((n_pes, 4), np.int64)
    mem_counters = np.zeros(n_pes, np.int64)
    pb_counters = np.zeros(n_pes, np.int64)
    req = np.zeros(n_pes, np.bool_)
    computed = np.zeros(n_pes, np.bool_)
    stats = np.zeros(NSTATS, np.int64)
    stats[ST_SCORE_PTR] = score_base
    wblog = np.full((nspec, 4), -1, np.int64)  # addr, count, done cycle, pe
    trace = np.zeros((1024, TRACE_COLS), np.int64)
    ntr = 0
    bits_f = np.zeros(1, np.float32)
    bits_u = bits_f.view(np.uint32)
    for pe in range(n_pes):
        st[pe, PHASE] = IDLE
    next_spec = 0
    bus_owner = -1
    busy_until = 0
    t = 0
    while True:
        # 1. deliveries
        if bus_owner >= 0 and busy_until == t:
            pe = bus_owner
            bus_owner = -1
            purpose = st[pe, RQ_PURPOSE]
            if purpose == SCORES:
                addr = st[pe, RQ_ADDR]
                n = st[pe, NSCORES]
                for j in range(n):
                    a = addr + 8 * j
                    k = sidx[pe, j]
                    bits_f[0] = sacc[pe, j]
                    u = np.int64(bits_u[0])
                    for b in range(4):
                        dram[a + b] = (k >> (8 * b)) & 0xFF
                        dram[a + 4 + b] = (u >> (8 * b)) & 0xFF
                s = st[pe, SPEC]
                wblog[s, 0] = addr
                wblog[s, 1] = n
                wblog[s, 2] = t
                wblog[s, 3] = pe
                st[pe, NSCORES] = 0
                st[pe, PHASE] = IDLE
            else:
                _deliver(pe, purpose, st[pe, RQ_ADDR], st[pe, RQ_LEN], st[pe, RQ_ARG], st, sv, probe,
                         fifo_rec, fifo_idx, cbins, cvals, dram, half_lut, nmass)
            st[pe, RQ] = LINE_FREE
        if broadcast:
            for pe in range(n_pes):
                if st[pe, PB] == LINE_INFLIGHT and st[pe, PB_DONE] == t:
                    _deliver(pe, st[pe, PB_PURPOSE], st[pe, PB_ADDR], st[pe, PB_LEN], st[pe, PB_ARG], st, sv,
                             probe, fifo_rec, fifo_idx, cbins, cvals, dram, half_lut, nmass)
                    st[pe, PB] = LINE_FREE
        # 2. work assignment
        all_done = True
        for pe in range(n_pes):
            if st[pe, PHASE] == IDLE:
                if next_spec < nspec:
                    s = next_spec
                    next_spec += 1
                    st[pe, SPEC] = s
                    st[pe, NBYTES] = spec_nbytes[s]
                    st[pe, NPKTS] = (spec_nbytes[s] + BEAT_BYTES - 1) // BEAT_BYTES
                    st[pe, WIN_START] = 0
                    st[pe, WIN_PKTS] = 0
                    st[pe, NSCORES] = 0
                    st[pe, FIFO_N] = 0
                    sv[pe, S_PKT] = -1
                    st[pe, PHASE] = FETCH_SPECTRUM
                else:
                    st[pe, PHASE] = DONE
            if st[pe, PHASE] != DONE:
                all_done = False
        if all_done:
            break
        if t >= max_cycles:
            stats[ST_STATUS] = STATUS_CYCLE_LIMIT
            break
        # 3. PE actions
        any_compute = False
        for pe in range(n_pes):
            phase = st[pe, PHASE]
            did = False
            if _blocked(pe, st, broadcast, cap):
                pass
            elif phase == SCORE:
                # inlined: this branch runs on most PE-cycles
                ion = st[pe, ION]
                pkt = st[pe, PKT]
                win = st[pe, WIN_START]
                if pkt == st[pe, NPKTS] or (ion == st[pe, NIONS] and st[pe, NBYTES] <= cap):
                    _finish_pair(pe, st, acc, sidx, sacc, fifo_rec, fifo_idx, stats)
                    did = True
                else:
                    if win <= pkt < win + st[pe, WIN_PKTS] and ion == st[pe, NIONS]:
                        # ions are spent but the spectrum overflows the cache:
                        # the pass still streams every remaining window
                        st[pe, PKT] = win + st[pe, WIN_PKTS]
                        did = True
                    elif win <= pkt < win + st[pe, WIN_PKTS]:
                        a, advance = kernel_step(ibins[pe, ion], ivals[pe, ion], cbins[pe], cvals[pe],
                                                 (pkt - win) * LANES, acc[pe])
                        acc[pe] = a
                        if advance:
                            st[pe, PKT] = pkt + 1
                        else:
                            st[pe, ION] = ion + 1
                        did = True
                    elif st[pe, RQ] == LINE_FREE:
                        n = fill_length(cap, st[pe, NBYTES], pkt)
                        _request(st, pe, False, FILL, spec_addr[st[pe, SPEC]] + pkt * BEAT_BYTES, n, pkt, t)
                    _prefetch(st, pe, broadcast, rec_base, t, stats)
            elif phase == GENERATE_IONS:
                _generate(pe, t, st, acc, broadcast, rec_base, stats)
                did = True
            elif phase == FETCH_PEPTIDE:
                _fetch_peptide(pe, t, st, fifo_rec, ibins, broadcast, bin_width, rec_base, code_masses)
            elif phase == SEARCH:
                _search(pe, t, st, sv, probe, broadcast, tol, spec_prec, nmass, mass_base, stats)
            elif phase == FETCH_SPECTRUM:
                _fetch_spectrum(pe, t, st, sv, cap, spec_addr, nmass)
            elif phase == WRITEBACK:
                _writeback(pe, t, st, stats)
            computed[pe] = did
            any_compute = any_compute or did
        # 4a. memory bus
        for pe in range(n_pes):
            req[pe] = st[pe, RQ] == LINE_PENDING
        g = arbiter_step(mem_counters, req, bus_owner >= 0)
        if g >= 0:
            addr = st[g, RQ_ADDR]
            n = st[g, RQ_LEN]
            if n <= 0 or addr < 0 or addr + n > dram.shape[0]:
                stats[ST_STATUS] = STATUS_OUT_OF_BOUNDS
                break
            done = t + transaction_cycles(latency, n)
            st[g, RQ] = LINE_INFLIGHT
            st[g, RQ_DONE] = done
            bus_owner = g
            busy_until = done
            purpose = st[g, RQ_PURPOSE]
            kind = WRITE if purpose == SCORES else READ
            trace = _append(trace, ntr, g, kind, purpose, addr, n, st[g, RQ_ISSUE], t, done, MEMORY_BUS)
            ntr += 1
            stats[ST_MEM_BYTES] += n
            if purpose == FILL:
                stats[ST_FILLS] += 1
                stats[ST_FILL_BYTES] += n
        # 4b. broadcast bus
        if broadcast:
            for pe in range(n_pes):
                req[pe] = False
                if st[pe, PB] != LINE_PENDING:
                    continue
                for q in range(n_pes):
                    if q != pe and st[q, PB] == LINE_INFLIGHT and st[q, PB_ADDR] == st[pe, PB_ADDR] \
                            and st[q, PB_DONE] > t:
                        st[pe, PB] = LINE_INFLIGHT
                        st[pe, PB_DONE] = st[q, PB_DONE]
                        stats[ST_SNOOPS] += 1
                        break
                req[pe] = st[pe, PB] == LINE_PENDING
            g = arbiter_step(pb_counters, req, False)
            if g >= 0:
                addr = st[g, PB_ADDR]
                n = st[g, PB_LEN]
                if n <= 0 or addr < 0 or addr + n > dram.shape[0]:
                    stats[ST_STATUS] = STATUS_OUT_OF_BOUNDS
                    break
                done = t + transaction_cycles(latency, n)
                st[g, PB] = LINE_INFLIGHT
                st[g, PB_DONE] = done
                trace = _append(trace, ntr, g, READ, st[g, PB_PURPOSE], addr, n, st[g, PB_ISSUE], t, done,
                                BROADCAST_BUS)
                ntr += 1
                stats[ST_PB_READS] += 1
                stats[ST_PB_BYTES] += n
        # 5. accounting
        for pe in range(n_pes):
            if computed[pe]:
                buckets[pe, COMPUTE] += 1
            elif st[pe, RQ] == LINE_INFLIGHT:
                buckets[pe, IO] += 1
            elif st[pe, RQ] == LINE_PENDING:
                buckets[pe, WAIT] += 1
            else:
                buckets[pe, IDLE_BUCKET] += 1
        t += 1
        # 6. fast-forward over cycles in which every PE is stalled on a
        # transfer: they would repeat this cycle's bookkeeping unchanged.
        if any_compute:
            continue
        stalled = True
        for pe in range(n_pes):
            if not _blocked(pe, st, broadcast, cap):
                stalled = False
                break
        if not stalled:
            continue
        ev = _next_event(st, n_pes, bus_owner, busy_until, broadcast)
        if ev < 0:
            continue
        skip = min(ev, max_cycles) - t
        if skip <= 0:
            continue
        for pe in range(n_pes):
            line = st[pe, RQ]
            if line == LINE_INFLIGHT:
                buckets[pe, IO] += skip
            elif line == LINE_PENDING:
                buckets[pe, WAIT] += skip
                mem_counters[pe] += skip
            else:
                buckets[pe, IDLE_BUCKET] += skip
            if line != LINE_PENDING:
                mem_counters[pe] = 0
            pb_counters[pe] = 0
        t += skip
    return t, buckets, trace[:ntr].copy(), wblog, stats


# -- Python side ---------------------------------------------------------------


def _align(n: int) -> int:
    return (n + BEAT_BYTES - 1) // BEAT_BYTES * BEAT_BYTES


@dataclass
class MemoryImage:
    """DRAM contents laid out for one run.

    Regions (each 64-byte aligned): preprocessed spectra as CSR streams, the
    float64 mass index, 64-byte peptide records, and the score output area.
    The per-spectrum address/length/precursor table sits in the core
    registers, so the PEs read it without bus traffic.
    """

    dram: np.ndarray
    spec_addr: np.ndarray
    spec_nbytes: np.ndarray
    spec_prec: np.ndarray
    mass_base: int
    rec_base: int
    score_base: int
    score_bytes: int

    @classmethod
    def build(cls, spectra, db: PeptideDb, score_capacity_pairs: int) -> "MemoryImage":
        blobs = [encode_csr(s) for s in spectra]
        addr = np.zeros(len(blobs), dtype=np.int64)
        nbytes = np.array([len(b) for b in blobs], dtype=np.int64)
        pos = 0
        for i, b in enumerate(blobs):
            addr[i] = pos
            pos = _align(pos + len(b))
        mass_base = pos
        pos = _align(pos + 8 * len(db))
        rec_base = pos
        pos = _align(pos + RECORD_BYTES * len(db))
        score_base = pos
        score_bytes = 8 * score_capacity_pairs
        dram = np.zeros(pos + score_bytes, dtype=np.uint8)
        for a, b in zip(addr.tolist(), blobs):
            dram[a:a + len(b)] = np.frombuffer(b, dtype=np.uint8)
        dram[mass_base:mass_base + 8 * len(db)] = np.frombuffer(db.mass_index.astype("<f8").tobytes(), np.uint8)
        dram[rec_base:rec_base + RECORD_BYTES * len(db)] = db.records.reshape(-1)
        prec = np.array([s.precursor_mass for s in spectra], dtype=np.float64)
        return cls(dram, addr, nbytes, prec, mass_base, rec_base, score_base, score_bytes)


@dataclass
class SimMetrics:
    compute_cycles: np.ndarray
    io_cycles: np.ndarray
    wait_cycles: np.ndarray
    idle_cycles: np.ndarray
    total_cycles: int
    total_pairs: int
    total_dram_bytes: int
    fills_count: int
    fill_bytes: int
    clock_mhz: float
    counters: dict = field(default_factory=dict)

    @property
    def num_pes(self):
        return int(self.compute_cycles.size)

    def seconds(self, cycles):
        return cycles / (self.clock_mhz * 1e6)

    @property
    def total_seconds(self):
        return self.seconds(self.total_cycles)

    @property
    def avg_compute_s(self):
        return self.seconds(float(self.compute_cycles.mean()))

    @property
    def avg_io_s(self):
        return self.seconds(float(self.io_cycles.mean()))

    @property
    def avg_wait_s(self):
        return self.seconds(float(self.wait_cycles.mean()))

    @property
    def avg_idle_s(self):
        return self.seconds(float(self.idle_cycles.mean()))

    def buckets_balance(self) -> bool:
        sums = self.compute_cycles + self.io_cycles + self.wait_cycles + self.idle_cycles
        return bool(np.all(sums == self.total_cycles))

    def with_clock(self, clock_mhz: float) -> "SimMetrics":
        return SimMetrics(self.compute_cycles, self.io_cycles, self.wait_cycles, self.idle_cycles,
                          self.total_cycles, self.total_pairs, self.total_dram_bytes, self.fills_count,
                          self.fill_bytes, clock_mhz, dict(self.counters))


class SimulationError(RuntimeError):
    pass


@dataclass
class SimResult:
    config: SimConfig
    metrics: SimMetrics
    spectrum_index: np.ndarray  # per written score
    peptide_index: np.ndarray
    scores: np.ndarray  # float32, decoded from DRAM
    trace: np.ndarray
    writebacks: np.ndarray
    image: MemoryImage

    def score_rows(self, spectrum_ids):
        return [
            (spectrum_ids[s], int(k), v)
            for s, k, v in zip(self.spectrum_index.tolist(), self.peptide_index.tolist(), self.scores)
        ]


def decode_scores(image: MemoryImage, writebacks: np.ndarray):
    """Read the score region back, ordered by spectrum then candidate."""
    sidx, pidx, vals = [], [], []
    rec = np.dtype([("idx", "<u4"), ("bits", "<u4")])
    for s in range(writebacks.shape[0]):
        addr, count = int(writebacks[s, 0]), int(writebacks[s, 1])
        if count <= 0:
            continue
        chunk = np.frombuffer(image.dram[addr:addr + 8 * count].tobytes(), dtype=rec)
        sidx.append(np.full(count, s, dtype=np.int64))
        pidx.append(chunk["idx"].astype(np.int64))
        vals.append(chunk["bits"].view(np.float32))
    if not sidx:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.float32)
    return np.concatenate(sidx), np.concatenate(pidx), np.concatenate(vals).astype(np.float32)


def simulate(config: SimConfig, db: PeptideDb, spectra, score_capacity_pairs: int | None = None) -> SimResult:
    """Run one simulation over preprocessed spectra (host-side preprocessing)."""
    spectra = list(spectra)
    for s in spectra:
        if not isinstance(s, BinnedSpectrum):
            raise TypeError("spectra must be BinnedSpectrum/PreprocessedSpectrum instances")
    if score_capacity_pairs is None:
        from .harness import count_pairs

        score_capacity_pairs = count_pairs(db, spectra, config.tolerance_da)
    image = MemoryImage.build(spectra, db, score_capacity_pairs)
    dram = image.dram.copy()
    t, buckets, trace, wblog, stats = _simulate(
        config.num_pes,
        config.cache_bytes,
        config.dram_latency_cycles,
        config.peptide_bus == "broadcast",
        float(config.tolerance_da),
        float(config.bin_width),
        config.max_cycles,
        dram,
        image.spec_addr,
        image.spec_nbytes,
        image.spec_prec,
        len(db),
        image.mass_base,
        image.rec_base,
        image.score_base,
        max(1, len(db)),
        HALF_TO_F32,
        CODE_MASSES,
    )
    status = int(stats[ST_STATUS])
    if status == STATUS_OUT_OF_BOUNDS:
        raise SimulationError("DRAM access out of bounds (score region too small or corrupt layout)")
    if status == STATUS_CYCLE_LIMIT:
        raise SimulationError(f"simulation exceeded max_cycles={config.max_cycles}")
    image.dram = dram
    counters = {
        "fills": int(stats[ST_FILLS]),
        "fill_bytes": int(stats[ST_FILL_BYTES]),
        "memory_bus_bytes": int(stats[ST_MEM_BYTES]),
        "broadcast_reads": int(stats[ST_PB_READS]),
        "broadcast_bytes": int(stats[ST_PB_BYTES]),
        "snoops": int(stats[ST_SNOOPS]),
        "probes": int(stats[ST_PROBES]),
        "prefetches": int(stats[ST_PREFETCHES]),
    }
    metrics = SimMetrics(
        compute_cycles=buckets[:, COMPUTE].copy(),
        io_cycles=buckets[:, IO].copy(),
        wait_cycles=buckets[:, WAIT].copy(),
        idle_cycles=buckets[:, IDLE_BUCKET].copy(),
        total_cycles=int(t),
        total_pairs=int(stats[ST_PAIRS]),
        total_dram_bytes=int(stats[ST_MEM_BYTES] + stats[ST_PB_BYTES]),
        fills_count=int(stats[ST_FILLS]),
        fill_bytes=int(stats[ST_FILL_BYTES]),
        clock_mhz=float(config.clock_mhz),
        counters=counters,
    )
    sidx, pidx, vals = decode_scores(image, wblog)
    return SimResult(config, metrics, sidx, pidx, vals, trace, wblog, image)
