import numpy as np
import pytest

from oracles import candidates_linear
from xcorrsim.config import SimConfig
from xcorrsim.pe import (
    DONE,
    FETCH_PEPTIDE,
    FETCH_SPECTRUM,
    GENERATE_IONS,
    IDLE,
    LANES,
    PAD_BIN,
    SCORE,
    SEARCH,
    TRANSITIONS,
    WRITEBACK,
    IonMatchingKernel,
    binary_search_sim,
    kernel_step,
    make_packets,
)
from xcorrsim.peptides import PeptideDb, TheoreticalSpectrum, find_candidates, generate_ions, peptide_mass
from xcorrsim.scoring import xcorr_fast
from xcorrsim.simulator import T_DONE, T_GRANT, T_LEN, T_PURPOSE, simulate
from xcorrsim.spectra import BinnedSpectrum, PreprocessedSpectrum


def packet(pairs):
    bins = np.full(LANES, PAD_BIN, dtype=np.int64)
    vals = np.zeros(LANES, dtype=np.float32)
    for k, (b, v) in enumerate(pairs):
        bins[k], vals[k] = b, v
    return bins, vals


# -- kernel ----------------------------------------------------------------------


def test_kernel_match_accumulates():
    bins, vals = packet([(90, 2.0), (100, 150.0), (110, 1.0)])
    acc, advance = kernel_step(100, np.float32(1.0), bins, vals, 0, np.float32(0.0))
    assert acc == np.float32(150.0) and not advance


def test_kernel_beyond_packet_advances():
    bins = np.arange(100, 116, dtype=np.int64)
    vals = np.ones(LANES, dtype=np.float32)
    acc, advance = kernel_step(500, np.float32(1.0), bins, vals, 0, np.float32(3.0))
    assert advance and acc == np.float32(3.0)


def test_kernel_absent_bin_moves_to_next_ion():
    bins, vals = packet([(90, 2.0), (110, 1.0)])
    bins[2:] = np.arange(120, 134)
    acc, advance = kernel_step(100, np.float32(1.0), bins, vals, 0, np.float32(0.0))
    assert not advance and acc == 0.0


def test_kernel_reads_packet_at_offset():
    bins = np.concatenate([np.arange(0, 16), np.arange(16, 32)]).astype(np.int64)
    vals = np.arange(32, dtype=np.float32)
    acc, advance = kernel_step(20, np.float32(2.0), bins, vals, LANES, np.float32(0.0))
    assert acc == np.float32(40.0) and not advance


def test_make_packets_pads_tail():
    s = BinnedSpectrum.from_pairs("s", 500.0, [(b, 1.0) for b in range(20)])
    pb, pv = make_packets(s)
    assert pb.shape == (2, LANES)
    assert pb[1, 4:].tolist() == [PAD_BIN] * 12
    assert pv[1, 4:].tolist() == [0.0] * 12


def test_ion_matching_kernel_equals_fast_score():
    rng = np.random.default_rng(5)
    for _ in range(100):
        yb = np.sort(rng.choice(3000, int(rng.integers(1, 120)), replace=False))
        y = BinnedSpectrum("y", 500.0, yb, rng.normal(0, 1, yb.size))
        xb = np.sort(rng.choice(3000, int(rng.integers(0, 40)), replace=False))
        x = TheoreticalSpectrum(xb, np.ones(xb.size, np.float16))
        k = IonMatchingKernel.for_pair(x, y)
        got = k.run()
        assert got.view(np.uint32) == np.float32(xcorr_fast(x, y)).view(np.uint32)
        assert k.cycles <= len(x) + make_packets(y)[0].shape[0]


def test_kernel_refuses_step_after_finish():
    k = IonMatchingKernel.for_pair(TheoreticalSpectrum.from_pairs([]), BinnedSpectrum.from_pairs("s", 1.0, [(1, 1.0)]))
    with pytest.raises(RuntimeError):
        k.step()


# -- binary search ---------------------------------------------------------------


def test_search_probe_count_bound():
    rng = np.random.default_rng(8)
    masses = np.sort(rng.uniform(500, 3000, 1024))
    for _ in range(200):
        p = float(rng.uniform(450, 3050))
        tr = binary_search_sim(masses, p, 1.5)
        assert len(tr.probes) <= 2 * 11


def test_search_matches_find_candidates():
    rng = np.random.default_rng(9)
    for _ in range(500):
        n = int(rng.integers(0, 300))
        masses = np.sort(np.round(rng.uniform(500, 3000, n), 1))
        p = float(rng.uniform(450, 3050)) if rng.random() < 0.5 or n == 0 else float(rng.choice(masses))
        tol = float(rng.choice([0.0, 0.5, 3.0, 50.0]))
        tr = binary_search_sim(masses, p, tol)
        assert (tr.lo, tr.hi) == find_candidates(masses, p, tol) == candidates_linear(masses, p, tol)


def test_search_empty_index_needs_no_probes():
    tr = binary_search_sim(np.zeros(0), 1000.0, 10.0)
    assert (tr.lo, tr.hi) == (0, 0) and tr.probes == []


# -- one PE against hand-derived timelines -------------------------------------------


def one_spectrum(precursor):
    # 16 entries: exactly one 64-byte packet
    return PreprocessedSpectrum("s", precursor, np.arange(64, 80), np.ones(16, np.float16))


def test_hand_timeline_single_pair():
    db = PeptideDb.from_sequences(["AG"])
    r = simulate(SimConfig(num_pes=1), db, [one_spectrum(peptide_mass("AG"))])
    m = r.metrics
    assert m.total_cycles == 133
    assert (m.compute_cycles[0], m.io_cycles[0], m.wait_cycles[0], m.idle_cycles[0]) == (5, 62, 0, 66)
    rows = [(int(t[T_GRANT]), int(t[T_DONE])) for t in r.trace]
    assert rows == [(0, 31), (31, 62), (65, 96), (102, 133)]
    assert int(r.trace[-1, T_LEN]) == 8
    # AG has ions at bins 72 and 76, both present with value 1
    assert r.scores.tolist() == [2.0]


def test_prefetch_overlaps_scoring():
    single = simulate(SimConfig(num_pes=1), PeptideDb.from_sequences(["AG"]), [one_spectrum(peptide_mass("AG"))])
    assert single.metrics.counters["prefetches"] == 0
    db = PeptideDb.from_sequences(["AG", "GA"])
    r = simulate(SimConfig(num_pes=1), db, [one_spectrum(peptide_mass("AG"))])
    assert r.metrics.counters["prefetches"] == 1
    peps = [t for t in r.trace if t[T_PURPOSE] == 2]
    first_done = int(peps[0][T_DONE])
    # the first record lands, two generate cycles, then scoring starts; the
    # second record is requested during generation and lands after scoring began
    assert int(peps[1][T_GRANT]) == first_done + 1
    assert int(peps[1][T_DONE]) > first_done + 3
    assert r.peptide_index.tolist() == [0, 1]


def test_empty_candidate_range_skips_writeback():
    db = PeptideDb.from_sequences(["AG"])
    r = simulate(SimConfig(num_pes=1), db, [one_spectrum(900.0)], score_capacity_pairs=0)
    assert r.metrics.total_pairs == 0
    assert r.scores.size == 0
    assert 3 not in r.trace[:, T_PURPOSE].tolist()
    assert r.metrics.buckets_balance()


def test_three_scores_written_in_one_burst():
    db = PeptideDb.from_sequences(["AG", "GA", "AG"])
    r = simulate(SimConfig(num_pes=1), db, [one_spectrum(peptide_mass("AG"))])
    writes = [t for t in r.trace if t[T_PURPOSE] == 3]
    assert len(writes) == 1 and int(writes[0][T_LEN]) == 24
    assert r.peptide_index.tolist() == [0, 1, 2]


def test_writeback_decodes_to_fast_scores(small_workload):
    db = small_workload.db
    spectra = small_workload.preprocessed()[:4]
    r = simulate(SimConfig(num_pes=2, cache_bytes=1024), db, spectra)
    for s, k, v in zip(r.spectrum_index, r.peptide_index, r.scores):
        want = xcorr_fast(generate_ions(db.peptides[k]), spectra[s])
        assert np.float32(want).view(np.uint32) == v.view(np.uint32)


# -- controller ------------------------------------------------------------------


def test_transition_table():
    assert TRANSITIONS[DONE] == set()
    reach, todo = {IDLE}, [IDLE]
    while todo:
        for nxt in TRANSITIONS[todo.pop()]:
            if nxt not in reach:
                reach.add(nxt)
                todo.append(nxt)
    assert reach == set(TRANSITIONS)
    path = [IDLE, FETCH_SPECTRUM, SEARCH, FETCH_PEPTIDE, GENERATE_IONS, SCORE, FETCH_PEPTIDE,
            GENERATE_IONS, SCORE, WRITEBACK, IDLE, DONE]
    assert all(b in TRANSITIONS[a] for a, b in zip(path, path[1:]))
