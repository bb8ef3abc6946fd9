"""Workloads, single runs, and the design-space sweep."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import SimConfig
from .peptides import ALPHABET, PROTON, RESIDUE_MASSES, WATER, Peptide, PeptideDb, find_candidates, write_peptides
from .scoring import score_arrays
from .simulator import SimMetrics, SimResult, simulate
from .spectra import RawSpectrum, bin_spectrum, preprocess, write_spectra

CSV_COLUMNS = (
    "num_pes",
    "cache_bytes",
    "tolerance_da",
    "total_seconds",
    "avg_compute_s",
    "avg_io_s",
    "avg_wait_s",
    "total_pairs",
    "dram_bytes",
    "total_cycles",
)


@dataclass(frozen=True)
class WorkloadSpec:
    """Desk-scale synthetic workload.

    Each spectrum is built from one database peptide: its b/y ions that fall
    inside a contiguous m/z span, plus noise peaks in the same span. The span
    width sets the preprocessed spectrum size (span + 151 bins), which is
    what decides whether a spectrum fits a given cache.
    """

    num_spectra: int = 200
    num_peptides: int = 20_000
    peptide_length: tuple = (7, 20)
    mass_range: tuple = (600.0, 3000.0)
    span_bins: tuple = (140, 330)
    noise_peaks: tuple = (30, 70)
    precursor_jitter_da: float = 0.5
    bin_width: float = 1.0
    csr_bytes_range: tuple = (1025, 2048)  # accepted preprocessed size, inclusive
    seed: int = 0


@dataclass
class Workload:
    peptides: list
    spectra: list
    _db: PeptideDb | None = field(default=None, repr=False)
    _prepared: dict = field(default_factory=dict, repr=False)

    @property
    def db(self) -> PeptideDb:
        if self._db is None:
            self._db = PeptideDb(self.peptides)
        return self._db

    def preprocessed(self, bin_width: float = 1.0, exclude_tau_zero: bool = False):
        key = (float(bin_width), bool(exclude_tau_zero))
        if key not in self._prepared:
            self._prepared[key] = [preprocess(bin_spectrum(s, bin_width), exclude_tau_zero) for s in self.spectra]
        return self._prepared[key]

    def write(self, spectra_path, peptide_path) -> None:
        write_spectra(spectra_path, self.spectra)
        write_peptides(peptide_path, self.peptides)

    @classmethod
    def load(cls, spectra_path, peptide_path) -> "Workload":
        from .peptides import parse_peptides
        from .spectra import read_spectra

        with open(peptide_path) as fh:
            peptides = parse_peptides(fh)
        return cls(peptides, read_spectra(spectra_path))


def _random_peptides(rng, spec: WorkloadSpec) -> list:
    letters = np.array(list(ALPHABET))
    lo, hi = spec.peptide_length
    out = []
    seen = set()
    while len(out) < spec.num_peptides:
        n = int(rng.integers(lo, hi + 1))
        seq = "".join(letters[rng.integers(0, len(letters), n)])
        if seq in seen:
            continue
        pep = Peptide.from_sequence(seq)
        if not spec.mass_range[0] <= pep.monoisotopic_mass <= spec.mass_range[1]:
            continue
        seen.add(seq)
        out.append(pep)
    return out


def _fragment_mz(sequence: str) -> np.ndarray:
    masses = [RESIDUE_MASSES[c] for c in sequence]
    b = np.cumsum(masses[:-1]) + PROTON
    y = np.cumsum(masses[::-1][:-1]) + WATER + PROTON
    return np.sort(np.concatenate([b, y]))


def _make_spectrum(rng, spec: WorkloadSpec, sid: str, pep: Peptide) -> RawSpectrum:
    ions = _fragment_mz(pep.sequence)
    width = float(rng.integers(spec.span_bins[0], spec.span_bins[1] + 1)) * spec.bin_width
    lo_edge = max(spec.bin_width, ions[0] - 0.25 * width)
    hi_edge = max(lo_edge, ions[-1] - 0.75 * width)
    start = float(rng.uniform(lo_edge, hi_edge))
    stop = start + width
    inside = ions[(ions >= start) & (ions <= stop)]
    noise = rng.uniform(start, stop, int(rng.integers(spec.noise_peaks[0], spec.noise_peaks[1] + 1)))
    mz = np.concatenate([[start, stop], inside, noise])
    inten = np.concatenate(
        [rng.uniform(0.05, 0.4, 2), rng.uniform(0.3, 1.0, inside.size), rng.uniform(0.01, 0.4, noise.size)]
    )
    mz = np.round(mz, 4)
    inten = np.round(inten, 4)
    order = np.argsort(mz, kind="stable")
    mz, inten = mz[order], inten[order]
    keep = np.concatenate([[True], np.diff(mz) > 0])
    precursor = pep.monoisotopic_mass + float(rng.uniform(-spec.precursor_jitter_da, spec.precursor_jitter_da))
    return RawSpectrum(sid, round(precursor, 6), mz[keep], inten[keep])


def generate_workload(spec: WorkloadSpec = WorkloadSpec()) -> Workload:
    """Deterministic synthetic workload; every spectrum's preprocessed CSR size
    lies in ``spec.csr_bytes_range``."""
    rng = np.random.default_rng(spec.seed)
    peptides = _random_peptides(rng, spec)
    spectra = []
    lo_b, hi_b = spec.csr_bytes_range
    while len(spectra) < spec.num_spectra and peptides:
        pep = peptides[int(rng.integers(0, len(peptides)))]
        sid = f"scan{len(spectra):05d}"
        raw = _make_spectrum(rng, spec, sid, pep)
        size = preprocess(bin_spectrum(raw, spec.bin_width)).nbytes
        if lo_b <= size <= hi_b:
            spectra.append(raw)
    return Workload(peptides, spectra)


def count_pairs(db: PeptideDb, spectra: Sequence, tolerance: float) -> int:
    """Total candidate pairs: sum of candidate-range widths over spectra."""
    total = 0
    for s in spectra:
        lo, hi = find_candidates(db, s.precursor_mass, tolerance)
        total += hi - lo
    return total


def run_simulation(config: SimConfig, workload: Workload) -> SimResult:
    spectra = workload.preprocessed(config.bin_width, config.exclude_tau_zero)
    return simulate(config, workload.db, spectra)


def oracle_scores(config: SimConfig, workload: Workload):
    spectra = workload.preprocessed(config.bin_width, config.exclude_tau_zero)
    return score_arrays(workload.db, spectra, config.tolerance_da, config.bin_width)


def verify(result: SimResult, workload: Workload):
    """Compare simulator output to the oracle. Returns a list of mismatch descriptions."""
    sidx, pidx, sc = oracle_scores(result.config, workload)
    problems = []
    if sidx.size != result.scores.size:
        problems.append(f"pair count: simulator {result.scores.size}, oracle {sidx.size}")
        return problems
    same = (sidx == result.spectrum_index) & (pidx == result.peptide_index)
    same &= sc.view(np.uint32) == result.scores.view(np.uint32)
    for i in np.nonzero(~same)[0][:20].tolist():
        problems.append(
            f"row {i}: oracle ({sidx[i]}, {pidx[i]}, {sc[i]!r}) vs simulator "
            f"({result.spectrum_index[i]}, {result.peptide_index[i]}, {result.scores[i]!r})"
        )
    if (~same).sum() > 20:
        problems.append(f"... {(~same).sum() - 20} more")
    return problems


# -- CSV ----------------------------------------------------------------------


def metrics_row(config: SimConfig, m: SimMetrics) -> dict:
    return {
        "num_pes": config.num_pes,
        "cache_bytes": config.cache_bytes,
        "tolerance_da": config.tolerance_da,
        "total_seconds": m.total_seconds,
        "avg_compute_s": m.avg_compute_s,
        "avg_io_s": m.avg_io_s,
        "avg_wait_s": m.avg_wait_s,
        "total_pairs": m.total_pairs,
        "dram_bytes": m.total_dram_bytes,
        "total_cycles": m.total_cycles,
    }


def _cell(value) -> str:
    # repr round-trips floats exactly
    return repr(float(value)) if isinstance(value, float) else str(value)


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in rec.items():
            row[k] = float(v) if k in ("tolerance_da",) or k.endswith("_s") or k == "total_seconds" else int(v)
        out.append(row)
    return out


def _run_cell(args):
    config, workload = args
    return metrics_row(config, run_simulation(config, workload).metrics)


def dse_sweep(grid: Sequence[SimConfig], workload: Workload, jobs: int = 1) -> list[dict]:
    """One metrics row per config, in grid order."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, [(c, workload) for c in grid]))
    return [_run_cell((c, workload)) for c in grid]


def make_grid(base: SimConfig, num_pes=None, cache_bytes=None, tolerance_da=None) -> list[SimConfig]:
    pes = list(num_pes or [base.num_pes])
    caches = list(cache_bytes or [base.cache_bytes])
    tols = list(tolerance_da or [base.tolerance_da])
    return [base.replace(num_pes=p, cache_bytes=c, tolerance_da=t) for t in tols for c in caches for p in pes]


def write_csv(path, rows) -> None:
    Path(path).write_text(format_csv(rows))
