"""Software reference for Xcorr scoring.

Two routes to the same number: :func:`xcorr_direct` evaluates the shifted
cross-correlation against the raw binned spectrum, :func:`xcorr_fast` takes a
dot product with the preprocessed spectrum. The fast route accumulates in
float32 in ascending bin order, which is also the order the simulated
ion-matching kernel uses, so the two agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _jit
from ._jit import njit
from .peptides import PeptideDb, TheoreticalSpectrum, find_candidates
from .spectra import MAX_BINS, WINDOW, BinnedSpectrum, PreprocessedSpectrum


@dataclass(frozen=True)
class XcorrScore:
    spectrum_id: str
    peptide_index: int
    score: np.float32


@dataclass
class ScoreResult:
    scores: list
    pairs: int

    def __len__(self):
        return len(self.scores)


def xcorr_direct(theoretical: TheoreticalSpectrum, experimental: BinnedSpectrum, exclude_tau_zero: bool = False):
    """Shifted cross-correlation over the dense 65536-bin axis.

    foreground = sum_i X[i] Y[i]
    background = sum_i sum_tau X[i] Y[i - tau], tau in [-75, 75]
    score      = foreground - background / 151

    Both sums are float32 accumulators visited in ascending i, then tau.
    """
    y = np.zeros(MAX_BINS, dtype=np.float32)
    y[experimental.bins.astype(np.int64)] = experimental.intensities.astype(np.float32)
    xb = theoretical.bins.astype(np.int64)
    xv = theoretical.intensities.astype(np.float32)
    return _direct(xb, xv, y, exclude_tau_zero)


@njit
def _direct(xb, xv, y, exclude_center):
    fg = np.float32(0.0)
    bg = np.float32(0.0)
    for k in range(xb.shape[0]):
        i = xb[k]
        x = xv[k]
        fg = np.float32(fg + np.float32(x * y[i]))
        for tau in range(-WINDOW, WINDOW + 1):
            if exclude_center and tau == 0:
                continue
            j = i - tau
            if 0 <= j < MAX_BINS:
                bg = np.float32(bg + np.float32(x * y[j]))
    divisor = np.float32(2 * WINDOW) if exclude_center else np.float32(2 * WINDOW + 1)
    return np.float32(fg - np.float32(bg / divisor))


@njit
def sparse_dot(xb, xv, yb, yv):
    """Merge-join dot product, float32 accumulator, ascending bins."""
    acc = np.float32(0.0)
    i = 0
    j = 0
    while i < xb.shape[0] and j < yb.shape[0]:
        if xb[i] < yb[j]:
            i += 1
        elif xb[i] > yb[j]:
            j += 1
        else:
            acc = np.float32(acc + np.float32(xv[i] * yv[j]))
            i += 1
            j += 1
    return acc


def _dot_numpy(xb, xv, yb, yv):
    _, ix, iy = np.intersect1d(xb, yb, assume_unique=True, return_indices=True)
    if ix.size == 0:
        return np.float32(0.0)
    prod = xv[ix].astype(np.float32) * yv[iy].astype(np.float32)
    # add.accumulate is strictly sequential, unlike add.reduce
    return np.add.accumulate(prod, dtype=np.float32)[-1]


def xcorr_fast(theoretical: TheoreticalSpectrum, preprocessed: BinnedSpectrum):
    xb = theoretical.bins.astype(np.int64)
    xv = theoretical.intensities.astype(np.float32)
    yb = preprocessed.bins.astype(np.int64)
    yv = preprocessed.intensities.astype(np.float32)
    if _jit.JIT_ENABLED:
        return sparse_dot(xb, xv, yb, yv)
    return _dot_numpy(xb, xv, yb, yv)


@njit
def _score_batch(spec_off, spec_bins, spec_vals, precursors, masses, ion_off, ion_bins, tolerance):
    nspec = precursors.shape[0]
    los = np.empty(nspec, np.int64)
    his = np.empty(nspec, np.int64)
    total = 0
    for s in range(nspec):
        lo = 0
        hi = masses.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if precursors[s] - masses[mid] > tolerance:
                lo = mid + 1
            else:
                hi = mid
        los[s] = lo
        hi = masses.shape[0]
        while lo < hi:
            mid = (lo + hi) // 2
            if masses[mid] - precursors[s] > tolerance:
                hi = mid
            else:
                lo = mid + 1
        his[s] = lo
        total += his[s] - los[s]
    out_spec = np.empty(total, np.int64)
    out_pep = np.empty(total, np.int64)
    out_score = np.empty(total, np.float32)
    ones = np.ones(2 * 64, np.float32)
    m = 0
    for s in range(nspec):
        yb = spec_bins[spec_off[s]:spec_off[s + 1]]
        yv = spec_vals[spec_off[s]:spec_off[s + 1]]
        for k in range(los[s], his[s]):
            xb = ion_bins[ion_off[k]:ion_off[k + 1]]
            out_spec[m] = s
            out_pep[m] = k
            out_score[m] = sparse_dot(xb, ones, yb, yv)
            m += 1
    return out_spec, out_pep, out_score


def _flatten(spectra):
    off = np.zeros(len(spectra) + 1, dtype=np.int64)
    for s, sp in enumerate(spectra):
        off[s + 1] = off[s] + len(sp)
    bins = np.concatenate([sp.bins.astype(np.int64) for sp in spectra]) if spectra else np.zeros(0, np.int64)
    vals = (
        np.concatenate([sp.intensities.astype(np.float32) for sp in spectra]) if spectra else np.zeros(0, np.float32)
    )
    prec = np.array([sp.precursor_mass for sp in spectra], dtype=np.float64)
    return off, bins, vals, prec


def score_arrays(db: PeptideDb, spectra: Sequence[PreprocessedSpectrum], tolerance: float, bin_width: float = 1.0):
    """Score every (spectrum, candidate) pair.

    Returns ``(spectrum_index, peptide_index, score)`` arrays ordered by
    spectrum, then candidate index.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    ion_off, ion_bins = db.ion_table(bin_width)
    if _jit.JIT_ENABLED:
        off, bins, vals, prec = _flatten(list(spectra))
        return _score_batch(off, bins, vals, prec, db.mass_index, ion_off, ion_bins, float(tolerance))
    sidx, pidx, sc = [], [], []
    for s, sp in enumerate(spectra):
        lo, hi = find_candidates(db, sp.precursor_mass, tolerance)
        yb = sp.bins.astype(np.int64)
        yv = sp.intensities.astype(np.float32)
        for k in range(lo, hi):
            xb = ion_bins[ion_off[k]:ion_off[k + 1]]
            sidx.append(s)
            pidx.append(k)
            sc.append(_dot_numpy(xb, np.ones(xb.size, np.float32), yb, yv))
    return np.array(sidx, np.int64), np.array(pidx, np.int64), np.array(sc, np.float32)


def score_all(db: PeptideDb, spectra: Sequence[PreprocessedSpectrum], tolerance: float, bin_width: float = 1.0):
    sidx, pidx, sc = score_arrays(db, spectra, tolerance, bin_width)
    ids = [sp.id for sp in spectra]
    scores = [XcorrScore(ids[s], int(k), v) for s, k, v in zip(sidx.tolist(), pidx.tolist(), sc)]
    return ScoreResult(scores, len(scores))


# -- score files -------------------------------------------------------------


def format_score(value) -> str:
    """Shortest decimal that round-trips the float32 value."""
    return np.format_float_positional(np.float32(value), unique=True, trim="0")


def format_scores(rows, pairs: int | None = None) -> str:
    """rows: iterable of (spectrum_id, peptide_index, float32 score).

    ``pairs`` defaults to the number of rows; pass the full count when the
    rows are a filtered subset.
    """
    out = []
    n = 0
    for sid, k, v in rows:
        out.append(f"{sid} {k} {format_score(v)}\n")
        n += 1
    out.append(f"# pairs {n if pairs is None else pairs}\n")
    return "".join(out)


def write_scores(path, rows, pairs: int | None = None) -> None:
    Path(path).write_text(format_scores(rows, pairs))


def read_scores(path):
    """Returns (rows, pair_count) from a score file."""
    rows = []
    pairs = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line.split()
            if len(parts) == 3 and parts[1] == "pairs":
                pairs = int(parts[2])
            continue
        sid, k, v = line.split()
        rows.append((sid, int(k), np.float32(v)))
    return rows, pairs
