"""Experimental spectra: raw peaks, binned CSR storage and Xcorr preprocessing.

Binned spectra keep a 16-bit bin index and a half-precision intensity per
entry, which is exactly the 4-byte CSR entry layout the accelerator streams
from DRAM.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import _jit
from ._jit import njit
from .halfprec import to_half

MAX_BINS = 65536
WINDOW = 75  # half-width of the background window, in bins
ENTRY_BYTES = 4

# Half-precision values are integer multiples of 2**-24, so window sums can
# be carried exactly in int64 "units" and rounded once at the end.
_UNIT = 2.0 ** -24
_CSR_DTYPE = np.dtype([("bin", "<u2"), ("bits", "<u2")])


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class RawSpectrum:
    """Peak list as read from a spectrum file (m/z in Da)."""

    id: str
    precursor_mass: float
    mz: np.ndarray = field(repr=False)
    intensity: np.ndarray = field(repr=False)

    def __post_init__(self):
        mz = _frozen(self.mz, np.float64)
        inten = _frozen(self.intensity, np.float64)
        if mz.shape != inten.shape or mz.ndim != 1:
            raise ValueError("mz and intensity must be 1-D arrays of equal length")
        if not self.precursor_mass > 0:
            raise ValueError("precursor_mass must be positive")
        if mz.size > 1 and not np.all(np.diff(mz) > 0):
            raise ValueError("peaks must be strictly ascending in m/z")
        if np.any(inten < 0):
            raise ValueError("intensities must be non-negative")
        object.__setattr__(self, "mz", mz)
        object.__setattr__(self, "intensity", inten)

    @classmethod
    def from_peaks(cls, id, precursor_mass, peaks):
        peaks = list(peaks)
        mz = [p[0] for p in peaks]
        inten = [p[1] for p in peaks]
        return cls(id, float(precursor_mass), np.array(mz, dtype=np.float64), np.array(inten, dtype=np.float64))

    @property
    def peaks(self):
        return list(zip(self.mz.tolist(), self.intensity.tolist()))


@dataclass(frozen=True, eq=False)
class BinnedSpectrum:
    """Sparse spectrum: ascending uint16 bins with float16 intensities."""

    id: str
    precursor_mass: float
    bins: np.ndarray = field(repr=False)
    intensities: np.ndarray = field(repr=False)

    def __post_init__(self):
        bins = np.asarray(self.bins)
        if bins.size and (bins.min() < 0 or bins.max() >= MAX_BINS):
            raise OverflowError("bin index outside the 16-bit range")
        bins = _frozen(bins, np.uint16)
        vals = np.asarray(self.intensities)
        if vals.dtype != np.float16:
            vals = to_half(vals)
        vals = _frozen(vals, np.float16)
        if bins.shape != vals.shape or bins.ndim != 1:
            raise ValueError("bins and intensities must be 1-D arrays of equal length")
        if bins.size > 1 and not np.all(np.diff(bins.astype(np.int64)) > 0):
            raise ValueError("bin indices must be strictly ascending")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "intensities", vals)

    @classmethod
    def from_pairs(cls, id, precursor_mass, pairs):
        pairs = list(pairs)
        return cls(
            id,
            float(precursor_mass),
            np.array([p[0] for p in pairs], dtype=np.int64),
            to_half([p[1] for p in pairs]),
        )

    @property
    def pairs(self):
        return list(zip(self.bins.tolist(), self.intensities.astype(np.float64).tolist()))

    @property
    def nbytes(self):
        return ENTRY_BYTES * int(self.bins.size)

    def __len__(self):
        return int(self.bins.size)

    def __eq__(self, other):
        if not isinstance(other, BinnedSpectrum):
            return NotImplemented
        return (
            type(self) is type(other)
            and self.id == other.id
            and self.precursor_mass == other.precursor_mass
            and np.array_equal(self.bins, other.bins)
            and np.array_equal(self.intensities.view(np.uint16), other.intensities.view(np.uint16))
        )

    __hash__ = None

    def dense(self):
        """Float64 view over all 65536 bins."""
        out = np.zeros(MAX_BINS, dtype=np.float64)
        out[self.bins.astype(np.int64)] = self.intensities.astype(np.float64)
        return out


class PreprocessedSpectrum(BinnedSpectrum):
    """Binned spectrum holding background-subtracted values (may be negative)."""


def bin_spectrum(raw: RawSpectrum, bin_width: float = 1.0) -> BinnedSpectrum:
    """Discretize peaks into unit bins.

    Peaks landing in the same bin keep the larger intensity. Intensities are
    rounded to half precision (ties to even).
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    if raw.mz.size == 0:
        return BinnedSpectrum(raw.id, raw.precursor_mass, np.zeros(0, np.uint16), np.zeros(0, np.float16))
    idx = np.floor(raw.mz / bin_width).astype(np.int64)
    if idx.max() >= MAX_BINS:
        raise OverflowError(f"m/z {raw.mz[idx.argmax()]} maps to bin {idx.max()} (>= {MAX_BINS})")
    if idx.min() < 0:
        raise OverflowError("negative m/z")
    uniq, start = np.unique(idx, return_index=True)
    best = np.maximum.reduceat(raw.intensity, start)
    return BinnedSpectrum(raw.id, raw.precursor_mass, uniq, to_half(best))


# -- preprocessing -----------------------------------------------------------


@njit
def _preprocess_sparse(bins, units, exclude_center):
    """Two-pointer sweep over the dilated support of ``bins``.

    Returns (positions, float32 values before half rounding).
    """
    n = bins.shape[0]
    cap = min(MAX_BINS, n * (2 * WINDOW + 1))
    pos = np.empty(cap, np.int64)
    vals = np.empty(cap, np.float32)
    divisor = np.float32(2 * WINDOW) if exclude_center else np.float32(2 * WINDOW + 1)
    m = 0
    enter = 0  # next bin to enter the window
    leave = 0  # oldest bin still inside the window
    wsum = 0
    centre = 0  # pointer used to look up Y[i]
    prev_end = -1
    for k in range(n):
        lo = max(bins[k] - WINDOW, prev_end + 1, 0)
        hi = min(bins[k] + WINDOW, MAX_BINS - 1)
        for i in range(lo, hi + 1):
            while enter < n and bins[enter] <= i + WINDOW:
                wsum += units[enter]
                enter += 1
            while leave < n and bins[leave] < i - WINDOW:
                wsum -= units[leave]
                leave += 1
            while centre < n and bins[centre] < i:
                centre += 1
            yu = units[centre] if (centre < n and bins[centre] == i) else 0
            s = wsum - yu if exclude_center else wsum
            s32 = np.float32(s * _UNIT)
            bg = np.float32(s32 / divisor)
            y32 = np.float32(yu * _UNIT)
            pos[m] = i
            vals[m] = np.float32(y32 - bg)
            m += 1
        if hi > prev_end:
            prev_end = hi
    return pos[:m], vals[:m]


def _preprocess_dense(bins, units, exclude_center):
    """Vectorized fallback over the full 65536-bin axis."""
    pad = WINDOW + 1
    dense = np.zeros(MAX_BINS + 2 * pad, dtype=np.int64)
    dense[bins + pad] = units
    present = np.zeros_like(dense)
    present[bins + pad] = 1
    csum = np.concatenate(([0], np.cumsum(dense)))
    ccnt = np.concatenate(([0], np.cumsum(present)))
    i = np.arange(MAX_BINS) + pad
    wsum = csum[i + WINDOW + 1] - csum[i - WINDOW]
    wcnt = ccnt[i + WINDOW + 1] - ccnt[i - WINDOW]
    y = dense[i]
    if exclude_center:
        wsum = wsum - y
        divisor = np.float32(2 * WINDOW)
    else:
        divisor = np.float32(2 * WINDOW + 1)
    support = np.nonzero(wcnt > 0)[0]
    s32 = (wsum[support] * _UNIT).astype(np.float32)
    bg = s32 / divisor
    y32 = (y[support] * _UNIT).astype(np.float32)
    return support.astype(np.int64), (y32 - bg).astype(np.float32)


def _to_units(spectrum):
    return np.rint(spectrum.intensities.astype(np.float64) / _UNIT).astype(np.int64)


def preprocess_values(spectrum: BinnedSpectrum, exclude_tau_zero: bool = False):
    """Background-subtracted float32 values before half rounding."""
    bins = spectrum.bins.astype(np.int64)
    units = _to_units(spectrum)
    if _jit.JIT_ENABLED:
        return _preprocess_sparse(bins, units, exclude_tau_zero)
    return _preprocess_dense(bins, units, exclude_tau_zero)


def preprocess(spectrum: BinnedSpectrum, exclude_tau_zero: bool = False) -> PreprocessedSpectrum:
    """Subtract the mean of the +-75-bin neighbourhood from every bin.

    The window includes the bin itself (divisor 151) unless
    ``exclude_tau_zero`` is set, in which case the classic SEQUEST form with
    divisor 150 is used. Bins outside [0, 65535] count as zero. The window sum
    is exact, then float32 arithmetic is applied and each value is rounded
    once to half precision; bins that round to zero are dropped.
    """
    pos, vals = preprocess_values(spectrum, exclude_tau_zero)
    half = vals.astype(np.float16)
    keep = (half.view(np.uint16) & 0x7FFF) != 0
    return PreprocessedSpectrum(spectrum.id, spectrum.precursor_mass, pos[keep], half[keep])


# -- CSR encoding ------------------------------------------------------------


def encode_csr(spectrum: BinnedSpectrum) -> bytes:
    """Little-endian stream of (uint16 bin, float16 bits) entries."""
    rec = np.empty(len(spectrum), dtype=_CSR_DTYPE)
    rec["bin"] = spectrum.bins
    rec["bits"] = spectrum.intensities.view(np.uint16)
    return rec.tobytes()


def decode_csr(data: bytes, id: str = "", precursor_mass: float = 1.0, cls=BinnedSpectrum):
    if len(data) % ENTRY_BYTES:
        raise ValueError("CSR stream length must be a multiple of 4 bytes")
    rec = np.frombuffer(data, dtype=_CSR_DTYPE)
    return cls(id, precursor_mass, rec["bin"].astype(np.int64), rec["bits"].view(np.float16))


# -- text files --------------------------------------------------------------


def iter_spectra(lines: Iterable[str]) -> Iterator[RawSpectrum]:
    """Parse ``S <id> <precursor>`` blocks terminated by a blank line."""
    header = None
    peaks = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            if header is not None:
                yield RawSpectrum.from_peaks(header[0], header[1], peaks)
                header, peaks = None, []
            continue
        if line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "S":
            if header is not None:
                yield RawSpectrum.from_peaks(header[0], header[1], peaks)
                peaks = []
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'S <id> <precursor_mass>'")
            header = (parts[1], float(parts[2]))
        else:
            if header is None or len(parts) != 2:
                raise ValueError(f"line {lineno}: peak line outside a spectrum block")
            peaks.append((float(parts[0]), float(parts[1])))
    if header is not None:
        yield RawSpectrum.from_peaks(header[0], header[1], peaks)


def read_spectra(path) -> list[RawSpectrum]:
    with open(path) as fh:
        return list(iter_spectra(fh))


def format_spectra(spectra: Iterable[RawSpectrum]) -> str:
    out = []
    for s in spectra:
        out.append(f"S {s.id} {s.precursor_mass!r}\n")
        for mz, inten in zip(s.mz.tolist(), s.intensity.tolist()):
            out.append(f"{mz!r} {inten!r}\n")
        out.append("\n")
    return "".join(out)


def write_spectra(path, spectra: Iterable[RawSpectrum]) -> None:
    Path(path).write_text(format_spectra(spectra))
