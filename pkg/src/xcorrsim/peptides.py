"""Peptide database: masses, candidate lookup and b/y fragment generation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._jit import njit
from .spectra import MAX_BINS

WATER = 18.010565
PROTON = 1.007276
MAX_LENGTH = 64
RECORD_BYTES = 64

RESIDUE_MASSES = {
    "G": 57.02146,
    "A": 71.03711,
    "S": 87.03203,
    "P": 97.05276,
    "V": 99.06841,
    "T": 101.04768,
    "C": 103.00919,
    "L": 113.08406,
    "I": 113.08406,
    "N": 114.04293,
    "D": 115.02694,
    "Q": 128.05858,
    "K": 128.09496,
    "E": 129.04259,
    "M": 131.04049,
    "H": 137.05891,
    "F": 147.06841,
    "R": 156.10111,
    "Y": 163.06333,
    "W": 186.07931,
}
ALPHABET = "".join(sorted(RESIDUE_MASSES))
# Record code k (1..20) -> residue mass; code 0 terminates a record.
CODE_MASSES = np.array([0.0] + [RESIDUE_MASSES[c] for c in ALPHABET], dtype=np.float64)
CODE_MASSES.setflags(write=False)
_CODE_OF = {c: i + 1 for i, c in enumerate(ALPHABET)}


class InvalidResidue(ValueError):
    pass


def _check_sequence(sequence: str) -> None:
    if not sequence:
        raise InvalidResidue("empty peptide sequence")
    if len(sequence) > MAX_LENGTH:
        raise InvalidResidue(f"peptide longer than {MAX_LENGTH} residues")
    for ch in sequence:
        if ch not in RESIDUE_MASSES:
            raise InvalidResidue(f"unknown residue {ch!r} in {sequence!r}")


def peptide_mass(sequence: str) -> float:
    """Monoisotopic neutral mass; residues summed left to right, then water."""
    _check_sequence(sequence)
    mass = 0.0
    for ch in sequence:
        mass += RESIDUE_MASSES[ch]
    return mass + WATER


def encode_record(sequence: str) -> np.ndarray:
    """64-byte DRAM record: one residue code per byte, zero padded."""
    _check_sequence(sequence)
    rec = np.zeros(RECORD_BYTES, dtype=np.uint8)
    rec[: len(sequence)] = [_CODE_OF[c] for c in sequence]
    return rec


def decode_record(record) -> str:
    out = []
    for code in np.asarray(record, dtype=np.uint8).tolist():
        if code == 0:
            break
        out.append(ALPHABET[code - 1])
    return "".join(out)


@dataclass(frozen=True)
class Peptide:
    sequence: str
    monoisotopic_mass: float

    @classmethod
    def from_sequence(cls, sequence: str) -> "Peptide":
        return cls(sequence, peptide_mass(sequence))


class PeptideDb:
    """Peptides sorted by ascending mass (stable w.r.t. input order)."""

    def __init__(self, peptides: Iterable[Peptide]):
        peptides = list(peptides)
        masses = np.array([p.monoisotopic_mass for p in peptides], dtype=np.float64)
        order = np.argsort(masses, kind="stable")
        self.peptides: list[Peptide] = [peptides[k] for k in order]
        self.mass_index = masses[order]
        self.mass_index.setflags(write=False)
        self._records = None
        self._ions = {}

    @classmethod
    def from_sequences(cls, sequences: Iterable[str]) -> "PeptideDb":
        return cls(Peptide.from_sequence(s) for s in sequences)

    def __len__(self):
        return len(self.peptides)

    def __getitem__(self, k):
        return self.peptides[k]

    @property
    def records(self) -> np.ndarray:
        """(N, 64) uint8 array of DRAM peptide records in mass order."""
        if self._records is None:
            recs = np.zeros((len(self), RECORD_BYTES), dtype=np.uint8)
            for k, p in enumerate(self.peptides):
                recs[k] = encode_record(p.sequence)
            recs.setflags(write=False)
            self._records = recs
        return self._records

    def ion_table(self, bin_width: float = 1.0):
        """CSR table of theoretical ions for every peptide.

        Returns ``(offsets, bins)``; peptide k owns ``bins[offsets[k]:offsets[k+1]]``.
        All theoretical intensities are 1.0.
        """
        key = float(bin_width)
        if key not in self._ions:
            offsets, bins = _ion_table(self.records, CODE_MASSES, key)
            offsets.setflags(write=False)
            bins.setflags(write=False)
            self._ions[key] = (offsets, bins)
        return self._ions[key]

    def candidates(self, precursor_mass: float, tolerance: float) -> range:
        lo, hi = find_candidates(self, precursor_mass, tolerance)
        return range(lo, hi)


# -- candidate search --------------------------------------------------------


@njit
def too_light(mass, precursor, tolerance):
    return precursor - mass > tolerance


@njit
def too_heavy(mass, precursor, tolerance):
    return mass - precursor > tolerance


@njit
def _bounds(masses, precursor, tolerance):
    # First index not too light, then first index too heavy. Both predicates
    # are monotone in mass because rounded subtraction is monotone, so the
    # result is exactly {k : |m_k - p| <= tol}.
    lo, hi = 0, masses.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if too_light(masses[mid], precursor, tolerance):
            lo = mid + 1
        else:
            hi = mid
    first = lo
    hi = masses.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if too_heavy(masses[mid], precursor, tolerance):
            hi = mid
        else:
            lo = mid + 1
    return first, lo


def find_candidates(db, precursor_mass: float, tolerance: float) -> tuple[int, int]:
    """Index range [lo, hi) of peptides within +-tolerance of the precursor."""
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    masses = db.mass_index if isinstance(db, PeptideDb) else np.asarray(db, dtype=np.float64)
    lo, hi = _bounds(masses, float(precursor_mass), float(tolerance))
    return int(lo), int(hi)


# -- fragment ions -----------------------------------------------------------


@njit
def ions_from_record(record, code_masses, bin_width, out):
    """Write sorted, de-duplicated b/y ion bins for one record into ``out``.

    Returns the number of ions written. b ions are prefix sums + proton; y
    ions are suffix sums (accumulated from the C-terminus) + water + proton.
    """
    n = 0
    while n < record.shape[0] and record[n] != 0:
        n += 1
    if n < 2:
        return 0
    nb = n - 1
    bbins = np.empty(nb, np.int64)
    ybins = np.empty(nb, np.int64)
    acc = 0.0
    for k in range(nb):
        acc += code_masses[record[k]]
        bbins[k] = np.int64(np.floor((acc + PROTON) / bin_width))
    acc = 0.0
    for k in range(nb):
        acc += code_masses[record[n - 1 - k]]
        ybins[k] = np.int64(np.floor(((acc + WATER) + PROTON) / bin_width))
    # merge two ascending series, dropping duplicates and out-of-range bins
    i = 0
    j = 0
    m = 0
    last = -1
    while i < nb or j < nb:
        if j >= nb or (i < nb and bbins[i] <= ybins[j]):
            v = bbins[i]
            i += 1
        else:
            v = ybins[j]
            j += 1
        if v >= MAX_BINS:
            continue
        if v != last:
            out[m] = v
            m += 1
            last = v
    return m


@njit
def _ion_table(records, code_masses, bin_width):
    npep = records.shape[0]
    offsets = np.zeros(npep + 1, np.int64)
    scratch = np.empty(2 * MAX_LENGTH, np.int64)
    total = 0
    for k in range(npep):
        total += ions_from_record(records[k], code_masses, bin_width, scratch)
        offsets[k + 1] = total
    bins = np.empty(total, np.int64)
    for k in range(npep):
        ions_from_record(records[k], code_masses, bin_width, bins[offsets[k]:])
    return offsets, bins


@dataclass(frozen=True, eq=False)
class TheoreticalSpectrum:
    bins: np.ndarray
    intensities: np.ndarray

    def __len__(self):
        return int(self.bins.size)

    @property
    def pairs(self):
        return list(zip(self.bins.tolist(), self.intensities.astype(np.float64).tolist()))

    @classmethod
    def from_pairs(cls, pairs) -> "TheoreticalSpectrum":
        pairs = list(pairs)
        bins = np.array([p[0] for p in pairs], dtype=np.int64)
        if bins.size > 1 and not np.all(np.diff(bins) > 0):
            raise ValueError("theoretical bins must be strictly ascending")
        return cls(bins, np.array([p[1] for p in pairs], dtype=np.float16))


def generate_ions(peptide, bin_width: float = 1.0) -> TheoreticalSpectrum:
    """Singly charged b/y ions with unit intensity, binned like the spectra."""
    seq = peptide.sequence if isinstance(peptide, Peptide) else str(peptide)
    out = np.empty(2 * MAX_LENGTH, np.int64)
    n = ions_from_record(encode_record(seq), CODE_MASSES, float(bin_width), out)
    bins = out[:n].copy()
    return TheoreticalSpectrum(bins, np.ones(n, dtype=np.float16))


# -- text files --------------------------------------------------------------


def parse_peptides(lines: Iterable[str]) -> list[Peptide]:
    out = []
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        pep = Peptide.from_sequence(parts[0])
        if len(parts) > 1:
            stated = float(parts[1])
            if abs(stated - pep.monoisotopic_mass) > 1e-4:
                raise ValueError(
                    f"line {lineno}: stated mass {stated} disagrees with computed {pep.monoisotopic_mass}"
                )
        out.append(pep)
    return out


def read_peptides(path) -> PeptideDb:
    with open(path) as fh:
        return PeptideDb(parse_peptides(fh))


def write_peptides(path, peptides: Sequence[Peptide], with_mass: bool = False) -> None:
    lines = []
    for p in peptides:
        lines.append(f"{p.sequence} {p.monoisotopic_mass!r}" if with_mass else p.sequence)
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
