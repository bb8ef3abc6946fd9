"""Cycle-level simulator of a communication-avoiding Xcorr accelerator, with a
bit-exact software reference scorer and a design-space sweep harness."""

from .config import ConfigError, SimConfig, make_config, read_config_file
from .harness import (
    Workload,
    WorkloadSpec,
    count_pairs,
    dse_sweep,
    generate_workload,
    make_grid,
    run_simulation,
    verify,
)
from .interconnect import Arbiter, BusTransaction, DramModel, OutOfBounds, SpectrumCache, arbiter_step, cache_fill
from .pe import binary_search_sim, kernel_step
from .peptides import (
    InvalidResidue,
    Peptide,
    PeptideDb,
    TheoreticalSpectrum,
    find_candidates,
    generate_ions,
    peptide_mass,
)
from .scoring import XcorrScore, score_all, xcorr_direct, xcorr_fast
from .simulator import SimMetrics, SimResult, SimulationError, simulate
from .spectra import (
    BinnedSpectrum,
    PreprocessedSpectrum,
    RawSpectrum,
    bin_spectrum,
    decode_csr,
    encode_csr,
    preprocess,
)

__version__ = "0.1.0"
