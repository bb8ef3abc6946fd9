"""Command line front end: ``xcorrsim {gen,score,sim,sweep,verify}``.

Simulation flags mirror the SimConfig fields. A ``--config`` file is read
last, so its keys override anything given on the command line.

Exit codes: 0 success, 1 verification mismatch, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, make_config, read_config_file
from .harness import (
    Workload,
    WorkloadSpec,
    dse_sweep,
    format_csv,
    generate_workload,
    make_grid,
    metrics_row,
    oracle_scores,
    run_simulation,
    verify,
)
from .scoring import format_scores

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG = 0, 1, 2


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_config_flags(p):
    g = p.add_argument_group("simulation config")
    for f in dataclasses.fields(SimConfig):
        if f.type in ("bool", bool):
            g.add_argument(_flag(f.name), dest=f.name, action="store_true", default=None)
        else:
            g.add_argument(_flag(f.name), dest=f.name, default=None, metavar=f.name.upper())
    g.add_argument("--config", type=Path, help="key = value file; its keys override flags")


def _add_inputs(p):
    p.add_argument("--spectra", type=Path, help="spectrum text file (default: generated workload)")
    p.add_argument("--peptides", type=Path, help="peptide text file (default: generated workload)")


def _config_from(args) -> SimConfig:
    flags = {f.name: getattr(args, f.name) for f in dataclasses.fields(SimConfig)}
    config = make_config(**flags)
    if args.config is not None:
        try:
            from_file = read_config_file(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        config = make_config(config, **from_file)
    return config


def _workload(args, config: SimConfig) -> Workload:
    if (args.spectra is None) != (args.peptides is None):
        raise ConfigError("--spectra and --peptides go together")
    if args.spectra is None:
        return generate_workload(WorkloadSpec(seed=config.seed, bin_width=config.bin_width))
    try:
        return Workload.load(args.spectra, args.peptides)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"bad input: {exc}") from exc


def _out(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _int_list(text):
    return [int(x, 0) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


# -- subcommands -------------------------------------------------------------


def cmd_gen(args, config):
    spec = WorkloadSpec(
        num_spectra=args.num_spectra,
        num_peptides=args.num_peptides,
        bin_width=config.bin_width,
        seed=config.seed,
    )
    w = generate_workload(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w.write(out / "spectra.txt", out / "peptides.txt")
    sizes = [s.nbytes for s in w.preprocessed(config.bin_width, config.exclude_tau_zero)]
    median = float(np.median(sizes)) if sizes else 0.0
    print(f"wrote {len(w.spectra)} spectra, {len(w.peptides)} peptides to {out} (median CSR {median:.0f} B)")
    return EXIT_OK


def _top_rows(ids, sidx, pidx, scores, k):
    rows = []
    for s in range(len(ids)):
        sel = np.nonzero(sidx == s)[0]
        if k is not None:
            # highest score first, lowest candidate index on ties
            order = np.lexsort((pidx[sel], -scores[sel].astype(np.float64)))
            sel = sel[order[:k]]
        rows.extend((ids[s], int(pidx[i]), scores[i]) for i in sel.tolist())
    return rows


def cmd_score(args, config):
    w = _workload(args, config)
    sidx, pidx, sc = oracle_scores(config, w)
    ids = [s.id for s in w.spectra]
    rows = _top_rows(ids, sidx, pidx, sc, args.top)
    _out(args.out, format_scores(rows, pairs=int(sc.size)))
    return EXIT_OK


def cmd_sim(args, config):
    w = _workload(args, config)
    t0 = time.perf_counter()
    result = run_simulation(config, w)
    elapsed = time.perf_counter() - t0
    m = result.metrics
    if args.scores is not None:
        ids = [s.id for s in w.spectra]
        _out(args.scores, format_scores(result.score_rows(ids)))
    _out(args.out, format_csv([metrics_row(config, m)]))
    print(
        f"# {m.total_cycles} cycles ({m.total_seconds:.6g} s at {config.clock_mhz} MHz), "
        f"{m.total_pairs} pairs, simulated in {elapsed:.2f} s",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_sweep(args, config):
    w = _workload(args, config)
    grid = make_grid(
        config,
        num_pes=_int_list(args.pes) if args.pes else None,
        cache_bytes=_int_list(args.caches) if args.caches else None,
        tolerance_da=_float_list(args.tolerances) if args.tolerances else None,
    )
    rows = dse_sweep(grid, w, jobs=args.jobs)
    _out(args.out, format_csv(rows))
    return EXIT_OK


def cmd_verify(args, config):
    w = _workload(args, config)
    result = run_simulation(config, w)
    problems = verify(result, w)
    if not result.metrics.buckets_balance():
        problems.append("cycle buckets do not sum to total cycles")
    for line in problems:
        print(line)
    if problems:
        print(f"verify: FAIL ({len(problems)} problems)")
        return EXIT_MISMATCH
    print(f"verify: OK, {result.scores.size} scores bit-identical to the oracle")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xcorrsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic workload")
    _add_config_flags(p)
    p.add_argument("--out-dir", default=".", help="directory for spectra.txt and peptides.txt")
    p.add_argument("--num-spectra", type=int, default=WorkloadSpec.num_spectra)
    p.add_argument("--num-peptides", type=int, default=WorkloadSpec.num_peptides)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("score", help="score with the software oracle")
    _add_config_flags(p)
    _add_inputs(p)
    p.add_argument("--top", type=int, default=None, help="keep the k best candidates per spectrum")
    p.add_argument("--out", default=None, help="score file (default stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sim", help="run one simulation")
    _add_config_flags(p)
    _add_inputs(p)
    p.add_argument("--out", default=None, help="metrics CSV (default stdout)")
    p.add_argument("--scores", default=None, help="write the simulator's scores here")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("sweep", help="design-space sweep")
    _add_config_flags(p)
    _add_inputs(p)
    p.add_argument("--pes", help="comma list of PE counts")
    p.add_argument("--caches", help="comma list of cache sizes in bytes")
    p.add_argument("--tolerances", help="comma list of precursor tolerances in Da")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--out", default=None, help="CSV file (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="diff simulator scores against the oracle")
    _add_config_flags(p)
    _add_inputs(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from(args)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"xcorrsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
