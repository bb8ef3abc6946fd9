"""Numba vs pure-numpy timings for the hot paths.

Each path runs in its own interpreter because XCORRSIM_NO_JIT is read at
import time. Both must produce the same numbers; the script exits 1 if they
don't.

    python benchmarks/bench_jit.py [--spectra 12] [--peptides 4000] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
from xcorrsim._jit import JIT_ENABLED
from xcorrsim.config import SimConfig
from xcorrsim.harness import WorkloadSpec, generate_workload, run_simulation
from xcorrsim.scoring import score_arrays
from xcorrsim.spectra import bin_spectrum, preprocess

n_spec, n_pep, repeat = (int(a) for a in sys.argv[1:4])
w = generate_workload(WorkloadSpec(num_spectra=n_spec, num_peptides=n_pep, seed=1))
db = w.db
binned = [bin_spectrum(s) for s in w.spectra]

def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return out, first, best

pre, p_first, p_best = timed(lambda: [preprocess(b) for b in binned])
sc, s_first, s_best = timed(lambda: score_arrays(db, pre, 10.0))
cfg = SimConfig(num_pes=4, cache_bytes=1024)
sim, m_first, m_best = timed(lambda: run_simulation(cfg, w))

digest = hashlib.sha256()
for p in pre:
    digest.update(p.bins.tobytes()); digest.update(p.intensities.tobytes())
digest.update(sc[2].tobytes())
digest.update(sim.scores.tobytes()); digest.update(sim.trace.tobytes())
digest.update(str(sim.metrics.total_cycles).encode())
print(json.dumps({
    "jit": JIT_ENABLED,
    "pairs": int(sc[2].size),
    "cycles": sim.metrics.total_cycles,
    "digest": digest.hexdigest(),
    "times": {"preprocess": [p_first, p_best], "score": [s_first, s_best], "simulate": [m_first, m_best]},
}))
"""


def run(no_jit, args):
    env = dict(os.environ, XCORRSIM_NO_JIT="1" if no_jit else "0")
    argv = [sys.executable, "-c", WORKER, str(args.spectra), str(args.peptides), str(args.repeat)]
    out = subprocess.run(argv, env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spectra", type=int, default=12)
    ap.add_argument("--peptides", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    # the 1st-call column includes compilation unless numba's cache is warm
    args = ap.parse_args()

    jit = run(False, args)
    plain = run(True, args)
    print(f"workload: {args.spectra} spectra, {args.peptides} peptides, {jit['pairs']} pairs, "
          f"{jit['cycles']} simulated cycles")
    print(f"{'stage':<12}{'numba 1st':>14}{'numba best':>14}{'numpy best':>14}{'speed-up':>10}")
    for stage in ("preprocess", "score", "simulate"):
        first, best = jit["times"][stage]
        slow = plain["times"][stage][1]
        print(f"{stage:<12}{first:>13.3f}s{best:>13.4f}s{slow:>13.4f}s{slow / best:>9.1f}x")
    same = jit["digest"] == plain["digest"]
    print(f"results identical: {same} (sha256 {jit['digest'][:12]})")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
