import subprocess
import sys
from pathlib import Path

BENCH = Path(__file__).resolve().parent.parent / "benchmarks" / "bench_jit.py"


def test_benchmark_paths_agree():
    out = subprocess.run([sys.executable, str(BENCH), "--spectra", "3", "--peptides", "600", "--repeat", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stdout + out.stderr
    assert "results identical: True" in out.stdout
