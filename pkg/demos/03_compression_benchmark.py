"""
Compression-rate benchmark
==========================

Train on coresets of 1%..10% of a noisy synthetic set and score every fitted
parameter by its worst-case risk on the full data. A reduced trial count keeps
the run under a minute; the acceptance suite uses 50 trials.
"""

import sys

from wdrocore.bench import BenchConfig, emit_plotdata, format_csv, run_bench, summarize

config = BenchConfig(
    n=2000, m=5, noise_std=1.0, flip_rate=0.1, normalize=False,
    loss="logistic", sigma=0.3, gamma=7.0, trials=10, anchor="whole",
)
rows = run_bench(config)
summary = summarize(rows)
sys.stdout.write(format_csv(summary))

# one block per method, ready for gnuplot or matplotlib
if len(sys.argv) > 1:
    emit_plotdata(summary, sys.argv[1])
