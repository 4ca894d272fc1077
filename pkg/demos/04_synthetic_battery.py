# Repeated runs on a population drawn from the bundled top-100 word table.
# Each user holds five words; a sampled user votes with one of them.

import time

from triehh import generate_synthetic, load_fixture
from triehh.harness import ExperimentSpec, discovery_curve, run_battery
from triehh.data import planted_dataset

table = load_fixture("sentiment140-top100")
users = generate_synthetic(table, 10**5, words_per_user=5, seed=0)
print(users, "top words:", users.top_k(8))

spec = ExperimentSpec(users, runs=20, epsilon=4.0, max_length=10, mode="multi_word", top_k=(10, 25, 50, 100))
t = time.perf_counter()
report = run_battery(spec)
print(f"{report.R} runs in {time.perf_counter() - t:.1f}s, params {report.params.table_row()}")
for m in report.per_k:
    print(f"K={m.k:3d}  precision={m.precision.mean:.3f}  recall={m.recall.mean:.3f} +- {m.recall.ci:.3f}"
          f"  F1={m.f1.mean:.3f}")
print("prefixes added below threshold:", report.kanon_violations)

# Single-word mode has a worst-case curve to compare against. One planted
# word among unique fillers sits right on it.
planted = planted_dataset(10**4, "zebra", 1000, seed=0)
spec = ExperimentSpec(planted, runs=500, epsilon=2.0, max_length=10)
for row in discovery_curve(spec, [1e-5, 1e-3, 0.5]):
    print(f"f~{row.frequency:.2e}  words={row.words:5d}  empirical={row.empirical:.3f}  worst case={row.theoretical:.3f}")
