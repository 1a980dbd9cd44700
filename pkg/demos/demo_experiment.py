# demos/demo_experiment.py
# ----------------------------------------------------------------------
# Desk-scale batch comparison of the four algorithms over seeded
# Monte-Carlo cells. Prints a summary table and writes the full
# per-instance CSV (with mean/std aggregate rows) next to this script's
# working directory. Scale m_values / instances up for real studies; the
# CLI equivalent is
#   miss-d2d run --m 20,30 --ratio 4 --instances 10 --seed 7 \
#                --algo miss,greedy-fixed,single-share,no-reuse --out demo.csv
# ----------------------------------------------------------------------
import collections

import numpy as np

from miss_d2d import ExperimentConfig, run_experiment

cfg = ExperimentConfig(
    m_values=(20, 30),
    due_ratio=4.0,
    instances=10,
    rng_seed=7,
    algorithms=("miss", "greedy-fixed", "single-share", "no-reuse"),
    output_path="demo_results.csv",
)

reports = run_experiment(cfg)
by_key = collections.defaultdict(list)
for r in reports:
    by_key[(r.m, r.algorithm)].append(r)

print(f"{len(reports)} runs -> demo_results.csv")
print(f"\n{'m':>4} {'algorithm':>13} {'thru Mbit/s':>12} {'bit/s/Hz':>9} "
      f"{'power mW':>10} {'permitted':>10} {'time s':>8}")
for m in cfg.m_values:
    for name in cfg.algorithms:
        rows = by_key[(m, name)]
        thru = np.mean([r.system_throughput_bps for r in rows]) / 1e6
        eff = np.mean([r.throughput_bps_hz_per_cue for r in rows])
        power = np.mean([r.due_total_power_w for r in rows]) * 1e3
        frac = np.mean([r.permitted_due_fraction for r in rows])
        t = np.mean([r.runtime_s for r in rows])
        print(f"{m:4d} {name:>13} {thru:12.1f} {eff:9.1f} {power:10.3g} "
              f"{frac:10.1%} {t:8.3f}")

print("""
Reading the table:
  * miss grants most pairs at milliwatt-scale total power: the pricing
    game charges each pair for the interference it creates, so admitted
    transmitters stay quiet.
  * greedy-fixed packs pairs at a fixed 10 dBm; its raw throughput is
    high because every granted pair blasts two orders of magnitude more
    power through the same 15 m link.
  * single-share shows the cost of the one-pair-per-CUE restriction.
  * no-reuse is the floor: cellular users only.
""")
