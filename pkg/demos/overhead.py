"""How much does online calibration cost?

The calibration head takes one step every k main-head steps, so its share of
wall-clock time should fall roughly like 1/k. The sweep below times both heads
for k in {5, 10, 35, 70}.
"""
import sys

from adhcal import reference_config, run, validate_config

out_dir = sys.argv[1] if len(sys.argv) > 1 else "runs/demo_overhead"
rows = run(validate_config(reference_config(experiment="k_sweep", out_dir=out_dir)))["rows"]

print("   k   calib steps   overhead   1.5/k + 0.01")
for r in rows:
    print(f" {r['calib_period']:>3}   {r['calib_steps']:>11}   {r['overhead']:.4f}     {r['bound']:.4f}")

# wall-clock numbers are noisy, so they go to k_sweep.csv and not to metrics.json
