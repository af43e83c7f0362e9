"""Sweep the initial annealing factor and watch entropy and ECE of the calibration head.

Small beta0 sharpens the calibration head, large beta0 softens it. Entropy should
rise with beta0 while ECE bottoms out somewhere in between.
Takes several minutes: one full training run per value.
"""
import sys

from adhcal import reference_config, run, validate_config

out_dir = sys.argv[1] if len(sys.argv) > 1 else "runs/demo_beta_sweep"
rows = run(validate_config(reference_config(experiment="beta_sweep", out_dir=out_dir)))["rows"]

print(" beta0   entropy   ECE     accuracy")
for r in rows:
    print(f" {r['beta0']:>4.1f}   {r['entropy']:.4f}   {r['ece_max']:.4f}  {r['accuracy']:.4f}")

best = min(rows, key=lambda r: r["ece_max"])
print(f"lowest ECE at beta0 = {best['beta0']}")
