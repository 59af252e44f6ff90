"""Compare the non-learning policies on the desk-scale scenario.

The oracle searches BS assignments and beam angles with full channel
knowledge; los_oracle only points beams along line-of-sight; the sweep
pays for its scan with a duty factor.

Run: python3 demos/02_baselines.py
"""

from pathlib import Path

from blindbeam import harness
from blindbeam.config import load_config

cfg = load_config(Path(__file__).with_name("scaled.toml"))
print(f"sweep: {cfg.sweep.beam_count} beams, duty factor {cfg.sweep.duty_factor:.2f}")
for name in harness.BASELINES:
    summary = harness.run_eval(name, cfg, n_observations=1000)
    print(f"  {summary.line()}")
