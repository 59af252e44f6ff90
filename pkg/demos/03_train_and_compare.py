"""Train the hybrid-actor agent and the plain dense agent briefly, then evaluate them.

A short run (default 60 episodes of 200 steps per agent) already separates
the two agents from the random policy; the full desk-scale study is
`blindbeam compare --config demos/scaled.toml`.

Run: python3 demos/03_train_and_compare.py [episodes]
"""

import sys
import tempfile
from pathlib import Path

from blindbeam import harness
from blindbeam.config import load_config

cfg = load_config(Path(__file__).with_name("scaled.toml"))
cfg.train.episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 60
out = Path(tempfile.mkdtemp(prefix="blindbeam-demo-"))

for variant in ("proposed", "vanilla"):
    res = harness.run_training(cfg, variant, seeds=[0], out_dir=out)
    curve = res.curves[0]
    k = max(1, len(curve) // 6)
    print(f"{variant}: training rate by episode " + " ".join(f"{curve[i]:.2f}" for i in range(0, len(curve), k)))
    print(f"  {harness.run_eval(res.agents[0], cfg, 1000, out, label=variant).line()}")

for name in ("random", "sweep"):
    print(f"  {harness.run_eval(name, cfg, 1000, out).line()}")
print(f"CSVs and checkpoints in {out}")
