"""Build tiny service checkpoints for the console integration test.

Usage: python3 make_ckpts.py OUT_DIR
Writes OUT_DIR/gmp.ckpt and OUT_DIR/cmd.ckpt (skips work if both exist).
"""

import sys
from pathlib import Path

from gmp.cli import main
from gmp.dataset import save_clip, synth_gait
from gmp.model import default_model

out = Path(sys.argv[1])
gmp_ckpt, cmd_ckpt = out / "gmp.ckpt", out / "cmd.ckpt"
if gmp_ckpt.exists() and cmd_ckpt.exists():
    print("cached")
    sys.exit(0)

data = out / "clips"
data.mkdir(parents=True, exist_ok=True)
model = default_model()
for i, speed in enumerate((0.6, 1.1)):
    save_clip(data / f"walk{i}.gmpclip", synth_gait(speed, duration=11.0, seed=20 + i, model=model))

assert main(["train-gmp", "--data", str(data), "--out", str(gmp_ckpt),
             "--epochs", "2", "--window", "4", "--seed", "5"]) == 0
assert main(["train-cmd", "--gmp", str(gmp_ckpt), "--data", str(data),
             "--out", str(cmd_ckpt), "--epochs", "1", "--seed", "5"]) == 0
print("trained")
