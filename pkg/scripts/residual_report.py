"""Structure-preservation report for every mechanics model and scheme.

Runs ``dvarint residuals`` in-process for each pairing and prints one table.

Usage: python scripts/residual_report.py [--steps 2000] [--tau 0.05]
"""

import argparse
import json
import tempfile
from pathlib import Path

from dvarint.cli import main as cli

SCHEMES = ("midpoint", "canonical", "del", "order4", "explicit_euler")
MODELS = ("harmonic", "pendulum", "quartic")
FIELDS = ("max_symplectic_residual", "symplectic_growth_factor", "max_identity_residual", "energy_max_deviation", "energy_slope")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--tau", type=float, default=0.05)
    ap.add_argument("--windows", type=int, default=50)
    args = ap.parse_args()
    print(f"{'model':>9} {'scheme':>15} " + " ".join(f"{f[:14]:>14}" for f in FIELDS))
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "report.json"
        for model in MODELS:
            for scheme in SCHEMES:
                argv = ["residuals", "--model", model, "--scheme", scheme, "--steps", str(args.steps), "--tau", str(args.tau)]
                code = cli([*argv, "--windows", str(args.windows), "--format", "json", "--output", str(out)])
                if code != 0:
                    print(f"{model:>9} {scheme:>15} exit {code}")
                    continue
                rep = json.loads(out.read_text())
                print(f"{model:>9} {scheme:>15} " + " ".join(f"{rep[f]:14.3e}" for f in FIELDS))


if __name__ == "__main__":
    main()
