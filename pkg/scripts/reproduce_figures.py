"""Run every figure-level config and write plot-ready CSVs.

    python scripts/reproduce_figures.py --out results/figures
"""

import argparse
from pathlib import Path

from kklattice.cli import main

ROOT = Path(__file__).resolve().parent.parent / "configs"
RUNS = [
    ("dispersion", "fig1c"),
    ("scatter", "fig3"),
    ("scatter", "fig4"),
    ("scatter", "fig5"),
    ("potential-check", "potential_m2"),
    ("born", "born"),
    ("born", "born_resolved"),
]


def run(out: Path) -> int:
    worst = 0
    for command, name in RUNS:
        target = out / name
        target.mkdir(parents=True, exist_ok=True)
        print(f"== {command} {name}")
        rc = main([command, "--config", str(ROOT / f"{name}.cfg"), "--out", str(target)])
        print(f"   exit {rc}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/figures")
    raise SystemExit(run(Path(ap.parse_args().out)))
