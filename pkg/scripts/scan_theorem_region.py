"""5x5 (v, Omega) invisibility scan with a summary of the theorem region.

    python scripts/scan_theorem_region.py --threads 4 --out results/scan
"""

import argparse
import time
from pathlib import Path

from kklattice.cli import RunConfig
from kklattice.scattering import scan_invisibility, write_scan_csv

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "scan.cfg"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(CONFIG))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/scan")
    args = ap.parse_args()

    cfg = RunConfig.load(args.config)
    t = time.perf_counter()
    rows = scan_invisibility(
        cfg.experiment("left"),
        cfg.scan.v_over_kappa_a,
        cfg.scan.omega_a,
        cfg.integrator,
        threads=args.threads,
        adaptive=cfg.scan.adaptive,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_scan_csv(out / "scan.csv", rows)

    theorem = [r for r in rows if r.theorem]
    print(f"{len(rows)} runs in {time.perf_counter() - t:.0f}s -> {out / 'scan.csv'}")
    print(f"theorem region: {sum(r.passed for r in theorem)}/{len(theorem)} pass")
    for r in theorem:
        if r.boundary:
            print(f"  boundary v={r.v} Omega={r.Omega} {r.side}: distance {r.invisibility_distance:.3e}")
    below = [r for r in rows if not r.theorem]
    print(f"below the line: {sum(r.passed for r in below)}/{len(below)} pass (no claim)")
    return 0 if all(r.passed for r in theorem) else 3


if __name__ == "__main__":
    raise SystemExit(main())
