"""Creep at 45 deg: engineering strain against time for three stress levels."""

import argparse
import csv
from pathlib import Path

from tivisco.driver import LoadProgram, PointSimulator
from tivisco.fixtures import load_material


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--levels", type=float, nargs="+", default=[90.0, 100.0, 110.0])
    ap.add_argument("--hold", type=float, default=1000.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = PointSimulator(load_material())
    for S in args.levels:
        rec = sim.run(LoadProgram(kind="creep", theta0=45.0, stress=S, ramp_time=10.0, duration=args.hold))
        with open(out / f"creep45_{S:g}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "eps_eng", "sigma_eng"])
            w.writerows(zip(rec.t, rec.eps_eng, rec.sigma_eng))
        print(f"{S:g} MPa: strain {rec.eps_eng[rec.t.searchsorted(10.0)]:.4f} after the ramp, "
              f"{rec.eps_eng[-1]:.4f} at t={rec.t[-1]:g} s")


if __name__ == "__main__":
    main()
