"""Identify the four single-mode parameters from simulated curves.

Simulates the five curves the identification needs with the shipped
single-mode parameters, extracts their yield points and runs the pipeline.
"""

import argparse
import math

from tivisco.calibration import YieldMethod, calibrate, extract_yield
from tivisco.driver import LoadProgram, PointSimulator
from tivisco.fixtures import load_material

RUNS = [(90.0, 1e-3), (90.0, -1e-3), (90.0, -1e-4), (90.0, -1e-5), (30.0, 1e-3)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gauge", default="upper", choices=("lower", "upper"))
    ap.add_argument("--threshold", type=float, default=YieldMethod.threshold)
    args = ap.parse_args()
    params = load_material(single_mode=True)
    sim = PointSimulator(params)
    method = YieldMethod(threshold=args.threshold)
    points = [extract_yield(sim.run(LoadProgram.strain_to(0.06, r, theta0=th, gauge=args.gauge)), method)
              for th, r in RUNS]
    res = calibrate(points)
    print(res.report())
    pl = params.plastic
    for name, true, got in (("mu_p", pl.mu_p, res.mu_p), ("sigma0", pl.sigma0, res.sigma0),
                            ("alpha2", pl.alpha2, res.alpha2)):
        print(f"{name:7s} true {true:.5g}  identified {got:.5g}  ({100 * (got / true - 1):+.2f}%)")
    print(f"eta0    true {pl.eta0:.4g}  identified {res.eta0:.4g}  "
          f"(log10 {100 * (math.log10(res.eta0) / math.log10(pl.eta0) - 1):+.2f}%)")


if __name__ == "__main__":
    main()
