"""Command-line front end: ``tivisco {simulate,calibrate,ply}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .calibration import calibrate, extract_yield
from .config import RunConfig, parse_config
from .driver import CurveRecord, PointSimulator
from .errors import CalibrationError, ConfigError, ExtractionError, TivError
from .fe_ply import solve_ply, write_fields

log = logging.getLogger("tivisco")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _prepare(args) -> tuple[RunConfig, Path]:
    cfg = parse_config(args.config) if args.config else parse_config(text="")
    cfg.apply_overrides(args.tol_override)
    out = Path(args.out) if args.out else cfg.out
    cfg.out = out
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.ini").write_text(cfg.to_ini())
    return cfg, out


def cmd_simulate(args) -> int:
    cfg, out = _prepare(args)
    params = cfg.load_params()
    if not cfg.programs:
        log.warning("no [program:*] sections in the config; nothing to run")
        return EXIT_OK
    sim = PointSimulator(params, cfg.settings)
    for name, prog in cfg.programs.items():
        rec = sim.run(prog)
        path = out / f"{name}.csv"
        rec.to_csv(path)
        log.info("%s: %d rows -> %s", name, len(rec), path)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg, out = _prepare(args)
    if not cfg.curves:
        raise CalibrationError("no curve files listed under [calibrate] curves")
    points = []
    for path in cfg.curves:
        if not Path(path).is_file():
            raise ConfigError(f"curve file not found: {path}")
        try:
            rec = CurveRecord.from_csv(path)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        try:
            points.append(extract_yield(rec, cfg.method))
        except ExtractionError as exc:
            raise CalibrationError(f"{path}: {exc}") from None
    result = calibrate(points)
    (out / "calibration.txt").write_text(result.report())
    (out / "calibration.json").write_text(json.dumps(result.as_dict(), indent=2, sort_keys=True) + "\n")
    sys.stdout.write(result.report())
    return EXIT_OK


def cmd_ply(args) -> int:
    cfg, out = _prepare(args)
    params = cfg.load_params()

    def progress(eps, sig, its):
        log.info("eps_eng=%.5f sigma_eng=%.3f newton=%d", eps, sig, its)

    res = solve_ply(cfg.ply, params, cfg.settings, cfg.snapshots, progress)
    res.to_csv(out / "ply_curve.csv")
    for eps, fields in sorted(res.snapshots.items()):
        write_fields(out / f"ply_fields_{eps:.5f}.csv", fields)
    log.info("ply run finished in %.1f s", res.wall_time)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="tivisco", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("simulate", cmd_simulate, "material-point load programs"),
                               ("calibrate", cmd_calibrate, "identify yield parameters from curves"),
                               ("ply", cmd_ply, "finite-element strip test")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--out", help="output directory (overrides [run] out)")
        sp.add_argument("--tol-override", action="append", default=[], metavar="K=V",
                        help="override a solver tolerance or iteration limit; repeatable")
        sp.add_argument("--threads", type=int, default=None, help="threads for the material kernel")
        sp.add_argument("-v", "--verbose", action="store_true")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1")
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        return args.func(args)
    except (ConfigError, CalibrationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TivError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
