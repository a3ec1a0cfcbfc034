"""Run configuration files.

A config is an INI file (``configparser`` syntax, ``#`` or ``;`` comments).
Units are MPa, s and mm throughout.  Every section is optional::

    [run]
    units = MPa-s-mm          # the only accepted value
    material = mat.ini        # default: shipped material table
    spectrum = spectrum.csv   # 'mode,m,eta0' table; 'single' for one mode
    out = results             # output directory (the --out flag wins)

    [solver]                  # SolverSettings fields
    tol_internal = 1e-10
    backend = compiled        # or numpy

    [program:NAME]            # one section per material-point run
    kind = strain             # strain | creep
    theta0 = 30               # degrees
    direction = tension       # tension | compression (sign of rate)
    rate = 1e-3               # true strain rate magnitude, 1/s
    strain = 0.05             # strain runs: final |true strain| (sets duration)
    stress = 100              # creep: nominal stress target
    ramp_time = 10
    duration = 1000           # creep runs, or strain runs without 'strain'
    dt0 = 0.25
    adaptive = yes
    gauge = lower             # lower | upper

    [calibrate]
    curves = a.csv, b.csv     # curve CSVs written by 'simulate'
    threshold = 0.02          # any YieldMethod field

    [ply]                     # any PlyProblem field, plus:
    snapshots = 0.00928, 0.0164, 0.0281

Relative paths are resolved against the config file's directory.
``--tol-override key=value`` accepts SolverSettings fields, ``stress_tol``
and ``max_iter`` (all programs) and ``newton_tol`` (ply).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .calibration import YieldMethod
from .driver import LoadProgram
from .errors import ConfigError
from .fe_ply import PlyProblem
from .fixtures import load_material
from .material import MaterialParams, SolverSettings

UNITS = "MPa-s-mm"
_PROGRAM_OVERRIDES = ("stress_tol", "max_iter")
_PLY_OVERRIDES = ("newton_tol",)


def _coerce(name, text, typ, where):
    text = text.strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "yes", "true", "on"):
                return True
            if low in ("0", "no", "false", "off"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        if text.lower() == "none":
            return None
        return float(text) if typ == "float | None" else text
    except ValueError:
        raise ConfigError(f"{where}: bad value for {name}: {text!r}") from None


def _field_types(cls):
    out = {}
    for f in fields(cls):
        t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        out[f.name] = {"float": float, "int": int, "bool": bool, "str": str}.get(t, t)
    return out


def _build(cls, items, where, skip=()):
    types = _field_types(cls)
    kw = {}
    for k, v in items:
        if k in skip:
            continue
        if k not in types:
            raise ConfigError(f"{where}: unknown key {k!r}")
        kw[k] = _coerce(k, v, types[k], where)
    try:
        return cls(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _floats(text, where):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: expected a list of numbers, got {text!r}") from None


def _program(name, sec, where):
    items = dict(sec.items())
    direction = items.pop("direction", "tension").strip()
    if direction not in ("tension", "compression"):
        raise ConfigError(f"{where}: direction must be tension or compression")
    strain = items.pop("strain", None)
    prog = _build(LoadProgram, items.items(), where)
    sign = -1.0 if direction == "compression" else 1.0
    prog = replace(prog, rate=sign * abs(prog.rate))
    if strain is not None:
        if prog.kind != "strain":
            raise ConfigError(f"{where}: 'strain' only applies to kind = strain")
        eps = _coerce("strain", strain, float, where)
        if eps <= 0 or prog.rate == 0:
            raise ConfigError(f"{where}: strain and rate must be nonzero")
        prog = replace(prog, duration=abs(eps / prog.rate))
    elif prog.kind == "strain" and prog.rate == 0:
        raise ConfigError(f"{where}: rate must be nonzero for strain control")
    return prog


@dataclass
class RunConfig:
    """Fully resolved run configuration."""

    source: Path | None = None
    material: Path | None = None
    spectrum: str | None = None
    out: Path = Path("out")
    settings: SolverSettings = field(default_factory=SolverSettings)
    programs: dict = field(default_factory=dict)
    curves: list = field(default_factory=list)
    method: YieldMethod = field(default_factory=YieldMethod)
    ply: PlyProblem = field(default_factory=PlyProblem)
    snapshots: tuple = (0.00928, 0.0164, 0.0281)

    def load_params(self) -> MaterialParams:
        single = self.spectrum == "single"
        spectrum_file = None if single or self.spectrum is None else Path(self.spectrum)
        if spectrum_file is not None and not spectrum_file.is_file():
            raise ConfigError(f"spectrum file not found: {spectrum_file}")
        if self.material is not None and not Path(self.material).is_file():
            raise ConfigError(f"material file not found: {self.material}")
        return load_material(self.material, spectrum_file, single_mode=single)

    def apply_overrides(self, pairs):
        """Apply ``key=value`` strings from the command line."""
        st_types = _field_types(SolverSettings)
        for pair in pairs or ():
            if "=" not in pair:
                raise ConfigError(f"override {pair!r} is not key=value")
            k, v = (x.strip() for x in pair.split("=", 1))
            if k in st_types:
                self.settings = replace(self.settings, **{k: _coerce(k, v, st_types[k], "--tol-override")})
            elif k in _PROGRAM_OVERRIDES:
                typ = _field_types(LoadProgram)[k]
                val = _coerce(k, v, typ, "--tol-override")
                self.programs = {n: replace(p, **{k: val}) for n, p in self.programs.items()}
            elif k in _PLY_OVERRIDES:
                self.ply = replace(self.ply, **{k: _coerce(k, v, float, "--tol-override")})
            else:
                raise ConfigError(f"unknown override key {k!r}")

    def to_ini(self) -> str:
        """Resolved configuration, defaults included, in the input grammar."""
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["run"] = {"units": UNITS, "material": str(self.material or "<shipped>"),
                     "spectrum": str(self.spectrum or "<shipped>"), "out": str(self.out)}
        cp["solver"] = {f.name: str(getattr(self.settings, f.name)) for f in fields(self.settings)}
        for name, p in self.programs.items():
            sec = {f.name: str(getattr(p, f.name)) for f in fields(p)}
            sec["direction"] = "compression" if p.rate < 0 else "tension"
            sec["rate"] = str(abs(p.rate))
            cp[f"program:{name}"] = sec
        cp["calibrate"] = {"curves": ", ".join(str(c) for c in self.curves),
                           **{f.name: str(getattr(self.method, f.name)) for f in fields(self.method)}}
        cp["ply"] = {**{f.name: str(getattr(self.ply, f.name)) for f in fields(self.ply)},
                     "snapshots": ", ".join(repr(s) for s in self.snapshots)}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)


def parse_config(path=None, text=None) -> RunConfig:
    """Read a config file (or ``text``) into a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, bad values, wrong units,
        or a config file that cannot be read.
    """
    cfg = RunConfig()
    base = Path(".")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        if path is not None:
            path = Path(path)
            cfg.source = path
            base = path.parent
            text = path.read_text()
        cp.read_string(text or "")
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None

    def resolve(p):
        p = Path(p.strip())
        return p if p.is_absolute() else base / p

    for sec in cp.sections():
        where = f"[{sec}]"
        s = cp[sec]
        if sec == "run":
            for k, v in s.items():
                if k == "units":
                    if v.strip() != UNITS:
                        raise ConfigError(f"{where}: units must be {UNITS}, got {v!r}")
                elif k == "material":
                    cfg.material = resolve(v)
                elif k == "spectrum":
                    cfg.spectrum = "single" if v.strip() == "single" else str(resolve(v))
                elif k == "out":
                    cfg.out = resolve(v)
                else:
                    raise ConfigError(f"{where}: unknown key {k!r}")
        elif sec == "solver":
            cfg.settings = _build(SolverSettings, s.items(), where)
        elif sec.startswith("program:"):
            name = sec.split(":", 1)[1].strip()
            if not name:
                raise ConfigError(f"{where}: program name missing")
            cfg.programs[name] = _program(name, s, where)
        elif sec == "calibrate":
            cfg.curves = [resolve(c) for c in s.get("curves", "").split(",") if c.strip()]
            cfg.method = _build(YieldMethod, s.items(), where, skip=("curves",))
        elif sec == "ply":
            if "snapshots" in s:
                cfg.snapshots = _floats(s["snapshots"], where)
            cfg.ply = _build(PlyProblem, s.items(), where, skip=("snapshots",))
        else:
            raise ConfigError(f"unknown section [{sec}]")
    return cfg
