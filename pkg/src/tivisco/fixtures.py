"""Shipped material tables and reference curves."""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .hyperelastic import ElasticConstants
from .material import MaterialParams, PlasticParams, RelaxationSpectrum


def data_path(name) -> Path:
    return Path(str(resources.files("tivisco") / "data" / name))


def _float(section, key, path):
    try:
        return section.getfloat(key)
    except (ValueError, TypeError):
        raise ConfigError(f"{path}: [{section.name}] {key} is not a number") from None


def load_material(path=None, spectrum=None, single_mode=False) -> MaterialParams:
    """Material from an ini file with ``[elastic]`` and ``[plastic]`` sections.

    ``spectrum`` is a ``mode,m,eta0`` CSV path; by default the shipped
    24-mode spectrum is used, or one mode with ``eta0`` when ``single_mode``.
    """
    path = Path(path) if path else data_path("material.ini")
    cp = configparser.ConfigParser()
    try:
        cp.read_string(path.read_text())
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        el, pl = cp["elastic"], cp["plastic"]
        elastic = ElasticConstants(*(_float(el, k, path) for k in ("E11", "E22", "G12", "nu21")))
        plastic = PlasticParams(*(_float(pl, k, path) for k in ("mu_p", "sigma0", "eta0", "alpha2")))
    except KeyError as exc:
        raise ConfigError(f"{path}: missing {exc}") from None
    if any(v is None for v in (*vars(elastic).values(), *vars(plastic).values())):
        raise ConfigError(f"{path}: incomplete material definition")
    if single_mode:
        spectrum = RelaxationSpectrum.single(plastic.eta0)
    else:
        spectrum = RelaxationSpectrum.from_csv(spectrum or data_path("spectrum.csv"))
    return MaterialParams(elastic, plastic, spectrum)


def load_curve(name):
    """Two or more numeric columns of a shipped CSV as a dict of arrays."""
    path = data_path(name)
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {k: np.atleast_1d(data[k]) for k in data.dtype.names}
