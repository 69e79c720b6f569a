"""INI run configuration with typed validation.

Each subcommand declares the sections it reads.  Unknown sections or keys
are rejected, and a missing required key is reported as ``section.key``.
"""

import configparser
from dataclasses import dataclass, field
import io
from typing import Any, Callable, Dict, Optional, Tuple

from .covariance import OuModelSpec
from .errors import ConfigError, ParameterDomainError
from .noise import Family, NoiseSpec, parse_family
from .rng import check_seed

REQUIRED = object()


def _int(text):
    return int(text.strip())


def _float(text):
    return float(text.strip())


def _str(text):
    return text.strip()


def _int_list(text):
    return [int(x) for x in text.replace(",", " ").split()]


def _float_list(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _str_list(text):
    return [x for x in text.replace(",", " ").split()]


def _seed(text):
    return check_seed(int(text.strip(), 0))


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


Key = Tuple[Callable[[str], Any], Any]

MODEL: Dict[str, Key] = {"theta": (_float, REQUIRED), "h": (_float, REQUIRED), "n": (_int, REQUIRED)}
NOISE: Dict[str, Key] = {
    "family": (_str, REQUIRED),
    "hurst": (_float, None),
    "hprime": (_float, None),
    "k": (_float, None),
    "a": (_float, None),
    "b": (_float, None),
}
RUN: Dict[str, Key] = {"seed": (_seed, 0), "workers": (_int, None), "out": (_str, None)}
TOLERANCE: Dict[str, Key] = {"sigma_b_sq": (_float, 1e-10)}
MONTECARLO: Dict[str, Key] = {
    "replicates": (_int, REQUIRED),
    "ns": (_int_list, None),
    "method": (_str, "cholesky_exact"),
    "substeps": (_int, 128),
}

SCHEMAS: Dict[str, Dict[str, Dict[str, Key]]] = {
    "simulate": {"model": MODEL, "noise": NOISE, "run": RUN,
                 "simulate": {"count": (_int, 1), "method": (_str, "cholesky_exact"),
                              "substeps": (_int, 128)}},
    "estimate": {"model": MODEL, "noise": NOISE, "run": RUN,
                 "estimate": {"count": (_int, 1), "method": (_str, "cholesky_exact"),
                              "substeps": (_int, 128), "paths": (_str, None)}},
    "cumulants": {"model": MODEL, "noise": NOISE, "run": RUN, "tolerance": TOLERANCE,
                  "cumulants": {"ns": (_int_list, REQUIRED), "mc_replicates": (_int, 0)}},
    "kolmogorov": {"model": MODEL, "noise": NOISE, "run": RUN, "tolerance": TOLERANCE,
                   "montecarlo": MONTECARLO},
    "rate-sweep": {"model": MODEL, "noise": NOISE, "run": RUN, "tolerance": TOLERANCE,
                   "montecarlo": MONTECARLO},
    "bound-audit": {"run": RUN,
                    "audit": {"names": (_str_list, None), "extents": (_float_list, [50.0, 100.0])}},
    "kernels-check": {"noise": NOISE, "run": RUN,
                      "kernels": {"grid": (_float_list, [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]),
                                  "hypothesis": (_str, None)}},
}


@dataclass
class RunConfig:
    """Parsed configuration for one subcommand."""

    command: str
    values: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def get(self, section, key, default=None):
        v = self.values.get(section, {}).get(key)
        return default if v is None else v

    def set(self, section, key, value):
        self.values.setdefault(section, {})[key] = value

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for section, keys in self.values.items():
            items = {k: _fmt(v) for k, v in keys.items() if v is not None}
            if items:
                cp[section] = items
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_dict(self):
        return {"command": self.command, "values": self.values}

    # -- domain objects ---------------------------------------------------

    def noise(self) -> NoiseSpec:
        sec = self.values.get("noise", {})
        try:
            fam = parse_family(sec["family"])
            if fam in (Family.BI_FBM, Family.SUB_BI_FBM):
                for key in ("hprime", "k"):
                    if sec.get(key) is None:
                        raise ConfigError(f"missing required key noise.{key} for family {fam.value}")
                ctor = NoiseSpec.bi_fbm if fam is Family.BI_FBM else NoiseSpec.sub_bi_fbm
                return ctor(sec["hprime"], sec["k"])
            if sec.get("hurst") is None:
                raise ConfigError(f"missing required key noise.hurst for family {fam.value}")
            if fam is Family.GENERALIZED_FBM:
                for key in ("a", "b"):
                    if sec.get(key) is None:
                        raise ConfigError(f"missing required key noise.{key} for family {fam.value}")
                return NoiseSpec.generalized_fbm(sec["hurst"], sec["a"], sec["b"])
            return NoiseSpec.fbm(sec["hurst"]) if fam is Family.FBM else NoiseSpec.sub_fbm(sec["hurst"])
        except ParameterDomainError as exc:
            raise ConfigError(f"invalid [noise] section: {exc}") from exc

    def model(self) -> OuModelSpec:
        sec = self.values["model"]
        try:
            return OuModelSpec(sec["theta"], sec["h"], sec["n"], self.noise())
        except ParameterDomainError as exc:
            raise ConfigError(f"invalid [model] section: {exc}") from exc


def parse_config(text: str, command: str, source: str = "<config>") -> RunConfig:
    if command not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {command!r}")
    schema = SCHEMAS[command]
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed config: {exc}") from exc
    for section in cp.sections():
        if section not in schema:
            raise ConfigError(f"{source}: unknown section [{section}] for {command}")
        for key in cp[section]:
            if key not in schema[section]:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
    values: Dict[str, Dict[str, Any]] = {}
    for section, keys in schema.items():
        present = cp.has_section(section)
        out = {}
        for key, (conv, default) in keys.items():
            if present and key in cp[section]:
                raw = cp[section][key]
                try:
                    out[key] = conv(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{source}: bad value for {section}.{key}: {raw!r} ({exc})") from exc
            elif default is REQUIRED:
                raise ConfigError(f"{source}: missing required key {section}.{key}")
            else:
                out[key] = list(default) if isinstance(default, list) else default
        values[section] = out
    cfg = RunConfig(command, values)
    if "noise" in schema:
        cfg.noise()
    if "model" in schema:
        cfg.model()
    return cfg


def load_config(path: Optional[str], command: str) -> RunConfig:
    if path is None:
        return parse_config("", command, "<empty>")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, command, path)
