"""Run configuration: an INI file with one section per stage, values written as Python literals.

Example::

    [domain]
    kind = 'disk'

    [sample]
    h = 0.001

    [run]
    seed = 0
    out = 'out'
"""
from __future__ import annotations

import ast
import configparser
import io
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError


@dataclass
class SampleSection:
    h: float = 1e-3
    window: tuple = None  # ((x, y), radius)


@dataclass
class GridSection:
    level_s1: int = 3
    level_s2: int = 4


@dataclass
class CoeffSection:
    centers: int = 20
    R: float = 0.5
    depth: int = 7
    which: tuple = ("eps_n", "a")
    anchor: tuple = None  # centres are sample points in B(anchor, R); None -> nearest to the bbox centre


@dataclass
class LatticeSection:
    j_max: int = 7  # needs 2^-j_max >= 4 h


@dataclass
class CoronaSection:
    k1: float = 24.0
    eps: float = 0.01
    delta: float = 0.1
    depth: int = 4
    root: tuple = (0.0, 0.0)
    root_gen: int = 3


@dataclass
class CarlesonSection:
    ball: tuple = None  # ((x, y), radius); None -> per-domain default
    depth: int = 10
    centers: int = 256
    grid_level: int = 4
    pow_eps_n: float = 2.0
    pow_a: float = 1.0


@dataclass
class WosSection:
    eps_stop: float = 2e-3
    walks: int = 100_000
    max_steps: int = 5000
    side: int = 1
    pole: tuple = None  # None -> point of the side farthest from the sample among a coarse grid
    probe: tuple = None  # centre of the density profile; None -> nearest to the bbox centre
    radii: tuple = (0.05, 0.1, 0.2)


@dataclass
class AcfSection:
    field: str = "cone"
    gamma: float = 0.2
    r_min: float = 0.1
    r_max: float = 1.0
    steps: int = 21
    quad_level: int = 2


@dataclass
class RunSection:
    seed: int = 0
    threads: int = 1
    out: str = "out"


_SECTIONS = {
    "sample": SampleSection,
    "grid": GridSection,
    "coeff": CoeffSection,
    "lattice": LatticeSection,
    "corona": CoronaSection,
    "carleson": CarlesonSection,
    "wos": WosSection,
    "acf": AcfSection,
    "run": RunSection,
}


@dataclass
class RunConfig:
    domain: dict = field(default_factory=lambda: {"kind": "halfspace"})
    sample: SampleSection = field(default_factory=SampleSection)
    grid: GridSection = field(default_factory=GridSection)
    coeff: CoeffSection = field(default_factory=CoeffSection)
    lattice: LatticeSection = field(default_factory=LatticeSection)
    corona: CoronaSection = field(default_factory=CoronaSection)
    carleson: CarlesonSection = field(default_factory=CarlesonSection)
    wos: WosSection = field(default_factory=WosSection)
    acf: AcfSection = field(default_factory=AcfSection)
    run: RunSection = field(default_factory=RunSection)

    def validate(self, command=None):
        """Range checks on every parameter; raises ConfigError before any computation.

        Cross-section constraints are only enforced for the commands that use them.
        """
        d = self.domain
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("[domain] needs a kind")
        _check(self.sample.h > 0, "sample.h must be positive")
        _check(self.sample.window is None or (len(self.sample.window) == 2 and self.sample.window[1] > 0),
               "sample.window must be ((x, ...), radius > 0)")
        _check(0 <= self.grid.level_s1 <= 10, "grid.level_s1 in [0, 10]")
        _check(0 <= self.grid.level_s2 <= 7, "grid.level_s2 in [0, 7]")
        c = self.coeff
        _check(c.centers >= 1 and c.R > 0 and c.depth >= 0, "coeff: centers >= 1, R > 0, depth >= 0")
        _check(set(c.which) <= {"eps_n", "a", "beta2c_sq", "beta2_sq", "bbeta"} and len(c.which) > 0,
               "coeff.which: unknown coefficient")
        _check(self.lattice.j_max >= 0, "lattice.j_max must be >= 0")
        if command in (None, "lattice", "corona"):
            _check(2.0 ** -self.lattice.j_max >= 4 * self.sample.h,
                   "lattice.j_max too deep: need 2^-j_max >= 4 sample.h")
        k = self.corona
        _check(k.k1 > 20, "corona.k1 must exceed 20")
        _check(0 < k.eps < k.delta < 1, "corona: need 0 < eps < delta < 1")
        _check(k.depth >= 0, "corona.depth must be >= 0")
        b = self.carleson
        _check(b.depth >= 6, "carleson.depth must be >= 6")
        _check(b.centers >= 1 and b.pow_eps_n > 0 and b.pow_a > 0, "carleson: centers >= 1, powers > 0")
        _check(b.ball is None or (len(b.ball) == 2 and b.ball[1] > 0), "carleson.ball must be ((x, ...), r > 0)")
        w = self.wos
        if command in (None, "wos"):
            _check(w.eps_stop >= 2 * self.sample.h, "wos.eps_stop must be >= 2 sample.h")
        _check(w.walks >= 1000 and w.max_steps >= 1, "wos: walks >= 1000, max_steps >= 1")
        _check(w.side in (1, 2), "wos.side must be 1 or 2")
        _check(len(w.radii) > 0 and all(r > 0 for r in w.radii), "wos.radii must be positive")
        a = self.acf
        _check(a.field in ("halfspace", "cone"), "acf.field must be halfspace or cone")
        _check(0 < a.r_min < a.r_max and a.steps >= 3, "acf: 0 < r_min < r_max, steps >= 3")
        _check(self.run.threads >= 1, "run.threads must be >= 1")
        return self


def _check(ok, msg):
    if not ok:
        raise ConfigError(msg)


def _literal(section, key, text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"[{section}] {key}: not a literal: {text!r}") from exc


def _coerce(section, key, value, default):
    if isinstance(default, bool) or default is None:
        return value
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, tuple) and isinstance(value, list):
        return tuple(value)
    if type(default) is not type(value) and not (isinstance(default, tuple) and isinstance(value, tuple)):
        raise ConfigError(f"[{section}] {key}: expected {type(default).__name__}, got {type(value).__name__}")
    return value


def loads(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = RunConfig()
    for name in parser.sections():
        items = {k: _literal(name, k, v) for k, v in parser.items(name)}
        if name == "domain":
            cfg.domain = items
            continue
        cls = _SECTIONS.get(name)
        if cls is None:
            raise ConfigError(f"unknown section [{name}]")
        sec = getattr(cfg, name)
        known = {f.name: f for f in fields(cls)}
        for k, v in items.items():
            if k not in known:
                raise ConfigError(f"unknown key {name}.{k}")
            setattr(sec, k, _coerce(name, k, v, getattr(cls(), k)))
    return cfg


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dumps(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["domain"] = {k: repr(v) for k, v in cfg.domain.items()}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        parser[name] = {f.name: repr(getattr(sec, f.name)) for f in fields(sec)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def resolve_threads(cli_value=None, cfg=None):
    """--threads, then FLATGAUGE_THREADS, then the config value."""
    if cli_value is not None:
        n = cli_value
    elif os.environ.get("FLATGAUGE_THREADS"):
        try:
            n = int(os.environ["FLATGAUGE_THREADS"])
        except ValueError as exc:
            raise ConfigError("FLATGAUGE_THREADS must be an integer") from exc
    else:
        n = cfg.run.threads if cfg is not None else 1
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n
