"""Experiment configuration: flat ``key = value`` files with env overrides.

Complex numbers are written ``re+imi`` (``1.5-0.2i``, ``2i``, ``-1``);
per-mode values are comma separated. ``monomial`` may repeat. Every key can
be overridden by an environment variable ``CSENTANGLE_<KEY>``.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

ENV_PREFIX = "CSENTANGLE_"

# key -> (help text, default as text or None)
KEYS = {
    "model": ("harmonic | kerr | custom; kerr-purity always uses kerr", "harmonic"),
    "hbar": ("Planck constant, positive real", "1.0"),
    "omega": ("harmonic frequency", "1.0"),
    "omega_x": ("Kerr pair frequency of mode x", "1.0"),
    "omega_y": ("Kerr pair frequency of mode y", "1.0"),
    "lambda": ("Kerr coupling (1/energy)", "0.1"),
    "n_modes": ("mode count of a custom model", "2"),
    "monomial": ("custom monomial 're, im, m_x, n_x, m_y, n_y' (repeatable; v^m u^n)", None),
    "max_degree": ("largest monomial degree accepted", "8"),
    "z0": ("initial amplitudes (z0x, z0y) of the purity runs", "1, 1"),
    "z1": ("initial coherent amplitude(s) of propagator and BVP runs", None),
    "z2": ("final coherent amplitude(s) of propagator and BVP runs", None),
    "xi": ("+1 propagator, -1 conjugate propagator", "1"),
    "T_start": ("first time of the grid", None),
    "T_stop": ("last time of the grid", None),
    "T_count": ("number of grid times (>= 1)", None),
    "T_extra": ("extra times added to the grid, comma separated", ""),
    "phase_step": ("RK4 phase advance per step, rate*h", "0.004"),
    "escape_bound": ("abort when |u| or |v| exceeds this", "1e6"),
    "max_steps": ("step cap per trajectory", "10000000"),
    "bvp_tol": ("Newton tolerance on the boundary residual", "1e-10"),
    "max_iter": ("trajectory evaluations per Newton guess", "50"),
    "guess": ("extra BVP free-end guesses, ';' between guesses", ""),
    "N_cut": ("Fock cutoff of the exact oracle; 'auto' picks tail < 1e-12 plus 5", "auto"),
    "ho_tol": ("ho-check pass threshold on |K_semi - K_exact|", "1e-10"),
    "inject_fault": ("property-suite fault injection: comma separated check names", ""),
    "out": ("output CSV path; '-' for stdout", "-"),
    "threads": ("worker threads", "1"),
    "seed": ("seed of the property-suite random draws", "0"),
}

_SCENARIO_T = {
    "ho-check": lambda c: (0.0, 4 * math.pi / c.omega, 33),
    "kerr-purity": lambda c: (0.0, 2 * math.pi / (c.lam * c.hbar * c.omega_x * c.omega_y), 65),
    "propagator": lambda c: (0.0, 2 * math.pi, 17),
    "bvp-solve": lambda c: (1.0, 1.0, 1),
    "property-suite": lambda c: (0.0, 1.0, 1),
}

_COMPLEX = re.compile(
    r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?(?:[+-](?:(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)?[ij])?$"
    r"|^[+-]?(?:(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)?[ij]$",
    re.IGNORECASE,
)


def parse_complex(text):
    """``'1.5-0.2i'`` -> ``(1.5-0.2j)``."""
    s = text.strip().replace(" ", "")
    if not _COMPLEX.match(s):
        raise ConfigError(f"not a complex number: {text!r}")
    if s[-1] in "iIjJ":
        body = s[:-1]
        if body in ("", "+", "-"):
            body += "1"
        s = body + "j"
    return complex(s)


def parse_complex_list(text):
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("empty complex list")
    return np.array([parse_complex(p) for p in parts], dtype=np.complex128)


def format_complex(z):
    z = complex(z)
    return f"{z.real:.16e}{z.imag:+.16e}i"


def parse_text(text):
    """Raw ``{key: value}`` from config text; ``monomial`` collects a list."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "monomial":
            raw.setdefault("monomial", []).append(value)
        else:
            raw[key] = value
    return raw


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    raw = {}
    for key in KEYS:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            value = environ[name]
            raw[key] = [v for v in value.split(";") if v.strip()] if key == "monomial" else value
    return raw


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    model: str = "harmonic"
    hbar: float = 1.0
    omega: float = 1.0
    omega_x: float = 1.0
    omega_y: float = 1.0
    lam: float = 0.1
    n_modes: int = 2
    monomials: tuple = ()
    max_degree: int = 8
    z0: tuple = (1 + 0j, 1 + 0j)
    z1: tuple | None = None
    z2: tuple | None = None
    xi: int = 1
    T_grid: tuple = ()
    phase_step: float = 0.004
    escape_bound: float = 1e6
    max_steps: int = 10_000_000
    bvp_tol: float = 1e-10
    max_iter: int = 50
    guesses: tuple = ()
    N_cut: int | None = None
    ho_tol: float = 1e-10
    inject_fault: tuple = ()
    out: str = "-"
    threads: int = 1
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def Gamma(self):
        return self.lam * self.hbar * self.omega_x * self.omega_y

    def evolve_kwargs(self):
        return dict(phase_step=self.phase_step, escape_bound=self.escape_bound, max_steps=self.max_steps)

    def build_model(self, kind=None):
        """``(model, kerr_or_None)`` for the configured or requested model kind."""
        from .hamiltonian import HamiltonianModel, build_harmonic, build_kerr_pair

        kind = kind or self.model
        if kind == "harmonic":
            return build_harmonic(self.omega, self.hbar), None
        if kind == "kerr":
            return build_kerr_pair(self.omega_x, self.omega_y, self.lam, self.hbar)
        if kind == "custom":
            if not self.monomials:
                raise ConfigError("a custom model needs at least one 'monomial' line")
            return HamiltonianModel.from_records(self.monomials, self.n_modes, self.hbar, self.max_degree), None
        raise ConfigError(f"unknown model {kind!r}")


def _num(raw, key, conv, default):
    text = raw.get(key, default)
    try:
        return conv(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError("not an integer")
    return int(value)


def build_config(scenario, raw):
    """Typed :class:`ExperimentConfig` from merged raw values."""
    d = {k: v[1] for k, v in KEYS.items() if v[1] is not None}
    d.update({k: v for k, v in raw.items() if k != "monomial"})
    cfg = dict(scenario=scenario)
    cfg["model"] = d["model"].strip()
    for key, name in (("hbar", "hbar"), ("omega", "omega"), ("omega_x", "omega_x"), ("omega_y", "omega_y"),
                      ("lambda", "lam"), ("phase_step", "phase_step"), ("escape_bound", "escape_bound"),
                      ("bvp_tol", "bvp_tol"), ("ho_tol", "ho_tol")):
        cfg[name] = _num(d, key, float, None)
    for key in ("n_modes", "max_degree", "max_steps", "max_iter", "threads", "seed", "xi"):
        cfg[key] = _num(d, key, _int, None)
    if cfg["xi"] not in (1, -1):
        raise ConfigError("xi must be 1 or -1")
    if cfg["hbar"] <= 0 or cfg["phase_step"] <= 0 or cfg["bvp_tol"] <= 0:
        raise ConfigError("hbar, phase_step and bvp_tol must be positive")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    mono = []
    for text in raw.get("monomial", []):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise ConfigError(f"monomial needs 6 fields: {text!r}")
        try:
            mono.append((float(parts[0]), float(parts[1]), *(_int(p) for p in parts[2:])))
        except ValueError as exc:
            raise ConfigError(f"bad monomial {text!r}") from exc
    cfg["monomials"] = tuple(mono)
    cfg["z0"] = tuple(parse_complex_list(d["z0"]))
    if len(cfg["z0"]) != 2:
        raise ConfigError("z0 needs two amplitudes")
    for key in ("z1", "z2"):
        cfg[key] = tuple(parse_complex_list(d[key])) if key in d else None
    cfg["guesses"] = tuple(tuple(parse_complex_list(g)) for g in d["guess"].split(";") if g.strip())
    n_cut = d["N_cut"].strip()
    cfg["N_cut"] = None if n_cut == "auto" else _num(d, "N_cut", _int, None)
    cfg["inject_fault"] = tuple(s.strip() for s in d["inject_fault"].split(",") if s.strip())
    cfg["out"] = d["out"]
    partial = ExperimentConfig(**cfg)
    start, stop, count = _SCENARIO_T.get(scenario, _SCENARIO_T["propagator"])(partial)
    start = _num(d, "T_start", float, start)
    stop = _num(d, "T_stop", float, stop)
    count = _num(d, "T_count", _int, count)
    extra = [float(x) for x in d["T_extra"].split(",") if x.strip()]
    return replace(partial, T_grid=time_grid(start, stop, count, extra))


def time_grid(start, stop, count, extra=()):
    """Strictly increasing grid of ``count`` times plus any extras."""
    if count < 1:
        raise ConfigError("T_count must be at least 1 (empty time grid)")
    if not (math.isfinite(start) and math.isfinite(stop)) or start < 0:
        raise ConfigError("time grid must be finite and non-negative")
    if count == 1:
        grid = np.array([start])
    else:
        if stop <= start:
            raise ConfigError("T_stop must exceed T_start")
        grid = np.linspace(start, stop, count)
    if extra:
        if any(x < 0 or not math.isfinite(x) for x in extra):
            raise ConfigError("T_extra values must be finite and non-negative")
        grid = np.unique(np.concatenate([grid, extra]))
    return tuple(float(t) for t in grid)


def load_config(scenario, path=None, cli_overrides=None, environ=None):
    """Defaults, then the file, then ``CSENTANGLE_*`` variables, then CLI flags."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw.update(parse_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    raw.update(env_overrides(environ))
    raw.update({k: v for k, v in (cli_overrides or {}).items() if v is not None})
    return build_config(scenario, raw)


def describe_keys():
    lines = ["configuration keys (file 'key = value', env CSENTANGLE_<KEY>):"]
    for key, (text, default) in KEYS.items():
        dflt = "" if default is None else f" [default: {default}]"
        lines.append(f"  {key:<13} {text}{dflt}")
    return "\n".join(lines)
