"""Run configuration: strict INI-style key-value parsing with schema validation."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from . import flow_state, geometry
from .errors import ConfigError

__all__ = ["RunConfig", "load_config"]

_SCHEMA = {
    "problem": {"gamma", "Q", "epsilon", "barH", "nozzle", "nozzle_amplitude",
                "ubar", "ubar_ext_width"},
    "numerics": {"mu", "R", "h", "s_exp", "k_mu", "delta_stages", "c_delta",
                 "mode", "tol_energy_rel", "tol_residual", "seed",
                 "coarse_levels", "max_iter", "max_rounds", "gs_sweeps",
                 "workers", "strict_qualitative", "monotone_projection"},
    "fit": {"bracket_lo", "bracket_hi", "lambda_tol", "tol", "prefit",
            "eval_tol_factor"},
    "output": {"directory", "reproducible_sum"},
}

_DEFAULTS = {
    "problem": {"nozzle": "log", "nozzle_amplitude": "1.0", "ubar": "constant:1.0",
                "ubar_ext_width": ""},
    "numerics": {"s_exp": "1.75", "k_mu": "auto", "delta_stages": "3",
                 "c_delta": "1.0", "mode": "minimize", "tol_energy_rel": "1e-10",
                 "tol_residual": "1e-10", "seed": "0", "coarse_levels": "2",
                 "max_iter": "2000", "max_rounds": "40", "gs_sweeps": "12",
                 "workers": "1", "strict_qualitative": "true",
                 "monotone_projection": "false"},
    "fit": {"bracket_lo": "", "bracket_hi": "", "lambda_tol": "", "tol": "",
            "prefit": "true", "eval_tol_factor": "100"},
    "output": {"directory": "out", "reproducible_sum": "false"},
}


@dataclass
class RunConfig:
    gamma: float
    Q: float
    epsilon: float
    barH: float
    nozzle_spec: str
    nozzle_amplitude: float
    ubar_spec: str
    ubar_ext_width: float | None
    mu: float
    R: float
    h: float
    s_exp: float
    k_mu: float | None
    delta_stages: int
    c_delta: float
    mode: str
    tol_energy_rel: float
    tol_residual: float
    seed: int
    coarse_levels: int
    max_iter: int
    max_rounds: int
    gs_sweeps: int
    workers: int
    strict_qualitative: bool
    monotone_projection: bool
    bracket: tuple | None
    lambda_tol: float | None
    fit_tol: float | None
    prefit: bool
    eval_tol_factor: float
    out_dir: str
    reproducible_sum: bool
    raw: dict = field(default_factory=dict)

    # -- factories -----------------------------------------------------------

    def make_profile(self):
        spec = self.ubar_spec
        kind, _, arg = spec.partition(":")
        if kind == "constant":
            return flow_state.UpstreamProfile.constant(float(arg or 1.0), self.barH)
        if kind == "poly":
            coeffs = [float(c) for c in arg.split(",")]
            return flow_state.UpstreamProfile.polynomial(coeffs, self.barH)
        if kind == "table":
            data = np.loadtxt(arg)
            return flow_state.UpstreamProfile.from_samples(
                data[:, 0], data[:, 1], ext_width=self.ubar_ext_width)
        raise ConfigError("unknown ubar spec %r (constant:|poly:|table:)" % spec)

    def make_nozzle(self):
        spec = self.nozzle_spec
        if spec == "log":
            return geometry.NozzleGeometry.log(self.barH, self.nozzle_amplitude)
        kind, _, arg = spec.partition(":")
        if kind == "table":
            data = np.loadtxt(arg)
            return geometry.NozzleGeometry.from_samples(data[:, 0], data[:, 1])
        raise ConfigError("unknown nozzle spec %r (log or table:path)" % spec)

    def make_gas(self):
        profile = self.make_profile()
        return flow_state.make_gas_model(profile, self.Q, self.gamma, self.epsilon)

    def make_grid(self, gas=None):
        grid = geometry.build_domain(self.make_nozzle(), self.mu, self.R, self.h,
                                     s_exp=self.s_exp, k_mu=self.k_mu, Q=self.Q)
        return grid

    def solver_config(self, progress=None):
        from .solver import SolverConfig
        return SolverConfig(
            mode=self.mode, max_iter=self.max_iter, max_rounds=self.max_rounds,
            gs_sweeps=self.gs_sweeps, tol_energy_rel=self.tol_energy_rel,
            tol_residual=self.tol_residual, c_delta=self.c_delta,
            delta_stages=self.delta_stages, coarse_levels=self.coarse_levels,
            seed=self.seed, ordered_sum=self.reproducible_sum,
            strict_qualitative=self.strict_qualitative,
            monotone_projection=self.monotone_projection, progress=progress)


def _get(parser, section, key):
    try:
        return parser.get(section, key)
    except (configparser.NoSectionError, configparser.NoOptionError):
        return _DEFAULTS.get(section, {}).get(key)


def load_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ConfigError("cannot read config file %r" % path)
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError("unknown config section %r" % section)
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key %r in section [%s]" % (key, section))
    for key in ("gamma", "Q", "epsilon", "barH"):
        if _get(parser, "problem", key) is None:
            raise ConfigError("missing required key problem.%s" % key)
    for key in ("mu", "R", "h"):
        if _get(parser, "numerics", key) is None:
            raise ConfigError("missing required key numerics.%s" % key)

    def fget(sec, key, cast=float):
        v = _get(parser, sec, key)
        if v is None or v == "":
            return None
        try:
            return cast(v)
        except ValueError as exc:
            raise ConfigError("bad value for %s.%s: %r" % (sec, key, v)) from exc

    def bget(sec, key):
        v = (_get(parser, sec, key) or "false").strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError("bad boolean for %s.%s: %r" % (sec, key, v))

    gamma = fget("problem", "gamma")
    if not gamma > 1.0:
        raise ConfigError("gamma must exceed 1 (got %g)" % gamma)
    Q = fget("problem", "Q")
    if not Q > 0.0:
        raise ConfigError("Q must be positive")
    epsilon = fget("problem", "epsilon")
    if not 0.0 < epsilon < 0.25:
        raise ConfigError("epsilon must lie in (0, 1/4)")
    barH = fget("problem", "barH")
    if not barH > 1.0:
        raise ConfigError("barH must exceed 1")

    k_mu_raw = _get(parser, "numerics", "k_mu")
    k_mu = None if k_mu_raw in (None, "", "auto") else float(k_mu_raw)
    lo = fget("fit", "bracket_lo")
    hi = fget("fit", "bracket_hi")
    bracket = (lo, hi) if lo is not None and hi is not None else None

    mode = _get(parser, "numerics", "mode")
    if mode not in ("minimize", "pde-fixed-point"):
        raise ConfigError("numerics.mode must be minimize or pde-fixed-point")

    cfg = RunConfig(
        gamma=gamma, Q=Q, epsilon=epsilon, barH=barH,
        nozzle_spec=_get(parser, "problem", "nozzle"),
        nozzle_amplitude=fget("problem", "nozzle_amplitude") or 1.0,
        ubar_spec=_get(parser, "problem", "ubar"),
        ubar_ext_width=fget("problem", "ubar_ext_width"),
        mu=fget("numerics", "mu"), R=fget("numerics", "R"), h=fget("numerics", "h"),
        s_exp=fget("numerics", "s_exp"), k_mu=k_mu,
        delta_stages=fget("numerics", "delta_stages", int),
        c_delta=fget("numerics", "c_delta"),
        mode=mode,
        tol_energy_rel=fget("numerics", "tol_energy_rel"),
        tol_residual=fget("numerics", "tol_residual"),
        seed=fget("numerics", "seed", int),
        coarse_levels=fget("numerics", "coarse_levels", int),
        max_iter=fget("numerics", "max_iter", int),
        max_rounds=fget("numerics", "max_rounds", int),
        gs_sweeps=fget("numerics", "gs_sweeps", int),
        workers=fget("numerics", "workers", int),
        strict_qualitative=bget("numerics", "strict_qualitative"),
        monotone_projection=bget("numerics", "monotone_projection"),
        bracket=bracket,
        lambda_tol=fget("fit", "lambda_tol"),
        fit_tol=fget("fit", "tol"),
        prefit=bget("fit", "prefit"),
        eval_tol_factor=fget("fit", "eval_tol_factor"),
        out_dir=_get(parser, "output", "directory"),
        reproducible_sum=bget("output", "reproducible_sum"),
        raw={s: dict(parser.items(s)) for s in parser.sections()},
    )
    # environment override for the worker count (the cell kernels run
    # single-threaded; the key is honored for orchestration and echoed)
    env_workers = os.environ.get("JETFB_WORKERS")
    if env_workers:
        try:
            cfg.workers = int(env_workers)
        except ValueError as exc:
            raise ConfigError("bad JETFB_WORKERS value %r" % env_workers) from exc
    return cfg
