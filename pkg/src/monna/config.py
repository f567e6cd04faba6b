"""Experiment configuration: flat text format, validation, resolution.

The config file is flat INI-style text (human-diffable; experiment diffs
stay reviewable). Unknown sections or keys are errors, never silently
ignored, and every violation is reported with its field path. "theoretical"
gamma/beta are expanded from the regime's closed-form schedule at parse
time, so code downstream only ever sees resolved numbers.
"""

import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .attacks import ATTACK_KINDS, DEFAULT_ZETA_GRID
from .errors import ConfigError
from .network import POLICIES
from .node import Schedule, theoretical_schedule, wide_regime_schedule
from .objectives import (
    analytic_minimum,
    global_value,
    logistic_family,
    numeric_minimum,
    quadratic_family,
)
from .reduction import bound_five_f

REGIMES = ("auto", "eleven_f", "five_f", "none")
RULES = ("nna", "mean", "cwtm", "gm")
OBJECTIVE_KINDS = ("quadratic", "logistic")
NOISE_KINDS = ("gaussian", "uniform_ball")


@dataclass(frozen=True)
class SystemConfig:
    """Fully validated experiment description."""

    n: int = 16
    f: int = 3
    dim: int = 10
    regime: str = "auto"
    delta: float = 1.0 / 3.0

    obj_kind: str = "quadratic"
    lipschitz: float = 1.0
    sigma: float = 1.0
    zeta: float = 0.0
    noise_dist: str = "gaussian"
    condition: float = 4.0
    center_scale: float = 2.0
    dirichlet_alpha: float = 5.0
    profile_seed: int = 0

    gamma_spec: str = "theoretical"
    beta_spec: str = "theoretical"
    rounds_spec: str = "auto"
    iterations: int = 1000
    theta0_fill: float = 0.0

    attack_kind: str = "none"
    zeta_grid: tuple = DEFAULT_ZETA_GRID

    policy: str = "faulty_first"
    seb: bool = True

    rule: str = "nna"
    seeds: tuple = (1, 2, 3, 4, 5)
    output_dir: str = "out"

    check_invariants: bool = True
    schedule: Schedule = None  # resolved at construction

    @property
    def theta0(self):
        return np.full(self.dim, self.theta0_fill)

    @property
    def rounds(self):
        return self.schedule.rounds

    @property
    def attack(self):
        from .attacks import AttackSpec

        return AttackSpec(kind=self.attack_kind, zeta_grid=self.zeta_grid)

    def resolved_regime(self):
        if self.regime != "auto":
            return self.regime
        if self.f == 0 or self.n >= 11 * self.f:
            return "eleven_f"
        if self.n > 5 * self.f:
            return "five_f"
        return "none"

    def build_objectives(self):
        """Correct-node objectives; fixed across run seeds via profile_seed."""
        m = self.n - self.f
        rng = rngmod.stream(self.profile_seed, rngmod.PROFILE)
        if self.obj_kind == "quadratic":
            center = np.full(self.dim, self.center_scale / np.sqrt(self.dim))
            return quadratic_family(
                m, self.dim, self.lipschitz, self.zeta, rng,
                mean_center=center, condition=self.condition,
            )
        return logistic_family(m, self.dim, self.dirichlet_alpha, rng)

    def replaced(self, rule=None, beta=None, attack_kind=None, **kw):
        """Derived config for ablation cells; explicit beta pins the schedule."""
        changes = dict(kw)
        if rule is not None:
            changes["rule"] = rule
        if attack_kind is not None:
            changes["attack_kind"] = attack_kind
        if beta is not None:
            changes["beta_spec"] = repr(float(beta))
            changes["gamma_spec"] = repr(self.schedule.gamma)
        cfg = replace(self, schedule=None, **changes)
        return _resolve(cfg)


# ---------------------------------------------------------------------------
# Parsing and validation

_SCHEMA = {
    "system": ("n", "f", "dim", "regime", "delta"),
    "objective": (
        "kind", "lipschitz", "sigma", "zeta", "noise", "condition",
        "center_scale", "dirichlet_alpha", "profile_seed",
    ),
    "schedule": ("gamma", "beta", "rounds", "iterations", "theta0"),
    "attack": ("kind", "zeta_grid"),
    "network": ("policy", "seb"),
    "run": ("rule", "seeds", "output_dir"),
}


def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _get(parser, section, key, cast, default, path):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    try:
        return cast(raw)
    except ConfigError:
        raise
    except Exception as exc:
        _fail(path, f"cannot parse {raw!r} ({exc})")


def parse_seeds(raw):
    raw = raw.strip()
    if ".." in raw:
        lo, hi = raw.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError("descending seed range")
        return tuple(range(lo, hi + 1))
    return tuple(int(tok) for tok in raw.split(",") if tok.strip())


def _parse_bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_text(text):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            _fail(section, "unknown section")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                _fail(f"{section}.{key}", "unknown key")

    cfg = SystemConfig(
        n=_get(parser, "system", "n", int, 16, "system.n"),
        f=_get(parser, "system", "f", int, 3, "system.f"),
        dim=_get(parser, "system", "dim", int, 10, "system.dim"),
        regime=_get(parser, "system", "regime", str, "auto", "system.regime"),
        delta=_get(parser, "system", "delta", float, 1.0 / 3.0, "system.delta"),
        obj_kind=_get(parser, "objective", "kind", str, "quadratic", "objective.kind"),
        lipschitz=_get(parser, "objective", "lipschitz", float, 1.0, "objective.lipschitz"),
        sigma=_get(parser, "objective", "sigma", float, 1.0, "objective.sigma"),
        zeta=_get(parser, "objective", "zeta", float, 0.0, "objective.zeta"),
        noise_dist=_get(parser, "objective", "noise", str, "gaussian", "objective.noise"),
        condition=_get(parser, "objective", "condition", float, 4.0, "objective.condition"),
        center_scale=_get(parser, "objective", "center_scale", float, 2.0,
                          "objective.center_scale"),
        dirichlet_alpha=_get(parser, "objective", "dirichlet_alpha", float, 5.0,
                             "objective.dirichlet_alpha"),
        profile_seed=_get(parser, "objective", "profile_seed", int, 0,
                          "objective.profile_seed"),
        gamma_spec=_get(parser, "schedule", "gamma", str, "theoretical", "schedule.gamma"),
        beta_spec=_get(parser, "schedule", "beta", str, "theoretical", "schedule.beta"),
        rounds_spec=_get(parser, "schedule", "rounds", str, "auto", "schedule.rounds"),
        iterations=_get(parser, "schedule", "iterations", int, 1000, "schedule.iterations"),
        theta0_fill=_get(parser, "schedule", "theta0", float, 0.0, "schedule.theta0"),
        attack_kind=_get(parser, "attack", "kind", str, "none", "attack.kind"),
        zeta_grid=_get(
            parser, "attack", "zeta_grid",
            lambda raw: tuple(float(tok) for tok in raw.split(",") if tok.strip()),
            DEFAULT_ZETA_GRID, "attack.zeta_grid",
        ),
        policy=_get(parser, "network", "policy", str, "faulty_first", "network.policy"),
        seb=_get(parser, "network", "seb", _parse_bool, True, "network.seb"),
        rule=_get(parser, "run", "rule", str, "nna", "run.rule"),
        seeds=_get(parser, "run", "seeds", parse_seeds, (1, 2, 3, 4, 5), "run.seeds"),
        output_dir=_get(parser, "run", "output_dir", str, "out", "run.output_dir"),
        schedule=None,
    )
    return _resolve(cfg)


def _resolve(cfg):
    _validate_static(cfg)
    schedule = _resolve_schedule(cfg)
    return replace(cfg, schedule=schedule)


def _validate_static(cfg):
    if cfg.f < 0:
        _fail("system.f", "must be >= 0")
    if cfg.n <= cfg.f:
        _fail("system.n", f"need n > f (n={cfg.n}, f={cfg.f})")
    if cfg.dim < 1:
        _fail("system.dim", "must be >= 1")
    if cfg.iterations < 0:
        _fail("schedule.iterations", "must be >= 0")
    if cfg.regime not in REGIMES:
        _fail("system.regime", f"must be one of {REGIMES}")
    if cfg.delta <= 0:
        _fail("system.delta", "must be > 0")
    if cfg.obj_kind not in OBJECTIVE_KINDS:
        _fail("objective.kind", f"must be one of {OBJECTIVE_KINDS}")
    if cfg.noise_dist not in NOISE_KINDS:
        _fail("objective.noise", f"must be one of {NOISE_KINDS}")
    if cfg.sigma < 0:
        _fail("objective.sigma", "must be >= 0")
    if cfg.zeta < 0:
        _fail("objective.zeta", "must be >= 0")
    if cfg.lipschitz <= 0:
        _fail("objective.lipschitz", "must be > 0")
    if cfg.attack_kind not in ATTACK_KINDS or cfg.attack_kind == "custom":
        _fail("attack.kind", f"must be one of {tuple(k for k in ATTACK_KINDS if k != 'custom')}")
    if cfg.policy not in POLICIES:
        _fail("network.policy", f"must be one of {POLICIES}")
    if cfg.rule not in RULES:
        _fail("run.rule", f"must be one of {RULES}")
    if not cfg.seeds:
        _fail("run.seeds", "need at least one seed")
    if cfg.seb and cfg.n <= 3 * cfg.f:
        _fail("network.seb", f"echo broadcast needs n > 3f (n={cfg.n}, f={cfg.f})")

    regime = cfg.regime
    if regime == "eleven_f" and cfg.n < 11 * cfg.f:
        _fail(
            "system.regime",
            f"eleven_f requires n >= 11f (n={cfg.n} < {11 * cfg.f}); "
            f"five_f would require n >= (5+delta)f = {(5 + cfg.delta) * cfg.f:g}",
        )
    if regime == "five_f" and cfg.n < (5 + cfg.delta) * cfg.f:
        _fail(
            "system.regime",
            f"five_f requires n >= (5+delta)f = {(5 + cfg.delta) * cfg.f:g} (n={cfg.n}); "
            f"eleven_f would require n >= 11f = {11 * cfg.f}",
        )

    theoretical = ("theoretical" in (cfg.gamma_spec, cfg.beta_spec))
    if theoretical and (cfg.gamma_spec != cfg.beta_spec):
        _fail(
            "schedule.gamma",
            "gamma and beta must come from one source: both 'theoretical' or both numeric",
        )
    if (theoretical or cfg.rounds_spec == "auto") and cfg.resolved_regime() == "none":
        _fail(
            "system.regime",
            f"no regime fits n={cfg.n}, f={cfg.f} "
            f"(eleven_f needs n >= {11 * cfg.f}, five_f needs n > {5 * cfg.f}); "
            "theoretical schedules and rounds=auto need one",
        )


def _initial_gap(cfg, objectives):
    if cfg.obj_kind == "quadratic":
        _, q_star = analytic_minimum(objectives)
    else:
        _, q_star = numeric_minimum(objectives)
    return global_value(objectives, cfg.theta0) - q_star


def _resolve_schedule(cfg):
    regime = cfg.resolved_regime()
    if cfg.gamma_spec == "theoretical":
        objectives = cfg.build_objectives()
        lip = max(o.lipschitz for o in objectives)
        gap = _initial_gap(cfg, objectives)
        if regime == "eleven_f":
            sched, _ = theoretical_schedule(
                lip, max(cfg.iterations, 1), cfg.sigma, cfg.n, cfg.f, gap
            )
        else:
            sched, _ = wide_regime_schedule(
                lip, max(cfg.iterations, 1), cfg.sigma, cfg.n, cfg.f, cfg.delta, gap
            )
        gamma, beta, rounds = sched.gamma, sched.beta, sched.rounds
    else:
        try:
            gamma = float(cfg.gamma_spec)
            beta = float(cfg.beta_spec)
        except ValueError:
            _fail("schedule.gamma", f"numeric or 'theoretical', got {cfg.gamma_spec!r}")
        rounds = None

    if cfg.rounds_spec == "auto":
        if rounds is None:
            if regime == "eleven_f":
                rounds = 1
            else:
                _, rounds = bound_five_f(cfg.n, cfg.f, cfg.delta)
    else:
        try:
            rounds = int(cfg.rounds_spec)
        except ValueError:
            _fail("schedule.rounds", f"integer or 'auto', got {cfg.rounds_spec!r}")
    if rounds < 1:
        _fail("schedule.rounds", "must be >= 1")
    if not 0.0 <= beta < 1.0:
        _fail("schedule.beta", f"must be in [0, 1), got {beta}")
    if gamma < 0:
        _fail("schedule.gamma", "must be >= 0")
    return Schedule(gamma=gamma, beta=beta, rounds=rounds, iterations=cfg.iterations)


def parse_and_validate(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc
    return parse_text(text)


def emit_text(cfg):
    """Serialize back to the flat text format; parse_text round-trips it."""
    grid = ",".join(repr(float(z)) for z in cfg.zeta_grid)
    seeds = ",".join(str(s) for s in cfg.seeds)
    out = io.StringIO()
    out.write(
        "[system]\n"
        f"n = {cfg.n}\nf = {cfg.f}\ndim = {cfg.dim}\n"
        f"regime = {cfg.regime}\ndelta = {cfg.delta!r}\n\n"
        "[objective]\n"
        f"kind = {cfg.obj_kind}\nlipschitz = {cfg.lipschitz!r}\nsigma = {cfg.sigma!r}\n"
        f"zeta = {cfg.zeta!r}\nnoise = {cfg.noise_dist}\ncondition = {cfg.condition!r}\n"
        f"center_scale = {cfg.center_scale!r}\ndirichlet_alpha = {cfg.dirichlet_alpha!r}\n"
        f"profile_seed = {cfg.profile_seed}\n\n"
        "[schedule]\n"
        f"gamma = {cfg.gamma_spec}\nbeta = {cfg.beta_spec}\nrounds = {cfg.rounds_spec}\n"
        f"iterations = {cfg.iterations}\ntheta0 = {cfg.theta0_fill!r}\n\n"
        "[attack]\n"
        f"kind = {cfg.attack_kind}\nzeta_grid = {grid}\n\n"
        "[network]\n"
        f"policy = {cfg.policy}\nseb = {str(cfg.seb).lower()}\n\n"
        "[run]\n"
        f"rule = {cfg.rule}\nseeds = {seeds}\noutput_dir = {cfg.output_dir}\n"
    )
    return out.getvalue()


def write_config(cfg, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(emit_text(cfg))
