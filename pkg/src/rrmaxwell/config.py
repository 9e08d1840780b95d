"""Experiment configuration: a YAML document with one section per subcommand.

Example::

    model: granular3d          # or economy1d
    seed: 20240601
    rule:
      e: 0.9                   # granular3d
      # lam: 0.3               # economy1d
      # form: gain             # gain | mixing
      law: {kind: two_point, rho: canonical}
    simulate:
      N: 10000
      replicas: 4
      t_end: 10.0
      dt: 0.01
      record_every: 1.0
      orders: [2, 4]
      initial: {kind: gaussian3d, temperature: 1.0}
      compare: {kind: sphere3d, temperature: 1.0}   # optional second ensemble
      coupled: true            # both ensembles share the collision stream
      fit: {order: 4, window: [0.0, 10.0]}
    metrics:
      w2: sliced               # none | exact | sliced
      sliced_directions: 64
      ds: [2.0]                # directional d_s
      ds_radial: [4.0]         # rotation-averaged d_s
      k_min: 0.001
      k_max: 20.0
      n_k: 200
      directions: 32
    kernels:
      s: [1, 2, 3, 4]
      alpha: [0, 1, 2]
      lam: []
      s_max: 30
    steady:
      n_nodes: 64
      n_grid: 801
      x_max: 40.0
      tol: 1.0e-10
      max_iter: 2000
      v_max: 5.0
      n_v: 201

Any omitted key takes the default shown.  The law's ``base`` is filled in
from the rule (``e``, or the own share of a trade).

Seeding: the root ``seed`` feeds ``SeedSequence(seed, spawn_key=(run,
replica))``; the primary ensemble is run 0 and the comparison ensemble is run
0 when ``coupled`` (identical collision draws) and run 1 otherwise.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import ValidationError
from .restitution import Context, law_from_dict

MODELS = ("granular3d", "economy1d")


@dataclass(frozen=True)
class SimulateSettings:
    N: int = 10000
    replicas: int = 4
    t_end: float = 10.0
    dt: float = 0.01
    record_every: float = 1.0
    orders: tuple = (2,)
    initial: dict = field(default_factory=lambda: {"kind": "gaussian3d", "temperature": 1.0})
    compare: dict | None = None
    coupled: bool = True
    fit: dict | None = None
    save_final: bool = False


@dataclass(frozen=True)
class MetricSettings:
    w2: str = "none"
    sliced_directions: int = 64
    ds: tuple = ()
    ds_radial: tuple = ()
    k_min: float = 1e-3
    k_max: float = 20.0
    n_k: int = 200
    directions: int = 32
    a: str | None = None          # sample files for the metrics subcommand
    b: str | None = None
    gamma_lambda: float | None = None
    hill_fraction: float = 0.02


@dataclass(frozen=True)
class KernelSettings:
    s: tuple = (1.0, 2.0, 3.0, 4.0)
    alpha: tuple = (0.0, 1.0, 2.0)
    lam: tuple = ()
    s_max: float = 30.0


@dataclass(frozen=True)
class SteadySettings:
    n_nodes: int = 64
    n_grid: int = 801
    x_max: float = 40.0
    stretch: float = 3.0
    tol: float = 1e-10
    max_iter: int = 2000
    v_max: float = 5.0
    n_v: int = 201
    deltas: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    seed: int
    rule: dict
    simulate: SimulateSettings = SimulateSettings()
    metrics: MetricSettings = MetricSettings()
    kernels: KernelSettings = KernelSettings()
    steady: SteadySettings = SteadySettings()

    # -- derived objects ----------------------------------------------------------
    def law(self):
        d = dict(self.rule.get("law") or {})
        if "kind" not in d:
            raise ValidationError("rule.law.kind: required")
        if self.model == "granular3d":
            d.setdefault("base", self.rule["e"])
            d["context"] = Context.GRANULAR3D.value
        else:
            lam = self.rule["lam"]
            own = lam if self.rule.get("form", "gain") == "gain" else 1.0 - lam
            d.setdefault("base", own)
            d["context"] = Context.ECONOMY1D.value
        try:
            return law_from_dict(d)
        except ValidationError as exc:
            raise ValidationError(f"rule.{exc}") from None
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"rule.law: {exc}") from None

    def build_rule(self):
        from .kinematics import CollisionRule3D, TradeForm, trade_rule

        law = self.law()
        if self.model == "granular3d":
            return CollisionRule3D(float(self.rule["e"]), law)
        return trade_rule(float(self.rule["lam"]), law, TradeForm(self.rule.get("form", "gain")))

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(self.model, int(seed), self.rule, self.simulate, self.metrics,
                                self.kernels, self.steady)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _section(cls, raw, name):
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{name}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    extra = set(raw) - set(known)
    if extra:
        raise ValidationError(f"{name}: unknown keys {sorted(extra)}")
    kw = {}
    defaults = cls()
    for key, val in raw.items():
        ref = getattr(defaults, key)
        try:
            if isinstance(ref, tuple):
                val = tuple(float(v) for v in val)
            elif isinstance(ref, bool):
                if not isinstance(val, bool):
                    raise TypeError("expected true/false")
            elif isinstance(ref, int):
                if isinstance(val, bool) or float(val) != int(val):
                    raise TypeError("expected an integer")
                val = int(val)
            elif isinstance(ref, float):
                val = float(val)
            elif isinstance(ref, dict) or (ref is None and isinstance(val, dict)):
                val = dict(val) if val is not None else None
            elif val is not None and key in ("a", "b", "w2"):
                val = str(val)
            elif key == "gamma_lambda" and val is not None:
                val = float(val)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"{name}.{key}: {exc}") from None
        kw[key] = val
    return cls(**kw)


def _check(cfg: ExperimentConfig):
    from .dsmc import DT_MAX, n_steps_for

    if cfg.model not in MODELS:
        raise ValidationError(f"model: expected one of {MODELS}, got {cfg.model!r}")
    key = "e" if cfg.model == "granular3d" else "lam"
    if key not in cfg.rule:
        raise ValidationError(f"rule.{key}: required for {cfg.model}")
    if cfg.model == "economy1d" and cfg.rule.get("form", "gain") not in ("gain", "mixing"):
        raise ValidationError("rule.form: expected gain or mixing")
    cfg.build_rule()
    sim = cfg.simulate
    if sim.N < 2:
        raise ValidationError("simulate.N: need at least 2 particles")
    if sim.replicas < 1:
        raise ValidationError("simulate.replicas: need at least 1")
    if not 0 < sim.dt <= DT_MAX:
        raise ValidationError(f"simulate.dt: must lie in (0, {DT_MAX}]")
    try:
        n_total = n_steps_for(sim.t_end, sim.dt)
        n_every = n_steps_for(sim.record_every, sim.dt)
    except ValidationError as exc:
        raise ValidationError(f"simulate: {exc}") from None
    if n_every == 0 or n_total % n_every:
        raise ValidationError("simulate.record_every: must divide t_end in whole steps")
    if cfg.metrics.w2 not in ("none", "exact", "sliced"):
        raise ValidationError("metrics.w2: expected none, exact or sliced")
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed: must be an unsigned 64-bit integer")


def from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config: expected a mapping at the top level")
    extra = set(raw) - {"model", "seed", "rule", "simulate", "metrics", "kernels", "steady"}
    if extra:
        raise ValidationError(f"config: unknown keys {sorted(extra)}")
    for key in ("model", "rule"):
        if key not in raw:
            raise ValidationError(f"{key}: required")
    rule = raw["rule"]
    if not isinstance(rule, dict):
        raise ValidationError("rule: expected a mapping")
    rule = _plain(dict(rule))
    for k in ("e", "lam"):
        if k in rule:
            try:
                rule[k] = float(rule[k])
            except (TypeError, ValueError):
                raise ValidationError(f"rule.{k}: expected a number") from None
    try:
        seed = int(raw.get("seed", 0))
    except (TypeError, ValueError):
        raise ValidationError("seed: expected an integer") from None
    cfg = ExperimentConfig(
        model=str(raw["model"]),
        seed=seed,
        rule=rule,
        simulate=_section(SimulateSettings, raw.get("simulate"), "simulate"),
        metrics=_section(MetricSettings, raw.get("metrics"), "metrics"),
        kernels=_section(KernelSettings, raw.get("kernels"), "kernels"),
        steady=_section(SteadySettings, raw.get("steady"), "steady"),
    )
    _check(cfg)
    return cfg


def loads(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"config: not valid YAML ({exc})") from None
    return from_dict(raw)


def load(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"config: cannot read {path}: {exc}") from None
    return loads(text)


def dumps(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
