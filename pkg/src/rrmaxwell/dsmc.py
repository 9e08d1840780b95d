"""Stochastic particle solver (Nanbu scheme) for the two Maxwell-type models.

Every particle collides at unit rate: a step of length ``dt`` performs
``K ~ Poisson(N dt / 2)`` collisions between uniformly chosen distinct pairs,
each collision updating both partners.  Pairs, scattering angles and
restitution draws are generated with numpy for the whole step and then
applied sequentially by the backend kernel.

Seeding: a run is identified by ``(root_seed, run, replica)`` and uses
``SeedSequence(root_seed, spawn_key=(run, replica))``.  Its first child
stream draws the initial data, the second drives the collisions.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvariantError, ValidationError
from .kinematics import CollisionRule3D, TradeRule1D
from .restitution import sample

DT_MAX = 0.1


class Dim(str, enum.Enum):
    D1 = "1d"
    D3 = "3d"


# -- initial data ---------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian3D:
    temperature: float = 1.0  # mean |v|^2


@dataclass(frozen=True)
class UniformBall3D:
    temperature: float = 1.0


@dataclass(frozen=True)
class Sphere3D:
    """Every speed equal to ``sqrt(temperature)`` (isotropic shell)."""

    temperature: float = 1.0


@dataclass(frozen=True)
class ExponentialWealth:
    mean: float = 1.0


@dataclass(frozen=True)
class ParetoWealth:
    index: float
    mean: float = 1.0


@dataclass(frozen=True)
class FromSamples:
    samples: tuple


def seed_sequence(root_seed: int, run: int = 0, replica: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root_seed), spawn_key=(int(run), int(replica)))


@dataclass
class ParticleEnsemble:
    velocities: np.ndarray
    seed: int
    stream: tuple = (0, 0)
    time: float = 0.0
    rng: np.random.Generator | None = field(default=None, repr=False)
    n_steps: int = 0
    n_collisions: int = 0

    @property
    def dim(self) -> Dim:
        return Dim.D3 if self.velocities.ndim == 2 else Dim.D1

    @property
    def N(self) -> int:
        return self.velocities.shape[0]

    def copy(self) -> "ParticleEnsemble":
        rng = None
        if self.rng is not None:
            rng = np.random.Generator(type(self.rng.bit_generator)())
            rng.bit_generator.state = self.rng.bit_generator.state
        return ParticleEnsemble(self.velocities.copy(), self.seed, self.stream, self.time,
                                rng, self.n_steps, self.n_collisions)


def _centre(v: np.ndarray) -> np.ndarray:
    return v - v.mean(axis=0)


def init_ensemble(dim, N: int, initial, seed: int = 0, run: int = 0, replica: int = 0,
                  exact_temperature: bool = False) -> ParticleEnsemble:
    """Draw ``N`` particles from ``initial``.

    3D initial data are centred exactly; with ``exact_temperature`` the
    speeds are also rescaled so that the empirical mean of ``|v|^2`` equals the
    requested temperature.
    """
    dim = Dim(dim)
    if N < 2:
        raise ValidationError("need N >= 2 particles")
    ss = seed_sequence(seed, run, replica)
    init_ss, dyn_ss = ss.spawn(2)
    rng0 = np.random.default_rng(init_ss)
    if isinstance(initial, FromSamples):
        v = np.array(initial.samples, dtype=float)
        if v.shape[0] != N:
            raise ValidationError("FromSamples length differs from N")
        if (dim is Dim.D3) != (v.ndim == 2):
            raise ValidationError("sample shape does not match dim")
    elif dim is Dim.D3:
        v = _init_3d(initial, N, rng0)
    else:
        v = _init_1d(initial, N, rng0)
    if not np.all(np.isfinite(v)):
        raise ValidationError("non-finite initial velocities")
    if dim is Dim.D1 and np.any(v < 0):
        raise ValidationError("wealth must be nonnegative")
    if exact_temperature and dim is Dim.D3:
        target = getattr(initial, "temperature", None)
        if target is None:
            target = float(np.mean(np.sum(v * v, axis=1)))
        v = v * math.sqrt(target / float(np.mean(np.sum(v * v, axis=1))))
    return ParticleEnsemble(np.ascontiguousarray(v, dtype=float), int(seed), (run, replica),
                            rng=np.random.default_rng(dyn_ss))


def _positive(name, x):
    if not x > 0:
        raise ValidationError(f"{name} must be positive")


def _init_3d(initial, N, rng):
    if isinstance(initial, Gaussian3D):
        _positive("temperature", initial.temperature)
        v = rng.normal(0.0, math.sqrt(initial.temperature / 3.0), (N, 3))
    elif isinstance(initial, UniformBall3D):
        _positive("temperature", initial.temperature)
        radius = math.sqrt(5.0 * initial.temperature / 3.0)
        d = rng.normal(size=(N, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        v = d * (radius * rng.random(N) ** (1.0 / 3.0))[:, None]
    elif isinstance(initial, Sphere3D):
        _positive("temperature", initial.temperature)
        d = rng.normal(size=(N, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        v = d * math.sqrt(initial.temperature)
    else:
        raise ValidationError(f"{type(initial).__name__} is not a 3D initial law")
    return _centre(v)


def _init_1d(initial, N, rng):
    if isinstance(initial, ExponentialWealth):
        _positive("mean", initial.mean)
        return rng.exponential(initial.mean, N)
    if isinstance(initial, ParetoWealth):
        _positive("mean", initial.mean)
        if not initial.index > 1:
            raise ValidationError("Pareto index must exceed 1 for a finite mean")
        # Lomax (Pareto II) with the requested mean
        a = initial.index
        return initial.mean * (a - 1.0) * (rng.random(N) ** (-1.0 / a) - 1.0)
    raise ValidationError(f"{type(initial).__name__} is not a 1D initial law")


# -- dynamics -----------------------------------------------------------------------

def _pairs(rng, N, K):
    first = rng.integers(0, N, K)
    second = rng.integers(0, N - 1, K)
    second += second >= first
    return first, second


def step(ens: ParticleEnsemble, rule, dt: float) -> ParticleEnsemble:
    """Advance ``ens`` in place by ``dt`` and return it."""
    if not 0 < dt <= DT_MAX:
        raise ValidationError(f"dt must lie in (0, {DT_MAX}]")
    rng = ens.rng
    N = ens.N
    K = int(rng.poisson(N * dt / 2.0))
    first, second = _pairs(rng, N, K)
    if isinstance(rule, CollisionRule3D):
        if ens.dim is not Dim.D3:
            raise ValidationError("3D rule applied to a 1D ensemble")
        cos_theta = rng.uniform(-1.0, 1.0, K)
        phi = rng.uniform(0.0, 2.0 * math.pi, K)
        etilde = rule.e + sample(rule.law, rng, K)
        _backend.collide3d_batch(ens.velocities, first, second, cos_theta, phi, etilde)
    elif isinstance(rule, TradeRule1D):
        if ens.dim is not Dim.D1:
            raise ValidationError("trade rule applied to a 3D ensemble")
        eta = np.asarray(sample(rule.law, rng, K), dtype=float)
        eta_star = np.asarray(sample(rule.law, rng, K), dtype=float)
        bad = _backend.collide1d_batch(ens.velocities, first, second, eta, eta_star,
                                       float(rule.own), float(rule.other))
        if bad:
            raise InvariantError(f"{bad} trades produced negative wealth")
    else:
        raise ValidationError(f"unknown rule type {type(rule).__name__}")
    ens.n_steps += 1
    ens.n_collisions += K
    ens.time = ens.n_steps * dt
    return ens


def n_steps_for(t_end: float, dt: float) -> int:
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError("t_end must be an integer multiple of dt")
    return n


def advance(ens: ParticleEnsemble, rule, t: float, dt: float) -> ParticleEnsemble:
    for _ in range(n_steps_for(t, dt)):
        step(ens, rule, dt)
    return ens


# -- observables --------------------------------------------------------------------

def magnitudes(ens_or_v) -> np.ndarray:
    v = ens_or_v.velocities if isinstance(ens_or_v, ParticleEnsemble) else np.asarray(ens_or_v)
    return np.sqrt(np.sum(v * v, axis=1)) if v.ndim == 2 else v


def raw_moment(ens_or_v, s: float) -> float:
    """``mean |v|^s`` (3D) or ``mean v^s`` (1D)."""
    v = ens_or_v.velocities if isinstance(ens_or_v, ParticleEnsemble) else np.asarray(ens_or_v)
    if v.ndim == 2:
        sq = np.sum(v * v, axis=1)
        return float(np.mean(sq ** (s / 2.0)))
    return float(np.mean(v**s))


def temperature(ens_or_v) -> float:
    return raw_moment(ens_or_v, 2)


def total_momentum(ens: ParticleEnsemble) -> np.ndarray:
    v = ens.velocities
    if v.ndim == 1:
        return np.array([math.fsum(v)])
    return np.array([math.fsum(v[:, c]) for c in range(3)])


@dataclass
class MomentTrace:
    times: list = field(default_factory=list)
    moments: dict = field(default_factory=dict)
    temperature: list = field(default_factory=list)

    def record(self, ens: ParticleEnsemble, orders):
        self.times.append(ens.time)
        for s in orders:
            self.moments.setdefault(s, []).append(raw_moment(ens, s))
        self.temperature.append(temperature(ens))

    def as_arrays(self):
        return np.array(self.times), {s: np.array(v) for s, v in self.moments.items()}


def run_experiment(ens_a: ParticleEnsemble, ens_b: ParticleEnsemble, rule, t_end: float,
                   dt: float, record_orders=(2,), metric_hooks=None, record_every: float = 1.0):
    """Evolve two ensembles on a common clock, recording moments and distances.

    ``metric_hooks`` maps a metric name to ``hook(vel_a, vel_b)`` returning a
    number or a ``{s: value}`` dict.
    """
    from .metrics import MetricReport

    n_total = n_steps_for(t_end, dt)
    n_every = n_steps_for(record_every, dt)
    if n_every == 0 or n_total % n_every:
        raise ValidationError("record_every must divide t_end in whole steps")
    if ens_a.dim != ens_b.dim:
        raise ValidationError("ensembles of different dimension")
    hooks = metric_hooks or {}
    ta, tb = MomentTrace(), MomentTrace()
    report = MetricReport()

    def rec():
        ta.record(ens_a, record_orders)
        tb.record(ens_b, record_orders)
        report.times.append(ens_a.time)
        for name, hook in hooks.items():
            report.add(name, hook(ens_a.velocities, ens_b.velocities))

    rec()
    for n in range(1, n_total + 1):
        step(ens_a, rule, dt)
        step(ens_b, rule, dt)
        if n % n_every == 0:
            rec()
    return ta, tb, report


def run_trace(ens: ParticleEnsemble, rule, t_end: float, dt: float, record_orders=(2,),
              record_every: float = 1.0) -> MomentTrace:
    n_total = n_steps_for(t_end, dt)
    n_every = n_steps_for(record_every, dt)
    if n_every == 0 or n_total % n_every:
        raise ValidationError("record_every must divide t_end in whole steps")
    trace = MomentTrace()
    trace.record(ens, record_orders)
    for n in range(1, n_total + 1):
        step(ens, rule, dt)
        if n % n_every == 0:
            trace.record(ens, record_orders)
    return trace


def aggregate_traces(traces: list[MomentTrace]):
    """Across-replica mean and standard error: rows ``(t, order, mean, stderr, replicas)``."""
    R = len(traces)
    times = traces[0].times
    rows = []
    orders = sorted(traces[0].moments)
    for k, t in enumerate(times):
        for s in orders:
            vals = np.array([tr.moments[s][k] for tr in traces])
            se = float(vals.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan")
            rows.append((t, s, float(vals.mean()), se, R))
    return rows


def fit_exponential_rate(times, y, window=None):
    """Least-squares slope of ``log y`` against ``t`` on ``window``; returns ``(rate, r2)``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        t, y = t[sel], y[sel]
    if len(t) < 10:
        raise ValidationError("need at least 10 points in the fit window")
    if np.any(y <= 0):
        raise ValidationError("non-positive values in the fit window")
    ly = np.log(y)
    A = np.vstack([t, np.ones_like(t)]).T
    (rate, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (rate * t + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(rate), r2


def fit_relaxation_rate(times, y, window=None):
    """Fit ``y = y_inf + (y_0 - y_inf) exp(-r t)``; returns ``(r, y_inf, r2)``."""
    from scipy.optimize import curve_fit

    t = np.asarray(times, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        t, y = t[sel], y[sel]
    if len(t) < 10:
        raise ValidationError("need at least 10 points in the fit window")
    t0 = t[0]
    model = lambda tt, y_inf, amp, r: y_inf + amp * np.exp(-r * (tt - t0))
    p0 = (y[-1], y[0] - y[-1], 1.0 / max(t[-1] - t[0], 1e-12))
    try:
        (y_inf, amp, r), _ = curve_fit(model, t, y, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        from .errors import ConvergenceError

        raise ConvergenceError(f"relaxation fit failed: {exc}") from None
    resid = y - model(t, y_inf, amp, r)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(r), float(y_inf), r2
