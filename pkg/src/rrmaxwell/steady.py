"""Isotropic steady state of the 3D model in the radial Fourier variable.

The steady characteristic function ``psi(x)``, ``x = |k|``, solves
``psi = R[psi]`` with

    R[psi](x) = 1/2 < int_0^pi psi(a x) psi(b x) sin(theta) dtheta >,

where ``a, b`` are the moduli ratios ``|k-|/|k|`` and ``|k+|/|k|``.  Starting
from ``exp(-x^2/2)`` the iteration increases pointwise.  Profiles are stored as
``log psi`` on a grid that is dense near the origin and interpolated with a
not-a-knot cubic spline in ``u = x^2``.  Working in ``x^2`` keeps the
interpolant even (odd components such as ``|x|`` are unstable modes of the
iteration) and represents Gaussians exactly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp

from .errors import ConvergenceError, InvariantError, ValidationError
from .restitution import Context, RestitutionLaw

MONOTONE_SLACK = 1e-12


# -- kernel --------------------------------------------------------------------------

def ab_moduli(et, c):
    """``(a, b)`` for restitution ``et`` and ``c = cos(theta)`` (broadcasting)."""
    B = 0.25 * (1.0 + np.asarray(et, dtype=float))
    A = 1.0 - B
    c = np.asarray(c, dtype=float)
    a2 = 2.0 * B * B * (1.0 - c)
    b2 = A * A + B * B + 2.0 * A * B * c
    return np.sqrt(a2), np.sqrt(np.maximum(b2, 0.0))


def _restitution_atoms(e: float, law: RestitutionLaw, n_eta: int = 32):
    if law.is_discrete:
        return e + law.values, law.probs
    x, w = np.polynomial.legendre.leggauss(n_eta)
    return e + law.half_width * x, 0.5 * w


@dataclass(frozen=True)
class ABKernel:
    e: float
    law: RestitutionLaw
    nodes: np.ndarray      # cos(theta)
    weights: np.ndarray    # Gauss-Legendre, sum 2
    etilde: np.ndarray
    probs: np.ndarray
    a: np.ndarray          # (n_atoms, n_nodes)
    b: np.ndarray

    @property
    def log_weights(self) -> np.ndarray:
        """``log(p_j w_n / 2)`` flattened like ``a`` and ``b``."""
        return np.log(0.5 * np.outer(self.probs, self.weights)).ravel()

    def normalization(self) -> float:
        return float(0.5 * np.sum(self.probs[:, None] * self.weights[None, :] * (self.a**2 + self.b**2)))


def build_ab_kernel(e: float, law: RestitutionLaw, n_nodes: int = 64) -> ABKernel:
    if n_nodes < 32:
        raise ValidationError("need at least 32 Gauss-Legendre nodes")
    if law.context is not Context.GRANULAR3D:
        raise ValidationError("steady-state kernel needs a 3D law")
    if not law.is_conservative():
        raise ValidationError("steady-state kernel needs a law conservative in the mean")
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    et, p = _restitution_atoms(e, law)
    a, b = ab_moduli(et[:, None], nodes[None, :])
    kern = ABKernel(e, law, nodes, weights, et, p, a, b)
    if np.any(a + b < 1.0 - 1e-12):
        raise InvariantError("a + b < 1 at some node")
    if abs(kern.normalization() - 1.0) > 1e-10:
        raise InvariantError(f"kernel normalization {kern.normalization()!r} != 1")
    return kern


# -- profiles ------------------------------------------------------------------------

def sinh_grid(n: int = 801, x_max: float = 40.0, stretch: float = 3.0) -> np.ndarray:
    """``x_max sinh(stretch t) / sinh(stretch)`` on uniform ``t``: fine at 0, coarse in the tail."""
    t = np.linspace(0.0, 1.0, n)
    x = x_max * np.sinh(stretch * t) / math.sinh(stretch)
    x[0] = 0.0
    x[-1] = x_max
    return x


def refine_grid(x_max: float, n: int, stretch: float = 3.0) -> np.ndarray:
    """Grid with ``2n - 1`` points containing the ``n``-point grid."""
    return sinh_grid(2 * n - 1, x_max, stretch)


@dataclass
class RadialFourierProfile:
    xgrid: np.ndarray
    logpsi: np.ndarray
    scale: float = 1.0
    meta: dict = field(default_factory=dict)
    tail_fraction: float = 0.1

    def __post_init__(self):
        self.xgrid = np.asarray(self.xgrid, dtype=float)
        self.logpsi = np.asarray(self.logpsi, dtype=float)
        if self.xgrid[0] != 0.0 or np.any(np.diff(self.xgrid) <= 0):
            raise ValidationError("grid must start at 0 and increase")
        if self.logpsi.shape != self.xgrid.shape:
            raise ValidationError("grid and values differ in length")
        self._spline = CubicSpline(self.xgrid**2, self.logpsi)
        # straight-line continuation of log psi fitted over the last part of the grid
        n = len(self.xgrid)
        k = max(int(self.tail_fraction * n), 4)
        xt, yt = self.xgrid[-k:], self.logpsi[-k:]
        slope = np.polyfit(xt, yt, 1)[0]
        self._tail_slope = min(slope, 0.0)

    @classmethod
    def from_function(cls, func, xgrid, **kw):
        x = np.asarray(xgrid, dtype=float)
        with np.errstate(divide="ignore"):
            lp = np.log(np.asarray(func(x), dtype=float))
        return cls(x, lp, **kw)

    @property
    def psi(self) -> np.ndarray:
        return np.exp(self.logpsi)

    @property
    def x_max(self) -> float:
        return float(self.xgrid[-1])

    def log_eval(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise ValidationError("negative argument")
        out = np.empty_like(y)
        inside = y <= self.x_max
        out[inside] = self._spline(y[inside] ** 2)
        out[~inside] = self.logpsi[-1] + self._tail_slope * (y[~inside] - self.x_max)
        return np.minimum(out, 0.0)

    def __call__(self, y) -> np.ndarray:
        return np.exp(self.log_eval(y))

    def second_derivative_at_zero(self) -> float:
        # psi(0) = 1 and psi'(0) = 0, so psi''(0) = (log psi)''(0) = 2 d(log psi)/du at u = 0
        return 2.0 * float(self._spline(0.0, 1))

    def second_moment(self) -> float:
        """Mean ``|v|^2`` read off the curvature: ``psi = 1 - m2 x^2 / 6 + ...``."""
        return -3.0 * self.second_derivative_at_zero()


def apply_R(psi: RadialFourierProfile, kern: ABKernel, x=None) -> RadialFourierProfile:
    x = psi.xgrid if x is None else np.asarray(x, dtype=float)
    a = kern.a.ravel()
    b = kern.b.ravel()
    ax = np.outer(x, a)
    bx = np.outer(x, b)
    terms = kern.log_weights[None, :] + psi.log_eval(ax) + psi.log_eval(bx)
    out = logsumexp(terms, axis=1)
    if np.any(out > 1e-12):
        raise InvariantError("R[psi] exceeds 1")
    out = np.minimum(out, 0.0)
    out[x == 0.0] = 0.0
    return RadialFourierProfile(x, out, psi.scale, dict(psi.meta), psi.tail_fraction)


@dataclass
class SolveResult:
    profile: RadialFourierProfile      # normalized to unit second moment
    raw: RadialFourierProfile          # fixed point on the working grid
    iterations: int
    residual: float
    scale: float
    monotone_violation: float
    history: list = field(default_factory=list)


def solve_steady_state(kern: ABKernel, xgrid=None, tol: float = 1e-10, max_iter: int = 2000,
                       normalize: bool = True) -> SolveResult:
    """Monotone fixed-point iteration ``psi <- R[psi]`` from ``exp(-x^2/2)``.

    Raises ``InvariantError`` if an iterate decreases anywhere by more than
    1e-12, ``ConvergenceError`` if the sup-norm update is still above ``tol``
    after ``max_iter`` sweeps or the limit looks trivial (``psi(x_max) >= 0.5``).
    The normalized profile rescales ``x`` so that the second moment is 1.
    """
    x = sinh_grid() if xgrid is None else np.asarray(xgrid, dtype=float)
    psi = RadialFourierProfile(x, -0.5 * x * x)
    history = []
    worst = 0.0
    for it in range(1, max_iter + 1):
        new = apply_R(psi, kern)
        diff = new.psi - psi.psi
        worst = max(worst, float(-diff.min()))
        if diff.min() < -MONOTONE_SLACK:
            raise InvariantError(f"iteration {it} decreased psi by {-diff.min():.3e}")
        step = float(np.abs(diff).max())
        history.append(step)
        psi = new
        if step < tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {max_iter} iterations (last step {step:.3e})")
    if psi.psi[-1] >= 0.5:
        raise ConvergenceError("iteration approached the trivial limit psi = 1")
    residual = float(np.abs(apply_R(psi, kern).psi - psi.psi).max())
    scale = 1.0
    prof = psi
    if normalize:
        m2 = psi.second_moment()
        if not m2 > 0:
            raise InvariantError("non-positive second moment at the fixed point")
        scale = math.sqrt(m2)
        prof = RadialFourierProfile(psi.xgrid * scale, psi.logpsi, scale, {"scale": scale})
    return SolveResult(prof, psi, it, residual, scale, worst, history)


# -- admissibility ------------------------------------------------------------------

@dataclass
class ConddReport:
    rows: list            # (delta, P(a<delta) + P(b<delta), P(min_theta b < delta))
    joint_vanishes: bool
    pinned_vanishes: bool

    @property
    def flagged(self) -> bool:
        return not (self.joint_vanishes and self.pinned_vanishes)


def _vanishes(vals, tol=1e-6) -> bool:
    vals = np.asarray(vals)
    if vals[-1] <= tol:
        return True
    return bool(vals[-1] < 0.5 * vals[-2])


def condd_check(e: float, law: RestitutionLaw, deltas=None) -> ConddReport:
    """Measure of the sets where ``a`` or ``b`` is small.

    Two readings are reported: the joint measure over restitution and
    uniform ``cos(theta)``, and the measure over restitution alone of the event
    that ``b`` gets below ``delta`` for some angle (``min b = |1 - et| / 2``, at
    back-scattering).  A law with an atom at ``et = 1`` is caught only by the
    second one.
    """
    d = np.geomspace(1e-1, 1e-6, 6) if deltas is None else np.asarray(deltas, dtype=float)
    et, p = _restitution_atoms(e, law)
    B = 0.25 * (1.0 + et)
    A = 1.0 - B
    rows = []
    for delta in d:
        pa = np.minimum(1.0, delta * delta / (4.0 * B * B))
        with np.errstate(divide="ignore", invalid="ignore"):
            cthr = np.where(A * B > 0, 1.0 - (1.0 - delta * delta) / (2.0 * A * B), 1.0)
        pb = np.clip((cthr + 1.0) / 2.0, 0.0, 1.0)
        joint = float(np.sum(p * (pa + pb)))
        pinned = float(np.sum(p[np.abs(1.0 - et) / 2.0 < delta]))
        rows.append((float(delta), joint, pinned))
    joint_v = _vanishes([r[1] for r in rows])
    pinned_v = _vanishes([r[2] for r in rows])
    return ConddReport(rows, joint_v, pinned_v)


@dataclass(frozen=True)
class GevreyEnvelope:
    kappa: float
    mu: float
    R: float


@dataclass
class GevreyReport:
    envelopes: list            # feasible GevreyEnvelope per R
    table: list                # (R, kappa_max, mu_max, feasible)
    best: GevreyEnvelope | None

    @property
    def feasible(self) -> bool:
        return self.best is not None


def envelope_holds(psi: RadialFourierProfile, env: GevreyEnvelope, slack: float = 1e-12) -> bool:
    x = psi.xgrid
    ps = psi.psi
    inner = x < env.R
    ok_in = np.all(ps[inner] <= np.exp(-env.kappa * x[inner] ** 2) + slack)
    ok_out = np.all(ps[~inner] <= np.exp(-env.mu * x[~inner]) + slack)
    return bool(ok_in and ok_out)


def gevrey_check(psi: RadialFourierProfile, R_values=None, mu_min: float = 0.01) -> GevreyReport:
    """Largest ``(kappa, mu)`` with ``psi <= exp(-kappa x^2)`` below ``R`` and ``exp(-mu x)`` above.

    ``mu`` is further capped by ``kappa / (2R)``; pairs with ``mu < mu_min``
    are outside the tested range and count as infeasible.
    """
    x = psi.xgrid
    lp = psi.logpsi
    if R_values is None:
        R_values = np.linspace(0.5, 0.5 * psi.x_max, 40)
    table, envs = [], []
    for R in R_values:
        inner = (x > 0) & (x < R)
        outer = x >= R
        if not inner.any() or not outer.any():
            continue
        kappa = float(np.min(-lp[inner] / x[inner] ** 2))
        mu_max = float(np.min(-lp[outer] / x[outer]))
        mu = min(mu_max, kappa / (2.0 * R))
        ok = kappa > 0 and mu >= mu_min
        table.append((float(R), kappa, mu_max, ok))
        if ok:
            env = GevreyEnvelope(kappa, mu, float(R))
            if envelope_holds(psi, env):
                envs.append(env)
    best = max(envs, key=lambda v: v.mu) if envs else None
    return GevreyReport(envs, table, best)


# -- inversion -----------------------------------------------------------------------

def invert_radial(psi: RadialFourierProfile, vgrid) -> np.ndarray:
    """Radial density ``f(v) = 1/(2 pi^2 v) int_0^inf x psi(x) sin(x v) dx``."""
    v = np.asarray(vgrid, dtype=float)
    X = psi.x_max
    if psi.psi[-1] * X > 1e-8:
        raise ConvergenceError("psi has not decayed at the end of the grid")

    def g(x):
        return x * float(psi(np.array([x]))[0])

    out = np.empty_like(v)
    for i, vi in enumerate(v):
        if vi == 0.0:
            val, err = quad(lambda x: x * g(x), 0.0, X, limit=400)
            out[i] = val / (2.0 * math.pi**2)
            continue
        val, err = quad(g, 0.0, X, weight="sin", wvar=vi, limit=400)
        if not np.isfinite(val) or err > 1e-6:
            raise ConvergenceError(f"oscillatory integral failed at v={vi!r}")
        out[i] = val / (2.0 * math.pi**2 * vi)
    return out


def radial_moment(vgrid, f, order: float) -> float:
    """``int 4 pi v^(2 + order) f(v) dv`` by the trapezoidal rule."""
    v = np.asarray(vgrid, dtype=float)
    return float(np.trapezoid(4.0 * math.pi * v ** (2 + order) * np.asarray(f), v))


def maxwellian(v, temperature: float = 1.0):
    """Isotropic Gaussian density with mean ``|v|^2`` equal to ``temperature``."""
    s2 = temperature / 3.0
    return (2.0 * math.pi * s2) ** -1.5 * np.exp(-np.asarray(v) ** 2 / (2.0 * s2))


def overpopulation_ratio(vgrid, f, temperature: float = 1.0) -> np.ndarray:
    return np.asarray(f) / maxwellian(vgrid, temperature)


# -- export --------------------------------------------------------------------------

def write_two_column(path, header, a, b):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, y in zip(a, b):
            w.writerow([repr(float(x)), repr(float(y))])
