"""Rate functions of the two models and the stationary law of the continuous-trading limit.

* ``kernel_S``: ``S(s) = <(own + eta)^s> + other^s - 1`` for a trade rule.
* ``kernel_A``: the 3D ``d_{2+alpha}`` contraction constant, closed form or
  angular quadrature.
* ``contraction_rate_C`` and ``zeta_mean``: ``1 - A(alpha)`` and the fourth-moment
  relaxation rate.
* ``pareto_index``: positive root of ``S``.
* ``gamma_stationary_pdf``: inverse-Gamma stationary wealth density.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, InvariantError, ValidationError
from .kinematics import TradeRule1D
from .restitution import Of, RestitutionLaw, moment

SINGULAR_TOL = 1e-8
ROOT_TOL = 1e-9


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class KernelEvaluation:
    value: float
    method: Method
    est_abs_error: float = 0.0


@dataclass
class ParetoIndexResult:
    s_star: float | None
    bracket: tuple[float, float] | None
    s_grid_profile: list[tuple[float, float]] = field(default_factory=list)


def kernel_S(s: float, rule: TradeRule1D) -> KernelEvaluation:
    if s < 1:
        raise ValidationError("S(s) is defined for s >= 1")
    own_moment = moment(rule.law, s, Of.ETILDE_POWER, shift=rule.own)
    method = Method.CLOSED_FORM if rule.law.is_discrete else Method.QUADRATURE
    err = 0.0 if rule.law.is_discrete else 1e-12
    return KernelEvaluation(own_moment + rule.other**s - 1.0, method, err)


def S_closed_form_2(rule: TradeRule1D) -> float:
    """``S(2) = 2 lam (lam - 1) + beta^2`` (identical in both trade forms)."""
    return 2.0 * rule.lam * (rule.lam - 1.0) + rule.law.beta2


def _a_atom(alpha: float, et: float) -> float:
    """Closed form of the angular integral for a single restitution value."""
    eps = abs((1.0 - et) / 2.0)
    first = ((1.0 + et) / 2.0) ** (2.0 + alpha)
    if abs(eps - 1.0) < SINGULAR_TOL:
        ratio = (4.0 + alpha) / 2.0
    else:
        ratio = (1.0 - eps ** (4.0 + alpha)) / (1.0 - eps * eps)
    return 2.0 / (4.0 + alpha) * (first + ratio)


def _a_atom_quad(alpha: float, et: float) -> tuple[float, float]:
    # |a|^(2+alpha) carries the factor (1 - c)^p: integrate it with an algebraic weight
    lo = (1.0 + et) / 4.0
    hi = (3.0 - et) / 4.0
    p = (2.0 + alpha) / 2.0
    ca = (2.0 * lo * lo) ** p
    va, ea = integrate.quad(lambda c: ca, -1.0, 1.0, weight="alg", wvar=(p, 0.0),
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    b_part = lambda c: max(hi * hi + lo * lo + 2.0 * hi * lo * c, 0.0) ** p
    vb, eb = integrate.quad(b_part, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 0.5 * (va + vb), 0.5 * (ea + eb)


def kernel_A(alpha: float, e: float, law: RestitutionLaw,
             method: Method = Method.CLOSED_FORM) -> KernelEvaluation:
    """Contraction constant of the ``d_{2+alpha}`` metric for the 3D gain operator.

    The closed form averages
    ``2/(4+alpha) [((1+et)/2)^(2+alpha) + (1 - |(1-et)/2|^(4+alpha)) / (1 - |(1-et)/2|^2)]``
    over ``et = e + eta``; the quadrature path integrates the angular form in
    ``cos(theta)`` by adaptive Gauss-Kronrod.
    """
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    method = Method(method)
    if method is Method.CLOSED_FORM:
        value = law.expect(lambda x: _a_atom(alpha, e + x))
        return KernelEvaluation(value, Method.CLOSED_FORM, 0.0 if law.is_discrete else 1e-12)
    errs = []

    def atom(x):
        v, er = _a_atom_quad(alpha, e + x)
        errs.append(er)
        return v

    value = law.expect(atom)
    err = max(errs)
    if not err <= 1e-10 * max(1.0, abs(value)):
        raise ConvergenceError(f"angular quadrature error {err!r}")
    return KernelEvaluation(value, Method.QUADRATURE, err)


def A2_printed_form(e: float, law: RestitutionLaw) -> float:
    """``(23 - e + <et^4>)/24`` as it is usually quoted for the conservative case."""
    return (23.0 - e + moment(law, 4, Of.ETILDE_POWER, shift=e)) / 24.0


def A2_reduced_form(e: float, law: RestitutionLaw) -> float:
    """``A(2)`` expanded in moments of ``et``: ``(11 - 4e + 8<et^2> + <et^4>) / 24``.

    With ``<et^2> = 1`` (conservative) this is ``(19 - 4e + <et^4>)/24``.
    """
    m2 = moment(law, 2, Of.ETILDE_POWER, shift=e)
    m4 = moment(law, 4, Of.ETILDE_POWER, shift=e)
    return (11.0 - 4.0 * e + 8.0 * m2 + m4) / 24.0


def contraction_rate_C(alpha: float, e: float, law: RestitutionLaw) -> float:
    return 1.0 - kernel_A(alpha, e, law).value


def zeta_polynomial(et: float) -> float:
    eps = (1.0 - et) / 2.0
    return (1.0 + 4 * eps - 7 * eps**2 + 4 * eps**3 - 2 * eps**4) / 3.0


def zeta_mean(e: float, law: RestitutionLaw, check_tol: float = 1e-10) -> float:
    """Fourth-moment relaxation rate ``<zeta> = 1 - A(2)``; both routes must agree."""
    via_kernel = 1.0 - kernel_A(2.0, e, law).value
    direct = law.expect(lambda x: zeta_polynomial(e + x))
    if abs(via_kernel - direct) > check_tol:
        raise InvariantError(
            f"<zeta> routes disagree: 1-A(2)={via_kernel!r}, polynomial={direct!r}"
        )
    return via_kernel


def pareto_index(rule: TradeRule1D, s_max: float, n_grid: int = 400) -> ParetoIndexResult:
    """Positive root ``s* > 1`` of ``S``: log-grid scan then bisection to ``|S| < 1e-9``."""
    if s_max <= 1:
        raise ValidationError("s_max must exceed 1")
    grid = np.geomspace(1.0 + 1e-6, s_max, n_grid)
    vals = []
    for s in grid:
        val = kernel_S(float(s), rule).value
        if not math.isfinite(val):
            raise ValidationError(f"S({s}) is not finite")
        vals.append(val)
    profile = list(zip(grid.tolist(), vals))
    vals = np.array(vals)
    # S is convex with S(1) = 0: look for the first negative-to-positive crossing
    idx = np.nonzero((vals[:-1] < 0) & (vals[1:] >= 0))[0]
    if len(idx) == 0:
        return ParetoIndexResult(None, None, profile)
    lo, hi = float(grid[idx[0]]), float(grid[idx[0] + 1])
    bracket = (lo, hi)
    f = lambda s: kernel_S(s, rule).value
    flo = f(lo)
    root = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < ROOT_TOL or hi - lo < 1e-15 * mid:
            root = mid
            break
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    if root is None or abs(f(root)) >= ROOT_TOL:
        raise ConvergenceError("bisection did not reach |S| < 1e-9")
    return ParetoIndexResult(root, bracket, profile)


def stationary_index(rule: TradeRule1D) -> float:
    """Diffusion-limit tail exponent ``mu = 1 + 2 lam / beta^2`` of a mixing-form rule."""
    return 1.0 + 2.0 * rule.other / rule.law.beta2


def _check_gamma_args(lam: float):
    if not lam > 0:
        raise ValidationError("lambda must be positive")


def gamma_log_pdf(v, lam: float):
    """Log of ``M(v) = (mu-1)^mu / Gamma(mu) * exp(-(mu-1)/v) / v^(1+mu)`` with ``mu = 1 + 2/lam``."""
    _check_gamma_args(lam)
    mu = 1.0 + 2.0 / lam
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        out = mu * np.log(mu - 1.0) - special.gammaln(mu) - (mu - 1.0) / v - (1.0 + mu) * np.log(v)
    return np.where(v > 0, out, -np.inf)


def gamma_stationary_pdf(v, lam: float):
    out = np.exp(gamma_log_pdf(v, lam))
    return float(out) if np.ndim(out) == 0 else out


def gamma_tail_constant(lam: float) -> float:
    mu = 1.0 + 2.0 / lam
    return math.exp(mu * math.log(mu - 1.0) - special.gammaln(mu))


def gamma_moments_by_quadrature(lam: float) -> tuple[float, float]:
    """Mass and mean of ``M`` by adaptive quadrature (split at the mode)."""
    mu = 1.0 + 2.0 / lam
    mode = (mu - 1.0) / (mu + 1.0)
    pdf = lambda v: float(np.exp(gamma_log_pdf(v, lam))) if v > 0 else 0.0
    pts = [0.0, mode * 0.25, mode, 4 * mode, 40 * mode]

    def integral(g):
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            total += integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        total += integrate.quad(g, pts[-1], np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        return total

    return integral(pdf), integral(lambda v: v * pdf(v))


def gamma_ppf(u, lam: float):
    """Quantile function of ``M`` (inverse-Gamma, shape ``mu``, scale ``mu - 1``)."""
    mu = 1.0 + 2.0 / lam
    return (mu - 1.0) / special.gammainccinv(mu, np.asarray(u, dtype=float))


def gamma_sample(rng: np.random.Generator, lam: float, size):
    """Inverse-Gamma draws: ``(mu - 1) / G`` with ``G ~ Gamma(mu, 1)``."""
    mu = 1.0 + 2.0 / lam
    return (mu - 1.0) / rng.gamma(mu, 1.0, size)
