"""Laws of the random perturbation ``eta`` of a restitution coefficient or trade return.

A law is always centred (``<eta> = 0``) and carries its variance ``beta2``.  The
``base`` slot holds the quantity that ``eta`` perturbs: the restitution
coefficient ``e`` for granular collisions, or the own-wealth share for trades.
The support constraint is ``eta >= -base`` in both contexts, so that
``base + eta`` is never negative.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, ValidationError

PROB_TOL = 1e-12
QUAD_ABS_TOL = 1e-12


class Kind(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    TWO_POINT = "two_point"
    UNIFORM_SHIFTED = "uniform_shifted"
    DISCRETE = "discrete"


class Context(str, enum.Enum):
    GRANULAR3D = "granular3d"
    ECONOMY1D = "economy1d"


class Of(str, enum.Enum):
    ETA = "eta"
    ETILDE_POWER = "etilde_power"


@dataclass(frozen=True)
class RestitutionLaw:
    """Immutable law of ``eta``.

    Discrete kinds (``DETERMINISTIC``, ``TWO_POINT``, ``DISCRETE``) store their
    atoms; ``UNIFORM_SHIFTED`` is ``eta ~ U[-half_width, half_width]``.
    """

    kind: Kind
    base: float
    context: Context = Context.GRANULAR3D
    atoms: tuple[tuple[float, float], ...] = ()
    half_width: float = 0.0
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.base):
            raise ValidationError("base must be finite")
        if self.context is Context.GRANULAR3D and not 0.0 <= self.base <= 1.0:
            raise ValidationError(f"restitution coefficient e={self.base} outside [0, 1]")
        if self.is_discrete:
            if not self.atoms:
                raise ValidationError("discrete law needs at least one atom")
            probs = [p for _, p in self.atoms]
            if any(p < 0 for p in probs):
                raise ValidationError("atom probabilities must be nonnegative")
            if abs(math.fsum(probs) - 1.0) > PROB_TOL:
                raise ValidationError(
                    f"atom probabilities sum to {math.fsum(probs)!r}, not 1"
                )
            mean = math.fsum(x * p for x, p in self.atoms)
            if abs(mean) > 1e-12:
                raise ValidationError(f"law mean is {mean!r}, must be 0")
        else:
            if self.half_width <= 0:
                raise ValidationError("half_width must be positive")
        if self.support_min < -self.base - 1e-15:
            raise ValidationError(
                f"support reaches {self.support_min!r} < -base = {-self.base!r} "
                "(restitution/own share would go negative)"
            )

    @property
    def is_discrete(self) -> bool:
        return self.kind is not Kind.UNIFORM_SHIFTED

    @property
    def support_min(self) -> float:
        if self.is_discrete:
            return min(x for x, p in self.atoms if p > 0)
        return -self.half_width

    @property
    def support_max(self) -> float:
        if self.is_discrete:
            return max(x for x, p in self.atoms if p > 0)
        return self.half_width

    @property
    def beta2(self) -> float:
        if self.is_discrete:
            return math.fsum(x * x * p for x, p in self.atoms)
        return self.half_width**2 / 3.0

    @property
    def values(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    def is_conservative(self, tol: float = 1e-12) -> bool:
        """True when ``<(e + eta)^2> = 1`` (energy conserved in the mean)."""
        return abs(self.beta2 - (1.0 - self.base**2)) < tol

    def expect(self, func) -> float:
        """Expectation of ``func(eta)``; exact atom sum or adaptive quadrature."""
        if self.is_discrete:
            return math.fsum(p * func(x) for x, p in self.atoms if p > 0)
        h = self.half_width
        val, err = integrate.quad(
            lambda x: func(x) / (2 * h), -h, h, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200
        )
        if not err <= 1e-10:
            raise ConvergenceError(f"quadrature error estimate {err!r} too large")
        return val

    def with_base(self, base: float, context: Context | None = None) -> "RestitutionLaw":
        return RestitutionLaw(
            self.kind, base, context or self.context, self.atoms, self.half_width, dict(self.params)
        )

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "base": self.base, "context": self.context.value}
        if self.kind is Kind.TWO_POINT:
            out["rho"] = self.params["rho"]
        elif self.kind is Kind.DISCRETE:
            out["atoms"] = [[x, p] for x, p in self.atoms]
        elif self.kind is Kind.UNIFORM_SHIFTED:
            out["half_width"] = self.half_width
        return out


def deterministic(base: float, context: Context = Context.GRANULAR3D) -> RestitutionLaw:
    return RestitutionLaw(Kind.DETERMINISTIC, base, context, ((0.0, 1.0),))


def make_two_point(e: float, rho: float) -> RestitutionLaw:
    """Two-atom conservative law with ``beta2 = 1 - e^2``.

    ``eta = -sqrt(1-e^2)/rho`` with probability ``rho^2/(1+rho^2)`` and
    ``eta = sqrt(1-e^2)*rho`` with probability ``1/(1+rho^2)``.  For
    ``rho = sqrt(1-e^2)/e`` the coefficient ``e + eta`` takes the values 0 and
    ``1/e`` with probabilities ``1-e^2`` and ``e^2``.
    """
    if not 0.0 < e <= 1.0:
        raise ValidationError(f"two-point law needs e in (0, 1], got {e!r}")
    if e == 1.0:
        return deterministic(1.0)
    if not rho > 0:
        raise ValidationError("rho must be positive")
    s = math.sqrt(1.0 - e * e)
    rho_min = canonical_rho(e)
    if rho < rho_min * (1 - 1e-12):
        raise ValidationError(
            f"rho={rho!r} < sqrt(1-e^2)/e = {rho_min!r}: negative atom below -e"
        )
    low = -s / rho
    if rho <= rho_min * (1 + 1e-12):
        low = -e  # exact support boundary for the canonical choice
    atoms = ((low, rho * rho / (1 + rho * rho)), (s * rho, 1.0 / (1 + rho * rho)))
    return RestitutionLaw(Kind.TWO_POINT, e, Context.GRANULAR3D, atoms, params={"rho": rho})


def canonical_rho(e: float) -> float:
    """``rho`` for which ``e + eta`` only takes the values ``0`` and ``1/e``."""
    return math.sqrt(1.0 - e * e) / e


def uniform_shifted(
    half_width: float, base: float, context: Context = Context.GRANULAR3D
) -> RestitutionLaw:
    return RestitutionLaw(Kind.UNIFORM_SHIFTED, base, context, half_width=half_width)


def discrete(
    atoms, base: float, context: Context = Context.GRANULAR3D
) -> RestitutionLaw:
    atoms = tuple((float(x), float(p)) for x, p in atoms)
    return RestitutionLaw(Kind.DISCRETE, base, context, atoms)


def two_atom_centred(low: float, high: float, base: float,
                     context: Context = Context.ECONOMY1D) -> RestitutionLaw:
    """Centred law on ``{low, high}`` (``low < 0 < high``), probabilities fixed by the mean."""
    if not low < 0 < high:
        raise ValidationError("need low < 0 < high")
    p_high = -low / (high - low)
    return discrete(((low, 1 - p_high), (high, p_high)), base, context)


def moment(law: RestitutionLaw, s: float, of: Of = Of.ETA, shift: float | None = None) -> float:
    """``<eta^s>`` or ``<(shift + eta)^s>`` (``shift`` defaults to ``law.base``).

    Exact for discrete laws, adaptive quadrature otherwise.
    """
    of = Of(of)
    if s < 0:
        raise ValidationError("moment order must be >= 0")
    integer = float(s).is_integer()
    if of is Of.ETA:
        c = 0.0
    else:
        c = law.base if shift is None else shift
    if not integer and c + law.support_min < 0:
        raise ValidationError("negative base with fractional exponent")
    if integer:
        n = int(s)
        return law.expect(lambda x: (c + x) ** n)
    return law.expect(lambda x: max(c + x, 0.0) ** s)


def sample(law: RestitutionLaw, rng: np.random.Generator, size=None):
    """I.i.d. draws of ``eta``."""
    if law.kind is Kind.DETERMINISTIC:
        return 0.0 if size is None else np.zeros(size)
    if law.kind is Kind.UNIFORM_SHIFTED:
        return rng.uniform(-law.half_width, law.half_width, size)
    cum = np.cumsum(law.probs)
    cum[-1] = 1.0
    u = rng.random(size)
    idx = np.searchsorted(cum, u, side="right")
    out = law.values[np.minimum(idx, len(cum) - 1)]
    return float(out) if size is None else out


def law_from_dict(d: dict) -> RestitutionLaw:
    """Inverse of :meth:`RestitutionLaw.to_dict` (the CLI config format)."""
    try:
        kind = Kind(d["kind"])
        base = float(d["base"])
    except KeyError as exc:
        raise ValidationError(f"law: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ValidationError(f"law.kind: {exc}") from None
    context = Context(d.get("context", Context.GRANULAR3D.value))
    if kind is Kind.DETERMINISTIC:
        return deterministic(base, context)
    if kind is Kind.TWO_POINT:
        if "rho" not in d:
            raise ValidationError("law.rho: required for two_point")
        rho = d["rho"]
        if rho == "canonical":
            rho = canonical_rho(base)
        law = make_two_point(base, float(rho))
        return law.with_base(base, context)
    if kind is Kind.UNIFORM_SHIFTED:
        return uniform_shifted(float(d["half_width"]), base, context)
    try:
        atoms = [(float(x), float(p)) for x, p in d["atoms"]]
    except (KeyError, TypeError, ValueError):
        raise ValidationError("law.atoms: expected a list of [value, prob] pairs") from None
    probs = math.fsum(p for _, p in atoms)
    if abs(probs - 1.0) > PROB_TOL:
        raise ValidationError(f"law.atoms: probabilities sum to {probs!r}, not 1")
    return discrete(atoms, base, context)
