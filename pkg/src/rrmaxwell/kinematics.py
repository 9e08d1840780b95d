"""Binary collision maps: 3D granular collisions with random restitution and 1D trades."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .restitution import Context, RestitutionLaw


class TradeForm(str, enum.Enum):
    # v' = (lam + eta) v + (1 - lam) w
    GAIN = "gain"
    # v' = (1 - lam) v + lam w + eta v
    MIXING = "mixing"


@dataclass(frozen=True)
class CollisionRule3D:
    e: float
    law: RestitutionLaw

    def __post_init__(self):
        if not 0.0 <= self.e <= 1.0:
            raise ValidationError(f"e={self.e!r} outside [0, 1]")
        if self.law.context is not Context.GRANULAR3D:
            raise ValidationError("3D rule needs a Granular3D law")
        if abs(self.law.base - self.e) > 1e-15:
            raise ValidationError("law.base must equal e")
        if self.e + self.law.support_min < -1e-15:
            raise ValidationError("e + eta must be nonnegative on the support")

    @property
    def conservative(self) -> bool:
        return self.law.is_conservative()


@dataclass(frozen=True)
class TradeRule1D:
    """Wealth exchange ``v' = (own + eta) v + other w``.

    In the ``GAIN`` form ``own = lam`` and ``other = 1 - lam``; the ``MIXING``
    form swaps the two shares.  The law's ``base`` must equal ``own``.
    """

    lam: float
    law: RestitutionLaw
    form: TradeForm = TradeForm.GAIN

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda={self.lam!r} outside [0, 1]")
        if self.law.context is not Context.ECONOMY1D:
            raise ValidationError("trade rule needs an Economy1D law")
        if abs(self.law.base - self.own) > 1e-15:
            raise ValidationError(
                f"law.base={self.law.base!r} must equal the own share {self.own!r}"
            )
        if self.own + self.law.support_min < -1e-15:
            raise ValidationError("no-debt condition violated: own + eta < 0 on the support")

    @property
    def own(self) -> float:
        return self.lam if self.form is TradeForm.GAIN else 1.0 - self.lam

    @property
    def other(self) -> float:
        return 1.0 - self.lam if self.form is TradeForm.GAIN else self.lam


def trade_rule(lam: float, law: RestitutionLaw, form: TradeForm = TradeForm.GAIN) -> TradeRule1D:
    """Build a rule, re-basing ``law`` on the own share of ``form``."""
    form = TradeForm(form)
    own = lam if form is TradeForm.GAIN else 1.0 - lam
    return TradeRule1D(lam, law.with_base(own, Context.ECONOMY1D), form)


def direction(cos_theta: float, phi: float) -> np.ndarray:
    """Unit vector from polar cosine and azimuth."""
    st = math.sqrt(max(0.0, 1.0 - cos_theta * cos_theta))
    return np.array([st * math.cos(phi), st * math.sin(phi), cos_theta])


def random_direction(rng: np.random.Generator) -> np.ndarray:
    return direction(rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0 * math.pi))


def collide_3d(v, w, sigma, etilde: float):
    """Post-collision velocities for restitution ``etilde`` and scattering direction ``sigma``.

    Operation order matches the compiled batch kernel, so results are
    bitwise identical.
    """
    if etilde < 0:
        raise ValidationError("etilde must be nonnegative")
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ux, uy, uz = v[0] - w[0], v[1] - w[1], v[2] - w[2]
    un = math.sqrt(ux * ux + uy * uy + uz * uz)
    a1 = 0.25 * (1.0 - etilde)
    a2 = 0.25 * (1.0 + etilde) * un
    m = 0.5 * (v + w)
    d = np.array([a1 * ux + a2 * sigma[0], a1 * uy + a2 * sigma[1], a1 * uz + a2 * sigma[2]])
    return m + d, m - d


def energy_change_3d(v, w, sigma, etilde: float) -> float:
    """Closed-form ``|v'|^2 + |w'|^2 - |v|^2 - |w|^2`` for a single collision."""
    u = np.asarray(v, float) - np.asarray(w, float)
    un = float(np.linalg.norm(u))
    return -(1.0 - etilde**2) / 4.0 * (un * un - un * float(u @ np.asarray(sigma, float)))


def collide_1d(v: float, w: float, eta: float, rule: TradeRule1D, eta_star: float = 0.0):
    """Trade between wealths ``v`` and ``w`` with independent returns ``eta``, ``eta_star``."""
    if eta < -rule.own or eta_star < -rule.own:
        raise ValidationError("no-debt condition violated: eta below -own share")
    own, other = rule.own, rule.other
    return (own + eta) * v + other * w, (own + eta_star) * w + other * v


def mean_energy_defect_3d(v, w, sigma, rule: CollisionRule3D) -> float:
    """Exact atom-averaged energy change ``<|v'|^2 + |w'|^2> - |v|^2 - |w|^2``."""
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    before = float(v @ v + w @ w)

    def outcome(eta):
        a, b = collide_3d(v, w, sigma, rule.e + eta)
        return float(a @ a + b @ b)

    return rule.law.expect(outcome) - before


def mean_energy_defect_closed_form(v, w, sigma, rule: CollisionRule3D) -> float:
    u = np.asarray(v, float) - np.asarray(w, float)
    un = float(np.linalg.norm(u))
    c = 1.0 - rule.e**2 - rule.law.beta2
    return -c / 4.0 * (un * un - un * float(u @ np.asarray(sigma, float)))
