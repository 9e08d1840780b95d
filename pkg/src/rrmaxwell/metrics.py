"""Distances between empirical measures and a Hill tail-index estimator.

The Fourier distances work on characteristic functions tabulated on a
shared grid of wave numbers.  Grids are geometric so the small-``|k|`` region
(where ``sup |f^ - g^| / |k|^s`` is often attained) is resolved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import _backend
from .errors import ConvergenceError, ValidationError

EXACT_CAP = 2048


# -- Wasserstein ------------------------------------------------------------------

def _as_1d(x, name):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError(f"{name} is empty")
    return x


def quantile_resample(x, n: int) -> np.ndarray:
    """``n`` mid-point quantiles of the empirical law of ``x`` (sorted)."""
    xs = np.sort(x)
    u = (np.arange(n) + 0.5) / n
    return np.quantile(xs, u, method="inverted_cdf")


def w2_1d(a, b) -> float:
    """Exact ``W2`` between two empirical laws on the line.

    Optimal coupling is the sorted pairing.  For unequal sizes the larger
    sample is replaced by its mid-point quantiles at the smaller size.
    """
    a = _as_1d(a, "a")
    b = _as_1d(b, "b")
    if a.size != b.size:
        if a.size > b.size:
            a = quantile_resample(a, b.size)
        else:
            b = quantile_resample(b, a.size)
    d = np.sort(a) - np.sort(b)
    return math.sqrt(float(np.mean(d * d)))


def w2_to_law(samples, ppf) -> float:
    """``W2`` between an empirical law and a reference given by its quantile function."""
    x = np.sort(_as_1d(samples, "samples"))
    n = x.size
    q = np.asarray(ppf((np.arange(n) + 0.5) / n), dtype=float)
    d = x - q
    return math.sqrt(float(np.mean(d * d)))


def fibonacci_directions(n: int) -> np.ndarray:
    """Quasi-uniform unit vectors on the sphere (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    ang = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(ang), r * np.sin(ang), z])


def w2_3d(a, b, method: str = "exact", n_directions: int = 128, seed: int = 0) -> float:
    """``W2`` between two 3D point clouds of equal size.

    ``exact`` solves the assignment problem with squared Euclidean cost (capped
    at 2048 points).  ``sliced`` averages 1D ``W2^2`` over random directions,
    multiplies by the dimension and takes the root.  This never exceeds ``W2``
    (project the optimal coupling) and equals it for translations and
    dilations.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or b.shape != a.shape:
        raise ValidationError("w2_3d needs two (N, 3) arrays of equal size")
    if method == "exact":
        if a.shape[0] > EXACT_CAP:
            raise ValidationError(f"exact assignment capped at N={EXACT_CAP}")
        cost = cdist(a, b, "sqeuclidean")
        r, c = linear_sum_assignment(cost)
        return math.sqrt(float(cost[r, c].mean()))
    if method == "sliced":
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(n_directions, 3))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        tot = 0.0
        for d in dirs:
            tot += w2_1d(a @ d, b @ d) ** 2
        return math.sqrt(3.0 * tot / n_directions)
    raise ValidationError(f"unknown method {method!r}")


# -- characteristic functions --------------------------------------------------------

def default_kgrid(k_min: float = 1e-3, k_max: float = 20.0, n: int = 200) -> np.ndarray:
    return np.geomspace(k_min, k_max, n)


@dataclass
class EmpiricalCF:
    """``values[d, j]`` estimates ``f^(k_j * dir_d)``; one row for 1D and radial modes.

    ``defect`` optionally holds ``1 - values`` computed without cancellation;
    when both operands carry it, distances are taken from it.
    """

    kgrid: np.ndarray
    values: np.ndarray
    mode: str = "1d"
    directions: np.ndarray | None = None
    defect: np.ndarray | None = None


def cf_1d(samples, kgrid=None) -> EmpiricalCF:
    k = default_kgrid() if kgrid is None else np.asarray(kgrid, dtype=float)
    x = np.ascontiguousarray(_as_1d(samples, "samples"))
    re, im = _backend.empirical_cf(x, k)
    return EmpiricalCF(k, (re + 1j * im)[None, :], "1d")


def cf_3d(velocities, kgrid=None, n_directions: int = 32) -> EmpiricalCF:
    """Directional estimate along ``n_directions`` Fibonacci directions."""
    k = default_kgrid() if kgrid is None else np.asarray(kgrid, dtype=float)
    v = np.asarray(velocities, dtype=float)
    dirs = fibonacci_directions(n_directions)
    vals = np.empty((n_directions, k.size), dtype=complex)
    for n, d in enumerate(dirs):
        re, im = _backend.empirical_cf(np.ascontiguousarray(v @ d), k)
        vals[n] = re + 1j * im
    return EmpiricalCF(k, vals, "directional", dirs)


def cf_radial(velocities, kgrid=None, unit_energy: bool = True) -> EmpiricalCF:
    """Characteristic function of the rotation average of a 3D cloud.

    It only depends on the speeds: ``mean sin(k|v|) / (k|v|)``.  With
    ``unit_energy`` the speeds are first scaled to unit mean ``|v|^2``, which
    removes the second-order term that would otherwise swamp ``d_s`` for
    ``s > 2`` at small ``k``.
    """
    k = default_kgrid() if kgrid is None else np.asarray(kgrid, dtype=float)
    v = np.asarray(velocities, dtype=float)
    speed = np.sqrt(np.sum(v * v, axis=1)) if v.ndim == 2 else np.abs(v)
    if unit_energy:
        speed = speed / math.sqrt(float(np.mean(speed * speed)))
    dfc = _backend.radial_cf_defect(np.ascontiguousarray(speed), k)[None, :]
    return EmpiricalCF(k, (1.0 - dfc).astype(complex), "radial", defect=dfc)


def cf_analytic(func, kgrid) -> EmpiricalCF:
    k = np.asarray(kgrid, dtype=float)
    return EmpiricalCF(k, np.asarray(func(k), dtype=complex)[None, :], "analytic")


def ds_ratio(fa: EmpiricalCF, fb: EmpiricalCF, s: float) -> np.ndarray:
    """``|f^ - g^| / |k|^s`` on the grid (max over directions)."""
    if fa.values.shape != fb.values.shape or not np.array_equal(fa.kgrid, fb.kgrid):
        raise ValidationError("characteristic functions on different grids")
    if fa.defect is not None and fb.defect is not None:
        diff = np.abs(fb.defect - fa.defect)
    else:
        diff = np.abs(fa.values - fb.values)
    return (diff / fa.kgrid**s).max(axis=0)


def ds_metric(fa: EmpiricalCF, fb: EmpiricalCF, s: float) -> float:
    if not s > 0:
        raise ValidationError("s must be positive")
    return float(ds_ratio(fa, fb, s).max())


def ds_analytic(fhat, ghat, s: float, k_min: float = 1e-3, k_max: float = 20.0,
                n0: int = 200, rtol: float = 0.01, max_refine: int = 8) -> float:
    """``d_s`` of two analytic transforms, refining the grid until stable to ``rtol``."""
    prev = None
    n = n0
    for _ in range(max_refine):
        k = default_kgrid(k_min, k_max, n)
        val = ds_metric(cf_analytic(fhat, k), cf_analytic(ghat, k), s)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
        n = 2 * n - 1
    raise ConvergenceError("d_s did not settle under grid refinement")


# -- tails ---------------------------------------------------------------------------

def hill_tail_index(samples, k_fraction: float = 0.02) -> float:
    """Hill estimate of the survival exponent from the top ``k_fraction`` order statistics."""
    x = _as_1d(samples, "samples")
    if x.size < 1000:
        raise ValidationError("Hill estimate needs at least 1000 samples")
    if not 0 < k_fraction <= 0.2:
        raise ValidationError("k_fraction must lie in (0, 0.2]")
    if np.any(x <= 0):
        raise ValidationError("Hill estimate needs positive samples")
    k = max(int(k_fraction * x.size), 2)
    top = np.partition(x, x.size - k - 1)[x.size - k - 1:]
    top.sort()
    thr = top[0]
    return float(1.0 / np.mean(np.log(top[1:] / thr)))


def hill_trend(samples, k_fraction: float = 0.02, levels: int = 4, growth: float = 1.1):
    """Hill estimates at a fixed count ``k`` on nested prefixes of doubling size.

    Without a power tail the estimate keeps growing as the threshold moves out;
    ``diverging`` is set when it increases at every level and by more than
    ``growth`` overall.
    """
    x = _as_1d(samples, "samples")
    n_min = x.size >> (levels - 1)
    k = int(k_fraction * n_min)
    est = []
    for j in range(levels):
        n = n_min << j
        est.append(hill_tail_index(x[:n], k / n))
    diverging = bool(np.all(np.diff(est) > 0) and est[-1] > growth * est[0])
    return est, diverging


# -- reports -------------------------------------------------------------------------

@dataclass
class MetricReport:
    """Distance trajectories on a common clock; scalar series or ``{s: value}`` families."""

    times: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    fitted_rates: dict = field(default_factory=dict)

    @property
    def w2(self):
        return self.series.get("w2", [])

    @property
    def ds(self):
        return self.series.get("ds", {})

    def add(self, name, value):
        if isinstance(value, dict):
            fam = self.series.setdefault(name, {})
            for s, v in value.items():
                fam.setdefault(s, []).append(float(v))
        else:
            self.series.setdefault(name, []).append(float(value))

    def trajectory(self, name, s=None) -> np.ndarray:
        ser = self.series[name]
        return np.array(ser[s] if s is not None else ser)

    def fit(self, name, window, s=None):
        from .dsmc import fit_exponential_rate

        res = fit_exponential_rate(self.times, self.trajectory(name, s), window)
        self.fitted_rates[(name, s)] = res
        return res

    def rows(self):
        """``(t, metric, s, value)`` rows; ``s`` is empty for scalar series."""
        out = []
        for k, t in enumerate(self.times):
            for name in sorted(self.series):
                ser = self.series[name]
                if isinstance(ser, dict):
                    for s in sorted(ser):
                        out.append((t, name, s, ser[s][k]))
                else:
                    out.append((t, name, "", ser[k]))
        return out
