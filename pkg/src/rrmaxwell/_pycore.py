"""Pure-Python fallback for the compiled kernels in ``_core.pyx``.

The collision loops are sequential (later collisions see earlier updates) and
use ``math`` with the compiled code's operation order, so trajectories agree
bit for bit.  The characteristic-function helpers are vectorised with numpy
and agree with the compiled versions to rounding.
"""
import math

import numpy as np


def collide3d_batch(vel, first, second, cos_theta, phi, etilde):
    sqrt, cos, sin = math.sqrt, math.cos, math.sin
    # only the touched rows are pulled into Python objects
    touched = np.unique(np.concatenate([first, second]))
    rows = dict(zip(touched.tolist(), vel[touched].tolist()))
    for i, j, ct, ph, et in zip(first.tolist(), second.tolist(), cos_theta.tolist(),
                                phi.tolist(), etilde.tolist()):
        vi = rows[i]
        vj = rows[j]
        ux = vi[0] - vj[0]
        uy = vi[1] - vj[1]
        uz = vi[2] - vj[2]
        un = sqrt(ux * ux + uy * uy + uz * uz)
        st = 1.0 - ct * ct
        if st < 0.0:
            st = 0.0
        st = sqrt(st)
        sx = st * cos(ph)
        sy = st * sin(ph)
        sz = ct
        a1 = 0.25 * (1.0 - et)
        a2 = 0.25 * (1.0 + et) * un
        mx = 0.5 * (vi[0] + vj[0])
        my = 0.5 * (vi[1] + vj[1])
        mz = 0.5 * (vi[2] + vj[2])
        dx = a1 * ux + a2 * sx
        dy = a1 * uy + a2 * sy
        dz = a1 * uz + a2 * sz
        rows[i] = [mx + dx, my + dy, mz + dz]
        rows[j] = [mx - dx, my - dy, mz - dz]
    if rows:
        idx = np.fromiter(rows.keys(), dtype=np.int64, count=len(rows))
        vel[idx] = np.array(list(rows.values()))


def collide1d_batch(wealth, first, second, eta, eta_star, own, other):
    touched = np.unique(np.concatenate([first, second]))
    vals = dict(zip(touched.tolist(), wealth[touched].tolist()))
    bad = 0
    for i, j, e1, e2 in zip(first.tolist(), second.tolist(), eta.tolist(), eta_star.tolist()):
        v = vals[i]
        w = vals[j]
        vp = (own + e1) * v + other * w
        wp = (own + e2) * w + other * v
        if vp < 0.0 or wp < 0.0:
            bad += 1
        vals[i] = vp
        vals[j] = wp
    if vals:
        idx = np.fromiter(vals.keys(), dtype=np.int64, count=len(vals))
        wealth[idx] = np.fromiter(vals.values(), dtype=float, count=len(vals))
    return bad


def empirical_cf(proj, k, chunk=64):
    re = np.empty(len(k))
    im = np.empty(len(k))
    for start in range(0, len(k), chunk):
        x = np.outer(k[start:start + chunk], proj)
        re[start:start + chunk] = np.cos(x).mean(axis=1)
        im[start:start + chunk] = -np.sin(x).mean(axis=1)
    return re, im


def radial_cf_defect(speed, k, chunk=64):
    out = np.empty(len(k))
    for start in range(0, len(k), chunk):
        x = np.outer(k[start:start + chunk], speed)
        x2 = x * x
        series = x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 / 362880.0)))
        small = x < 0.1
        safe = np.where(small, 1.0, x)
        out[start:start + chunk] = np.where(small, series, 1.0 - np.sin(safe) / safe).mean(axis=1)
    return out
