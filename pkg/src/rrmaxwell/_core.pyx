# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels.  ``_pycore`` mirrors every function with the same
floating-point operation order, so both backends give bitwise-identical
collision trajectories."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin

cnp.import_array()


def collide3d_batch(double[:, ::1] vel, const long long[::1] first,
                    const long long[::1] second, const double[::1] cos_theta,
                    const double[::1] phi, const double[::1] etilde):
    cdef Py_ssize_t c, i, j, n = first.shape[0]
    cdef double ux, uy, uz, un, st, sx, sy, sz, a1, a2, mx, my, mz, dx, dy, dz, ct, et
    for c in range(n):
        i = first[c]
        j = second[c]
        et = etilde[c]
        ux = vel[i, 0] - vel[j, 0]
        uy = vel[i, 1] - vel[j, 1]
        uz = vel[i, 2] - vel[j, 2]
        un = sqrt(ux * ux + uy * uy + uz * uz)
        ct = cos_theta[c]
        st = 1.0 - ct * ct
        if st < 0.0:
            st = 0.0
        st = sqrt(st)
        sx = st * cos(phi[c])
        sy = st * sin(phi[c])
        sz = ct
        a1 = 0.25 * (1.0 - et)
        a2 = 0.25 * (1.0 + et) * un
        mx = 0.5 * (vel[i, 0] + vel[j, 0])
        my = 0.5 * (vel[i, 1] + vel[j, 1])
        mz = 0.5 * (vel[i, 2] + vel[j, 2])
        dx = a1 * ux + a2 * sx
        dy = a1 * uy + a2 * sy
        dz = a1 * uz + a2 * sz
        vel[i, 0] = mx + dx
        vel[i, 1] = my + dy
        vel[i, 2] = mz + dz
        vel[j, 0] = mx - dx
        vel[j, 1] = my - dy
        vel[j, 2] = mz - dz


def collide1d_batch(double[::1] wealth, const long long[::1] first,
                    const long long[::1] second, const double[::1] eta,
                    const double[::1] eta_star, double own, double other):
    """Apply trades in order; returns the number of negative outcomes (should be 0)."""
    cdef Py_ssize_t c, i, j, n = first.shape[0]
    cdef double v, w, vp, wp
    cdef long long bad = 0
    for c in range(n):
        i = first[c]
        j = second[c]
        v = wealth[i]
        w = wealth[j]
        vp = (own + eta[c]) * v + other * w
        wp = (own + eta_star[c]) * w + other * v
        if vp < 0.0 or wp < 0.0:
            bad += 1
        wealth[i] = vp
        wealth[j] = wp
    return bad


def empirical_cf(const double[::1] proj, const double[::1] k):
    """Real and imaginary parts of ``mean(exp(-i k p))`` for every ``k``."""
    cdef Py_ssize_t a, b, n = proj.shape[0], m = k.shape[0]
    cdef double sr, si, kk, x
    re = np.empty(m)
    im = np.empty(m)
    cdef double[::1] rv = re
    cdef double[::1] iv = im
    for a in range(m):
        kk = k[a]
        sr = 0.0
        si = 0.0
        for b in range(n):
            x = kk * proj[b]
            sr += cos(x)
            si -= sin(x)
        rv[a] = sr / n
        iv[a] = si / n
    return re, im


cdef inline double _sinc_defect(double x):
    # 1 - sin(x)/x without cancellation near 0
    cdef double x2
    if x < 0.1:
        x2 = x * x
        return x2 * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 / 362880.0)))
    return 1.0 - sin(x) / x


def radial_cf_defect(const double[::1] speed, const double[::1] k):
    """``mean(1 - sin(k r) / (k r))``, i.e. one minus the characteristic function
    of the rotation average, accurate at small ``k``."""
    cdef Py_ssize_t a, b, n = speed.shape[0], m = k.shape[0]
    cdef double s, kk
    out = np.empty(m)
    cdef double[::1] ov = out
    for a in range(m):
        kk = k[a]
        s = 0.0
        for b in range(n):
            s += _sinc_defect(kk * speed[b])
        ov[a] = s / n
    return out
