# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors ``pure.py`` operation for operation so the two backends produce
bit-identical results (the extension is compiled with -ffp-contract=off
to forbid FMA contraction). Keep the two files in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, fmod

cnp.import_array()


def box_counts(const double[::1] positions, Py_ssize_t n_boxes,
               double domain_length):
    """Particle counts per box, box i = [i*w, (i+1)*w)."""
    cdef double scale = n_boxes / domain_length
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.zeros(n_boxes, dtype=np.int64)
    cdef long long[::1] cnt = out
    cdef Py_ssize_t i, b
    for i in range(positions.shape[0]):
        b = <Py_ssize_t>floor(positions[i] * scale)
        if b > n_boxes - 1:
            b = n_boxes - 1
        cnt[b] += 1
    return out


def box_moments(const double[::1] positions, Py_ssize_t n_boxes,
                double domain_length, double inv_r, Py_ssize_t k_max):
    """Raw moments M_0..M_k of in-box positions rescaled to [0, 1]."""
    cdef double scale = n_boxes / domain_length
    cdef double w = domain_length / n_boxes
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = \
        np.zeros((n_boxes, k_max + 1), dtype=np.float64)
    cdef double[:, ::1] acc = out
    cdef Py_ssize_t i, b, k
    cdef double x, xn, p
    for i in range(positions.shape[0]):
        x = positions[i]
        b = <Py_ssize_t>floor(x * scale)
        if b > n_boxes - 1:
            b = n_boxes - 1
        xn = (x - b * w) * scale
        acc[b, 0] += 1.0
        p = xn
        for k in range(1, k_max + 1):
            acc[b, k] += p
            if k < k_max:
                p = p * xn
    cdef Py_ssize_t kk
    for b in range(n_boxes):
        for kk in range(k_max + 1):
            acc[b, kk] = acc[b, kk] * inv_r
    return out


def em_step(const double[::1] positions, const double[::1] noise, double dt,
            Py_ssize_t n_boxes, double domain_length, double inv_wr):
    """One Euler-Maruyama step with box-histogram density in the drift."""
    cdef Py_ssize_t n = positions.shape[0]
    cdef double scale = n_boxes / domain_length
    cdef double half_dt = 0.5 * dt
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef long long[::1] counts = np.zeros(n_boxes, dtype=np.int64)
    cdef Py_ssize_t i, b
    cdef double x, v
    for i in range(n):
        b = <Py_ssize_t>floor(positions[i] * scale)
        if b > n_boxes - 1:
            b = n_boxes - 1
        counts[b] += 1
    for i in range(n):
        x = positions[i]
        b = <Py_ssize_t>floor(x * scale)
        if b > n_boxes - 1:
            b = n_boxes - 1
        v = (x + half_dt * (counts[b] * inv_wr)) + noise[i]
        v = fmod(v, domain_length)
        if v < 0.0:
            v = v + domain_length
        if v >= domain_length:
            v = 0.0
        y[i] = v
    return out


cdef double WENO_EPS = 1e-6
cdef double G0 = 0.1, G1 = 0.6, G2 = 0.3
cdef double C13 = 13.0 / 12.0


def burgers_rhs(const double[::1] u, double dz, double nu):
    """Semi-discrete RHS of u_t = -(u^2/2)_z + nu u_zz on a periodic grid."""
    cdef Py_ssize_t n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] rhs = out
    cdef double[::1] flux = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, im2, im1, ip1, ip2, ip3
    cdef double vm2, vm1, v0, vp1, vp2, vp3
    cdef double q0, q1, q2, b0, b1, b2, a0, a1, a2, asum
    cdef double u_minus, u_plus, alpha, t
    cdef double inv_dz = 1.0 / dz
    cdef double inv_12dz2 = 1.0 / (12.0 * dz * dz)

    for i in range(n):
        im2 = (i + n - 2) % n
        im1 = (i + n - 1) % n
        ip1 = (i + 1) % n
        ip2 = (i + 2) % n
        ip3 = (i + 3) % n
        vm2 = u[im2]; vm1 = u[im1]; v0 = u[i]
        vp1 = u[ip1]; vp2 = u[ip2]; vp3 = u[ip3]

        # Left-biased state at interface i+1/2.
        q0 = (2.0 * vm2 - 7.0 * vm1 + 11.0 * v0) / 6.0
        q1 = (-vm1 + 5.0 * v0 + 2.0 * vp1) / 6.0
        q2 = (2.0 * v0 + 5.0 * vp1 - vp2) / 6.0
        t = vm2 - 2.0 * vm1 + v0
        b0 = C13 * (t * t)
        t = vm2 - 4.0 * vm1 + 3.0 * v0
        b0 = b0 + 0.25 * (t * t)
        t = vm1 - 2.0 * v0 + vp1
        b1 = C13 * (t * t)
        t = vm1 - vp1
        b1 = b1 + 0.25 * (t * t)
        t = v0 - 2.0 * vp1 + vp2
        b2 = C13 * (t * t)
        t = 3.0 * v0 - 4.0 * vp1 + vp2
        b2 = b2 + 0.25 * (t * t)
        t = WENO_EPS + b0
        a0 = G0 / (t * t)
        t = WENO_EPS + b1
        a1 = G1 / (t * t)
        t = WENO_EPS + b2
        a2 = G2 / (t * t)
        asum = a0 + a1 + a2
        u_minus = (a0 * q0 + a1 * q1 + a2 * q2) / asum

        # Right-biased state at interface i+1/2 (mirror image).
        q0 = (2.0 * vp3 - 7.0 * vp2 + 11.0 * vp1) / 6.0
        q1 = (-vp2 + 5.0 * vp1 + 2.0 * v0) / 6.0
        q2 = (2.0 * vp1 + 5.0 * v0 - vm1) / 6.0
        t = vp3 - 2.0 * vp2 + vp1
        b0 = C13 * (t * t)
        t = vp3 - 4.0 * vp2 + 3.0 * vp1
        b0 = b0 + 0.25 * (t * t)
        t = vp2 - 2.0 * vp1 + v0
        b1 = C13 * (t * t)
        t = vp2 - v0
        b1 = b1 + 0.25 * (t * t)
        t = vp1 - 2.0 * v0 + vm1
        b2 = C13 * (t * t)
        t = 3.0 * vp1 - 4.0 * v0 + vm1
        b2 = b2 + 0.25 * (t * t)
        t = WENO_EPS + b0
        a0 = G0 / (t * t)
        t = WENO_EPS + b1
        a1 = G1 / (t * t)
        t = WENO_EPS + b2
        a2 = G2 / (t * t)
        asum = a0 + a1 + a2
        u_plus = (a0 * q0 + a1 * q1 + a2 * q2) / asum

        alpha = fabs(u_minus)
        t = fabs(u_plus)
        if t > alpha:
            alpha = t
        flux[i] = 0.5 * ((0.5 * u_minus) * u_minus + (0.5 * u_plus) * u_plus) \
            - (0.5 * alpha) * (u_plus - u_minus)

    for i in range(n):
        im2 = (i + n - 2) % n
        im1 = (i + n - 1) % n
        ip1 = (i + 1) % n
        ip2 = (i + 2) % n
        rhs[i] = (flux[im1] - flux[i]) * inv_dz \
            + nu * (((((-u[im2]) + 16.0 * u[im1]) - 30.0 * u[i])
                     + 16.0 * u[ip1] - u[ip2]) * inv_12dz2)
    return out
