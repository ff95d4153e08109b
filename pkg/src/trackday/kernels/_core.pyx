# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the simulation hot loops.

Arithmetic is kept operation-for-operation identical to _pure.py so the
two backends agree bitwise.
"""

from libc.math cimport cos, sin, tan, sqrt


def bike_rk4(double x, double y, double v, double phi,
             double accel_cmd, double steer_cmd,
             double k1, double k2, double drag, double wheelbase,
             double dt, int n_sub):
    """RK4 integration of the kinematic bicycle model; see _pure.bike_rk4."""
    cdef double tan_delta = tan(k2 * steer_cmd)
    cdef double h = dt / n_sub
    cdef double k1x, k1y, k1v, k1p, k2x, k2y, k2v, k2p
    cdef double k3x, k3y, k3v, k3p, k4x, k4y, k4v, k4p
    cdef double v2, p2, v3, p3, v4, p4
    cdef int i
    for i in range(n_sub):
        k1x = v * cos(phi)
        k1y = v * sin(phi)
        k1v = k1 * accel_cmd - drag * v * v
        k1p = v * tan_delta / wheelbase

        v2 = v + 0.5 * h * k1v
        p2 = phi + 0.5 * h * k1p
        k2x = v2 * cos(p2)
        k2y = v2 * sin(p2)
        k2v = k1 * accel_cmd - drag * v2 * v2
        k2p = v2 * tan_delta / wheelbase

        v3 = v + 0.5 * h * k2v
        p3 = phi + 0.5 * h * k2p
        k3x = v3 * cos(p3)
        k3y = v3 * sin(p3)
        k3v = k1 * accel_cmd - drag * v3 * v3
        k3p = v3 * tan_delta / wheelbase

        v4 = v + h * k3v
        p4 = phi + h * k3p
        k4x = v4 * cos(p4)
        k4y = v4 * sin(p4)
        k4v = k1 * accel_cmd - drag * v4 * v4
        k4p = v4 * tan_delta / wheelbase

        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        phi = phi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if v < 0.0:
            v = 0.0
    return x, y, v, phi


def project_polyline(double[::1] ax, double[::1] ay,
                     double[::1] dx, double[::1] dy,
                     double[::1] len2, double[::1] seglen, double[::1] cum,
                     double px, double py):
    """Closest-point projection scan; see _pure.project_polyline."""
    cdef Py_ssize_t n = ax.shape[0]
    cdef Py_ssize_t i, best_i = 0
    cdef double t, ex, ey, d2
    cdef double best_d2 = -1.0, best_t = 0.0, best_ex = 0.0, best_ey = 0.0
    for i in range(n):
        t = ((px - ax[i]) * dx[i] + (py - ay[i]) * dy[i]) / len2[i]
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        ex = px - (ax[i] + t * dx[i])
        ey = py - (ay[i] + t * dy[i])
        d2 = ex * ex + ey * ey
        if best_d2 < 0.0 or d2 < best_d2:
            best_d2 = d2
            best_i = i
            best_t = t
            best_ex = ex
            best_ey = ey
    cdef double d = sqrt(best_d2)
    if dx[best_i] * best_ey - dy[best_i] * best_ex < 0.0:
        d = -d
    return cum[best_i] + best_t * seglen[best_i], d, best_i, best_t
