"""Pure-Python kernel fallback.

Mirrors the compiled extension operation-for-operation so both backends
produce bit-identical results; keep formula order in sync with _core.pyx.
"""

import math

import numpy as np


def bike_rk4(x, y, v, phi, accel_cmd, steer_cmd, k1, k2, drag, wheelbase, dt, n_sub):
    """Integrate the kinematic bicycle model over ``n_sub`` RK4 substeps.

    Commands are held constant over the step; speed is floored at zero
    after each substep (no reverse motion). Returns (x, y, v, phi).
    """
    tan_delta = math.tan(k2 * steer_cmd)
    h = dt / n_sub
    for _ in range(n_sub):
        k1x = v * math.cos(phi)
        k1y = v * math.sin(phi)
        k1v = k1 * accel_cmd - drag * v * v
        k1p = v * tan_delta / wheelbase

        v2 = v + 0.5 * h * k1v
        p2 = phi + 0.5 * h * k1p
        k2x = v2 * math.cos(p2)
        k2y = v2 * math.sin(p2)
        k2v = k1 * accel_cmd - drag * v2 * v2
        k2p = v2 * tan_delta / wheelbase

        v3 = v + 0.5 * h * k2v
        p3 = phi + 0.5 * h * k2p
        k3x = v3 * math.cos(p3)
        k3y = v3 * math.sin(p3)
        k3v = k1 * accel_cmd - drag * v3 * v3
        k3p = v3 * tan_delta / wheelbase

        v4 = v + h * k3v
        p4 = phi + h * k3p
        k4x = v4 * math.cos(p4)
        k4y = v4 * math.sin(p4)
        k4v = k1 * accel_cmd - drag * v4 * v4
        k4p = v4 * tan_delta / wheelbase

        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        phi = phi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if v < 0.0:
            v = 0.0
    return x, y, v, phi


def project_polyline(ax, ay, dx, dy, len2, seglen, cum, px, py):
    """Closest-point projection of (px, py) onto a segment list.

    Segment i runs from (ax[i], ay[i]) along (dx[i], dy[i]); ``cum[i]`` is
    the arc length at its start. Returns (s, d, i, t) with d signed
    positive to the left of the travel direction; ties go to the first
    minimum, matching the compiled scan.
    """
    t = ((px - ax) * dx + (py - ay) * dy) / len2
    t = np.clip(t, 0.0, 1.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    d2 = ex * ex + ey * ey
    i = int(np.argmin(d2))
    d = math.sqrt(d2[i])
    if dx[i] * ey[i] - dy[i] * ex[i] < 0.0:
        d = -d
    ti = float(t[i])
    return float(cum[i] + ti * seglen[i]), d, i, ti
