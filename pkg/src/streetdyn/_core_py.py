"""Pure-Python implementations of the numerical kernels.

Mirrors ``_core.pyx`` function for function. Used when the compiled
extension is unavailable or ``STREETDYN_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np


def bicycle_step(x, y, v, phi, delta, ddelta, accel, lf, lr, dt, substeps, delta_max):
    delta = min(max(delta + ddelta, -delta_max), delta_max)
    v = v + accel * dt
    tan_d = math.tan(delta)
    beta = math.atan(lr / (lf + lr) * tan_d)
    yaw_gain = math.cos(beta) * tan_d / (lf + lr)
    h = dt / substeps
    for _ in range(substeps):
        x += v * math.cos(phi + beta) * h
        y += v * math.sin(phi + beta) * h
        phi += v * yaw_gain * h
    return x, y, v, phi, delta


def bicycle_rollout(state, actions, lf, lr, dt, substeps, delta_max):
    actions = np.asarray(actions, dtype=np.float64)
    out = np.empty((actions.shape[0] + 1, 5))
    s = tuple(float(c) for c in state)
    out[0] = s
    for k in range(actions.shape[0]):
        s = bicycle_step(*s, actions[k, 0], actions[k, 1], lf, lr, dt, substeps, delta_max)
        out[k + 1] = s
    return out


def segment_min_distance(points, segments):
    """Distance from each point to the closest of ``segments`` (rows x0,y0,x1,y1)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    segments = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    out = np.full(points.shape[0], np.inf)
    if segments.shape[0] == 0:
        return out
    a = segments[:, :2]
    d = segments[:, 2:] - a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd > 0.0, dd, 1.0)
    # chunked to bound memory on long traces
    for lo in range(0, points.shape[0], 256):
        p = points[lo:lo + 256, None, :]
        t = np.clip(np.einsum("pkj,kj->pk", p - a, d) / dd, 0.0, 1.0)
        q = a + t[..., None] * d
        out[lo:lo + 256] = np.sqrt(((p - q) ** 2).sum(axis=2)).min(axis=1)
    return out


def _corners(cx, cy, h, length, width):
    c, s = math.cos(h), math.sin(h)
    hl, hw = 0.5 * length, 0.5 * width
    return [
        (cx + c * hl - s * hw, cy + s * hl + c * hw),
        (cx - c * hl - s * hw, cy - s * hl + c * hw),
        (cx - c * hl + s * hw, cy - s * hl - c * hw),
        (cx + c * hl + s * hw, cy + s * hl - c * hw),
    ]


def _separated(ca, cb, axes):
    for ax, ay in axes:
        pa = [px * ax + py * ay for px, py in ca]
        pb = [px * ax + py * ay for px, py in cb]
        if max(pa) < min(pb) or max(pb) < min(pa):
            return True
    return False


def obb_overlap_series(ca, ha, la, wa, cb, hb, lb, wb):
    """Separating-axis overlap test of two rectangles at every timestep."""
    ca = np.asarray(ca, dtype=np.float64)
    cb = np.asarray(cb, dtype=np.float64)
    n = ca.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    reach = 0.5 * math.hypot(la, wa) + 0.5 * math.hypot(lb, wb)
    for k in range(n):
        if math.hypot(ca[k, 0] - cb[k, 0], ca[k, 1] - cb[k, 1]) > reach:
            continue
        qa = _corners(ca[k, 0], ca[k, 1], ha[k], la, wa)
        qb = _corners(cb[k, 0], cb[k, 1], hb[k], lb, wb)
        axes = [
            (math.cos(ha[k]), math.sin(ha[k])),
            (-math.sin(ha[k]), math.cos(ha[k])),
            (math.cos(hb[k]), math.sin(hb[k])),
            (-math.sin(hb[k]), math.cos(hb[k])),
        ]
        out[k] = 0 if _separated(qa, qb, axes) else 1
    return out


def disc_obb_overlap_series(cd, radius, cb, hb, lb, wb):
    """Overlap of a disc and a rectangle at every timestep."""
    cd = np.asarray(cd, dtype=np.float64)
    cb = np.asarray(cb, dtype=np.float64)
    n = cd.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    for k in range(n):
        dx = cd[k, 0] - cb[k, 0]
        dy = cd[k, 1] - cb[k, 1]
        c, s = math.cos(hb[k]), math.sin(hb[k])
        lx = c * dx + s * dy
        ly = -s * dx + c * dy
        qx = min(max(lx, -0.5 * lb), 0.5 * lb)
        qy = min(max(ly, -0.5 * wb), 0.5 * wb)
        out[k] = 1 if (lx - qx) ** 2 + (ly - qy) ** 2 <= radius * radius else 0
    return out
