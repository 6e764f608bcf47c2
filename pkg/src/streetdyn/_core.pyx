# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels. See ``_core_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan, cos, sin, tan, sqrt, hypot, INFINITY

cnp.import_array()


cdef inline double _clamp(double v, double lo, double hi) nogil:
    return lo if v < lo else (hi if v > hi else v)


cdef void _step(double* s, double ddelta, double accel, double lf, double lr,
                double dt, int substeps, double delta_max) noexcept nogil:
    cdef double delta = _clamp(s[4] + ddelta, -delta_max, delta_max)
    cdef double v = s[2] + accel * dt
    cdef double tan_d = tan(delta)
    cdef double beta = atan(lr / (lf + lr) * tan_d)
    cdef double yaw_gain = cos(beta) * tan_d / (lf + lr)
    cdef double h = dt / substeps
    cdef double x = s[0], y = s[1], phi = s[3]
    cdef int i
    for i in range(substeps):
        x += v * cos(phi + beta) * h
        y += v * sin(phi + beta) * h
        phi += v * yaw_gain * h
    s[0] = x
    s[1] = y
    s[2] = v
    s[3] = phi
    s[4] = delta


def bicycle_step(double x, double y, double v, double phi, double delta,
                 double ddelta, double accel, double lf, double lr, double dt,
                 int substeps, double delta_max):
    cdef double s[5]
    s[0] = x; s[1] = y; s[2] = v; s[3] = phi; s[4] = delta
    _step(s, ddelta, accel, lf, lr, dt, substeps, delta_max)
    return s[0], s[1], s[2], s[3], s[4]


def bicycle_rollout(state, actions, double lf, double lr, double dt,
                    int substeps, double delta_max):
    cdef double[:, ::1] act = np.ascontiguousarray(actions, dtype=np.float64)
    cdef Py_ssize_t n = act.shape[0], k
    out_arr = np.empty((n + 1, 5))
    cdef double[:, ::1] out = out_arr
    cdef double s[5]
    for k in range(5):
        s[k] = float(state[k])
        out[0, k] = s[k]
    with nogil:
        for k in range(n):
            _step(s, act[k, 0], act[k, 1], lf, lr, dt, substeps, delta_max)
            out[k + 1, 0] = s[0]
            out[k + 1, 1] = s[1]
            out[k + 1, 2] = s[2]
            out[k + 1, 3] = s[3]
            out[k + 1, 4] = s[4]
    return out_arr


def segment_min_distance(points, segments):
    cdef double[:, ::1] p = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    cdef double[:, ::1] seg = np.ascontiguousarray(np.asarray(segments, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t m = p.shape[0], k = seg.shape[0], i, j
    out_arr = np.full(m, np.inf)
    cdef double[::1] out = out_arr
    cdef double ax, ay, dx, dy, dd, t, qx, qy, best, dist
    with nogil:
        for i in range(m):
            best = INFINITY
            for j in range(k):
                ax = seg[j, 0]
                ay = seg[j, 1]
                dx = seg[j, 2] - ax
                dy = seg[j, 3] - ay
                dd = dx * dx + dy * dy
                if dd <= 0.0:
                    dd = 1.0
                t = _clamp(((p[i, 0] - ax) * dx + (p[i, 1] - ay) * dy) / dd, 0.0, 1.0)
                qx = ax + t * dx - p[i, 0]
                qy = ay + t * dy - p[i, 1]
                dist = qx * qx + qy * qy
                if dist < best:
                    best = dist
            out[i] = sqrt(best)
    return out_arr


cdef void _corners(double cx, double cy, double h, double length, double width,
                   double* out) noexcept nogil:
    cdef double c = cos(h), s = sin(h), hl = 0.5 * length, hw = 0.5 * width
    out[0] = cx + c * hl - s * hw; out[1] = cy + s * hl + c * hw
    out[2] = cx - c * hl - s * hw; out[3] = cy - s * hl + c * hw
    out[4] = cx - c * hl + s * hw; out[5] = cy - s * hl - c * hw
    out[6] = cx + c * hl + s * hw; out[7] = cy + s * hl - c * hw


cdef bint _separated_on(double* qa, double* qb, double ax, double ay) noexcept nogil:
    cdef double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY, pr
    cdef int i
    for i in range(4):
        pr = qa[2 * i] * ax + qa[2 * i + 1] * ay
        if pr < amin: amin = pr
        if pr > amax: amax = pr
        pr = qb[2 * i] * ax + qb[2 * i + 1] * ay
        if pr < bmin: bmin = pr
        if pr > bmax: bmax = pr
    return amax < bmin or bmax < amin


def obb_overlap_series(ca, ha, double la, double wa, cb, hb, double lb, double wb):
    cdef double[:, ::1] pa = np.ascontiguousarray(ca, dtype=np.float64)
    cdef double[::1] ya = np.ascontiguousarray(ha, dtype=np.float64)
    cdef double[:, ::1] pb = np.ascontiguousarray(cb, dtype=np.float64)
    cdef double[::1] yb = np.ascontiguousarray(hb, dtype=np.float64)
    cdef Py_ssize_t n = pa.shape[0], k
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef double reach = 0.5 * hypot(la, wa) + 0.5 * hypot(lb, wb)
    cdef double qa[8]
    cdef double qb[8]
    with nogil:
        for k in range(n):
            if hypot(pa[k, 0] - pb[k, 0], pa[k, 1] - pb[k, 1]) > reach:
                continue
            _corners(pa[k, 0], pa[k, 1], ya[k], la, wa, qa)
            _corners(pb[k, 0], pb[k, 1], yb[k], lb, wb, qb)
            if (_separated_on(qa, qb, cos(ya[k]), sin(ya[k]))
                    or _separated_on(qa, qb, -sin(ya[k]), cos(ya[k]))
                    or _separated_on(qa, qb, cos(yb[k]), sin(yb[k]))
                    or _separated_on(qa, qb, -sin(yb[k]), cos(yb[k]))):
                continue
            out[k] = 1
    return out_arr


def disc_obb_overlap_series(cd, double radius, cb, hb, double lb, double wb):
    cdef double[:, ::1] pd = np.ascontiguousarray(cd, dtype=np.float64)
    cdef double[:, ::1] pb = np.ascontiguousarray(cb, dtype=np.float64)
    cdef double[::1] yb = np.ascontiguousarray(hb, dtype=np.float64)
    cdef Py_ssize_t n = pd.shape[0], k
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef double dx, dy, c, s, lx, ly, qx, qy
    with nogil:
        for k in range(n):
            dx = pd[k, 0] - pb[k, 0]
            dy = pd[k, 1] - pb[k, 1]
            c = cos(yb[k])
            s = sin(yb[k])
            lx = c * dx + s * dy
            ly = -s * dx + c * dy
            qx = _clamp(lx, -0.5 * lb, 0.5 * lb)
            qy = _clamp(ly, -0.5 * wb, 0.5 * wb)
            if (lx - qx) * (lx - qx) + (ly - qy) * (ly - qy) <= radius * radius:
                out[k] = 1
    return out_arr
