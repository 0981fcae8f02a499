# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: controllable predecessor and convex polygon clipping."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def cpre(const int[::1] env_ptr, const int[::1] ch_ptr, const int[::1] succ,
         const unsigned char[::1] target):
    """States from which every environment move admits a system choice into ``target``."""
    cdef Py_ssize_t n = env_ptr.shape[0] - 1
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef Py_ssize_t s, e, k
    cdef bint ok, hit
    for s in range(n):
        ok = True
        for e in range(env_ptr[s], env_ptr[s + 1]):
            hit = False
            for k in range(ch_ptr[e], ch_ptr[e + 1]):
                if target[succ[k]]:
                    hit = True
                    break
            if not hit:
                ok = False
                break
        ov[s] = ok
    return out


cdef inline double _side(double ax, double ay, double bx, double by, double px, double py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def clip_convex(const double[:, ::1] subject, const double[:, ::1] clip):
    """Intersect ``subject`` with the counter-clockwise convex polygon ``clip``."""
    cdef Py_ssize_t m = clip.shape[0]
    cdef Py_ssize_t cap = subject.shape[0] + m + 2
    cdef cnp.ndarray[double, ndim=2] a = np.empty((cap, 2))
    cdef cnp.ndarray[double, ndim=2] b = np.empty((cap, 2))
    cdef cnp.ndarray[double, ndim=2] tmp
    cdef Py_ssize_t n = subject.shape[0], nn, i, e
    cdef double ax, ay, bx, by, px, py, qx, qy, sp, sq, t
    for i in range(n):
        a[i, 0] = subject[i, 0]
        a[i, 1] = subject[i, 1]
    for e in range(m):
        if n == 0:
            break
        ax = clip[e, 0]
        ay = clip[e, 1]
        bx = clip[(e + 1) % m, 0]
        by = clip[(e + 1) % m, 1]
        nn = 0
        for i in range(n):
            px = a[i, 0]
            py = a[i, 1]
            qx = a[(i + 1) % n, 0]
            qy = a[(i + 1) % n, 1]
            sp = _side(ax, ay, bx, by, px, py)
            sq = _side(ax, ay, bx, by, qx, qy)
            if sp >= 0.0:
                b[nn, 0] = px
                b[nn, 1] = py
                nn += 1
            if (sp >= 0.0) != (sq >= 0.0):
                t = sp / (sp - sq)
                b[nn, 0] = px + t * (qx - px)
                b[nn, 1] = py + t * (qy - py)
                nn += 1
        tmp = a
        a = b
        b = tmp
        n = nn
    return a[:n].copy()


def polygon_area(const double[:, ::1] pts):
    """Signed shoelace area (positive for counter-clockwise order)."""
    cdef Py_ssize_t n = pts.shape[0], i, j
    cdef double acc = 0.0
    for i in range(n):
        j = (i + 1) % n
        acc += pts[i, 0] * pts[j, 1] - pts[j, 0] * pts[i, 1]
    return 0.5 * acc
