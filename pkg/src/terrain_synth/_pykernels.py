"""Pure-Python/numpy versions of the compiled kernels (same signatures)."""
import numpy as np


def cpre(env_ptr, ch_ptr, succ, target):
    n = len(env_ptr) - 1
    n_moves = len(ch_ptr) - 1
    hit = np.zeros(n_moves, dtype=bool)
    if len(succ):
        good = np.asarray(target, dtype=bool)[succ]
        owner = np.repeat(np.arange(n_moves), np.diff(ch_ptr))
        hit[owner[good]] = True
    bad_owner = np.repeat(np.arange(n), np.diff(env_ptr))
    out = np.ones(n, dtype=np.uint8)
    out[bad_owner[~hit]] = 0
    return out


def _side(a, b, p):
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def clip_convex(subject, clip):
    out = [tuple(p) for p in np.asarray(subject, dtype=float)]
    clip = [tuple(p) for p in np.asarray(clip, dtype=float)]
    m = len(clip)
    for e in range(m):
        if not out:
            break
        a, b = clip[e], clip[(e + 1) % m]
        src, out = out, []
        for i, p in enumerate(src):
            q = src[(i + 1) % len(src)]
            sp, sq = _side(a, b, p), _side(a, b, q)
            if sp >= 0.0:
                out.append(p)
            if (sp >= 0.0) != (sq >= 0.0):
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return np.array(out, dtype=float).reshape(-1, 2)


def polygon_area(pts):
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
