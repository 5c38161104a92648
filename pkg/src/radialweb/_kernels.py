"""Compiled inner loops for the level model.

Each level is a fresh homogeneous Poisson process that is sampled only where
walkers look at it.  Walkers are processed left to right; the process is
revealed by exponential gaps, leftward from a walker when it enters
unexplored ground and rightward until the walker's right neighbour is known.
By the memoryless property this yields exactly the nearest-mark law of the
full process, jointly for all walkers of the level.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _grow(buf, used):
    out = np.empty(2 * len(buf))
    out[:used] = buf[:used]
    return out


@njit(cache=True)
def advance(gen, pos, m, lam, out, buf):
    """Nearest marks of a fresh rate-``lam`` level for the sorted ``pos[:m]``.

    Returns the (possibly enlarged) scratch buffer.  Equal inputs always get
    equal outputs; exact ties are settled by a fair coin.
    """
    run = buf
    used = 0
    front = -np.inf
    p = 0
    for i in range(m):
        q = pos[i]
        if i > 0 and q == pos[i - 1]:
            out[i] = out[i - 1]
            continue
        if q > front:
            c = q - gen.exponential(1.0) / lam
            start = c if (used == 0 or c > front) else run[used - 1]
            run[0] = start
            used = 1
            front = q
            p = 1
        else:
            while p < used and run[p] <= q:
                p += 1
        while p == used:
            front = front + gen.exponential(1.0) / lam
            if used == len(run):
                run = _grow(run, used)
            run[used] = front
            used += 1
        left = run[p - 1]
        right = run[p]
        dl = q - left
        dr = right - q
        if dl < dr:
            out[i] = left
        elif dr < dl:
            out[i] = right
        else:
            out[i] = right if gen.random() < 0.5 else left
    return run


@njit(cache=True)
def pair_tau(gen, lam, ltimes, k0, x0, x1, horizon, window):
    """Coalescence of the walkers started at ``x0 <= x1`` on level ``k0``.

    Returns ``(tau, status)``: ``tau`` is the level-time elapsed until the
    walkers share a mark (``inf`` when still apart after ``horizon``), and
    ``status`` is 0 normally, 1 on contamination, 2 on a crossing, 3 when
    the levels ran out before the horizon.
    """
    if x0 == x1:
        return 0.0, 0
    pos = np.empty(2)
    out = np.empty(2)
    buf = np.empty(64)
    pos[0] = x0
    pos[1] = x1
    t0 = ltimes[k0]
    j = k0
    while True:
        if ltimes[j] - t0 > horizon:
            return np.inf, 0
        if j + 1 >= len(lam):
            return np.inf, 3
        buf = advance(gen, pos, 2, lam[j + 1], out, buf)
        j += 1
        if out[0] > out[1]:
            return np.inf, 2
        if abs(out[0]) > window or abs(out[1]) > window:
            return np.inf, 1
        if out[0] == out[1]:
            return ltimes[j] - t0, 0
        pos[0] = out[0]
        pos[1] = out[1]


@njit(cache=True)
def pair_walk(gen, lam, k0, x0, x1, nlev, zs):
    """Record ``Z = x1 - x0`` at ``nlev + 1`` successive levels into ``zs``."""
    pos = np.empty(2)
    out = np.empty(2)
    buf = np.empty(64)
    pos[0] = x0
    pos[1] = x1
    zs[0] = x1 - x0
    for s in range(nlev):
        if pos[0] == pos[1]:
            zs[s + 1] = 0.0
            continue
        buf = advance(gen, pos, 2, lam[k0 + s + 1], out, buf)
        pos[0] = out[0]
        pos[1] = out[1]
        zs[s + 1] = pos[1] - pos[0]


@njit(cache=True)
def eta_classes(gen, lam, k0, jend, width, widths, window, counts):
    """Distinct classes at level ``jend`` of the level-``k0`` marks in ``[0, w]``.

    The level-``k0`` marks on ``[0, width]`` are sampled directly, then the
    distinct positions are advanced level by level with a class label per
    mark.  ``counts[e]`` receives the number of distinct classes among marks
    in ``[0, widths[e]]`` (``widths`` ascending, at most ``width``).
    Returns ``(status, marks)`` with status 0 ok, 1 contamination, 2 crossing.
    """
    nw = len(widths)
    cap = 16
    marks = np.empty(cap)
    m = 0
    x = gen.exponential(1.0) / lam[k0]
    while x <= width:
        if m == cap:
            marks = _grow(marks, m)
            cap = len(marks)
        marks[m] = x
        m += 1
        x += gen.exponential(1.0) / lam[k0]
    for e in range(nw):
        counts[e] = 0
    if m == 0:
        return 0, 0
    cls = np.arange(m)
    pos = marks[:m].copy()
    out = np.empty(m)
    buf = np.empty(64)
    d = m
    status = 0
    for j in range(k0, jend):
        if d == 1:
            break
        buf = advance(gen, pos, d, lam[j + 1], out, buf)
        # merge equal neighbours; outputs are sorted when nothing crossed
        remap = np.empty(d, dtype=np.int64)
        nd = 0
        for i in range(d):
            if i > 0 and out[i] < out[i - 1]:
                status = 2
            if i == 0 or out[i] != out[i - 1]:
                pos[nd] = out[i]
                nd += 1
            remap[i] = nd - 1
        for i in range(m):
            cls[i] = remap[cls[i]]
        d = nd
        if abs(pos[0]) > window or abs(pos[d - 1]) > window:
            status = 1
            break
    # prefix counts of distinct classes (class labels are nondecreasing)
    e = 0
    seen = 0
    for i in range(m):
        while e < nw and marks[i] > widths[e]:
            counts[e] = seen
            e += 1
        if i == 0 or cls[i] != cls[i - 1]:
            seen += 1
    while e < nw:
        counts[e] = seen
        e += 1
    return status, m


@njit(cache=True)
def walk_many(gen, lam, k0, pos0, nlev, track):
    """Advance individual walkers (not merged) for ``nlev`` levels.

    ``pos0`` must be sorted.  ``track[s]`` receives the positions at level
    ``k0 + s``.  Returns the number of strict order flips and of absorption
    failures (equal walkers that separate) between adjacent walkers.
    """
    m = len(pos0)
    pos = pos0.copy()
    out = np.empty(m)
    buf = np.empty(64)
    track[0, :] = pos
    flips = 0
    splits = 0
    for s in range(nlev):
        buf = advance(gen, pos, m, lam[k0 + s + 1], out, buf)
        for i in range(m - 1):
            if out[i] > out[i + 1]:
                flips += 1
            if pos[i] == pos[i + 1] and out[i] != out[i + 1]:
                splits += 1
        for i in range(m):
            pos[i] = out[i]
        track[s + 1, :] = pos
    return flips, splits


@njit(cache=True)
def pair_order_check(track):
    """Over all walker pairs, count strict sign flips and broken absorptions."""
    L, m = track.shape
    flips = 0
    splits = 0
    for a in range(m):
        for b in range(a + 1, m):
            sign = 0
            met = False
            for s in range(L):
                d = track[s, b] - track[s, a]
                if met and d != 0.0:
                    splits += 1
                    break
                if d == 0.0:
                    met = True
                    continue
                sd = 1 if d > 0 else -1
                if sign != 0 and sd != sign:
                    flips += 1
                    break
                sign = sd
    return flips, splits


@njit(cache=True)
def walk_starts(gen, lam, start_levels, start_pos, obs_levels, out):
    """Walkers born at their own levels, observed at ``obs_levels`` (ascending).

    ``out[o, i]`` is walker ``i``'s position at ``obs_levels[o]`` (NaN before
    its birth).  Returns the number of strict order flips seen.
    """
    m = len(start_pos)
    pos = start_pos.copy()
    res = np.empty(m)
    buf = np.empty(64)
    j0 = start_levels.min()
    jend = obs_levels[-1]
    o = 0
    flips = 0
    for j in range(j0, jend + 1):
        while o < len(obs_levels) and obs_levels[o] == j:
            for i in range(m):
                out[o, i] = pos[i] if start_levels[i] <= j else np.nan
            o += 1
        if j == jend:
            break
        act = np.where(start_levels <= j)[0]
        order = act[np.argsort(pos[act], kind="mergesort")]
        q = pos[order]
        buf = advance(gen, q, len(q), lam[j + 1], res, buf)
        for a in range(len(q) - 1):
            if res[a] > res[a + 1]:
                flips += 1
        for a in range(len(q)):
            pos[order[a]] = res[a]
    return flips
