"""Distributional checks: single-path CLT, covariance, eta counts, multi-path laws.

Every variance prediction is anchored to ``c2 = 2 * mean(omega**2)``
measured from the same nearest-mark sampler that drives the simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import stats

from . import _kernels
from .errors import DegenerateFitError, ParameterError
from .levels import level_count, micro_intensities, micro_times
from .parallel import map_trials
from .streams import LABEL_MARKS, LABEL_OMEGA, RngStream, sample_nearest_mark
from .transforms import PlanarPathFamily

# -- single path ---------------------------------------------------------------


def f_profile(t):
    return 1.0 - np.asarray(t, dtype=float)


def g_profile(t):
    return 1.0 / f_profile(t) - 1.0


def _check_t(n, t, alpha):
    if not 0 <= t <= 1 - alpha + 1e-12:
        raise ParameterError(f"t must lie in [0, 1 - alpha], got {t}")
    k = math.floor(n * t)
    if k > level_count(n, alpha):
        raise ParameterError("floor(n t) exceeds k_n")
    return k


def single_path_value(n: int, t: float, stream, alpha: float = 0.5) -> float:
    """``X^n_t = f_n(k) * sum_{j<=k} sqrt(n) omega_j / (n - j)`` with ``k = floor(n t)``."""
    k = _check_t(n, t, alpha)
    if k == 0:
        return 0.0
    w = sample_nearest_mark(1.0, stream if not isinstance(stream, RngStream) else stream.generator(),
                            size=k)
    j = np.arange(1, k + 1)
    return float((n - k) / n * np.sum(math.sqrt(n) * w / (n - j)))


def _path_chunk(n, kmax, ks, seed, lo, hi):
    """Raw sums at levels ``ks`` plus per-sample sum and count of omega squared."""
    j = np.arange(1, kmax + 1)
    scale = math.sqrt(n) / (n - j)
    raw = np.empty((hi - lo, len(ks)))
    w2 = np.empty(hi - lo)
    for i in range(lo, hi):
        w = sample_nearest_mark(1.0, RngStream(seed, i, LABEL_OMEGA).generator(), size=kmax)
        s = np.cumsum(w * scale)
        raw[i - lo] = [s[k - 1] if k > 0 else 0.0 for k in ks]
        w2[i - lo] = np.dot(w, w)
    return raw, w2


@dataclass
class PathSample:
    """Unrescaled sums ``X~`` and rescaled values ``X = f_n X~`` at several times."""

    n: int
    t: np.ndarray
    k: np.ndarray
    raw: np.ndarray
    omega2_mean: float

    @property
    def values(self) -> np.ndarray:
        return self.raw * (self.n - self.k) / self.n

    @property
    def c2_hat(self) -> float:
        return 2.0 * self.omega2_mean


def sample_paths(n, ts, samples, seed, alpha=0.5, workers=1) -> PathSample:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    ks = np.array([_check_t(n, t, alpha) for t in ts])
    kmax = max(1, int(ks.max()))
    raw, w2 = map_trials(partial(_path_chunk, n, kmax, ks, int(seed)), int(samples), workers)
    return PathSample(n, ts, ks, raw, float(w2.sum() / (kmax * samples)))


def lindeberg_variance(n: int, k: int, omega2: float) -> float:
    """Exact variance ``f_n(k)^2 sum_{j<=k} n E[omega^2] / (n - j)^2``."""
    j = np.arange(1, k + 1)
    return float(((n - k) / n) ** 2 * np.sum(n * omega2 / (n - j) ** 2))


def ks_normal(x, var):
    """KS statistic and asymptotic p-value with the ``sqrt(N) + 0.12 + 0.11/sqrt(N)`` factor."""
    x = np.asarray(x, dtype=float)
    N = len(x)
    D = stats.kstest(x, "norm", args=(0.0, math.sqrt(var))).statistic
    en = math.sqrt(N) + 0.12 + 0.11 / math.sqrt(N)
    return float(D), float(stats.kstwobign.sf(en * D))


@dataclass
class CltReport:
    t: float
    samples: int
    empirical_var: float
    predicted_var: float
    ks_stat: float
    ks_p: float
    c2_hat: float
    lindeberg_var: float
    ks_p_lindeberg: float
    candidates: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.empirical_var / self.predicted_var


def clt_report(ps: PathSample, i: int = 0) -> CltReport:
    t = float(ps.t[i])
    if ps.k[i] == 0:
        raise DegenerateFitError("variance is zero at t = 0")
    x = ps.values[:, i]
    pred = ps.c2_hat * f_profile(t) ** 2 * g_profile(t)
    lin = lindeberg_variance(ps.n, int(ps.k[i]), ps.omega2_mean)
    D, p = ks_normal(x, pred)
    _, p_lin = ks_normal(x, lin)
    emp = float(np.var(x, ddof=1))
    cand = {"t(1-t)": t * (1 - t), "2t(1-t)": 2 * t * (1 - t)}
    return CltReport(t, len(x), emp, float(pred), D, p, ps.c2_hat, lin, p_lin, cand)


def clt_test(n, t, samples, seed, alpha=0.5, workers=1) -> CltReport:
    if samples < 1000:
        raise ParameterError("need at least 1000 samples")
    if t <= 0:
        raise DegenerateFitError("variance is zero at t = 0")
    return clt_report(sample_paths(n, [t], samples, seed, alpha, workers))


@dataclass
class CovReport:
    s: float
    t: float
    empirical: float
    predicted: float
    stderr: float
    increment_cov: float
    increment_stderr: float
    c2_hat: float
    exact: float

    @property
    def rel_error(self) -> float:
        return abs(self.empirical - self.predicted) / self.predicted


def _cov(x, y):
    xc, yc = x - x.mean(), y - y.mean()
    prod = xc * yc
    return float(prod.sum() / (len(x) - 1)), float(prod.std(ddof=1) / math.sqrt(len(x)))


def covariance_check(n, s, t, samples, seed, alpha=0.5, workers=1) -> CovReport:
    """Empirical ``Cov(X_s, X_t)`` against ``c2 f(s) f(t) g(s)``."""
    if not 0 < s <= t:
        raise ParameterError("need 0 < s <= t")
    return covariance_report(sample_paths(n, [s, t], samples, seed, alpha, workers))


def covariance_report(ps: PathSample, i: int = 0, j: int = 1) -> CovReport:
    """Covariance check on columns ``i`` (earlier time) and ``j`` of a path sample."""
    n, s, t = ps.n, float(ps.t[i]), float(ps.t[j])
    if not 0 < s <= t:
        raise ParameterError("need 0 < s <= t")
    xs, xt = ps.values[:, i], ps.values[:, j]
    emp, se = _cov(xs, xt)
    pred = ps.c2_hat * f_profile(s) * f_profile(t) * g_profile(s)
    ks, kt = int(ps.k[i]), int(ps.k[j])
    lv = np.arange(1, ks + 1)
    exact = (n - ks) / n * (n - kt) / n * float(np.sum(n * ps.omega2_mean / (n - lv) ** 2))
    rs, rt = ps.raw[:, i], ps.raw[:, j]
    inc, inc_se = _cov(rs, rt - rs)
    return CovReport(s, t, emp, float(pred), se, inc, inc_se, ps.c2_hat, exact)


# -- eta -----------------------------------------------------------------------


@dataclass(frozen=True)
class EtaCount:
    t0: float
    t: float
    a: float
    b: float
    value: int


def _class_key(p, s):
    """Identity of the path piece at time ``s``: the node there or the bracketing segment."""
    i = int(np.searchsorted(p.times, s, side="right")) - 1
    if i < 0:
        return ("pre", float(p.positions[0]))
    if p.times[i] == s or i == len(p.times) - 1:
        return ("node", float(p.positions[i]))
    return ("seg", float(p.positions[i]), float(p.positions[i + 1]))


def eta(fam: PlanarPathFamily, t0: float, t: float, a: float, b: float) -> EtaCount:
    """Distinct path pieces at ``t0 + t`` among paths born by ``t0`` with ``x(t0)`` in ``[a, b]``."""
    if b < a:
        raise ParameterError("need a <= b")
    if not t > 0:
        raise ParameterError("need t > 0")
    if t0 + t > fam.strip[1]:
        return EtaCount(t0, t, a, b, 0)
    keys = set()
    for p in fam:
        if p.sigma > t0:
            continue
        x = float(p(t0))
        if a <= x <= b:
            keys.add(_class_key(p, t0 + t))
    return EtaCount(t0, t, a, b, len(keys))


def beta_family(sys, levels, lo: float, hi: float) -> PlanarPathFamily:
    """Macroscopic family of paths started at every mark of ``levels`` within ``[lo, hi]``."""
    from .levels import path_from
    s = math.sqrt(sys.n)
    paths = []
    for j in levels:
        for x in sys.marks_in(j, lo * s, hi * s):
            paths.append(path_from(sys, (j, x)).to_planar("macro"))
    return PlanarPathFamily((0.0, sys.macro_time(sys.last_level)), paths)


def target_level(n, alpha, t0_level, t):
    """Last level whose macroscopic time is at most ``m_{k0} + t`` (None past the strip)."""
    mt = micro_times(n, alpha) / n
    top = 1.0 / alpha - 1.0
    s = mt[t0_level] + t
    if s > top:
        return None
    return int(np.searchsorted(mt, s, side="right") - 1)


def _eta_chunk(n, alpha, k0, jend, widths, window, seed, lo, hi):
    lam = micro_intensities(n, alpha)
    counts = np.zeros((hi - lo, len(widths)), dtype=np.int64)
    status = np.zeros(hi - lo, dtype=np.int64)
    row = np.zeros(len(widths), dtype=np.int64)
    for i in range(lo, hi):
        gen = RngStream(seed, i, LABEL_MARKS).generator()
        st, _ = _kernels.eta_classes(gen, lam, k0, jend, widths[-1], widths, window, row)
        counts[i - lo] = row
        status[i - lo] = st
    return counts, status


@dataclass
class EtaRuns:
    eps: np.ndarray
    t: float
    start_level: int
    counts: np.ndarray
    status: np.ndarray

    @property
    def usable(self):
        return self.status == 0

    def prob(self, threshold: int):
        c = self.counts[self.usable] >= threshold
        p = c.mean(axis=0)
        return p, np.sqrt(p * (1 - p) / max(1, len(c))), c.sum(axis=0)

    @property
    def contamination_rate(self):
        return float(np.mean(self.status == 1))


def eta_runs(n, alpha, t, eps_list, trials, seed, start_level=0, window=None, workers=1) -> EtaRuns:
    """Per-trial class counts for the level-``k`` marks in ``[0, eps]`` after time ``t``."""
    eps = np.asarray(eps_list, dtype=float)
    order = np.argsort(eps)
    if np.any(eps < 0):
        raise ParameterError("eps must be >= 0")
    k_n = level_count(n, alpha)
    if not 0 <= start_level <= k_n:
        raise ParameterError("start level out of range")
    if not t > 0:
        raise ParameterError("need t > 0")
    jend = target_level(n, alpha, start_level, t)
    if jend is None:
        z = np.zeros((int(trials), len(eps)), dtype=np.int64)
        return EtaRuns(eps, t, start_level, z, np.zeros(int(trials), dtype=np.int64))
    widths = eps[order] * math.sqrt(n)
    if window is None:
        window = max(20.0 * math.sqrt(micro_times(n, alpha)[-1]), 10.0 * widths[-1], 10 * math.sqrt(n))
    fn = partial(_eta_chunk, n, alpha, int(start_level), int(jend), widths, float(window), int(seed))
    counts, status = map_trials(fn, int(trials), workers)
    out = np.empty_like(counts)
    out[:, order] = counts
    return EtaRuns(eps, t, start_level, out, status)


@dataclass
class EpsSweep:
    eps: np.ndarray
    t: float
    threshold: int
    p: np.ndarray
    stderr: np.ndarray
    hits: np.ndarray
    trials: int
    contamination_rate: float


def _sweep(runs: EtaRuns, threshold):
    p, se, hits = runs.prob(threshold)
    return EpsSweep(runs.eps, runs.t, threshold, p, se, hits, int(runs.usable.sum()),
                    runs.contamination_rate)


def b1_sweep(n, alpha, t, eps_list, trials, seed, start_level=0, workers=1) -> EpsSweep:
    """``P[eta >= 2]`` per eps, with the interval anchored at 0."""
    return _sweep(eta_runs(n, alpha, t, eps_list, trials, seed, start_level, workers=workers), 2)


def b2_sweep(n, alpha, t, eps_list, trials, seed, start_level=0, workers=1) -> EpsSweep:
    """``P[eta >= 3]`` per eps, with the interval anchored at 0."""
    return _sweep(eta_runs(n, alpha, t, eps_list, trials, seed, start_level, workers=workers), 3)


@dataclass
class EtaMean:
    mean: float
    stderr: float
    limit: float
    trials: int

    @property
    def rel_error(self):
        return abs(self.mean - self.limit) / self.limit


def eta_mean_bound(n, alpha, t0, t, a, b, trials, seed, workers=1) -> EtaMean:
    """Empirical ``E[eta]`` next to ``1 + (b - a) / sqrt(pi t)``.

    ``t0`` is rounded up to the next level time; the interval is shifted to
    start at 0.
    """
    mt = micro_times(n, alpha) / n
    k0 = int(np.searchsorted(mt, t0 - 1e-12))
    runs = eta_runs(n, alpha, t, [b - a], trials, seed, start_level=k0, workers=workers)
    c = runs.counts[runs.usable, 0]
    return EtaMean(float(c.mean()), float(c.std(ddof=1) / math.sqrt(len(c))),
                   1.0 + (b - a) / math.sqrt(math.pi * t), len(c))


# -- several paths -----------------------------------------------------------


def estimate_c2(samples: int, seed: int) -> float:
    w = sample_nearest_mark(1.0, RngStream(seed, 0, LABEL_OMEGA).generator(), size=samples)
    return float(2.0 * np.mean(w * w))


def _multi_chunk(n, alpha, levels, pos, obs, seed, lo, hi):
    lam = micro_intensities(n, alpha)
    out = np.empty((hi - lo, len(obs), len(pos)))
    flips = np.empty(hi - lo, dtype=np.int64)
    for i in range(lo, hi):
        gen = RngStream(seed, i, LABEL_MARKS).generator()
        flips[i - lo] = _kernels.walk_starts(gen, lam, levels, pos, obs, out[i - lo])
    return out, flips


@dataclass
class MultipathReport:
    times: np.ndarray
    marginal_ks_p: np.ndarray
    marginal_var: np.ndarray
    predicted_var: np.ndarray
    single_slope: float
    pair_slope: float
    c2_hat: float
    flips: int
    met_fraction: float

    @property
    def slope_ratio(self):
        return self.pair_slope / self.single_slope


def multipath_test(n, alpha, starts, times, trials, seed, workers=1, c2_samples=10 ** 5) -> MultipathReport:
    """Marginal laws and pairwise spread for paths from ``starts = [(y, s), ...]``.

    Positions and times are macroscopic; ``times`` are elapsed times after
    the latest birth.  Marginal variances are compared with ``c2 * (m_k - m_s)``;
    the spread of the first two paths is regressed on time against twice the
    single-path rate.
    """
    ys = np.array([float(y) for y, _ in starts])
    ss = np.array([float(s) for _, s in starts])
    for i in range(1, len(starts)):
        if ss[i] < ss[i - 1] or (ss[i] == ss[i - 1] and ys[i] < ys[i - 1]):
            raise ParameterError("starts must be ordered by birth time, then position")
    mt = micro_times(n, alpha) / n
    levels = np.searchsorted(mt, ss - 1e-12).astype(np.int64)
    base = levels.max()
    times = np.asarray(times, dtype=float)
    obs = np.array([np.searchsorted(mt, mt[base] + t, side="right") - 1 for t in times], dtype=np.int64)
    if np.any(obs <= base) or obs[-1] > level_count(n, alpha):
        raise ParameterError("observation times must fall inside the strip after the births")
    fn = partial(_multi_chunk, n, alpha, levels, ys * math.sqrt(n), obs, int(seed))
    out, flips = map_trials(fn, int(trials), workers)
    x = out / math.sqrt(n)
    c2 = estimate_c2(c2_samples, seed + 1)
    el = mt[obs][:, None] - mt[levels][None, :]
    pred = c2 * el
    disp = x - ys[None, None, :]
    var = disp.var(axis=0, ddof=1)
    ks_p = np.array([[ks_normal(disp[:, o, i], pred[o, i])[1] for i in range(len(ys))]
                     for o in range(len(obs))])
    tt = mt[obs] - mt[base]
    single = float(np.dot(tt, var[:, 0]) / np.dot(tt, tt))
    if len(ys) > 1:
        diff = x[:, :, 1] - x[:, :, 0]
        pair = float(np.dot(tt, diff.var(axis=0, ddof=1)) / np.dot(tt, tt))
        met = float(np.mean(diff[:, -1] == 0))
    else:
        pair, met = float("nan"), 0.0
    return MultipathReport(tt, ks_p, var, pred, single, pair, c2, int(flips.sum()), met)


# -- structural checks ------------------------------------------------------


def _struct_chunk(n, alpha, m, nlev, k0, spread, seed, lo, hi):
    lam = micro_intensities(n, alpha, nlev + 2)
    res = np.zeros((hi - lo, 3), dtype=np.int64)
    track = np.empty((nlev + 1, m))
    for i in range(lo, hi):
        gen = RngStream(seed, i, LABEL_MARKS).generator()
        pos = np.sort(gen.uniform(0.0, spread, size=m))
        pos[1::5] = pos[0::5][: len(pos[1::5])]  # some walkers share a start
        pos.sort()
        f1, s1 = _kernels.walk_many(gen, lam, k0, pos, nlev, track)
        f2, s2 = _kernels.pair_order_check(track)
        res[i - lo] = (f1 + f2, s1 + s2, m * (m - 1) // 2)
    return res


@dataclass
class StructuralReport:
    pairs: int
    flips: int
    splits: int


def structural_check(n, alpha, walkers, nlev, trials, seed, start_level=0, spread=None,
                     workers=1) -> StructuralReport:
    """Order flips and absorption failures over all walker pairs of each trial."""
    spread = float(walkers) if spread is None else float(spread)
    fn = partial(_struct_chunk, n, alpha, int(walkers), int(nlev), int(start_level), spread, int(seed))
    r = map_trials(fn, int(trials), workers)
    return StructuralReport(int(r[:, 2].sum()), int(r[:, 0].sum()), int(r[:, 1].sum()))
