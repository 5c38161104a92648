"""Coalescence-time statistics for pairs of level-model paths."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import stats

from . import _kernels
from .errors import DegenerateFitError, ParameterError
from .levels import level_count, micro_intensities, micro_times, path_from
from .parallel import map_trials
from .streams import LABEL_MARKS, RngStream

STATUS_OK, STATUS_CONTAMINATED, STATUS_CROSSED, STATUS_EXHAUSTED = 0, 1, 2, 3


@dataclass
class SurvivalCurve:
    t_grid: np.ndarray
    survival: np.ndarray
    trials: int
    stderr: np.ndarray
    contamination_rate: float
    crossings: int = 0
    time_scale: str = "micro"

    def rows(self):
        return np.column_stack([self.t_grid, self.survival, self.stderr])


@dataclass
class TailFit:
    c_hat: float
    slope: float
    slope_ci: tuple
    fit_window: tuple
    plateau_ratio: float


def survival_from_taus(taus: np.ndarray, t_grid) -> tuple[np.ndarray, np.ndarray]:
    t_grid = np.asarray(t_grid, dtype=float)
    taus = np.sort(np.asarray(taus, dtype=float))
    m = len(taus)
    if m == 0:
        raise DegenerateFitError("no usable trials")
    p = (m - np.searchsorted(taus, t_grid, side="right")) / m
    return p, np.sqrt(p * (1 - p) / m)


def difference_process(sys, u, w, last_level: int | None = None) -> np.ndarray:
    """``Z = X^w - X^u`` at successive levels for starts on a common level."""
    (ku, xu), (kw, xw) = u, w
    if ku != kw:
        raise ParameterError("both starts must sit on the same level")
    if xw < xu:
        raise ParameterError("need w >= u")
    pu = path_from(sys, (ku, xu), last_level)
    pw = path_from(sys, (kw, xw), last_level)
    return pw.positions - pu.positions


def _levels_for(n, alpha, start_level, horizon):
    """Extension depth so that ``horizon`` of level time fits after ``start_level``."""
    lt = micro_times(n, alpha)
    k_n = level_count(n, alpha)
    if not 0 <= start_level <= k_n + 1:
        raise ParameterError(f"start level must lie in 0..{k_n + 1}")
    need = lt[start_level] + horizon - lt[-1]
    step = lt[-1] - lt[-2]
    return max(0, int(math.ceil(need / step)) + 2)


def _tau_chunk(n, alpha, d, start_level, horizon, window, seed, extra, lo, hi):
    lam = micro_intensities(n, alpha, extra)
    lt = micro_times(n, alpha, extra)
    taus = np.empty(hi - lo)
    status = np.empty(hi - lo, dtype=np.int64)
    for i in range(lo, hi):
        gen = RngStream(seed, i, LABEL_MARKS).generator()
        taus[i - lo], status[i - lo] = _kernels.pair_tau(
            gen, lam, lt, start_level, 0.0, float(d), float(horizon), float(window))
    return taus, status


def sample_taus(n, alpha, d, start_level, horizon, trials, seed, window=None, workers=1):
    """Raw coalescence times (level-time units) and per-trial status codes."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if d < 0:
        raise ParameterError("separation must be >= 0")
    extra = _levels_for(n, alpha, start_level, horizon)
    if window is None:
        window = max(20.0 * math.sqrt(horizon), 10.0 * math.sqrt(n)) + d
    fn = partial(_tau_chunk, n, alpha, float(d), int(start_level), float(horizon),
                 float(window), int(seed), extra)
    return map_trials(fn, int(trials), workers)


def sample_tau(n, alpha, d, start_level, t_grid, trials, seed, window=None, workers=1,
               time_scale: str = "micro") -> SurvivalCurve:
    """Survival curve ``P[tau > t]`` of a pair started ``d`` apart on ``start_level``.

    With ``time_scale="levels"`` times count levels instead of level time.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if time_scale not in ("micro", "levels"):
        raise ParameterError("time_scale is 'micro' or 'levels'")
    horizon = float(t_grid.max())
    if time_scale == "levels":
        L = int(math.ceil(horizon))
        lt = micro_times(n, alpha, L + 2)
        horizon = float(lt[start_level + L] - lt[start_level])
    taus, status = sample_taus(n, alpha, d, start_level, horizon, trials, seed, window, workers)
    if time_scale == "levels":
        # the kernel reports lt[j] - lt[k0], so the level index is an exact lookup
        fin = np.isfinite(taus)
        taus = taus.copy()
        taus[fin] = np.searchsorted(lt - lt[start_level], taus[fin]) - start_level
    good = status == STATUS_OK
    if np.any(status == STATUS_EXHAUSTED):
        raise ParameterError("level extension too short for the time grid")
    p, se = survival_from_taus(taus[good], t_grid)
    return SurvivalCurve(t_grid, p, int(good.sum()), se,
                         float(np.mean(status == STATUS_CONTAMINATED)),
                         int(np.sum(status == STATUS_CROSSED)), time_scale)


def fit_tail(curve: SurvivalCurve, window) -> TailFit:
    """Log-log slope and ``max sqrt(t) p(t)`` on the grid points inside ``window``."""
    t, p = curve.t_grid, curve.survival
    lo, hi = float(window[0]), float(window[1])
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 2:
        raise DegenerateFitError("fit window holds fewer than two grid points")
    t, p = t[sel], p[sel]
    if np.any(p <= 0):
        raise DegenerateFitError("survival vanishes inside the fit window")
    scaled = np.sqrt(t) * p
    reg = stats.linregress(np.log(t), np.log(p))
    half = 1.96 * reg.stderr
    return TailFit(float(scaled.max()), float(reg.slope), (reg.slope - half, reg.slope + half),
                   (lo, hi), float(scaled.max() / np.median(scaled)))


@dataclass
class SeparationRow:
    d: float
    survival: float
    stderr: float
    trials: int


def separation_scan(n, alpha, separations, t_fixed, trials, seed, start_level=0, workers=1):
    """Survival at ``t_fixed`` for each initial separation (independent runs)."""
    rows = []
    for i, d in enumerate(separations):
        if d == 0:
            rows.append(SeparationRow(0.0, 0.0, 0.0, int(trials)))
            continue
        c = sample_tau(n, alpha, d, start_level, [t_fixed], trials, seed + 7919 * (i + 1),
                       workers=workers)
        rows.append(SeparationRow(float(d), float(c.survival[0]), float(c.stderr[0]), c.trials))
    return rows


@dataclass
class DriftReport:
    edges: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: np.ndarray
    transitions: int
    negative: int
    min_count: int = 500

    @property
    def passed(self) -> bool:
        ok = self.count >= self.min_count
        return bool(np.all(np.abs(self.mean[ok]) < 3 * self.stderr[ok]) and self.negative == 0)


def _walk_chunk(n, alpha, d, start_level, nlev, seed, lo, hi):
    lam = micro_intensities(n, alpha, nlev + 2)
    zs = np.empty((hi - lo, nlev + 1))
    for i in range(lo, hi):
        gen = RngStream(seed, i, LABEL_MARKS).generator()
        _kernels.pair_walk(gen, lam, start_level, 0.0, float(d), nlev, zs[i - lo])
    return zs


def drift_test(n, alpha, d, nlev, trials, seed, start_level=0, bins=8, workers=1,
               min_count=500) -> DriftReport:
    """Binned conditional mean of ``Z_next - Z`` given ``Z`` (positive ``Z`` only)."""
    if not 0 <= start_level <= level_count(n, alpha) + 1:
        raise ParameterError("start level out of range")
    zs = map_trials(partial(_walk_chunk, n, alpha, float(d), int(start_level), int(nlev), int(seed)),
                    int(trials), workers)
    z, dz = zs[:, :-1].ravel(), np.diff(zs, axis=1).ravel()
    live = z > 0
    z, dz = z[live], dz[live]
    edges = np.unique(np.quantile(z, np.linspace(0, 1, bins + 1)))
    which = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, len(edges) - 2)
    k = len(edges) - 1
    cnt = np.bincount(which, minlength=k)
    s1 = np.bincount(which, dz, minlength=k)
    s2 = np.bincount(which, dz * dz, minlength=k)
    mean = s1 / np.maximum(cnt, 1)
    var = s2 / np.maximum(cnt, 1) - mean ** 2
    se = np.sqrt(var * cnt / np.maximum(cnt - 1, 1) / np.maximum(cnt, 1))
    return DriftReport(edges, mean, se, cnt, int(live.sum()), int(np.sum(zs < 0)), min_count)
