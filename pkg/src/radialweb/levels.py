"""Flat-level reformulation of the radial web.

Level ``j`` carries a Poisson process; every point joins the nearest mark of
the next level.  Positions are stored in microscopic units (rate
``(n - j) / n`` per unit length, level times ``l_j = n j / (n - j)``);
macroscopic positions and times are obtained by dividing by ``sqrt(n)`` and
``n`` respectively.

Levels are sampled lazily in fixed blocks whose randomness is addressed by
``(level, block)``, so a realisation does not depend on the order in which
it is explored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContaminationError, ParameterError
from .streams import LABEL_COINS, LABEL_MARKS, RngStream, sample_poisson_marks
from .transforms import PlanarPath


def level_count(n: int, alpha: float) -> int:
    return math.floor(n * (1 - alpha))


def micro_times(n: int, alpha: float, levels_beyond: int = 0) -> np.ndarray:
    """Level times ``l_j = n j / (n - j)`` for ``j = 0..k_n+1``.

    Extension levels past ``k_n + 1`` keep the last spacing.
    """
    k_n = level_count(n, alpha)
    j = np.arange(k_n + 2, dtype=float)
    lt = n * j / (n - j)
    if levels_beyond > 0:
        step = lt[-1] - lt[-2]
        lt = np.concatenate([lt, lt[-1] + step * np.arange(1, levels_beyond + 1)])
    return lt


def micro_intensities(n: int, alpha: float, levels_beyond: int = 0) -> np.ndarray:
    """Per-unit-length rates ``(n - j) / n``, frozen at ``(n - k_n) / n`` past ``k_n``."""
    k_n = level_count(n, alpha)
    j = np.arange(k_n + 2 + levels_beyond, dtype=float)
    return (n - np.minimum(j, k_n)) / n


@dataclass
class LevelPath:
    start: tuple
    levels: np.ndarray
    positions: np.ndarray
    micro_times: np.ndarray
    n: int

    def times(self, scale: str = "micro") -> np.ndarray:
        return self.micro_times if scale == "micro" else self.micro_times / self.n

    def macro_positions(self) -> np.ndarray:
        return self.positions / math.sqrt(self.n)

    def at(self, t: float, scale: str = "micro") -> float:
        return float(np.interp(t, self.times(scale), self.positions if scale == "micro"
                               else self.macro_positions()))

    def to_planar(self, scale: str = "macro") -> PlanarPath:
        pos = self.positions if scale == "micro" else self.macro_positions()
        t = self.times(scale)
        return PlanarPath(float(t[0]), t, pos, tag=self.start)


class LevelSystem:
    """One realisation of the level model.

    ``window`` bounds the region that may be explored: a query that needs
    marks beyond ``[-window, window]`` raises :class:`ContaminationError`.
    """

    def __init__(self, n: int, alpha: float, stream: RngStream | None = None,
                 window: float | None = None, levels_beyond: int = 0,
                 block_mean: float = 32.0, explicit: dict | None = None):
        if int(n) != n or n < 2:
            raise ParameterError("n must be an integer >= 2")
        if not 0 < alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")
        if levels_beyond < 0:
            raise ParameterError("levels_beyond must be >= 0")
        self.n = int(n)
        self.alpha = float(alpha)
        self.k_n = level_count(n, alpha)
        self.levels_beyond = int(levels_beyond)
        self.last_level = self.k_n + 1 + self.levels_beyond
        self.micro_times = micro_times(n, alpha, levels_beyond)
        self.intensities = micro_intensities(n, alpha, levels_beyond)
        horizon = self.micro_times[-1]
        self.window = float(window) if window is not None else max(
            20.0 * math.sqrt(horizon), 10.0 * math.sqrt(n))
        self.stream = stream
        self.block_mean = float(block_mean)
        self._explicit = {int(j): np.sort(np.asarray(v, float)) for j, v in (explicit or {}).items()}
        self._blocks: dict = {}
        self._succ: dict = {}
        self._coin_draws = 0

    @classmethod
    def from_levels(cls, n, alpha, levels: dict, window: float = 1e6, stream=None, **kw):
        """Fixture constructor: the given levels are exhaustive inside the window."""
        return cls(n, alpha, stream=stream, window=window, explicit=levels, **kw)

    # -- rates and times -------------------------------------------------
    def rate(self, j: int) -> float:
        """Macroscopic rate ``(n - j) / sqrt(n)`` (frozen past ``k_n``)."""
        return self.intensities[j] * self.n / math.sqrt(self.n)

    def intensity(self, j: int) -> float:
        return float(self.intensities[j])

    def micro_time(self, j: int) -> float:
        return float(self.micro_times[j])

    def macro_time(self, j: int) -> float:
        return float(self.micro_times[j]) / self.n

    # -- lazy marks ------------------------------------------------------
    def _check_level(self, j):
        if not 0 <= j <= self.last_level:
            raise ParameterError(f"level {j} outside 0..{self.last_level}")

    def block_length(self, j: int) -> float:
        return self.block_mean / self.intensity(j)

    def _block(self, j: int, b: int) -> np.ndarray:
        key = (j, b)
        got = self._blocks.get(key)
        if got is None:
            if self.stream is None:
                got = np.zeros(0)
            else:
                L = self.block_length(j)
                gen = self.stream.child(LABEL_MARKS).block_generator(j, b)
                got = sample_poisson_marks(self.intensity(j), (b * L, (b + 1) * L), gen).marks
                got = got[got < (b + 1) * L]
            self._blocks[key] = got
        return got

    def _need(self, x: float):
        if abs(x) > self.window:
            raise ContaminationError(f"exploration reached {x:.6g}, outside window {self.window:.6g}")

    def marks_in(self, j: int, lo: float, hi: float) -> np.ndarray:
        """All marks of level ``j`` in ``[lo, hi]``."""
        self._check_level(j)
        self._need(lo)
        self._need(hi)
        if j in self._explicit:
            m = self._explicit[j]
            return m[(m >= lo) & (m <= hi)]
        L = self.block_length(j)
        b0, b1 = math.floor(lo / L), math.floor(hi / L)
        parts = [self._block(j, b) for b in range(b0, b1 + 1)]
        m = np.concatenate(parts) if parts else np.zeros(0)
        return m[(m >= lo) & (m <= hi)]

    def level_marks(self, j: int, lo: float, hi: float):
        """Marks of level ``j`` on ``[lo, hi]`` as a macroscopic mark sequence."""
        from .streams import MarkSequence
        s = math.sqrt(self.n)
        return MarkSequence(self.marks_in(j, lo * s, hi * s) / s, self.rate(j), (lo, hi))

    def prev_mark(self, j: int, x: float):
        """Largest mark ``< x`` (None if the level is exhausted)."""
        self._check_level(j)
        if j in self._explicit:
            m = self._explicit[j]
            i = np.searchsorted(m, x, side="left")
            return float(m[i - 1]) if i > 0 else None
        L = self.block_length(j)
        b = math.floor(x / L)
        while True:
            self._need(b * L if b * L < x else x)
            m = self._block(j, b)
            m = m[m < x]
            if len(m):
                return float(m[-1])
            b -= 1
            if (b + 1) * L < -self.window:
                raise ContaminationError("no mark to the left inside the window")

    def next_mark(self, j: int, x: float):
        """Smallest mark ``>= x`` (None if the level is exhausted)."""
        self._check_level(j)
        if j in self._explicit:
            m = self._explicit[j]
            i = np.searchsorted(m, x, side="left")
            return float(m[i]) if i < len(m) else None
        L = self.block_length(j)
        b = math.floor(x / L)
        while True:
            m = self._block(j, b)
            m = m[m >= x]
            if len(m):
                self._need(float(m[0]))
                return float(m[0])
            b += 1
            if b * L > self.window:
                raise ContaminationError("no mark to the right inside the window")

    def coin(self, *address) -> int:
        """Fair tie-break bit; addressed coins are reproducible per site."""
        if self.stream is None:
            gen = np.random.default_rng(self._coin_draws)
        elif address:
            gen = self.stream.child(LABEL_COINS).block_generator(*address)
        else:
            gen = self.stream.child(LABEL_COINS).block_generator(2 ** 62, self._coin_draws)
        self._coin_draws += 1
        return int(gen.integers(0, 2))

    def nearest(self, j: int, x: float) -> float:
        lo = self.prev_mark(j, x)
        hi = self.next_mark(j, x)
        if lo is None and hi is None:
            raise ContaminationError(f"level {j} has no marks inside the window")
        if lo is None:
            return hi
        if hi is None:
            return lo
        dl, dr = x - lo, hi - x
        if dl < dr:
            return lo
        if dr < dl:
            return hi
        site = int(np.float64(x).view(np.int64)) & (2 ** 62 - 1)
        return hi if self.coin(j, site) == 1 else lo


def successor_level(sys: LevelSystem, j: int, x: float) -> float:
    """Nearest mark of level ``j + 1`` to position ``x`` at level ``j`` (memoised)."""
    key = (j, x)
    got = sys._succ.get(key)
    if got is None:
        if j + 1 > sys.last_level:
            raise ParameterError(f"level {j} is the last level")
        got = sys.nearest(j + 1, x)
        sys._succ[key] = got
    return got


def path_from(sys: LevelSystem, u, last_level: int | None = None) -> LevelPath:
    """Trajectory from ``u = (level, position)`` through the last level."""
    j0, x = int(u[0]), float(u[1])
    last = sys.last_level if last_level is None else int(last_level)
    if abs(x) > sys.window:
        raise ContaminationError("start outside the window")
    pos = [x]
    for j in range(j0, last):
        x = successor_level(sys, j, x)
        pos.append(x)
    levels = np.arange(j0, last + 1)
    return LevelPath((j0, float(u[1])), levels, np.array(pos), sys.micro_times[j0:last + 1], sys.n)


@dataclass(frozen=True)
class SpacingReport:
    spacings: np.ndarray
    min: float
    max: float
    bound: float
    asymptotic: float


def level_spacing(n: int, alpha: float) -> SpacingReport:
    """Gaps ``l_{j+1} - l_j = n^2 / ((n - j)(n - j - 1))`` for ``j = 0..k_n``."""
    k_n = level_count(n, alpha)
    j = np.arange(k_n + 1, dtype=float)
    sp = n * n / ((n - j) * (n - j - 1))
    bound = n * n / ((n - k_n) * (n - k_n - 1.0))
    return SpacingReport(sp, float(sp.min()), float(sp.max()), float(bound), 1.0 / alpha ** 2)


def cansado_bounds(n: int, alpha: float, eps: float):
    w = eps * math.sqrt(n)
    return alpha / 2 * w, 2 * math.e / alpha * w


def cansado_check(sys: LevelSystem, eps: float, k: int) -> bool:
    """Whether the count of level-``k`` marks in ``[0, eps sqrt(n)]`` is in range."""
    w = eps * math.sqrt(sys.n)
    if w > sys.window:
        raise ParameterError("window too small for this eps")
    lo, hi = cansado_bounds(sys.n, sys.alpha, eps)
    c = len(sys.marks_in(k, 0.0, w))
    return lo <= c <= hi


def cansado_violation_fraction(n: int, alpha: float, eps: float, stream: RngStream) -> float:
    """Fraction of levels ``1..k_n`` whose count falls outside the bounds.

    Counts are drawn directly as Poisson variables, which is exact for the
    number of marks of a homogeneous process in a fixed interval.
    """
    k_n = level_count(n, alpha)
    lam = micro_intensities(n, alpha)[1:k_n + 1]
    w = eps * math.sqrt(n)
    counts = stream.generator().poisson(lam * w)
    lo, hi = cansado_bounds(n, alpha, eps)
    return float(np.mean((counts < lo) | (counts > hi)))


# -- grid discretisation ------------------------------------------------------

@dataclass
class GridComparison:
    r: float
    cells: np.ndarray
    continuum_cells: np.ndarray

    @property
    def agree(self) -> np.ndarray:
        return self.cells == self.continuum_cells

    @property
    def agreement(self) -> int:
        return int(self.agree.sum())

    @property
    def fraction(self) -> float:
        return float(self.agree.mean())


def _cell(x: float, r: float) -> int:
    return math.floor(x / r)


def grid_step(sys: LevelSystem, j: int, c: int, r: float) -> int:
    """Nearest open cell of level ``j + 1`` to cell ``c``; ties use the site's coin."""
    left = sys.prev_mark(j + 1, r * (c + 1))
    right = sys.next_mark(j + 1, r * c)
    cl = _cell(left, r) if left is not None else None
    cr = _cell(right, r) if right is not None else None
    if cl is None:
        return cr
    if cr is None:
        return cl
    dl, dr = c - cl, cr - c
    if dl < dr:
        return cl
    if dr < dl:
        return cr
    if cl == cr:
        return cl
    return cr if sys.coin(j, c, int(round(-math.log2(r) * 1000))) == 1 else cl


def grid_path(sys: LevelSystem, r: float, a: float, last_level: int | None = None) -> np.ndarray:
    """Cells visited by the grid path started from ``r * floor(a / r)`` at level 0."""
    if not r > 0:
        raise ParameterError("grid pitch must be positive")
    last = sys.k_n if last_level is None else int(last_level)
    c = _cell(a, r)
    out = [c]
    for j in range(0, last):
        c = grid_step(sys, j, c, r)
        out.append(c)
    return np.array(out, dtype=np.int64)


def grid_paths(sys: LevelSystem, r: float, a: float, last_level: int | None = None) -> GridComparison:
    """Grid path next to the continuum path from ``(a, level 0)``, cell by cell."""
    last = sys.k_n if last_level is None else int(last_level)
    cells = grid_path(sys, r, a, last)
    cont = path_from(sys, (0, a), last).positions
    cont_cells = np.array([_cell(x, r) for x in cont], dtype=np.int64)
    return GridComparison(r, cells, cont_cells)


def open_site_fraction(sys: LevelSystem, j: int, r: float, lo: float, hi: float) -> float:
    """Fraction of cells ``[r i, r (i+1))`` inside ``[lo, hi)`` holding a mark."""
    c0, c1 = math.ceil(lo / r), math.floor(hi / r)
    if c1 <= c0:
        raise ParameterError("range holds no full cell")
    m = sys.marks_in(j, c0 * r, c1 * r)
    m = m[m < c1 * r]
    cells = np.unique(np.floor(m / r).astype(np.int64))
    return len(cells) / (c1 - c0)


def open_probability(n: int, j: int, r: float) -> float:
    return 1.0 - math.exp(-r * (n - j) / n)


def halvings_to_agreement(sys: LevelSystem, a: float, r0: float = 1.0, max_halvings: int = 40,
                          last_level: int | None = None):
    """Halve the pitch until the grid path matches the continuum path at every level.

    Returns ``(halvings, fractions)``; ``halvings`` is None when the budget
    runs out.
    """
    r = r0
    fractions = []
    for h in range(max_halvings + 1):
        cmp_ = grid_paths(sys, r, a, last_level)
        fractions.append(cmp_.fraction)
        if cmp_.agreement == len(cmp_.cells):
            return h, fractions
        r /= 2
    return None, fractions
