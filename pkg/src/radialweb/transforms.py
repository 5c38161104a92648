"""Coordinate maps and path metrics.

Covers diffusive rescaling, polar unrolling, the strip homeomorphism and its
lift to path families, the compactified sup distance between paths with
birth times, and Hausdorff distances built on it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _jsonio
from .errors import DomainError

DEFAULT_T_RESOLUTION = 512


@dataclass
class PlanarPath:
    """Piecewise-linear path ``t -> x(t)`` born at ``sigma``.

    Below ``sigma`` the path is extended by its starting value; after the last
    sample it is held constant.
    """

    sigma: float
    times: np.ndarray
    positions: np.ndarray
    tag: object = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if self.times.shape != self.positions.shape or self.times.ndim != 1:
            raise DomainError("times and positions must be 1-d and of equal length")
        if len(self.times) == 0:
            raise DomainError("a path needs at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("sample times must be strictly increasing")

    def __call__(self, t):
        return np.interp(t, self.times, self.positions)

    @property
    def end(self) -> float:
        return float(self.times[-1])


@dataclass
class PlanarPathFamily:
    strip: tuple
    paths: list = field(default_factory=list)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def to_json(self, indent=None) -> str:
        doc = {
            "strip": [float(self.strip[0]), float(self.strip[1])],
            "paths": [
                {"sigma": p.sigma, "samples": np.column_stack([p.times, p.positions])}
                for p in self.paths
            ],
        }
        return _jsonio.dumps(doc, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "PlanarPathFamily":
        doc = _jsonio.loads(text)
        paths = []
        for p in doc["paths"]:
            s = np.asarray(p["samples"], dtype=float).reshape(-1, 2)
            paths.append(PlanarPath(float(p["sigma"]), s[:, 0], s[:, 1]))
        return cls((float(doc["strip"][0]), float(doc["strip"][1])), paths)


def _radial_to_planar(fam) -> PlanarPathFamily:
    """Height is the time axis; every restricted radial path must be a graph."""
    n, alpha = fam.params.n, fam.params.alpha
    paths = []
    for k, i in fam.starts():
        p = fam.path(k, i)
        t, x = p.nodes[:, 1], p.nodes[:, 0]
        if np.any(np.diff(t) <= 0):
            raise DomainError(f"path from circle {k} is not a graph over height")
        paths.append(PlanarPath(float(t[0]), t, x, tag=(k, i)))
    return PlanarPathFamily((-float(n), -float(n) * alpha), paths)


def rescale_diffusive(fam, n: int) -> PlanarPathFamily:
    """Map every node ``(x, t)`` to ``(x / sqrt(n), t / n)``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not isinstance(fam, PlanarPathFamily):
        fam = _radial_to_planar(fam)
    sx, st = 1.0 / np.sqrt(n), 1.0 / n
    paths = [PlanarPath(p.sigma * st, p.times * st, p.positions * sx, p.tag) for p in fam]
    return PlanarPathFamily((fam.strip[0] * st, fam.strip[1] * st), paths)


def rescale_points(z, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.stack([z[..., 0] / np.sqrt(n), z[..., 1] / n], axis=-1)


def map_lambda(z) -> np.ndarray:
    """Unroll polar coordinates: ``r (sin a, -cos a) -> (r a, -r)``."""
    z = np.asarray(z, dtype=float)
    if np.any(z[..., 1] >= 0):
        raise DomainError("map_lambda needs points with negative height")
    r = np.hypot(z[..., 0], z[..., 1])
    a = np.arctan2(z[..., 0], -z[..., 1])
    return np.stack([r * a, -r], axis=-1)


def map_psi(x, t):
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise DomainError("map_psi is undefined at t = 0")
    at = np.abs(t)
    return np.asarray(x, dtype=float) / at, 1.0 / at - 1.0


def map_psi_inv(xp, tp):
    tp = np.asarray(tp, dtype=float)
    if np.any(tp <= -1):
        raise DomainError("map_psi_inv needs t' > -1")
    return np.asarray(xp, dtype=float) / (tp + 1.0), -1.0 / (tp + 1.0)


def _uniform_grid(a, b, resolution):
    m = max(1, int(np.ceil((b - a) * resolution)))
    return np.linspace(a, b, m + 1)


def map_T(fam: PlanarPathFamily, resolution: int = DEFAULT_T_RESOLUTION,
          atol: float = 1e-12) -> PlanarPathFamily:
    """Push a family on ``[-1, -alpha]`` through ``psi``, resampled on a uniform t' grid."""
    r, s = fam.strip
    if abs(r + 1.0) > atol or not -1.0 < s < 0.0:
        raise DomainError(f"map_T needs the strip [-1, -alpha], got {fam.strip}")
    alpha = -s
    out = []
    for p in fam:
        _, sig = map_psi(0.0, p.sigma)
        _, tend = map_psi(0.0, p.end)
        grid = _uniform_grid(float(sig), float(tend), resolution)
        _, t = map_psi_inv(0.0, grid)
        xp, _ = map_psi(p(t), t)
        out.append(PlanarPath(float(sig), grid, xp, p.tag))
    return PlanarPathFamily((0.0, 1.0 / alpha - 1.0), out)


def map_T_inv(fam: PlanarPathFamily, resolution: int = DEFAULT_T_RESOLUTION,
              atol: float = 1e-12) -> PlanarPathFamily:
    r, s = fam.strip
    if abs(r) > atol or not s > 0:
        raise DomainError(f"map_T_inv needs the strip [0, 1/alpha - 1], got {fam.strip}")
    alpha = 1.0 / (s + 1.0)
    out = []
    for p in fam:
        _, sig = map_psi_inv(0.0, p.sigma)
        _, tend = map_psi_inv(0.0, p.end)
        grid = _uniform_grid(float(sig), float(tend), resolution)
        tp = 1.0 / np.abs(grid) - 1.0
        x, _ = map_psi_inv(p(tp), tp)
        out.append(PlanarPath(float(sig), grid, x, p.tag))
    return PlanarPathFamily((-1.0, -alpha), out)


def _compress(x, t):
    return np.tanh(x) / (1.0 + np.abs(t))


def path_distance(p1: PlanarPath, p2: PlanarPath, strip, refine: int = 1) -> float:
    """Sup distance between two paths in compactified coordinates.

    The sup over time is taken on the union of both sample grids and the
    strip ends, with ``refine`` levels of midpoint refinement.
    """
    r, s = float(strip[0]), float(strip[1])
    grid = np.concatenate([p1.times, p2.times, [r, s, p1.sigma, p2.sigma]])
    grid = np.unique(grid[(grid >= r) & (grid <= s)])
    for _ in range(refine):
        if len(grid) > 1:
            grid = np.unique(np.concatenate([grid, 0.5 * (grid[1:] + grid[:-1])]))
    d = np.max(np.abs(_compress(p1(grid), grid) - _compress(p2(grid), grid)))
    return float(max(d, abs(np.tanh(p1.sigma) - np.tanh(p2.sigma))))


def distance_matrix(K1, K2, strip, refine: int = 1) -> np.ndarray:
    D = np.empty((len(K1), len(K2)))
    for i, a in enumerate(K1):
        for j, b in enumerate(K2):
            D[i, j] = path_distance(a, b, strip, refine)
    return D


def family_hausdorff(K1: PlanarPathFamily, K2: PlanarPathFamily, refine: int = 1) -> float:
    if len(K1) == 0 or len(K2) == 0:
        raise DomainError("Hausdorff distance is undefined for an empty family")
    if not np.allclose(K1.strip, K2.strip):
        raise DomainError("families live on different strips")
    D = distance_matrix(list(K1), list(K2), K1.strip, refine)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def planar_hausdorff(A, B) -> float:
    """Euclidean Hausdorff distance between two finite point sets."""
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    if len(A) == 0 or len(B) == 0:
        raise DomainError("Hausdorff distance needs nonempty point sets")
    dab, _ = cKDTree(B).query(A)
    dba, _ = cKDTree(A).query(B)
    return float(max(dab.max(), dba.max()))


def densify_segments(a, b, step: float):
    """Points along each segment ``a[i] -> b[i]`` at spacing at most ``step``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = np.hypot(*(b - a).T)
    m = np.maximum(1, np.ceil(length / step).astype(np.int64))
    seg = np.repeat(np.arange(len(a)), m)
    first = np.repeat(np.cumsum(m) - m, m)
    frac = (np.arange(len(seg)) - first) / m[seg]
    pts = a[seg] + frac[:, None] * (b[seg] - a[seg])
    return np.concatenate([pts, b[length > 0][-1:] if len(b) else b])


def lambda_discrepancy(fam, step: float | None = None) -> float:
    """Hausdorff distance between the rescaled web and its polar unrolling.

    Segments are resampled after rescaling, at spacing at most ``step``
    (default ``n**-0.5``); the unrolled cloud is the image of the same points
    under the polar unrolling taken in model coordinates.
    """
    n = fam.params.n
    step = n ** -0.5 if step is None else step
    a, b = fam.edges()
    if len(a) == 0:
        raise DomainError("family has no segments")
    # resample in rescaled coordinates, where the step is prescribed
    cloud = densify_segments(rescale_points(a, n), rescale_points(b, n), step)
    cloud = cloud[cloud[:, 1] < 0]
    model = np.stack([cloud[:, 0] * np.sqrt(n), cloud[:, 1] * n], axis=-1)
    unrolled = rescale_points(map_lambda(model), n)
    shift = np.hypot(*(cloud - unrolled).T)
    # a point's own image bounds its nearest distance, so points are visited
    # by decreasing shift and the search stops once no larger value is possible
    order = np.argsort(-shift)
    best = 0.0
    for src, dst in ((cloud, unrolled), (unrolled, cloud)):
        tree = cKDTree(dst, balanced_tree=False, compact_nodes=False)
        for lo in range(0, len(order), 4096):
            idx = order[lo:lo + 4096]
            if shift[idx[0]] <= best:
                break
            ub = shift[idx[0]] * (1 + 1e-9) + 1e-15
            d, _ = tree.query(src[idx], distance_upper_bound=ub)
            best = max(best, float(d.max()))
    return best
