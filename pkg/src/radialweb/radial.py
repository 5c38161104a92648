"""The discrete radial web: Poisson marks on concentric circles joined inward
by nearest-point rules, with origin jumps when the next circle has no usable
mark or the nearest one is too far sideways.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _jsonio
from .errors import ParameterError
from .streams import (
    LABEL_CIRCLE_BASE,
    LABEL_CIRCLE_COIN_BASE,
    RngStream,
    as_generator,
    sample_poisson_marks,
)

NORMAL, ORIGIN_EMPTY, ORIGIN_FAR = 0, 1, 2
EVENT_NAMES = ("normal", "origin_empty", "origin_far")

# float slack for points lifted from an angle exactly on a region boundary
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class ModelParams:
    n: int
    alpha: float
    delta: float
    kappa: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.25 < self.delta < 1.0 / 3.0:
            raise ParameterError(f"delta must lie in (1/4, 1/3), got {self.delta}")
        if not 0.0 < self.kappa < 0.5 - self.delta:
            raise ParameterError(
                f"kappa must lie in (0, 1/2 - delta) = (0, {0.5 - self.delta}), got {self.kappa}"
            )
        if math.floor(self.n * self.alpha) < 1:
            raise ParameterError(f"floor(n*alpha) must be >= 1 (n={self.n}, alpha={self.alpha})")

    @property
    def theta_n(self) -> float:
        return self.n ** (self.delta / 2 - 0.5)

    @property
    def phi_n(self) -> float:
        return self.n ** (self.delta - 0.5)

    @property
    def k_n(self) -> int:
        return math.floor(self.n * (1 - self.alpha))

    @property
    def inner(self) -> int:
        """Smallest circle that starts paths, floor(n*alpha)."""
        return math.floor(self.n * self.alpha)

    @property
    def lowest_circle(self) -> int:
        return max(1, self.inner - 1)

    @property
    def jump_gap(self) -> float:
        return self.n ** self.kappa

    def as_dict(self):
        return {"n": int(self.n), "alpha": float(self.alpha), "delta": float(self.delta),
                "kappa": float(self.kappa)}


@dataclass(frozen=True)
class RadialPoint:
    k: int
    x: float

    @property
    def cartesian(self) -> np.ndarray:
        return lift_to_circle(self.x, self.k)


def lift_to_circle(x, k):
    """Map an arc coordinate on the line to the circle of radius ``k``."""
    x = np.asarray(x, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ParameterError("circle radius must be >= 1")
    return np.stack([k * np.sin(x / k), -k * np.cos(x / k)], axis=-1)


def signed_angle(z):
    """Signed angle between z and the downward vertical."""
    z = np.asarray(z, dtype=float)
    return np.arctan2(z[..., 0], -z[..., 1])


def in_region(z, region: str, params: ModelParams):
    """Membership in the start region ``"B"`` or the admissible region ``"A"``."""
    if region not in ("A", "B", "A_n", "B_n"):
        raise ParameterError(f"unknown region {region!r}")
    width = params.phi_n if region.startswith("A") else params.theta_n
    z = np.asarray(z, dtype=float)
    x, y = z[..., 0], z[..., 1]
    n = params.n
    with np.errstate(invalid="ignore"):
        ok = (y < 0) & (y >= -n) & (y <= -n * params.alpha)
        ok &= np.hypot(x, y) <= n * (1 + _ANGLE_SLACK)
        ok &= np.abs(signed_angle(z)) <= width / 2 * (1 + _ANGLE_SLACK)
    return bool(ok) if ok.ndim == 0 else ok


@dataclass(frozen=True)
class Next:
    point: np.ndarray
    index: int | None = None


@dataclass(frozen=True)
class OriginJump:
    reason: str


def _pick_nearest(z, cand, coin_fn):
    """Index of the candidate nearest to z; exact ties go right on coin 1."""
    d2 = np.sum((cand - z) ** 2, axis=-1)
    best = np.flatnonzero(d2 == d2.min())
    if len(best) == 1:
        return int(best[0])
    # candidates are ordered by angle, so the last tied one is the rightmost
    return int(best[-1]) if coin_fn() == 1 else int(best[0])


def successor_radial(z, next_marks, params: ModelParams, coin):
    """One step of the path rules from cartesian point ``z``.

    ``next_marks`` holds the cartesian points of the next circle that lie in
    the admissible region, ordered by angle.
    """
    next_marks = np.asarray(next_marks, dtype=float).reshape(-1, 2)
    if len(next_marks) == 0:
        return OriginJump("origin_empty")
    gen = None

    def coin_fn():
        nonlocal gen
        if gen is None:
            gen = as_generator(coin)
        return int(gen.integers(0, 2))

    z = np.asarray(z, dtype=float)
    i = _pick_nearest(z, next_marks, coin_fn)
    if abs(z[0] - next_marks[i, 0]) > params.jump_gap:
        return OriginJump("origin_far")
    return Next(next_marks[i], i)


@dataclass
class CircleLayer:
    """Admissible marks of one circle and their outgoing edges."""

    k: int
    x: np.ndarray  # arc coordinates, sorted
    in_b: np.ndarray  # start-region membership
    succ: np.ndarray  # index into layer k-1, or -1 for an origin jump
    event: np.ndarray  # NORMAL / ORIGIN_EMPTY / ORIGIN_FAR

    @property
    def cart(self) -> np.ndarray:
        if len(self.x) == 0:
            return np.zeros((0, 2))
        return lift_to_circle(self.x, self.k)


@dataclass
class RadialPath:
    start: RadialPoint
    nodes: np.ndarray
    rule_events: list = field(default_factory=list)
    circles: np.ndarray | None = None

    def __len__(self):
        return len(self.nodes)


@dataclass
class RadialFamily:
    """All paths of one realisation, stored as a shared successor forest.

    Paths are materialised on demand; two paths that reach the same mark
    share every later node because they follow the same ``succ`` entries.
    """

    params: ModelParams
    layers: dict
    restricted: bool = False

    @property
    def circles(self):
        return sorted(self.layers)

    def starts(self):
        """(k, i) for every start mark, outermost circle first."""
        out = []
        for k in sorted(self.layers, reverse=True):
            if k < self.params.inner:
                continue
            layer = self.layers[k]
            out.extend((k, int(i)) for i in np.flatnonzero(layer.in_b))
        return out

    def __len__(self):
        return len(self.starts())

    def _end_point(self, z):
        if not self.restricted:
            return np.zeros(2)
        top = -self.params.n * self.params.alpha
        if z[1] >= top:
            return np.array(z, dtype=float)
        return np.asarray(z, dtype=float) * (top / z[1])

    def path(self, k: int, i: int) -> RadialPath:
        nodes, events, circles = [], [], []
        start = RadialPoint(k, float(self.layers[k].x[i]))
        while True:
            layer = self.layers[k]
            z = lift_to_circle(layer.x[i], k)
            nodes.append(z)
            circles.append(k)
            s = int(layer.succ[i])
            events.append(EVENT_NAMES[int(layer.event[i])])
            if s < 0:
                end = self._end_point(z)
                if not np.array_equal(end, z):
                    nodes.append(end)
                    circles.append(-1)
                else:
                    events.pop()
                break
            k, i = k - 1, s
        return RadialPath(start, np.array(nodes), events, np.array(circles))

    @property
    def paths(self):
        return [self.path(k, i) for k, i in self.starts()]

    def reachable(self) -> dict:
        """Mask per circle of marks visited by some path."""
        reach = {}
        ks = sorted(self.layers, reverse=True)
        carry = None
        for k in ks:
            layer = self.layers[k]
            r = layer.in_b.copy() if k >= self.params.inner else np.zeros(len(layer.x), bool)
            if carry is not None:
                r[carry] = True
            reach[k] = r
            s = layer.succ[r]
            carry = s[s >= 0]
        return reach

    def event_counts(self) -> dict:
        """Step counts by rule over the forest edges visited by paths."""
        reach = self.reachable()
        counts = {name: 0 for name in EVENT_NAMES}
        for k, r in reach.items():
            ev = self.layers[k].event[r]
            for code, name in enumerate(EVENT_NAMES):
                counts[name] += int(np.count_nonzero(ev == code))
        return counts

    def event_frequency(self) -> float:
        c = self.event_counts()
        steps = sum(c.values())
        return (c["origin_empty"] + c["origin_far"]) / steps if steps else 0.0

    def path_angles(self, k: int, i: int, through_jumps: bool = True) -> dict:
        """Angle at every circle crossed; an origin jump keeps its angle.

        With ``through_jumps=False`` the straight segment of an origin jump
        is left out.
        """
        out = {}
        lo = self.params.lowest_circle
        while True:
            layer = self.layers[k]
            a = float(layer.x[i]) / k
            out[k] = a
            s = int(layer.succ[i])
            if s < 0:
                if through_jumps:
                    for kk in range(k - 1, lo - 1, -1):
                        out[kk] = a
                return out
            k, i = k - 1, s

    def edges(self):
        """Unique segments (start, end) of the forest restricted to visited marks."""
        reach = self.reachable()
        a_parts, b_parts = [], []
        for k in sorted(self.layers, reverse=True):
            layer = self.layers[k]
            r = reach[k]
            if not r.any():
                continue
            z = lift_to_circle(layer.x[r], k)
            s = layer.succ[r]
            end = np.zeros_like(z)
            has = s >= 0
            if has.any():
                end[has] = lift_to_circle(self.layers[k - 1].x[s[has]], k - 1)
            jump = ~has
            if jump.any():
                end[jump] = np.array([self._end_point(p) for p in z[jump]]).reshape(-1, 2)
            keep = ~np.all(end == z, axis=1)
            a_parts.append(z[keep])
            b_parts.append(end[keep])
        if not a_parts:
            return np.zeros((0, 2)), np.zeros((0, 2))
        return np.concatenate(a_parts), np.concatenate(b_parts)

    def to_json(self, indent=None) -> str:
        circles = []
        for k in self.circles:
            layer = self.layers[k]
            circles.append({
                "k": int(k),
                "marks": layer.x,
                "start": layer.in_b.astype(int),
                "successor": layer.succ,
                "event": layer.event,
            })
        paths = []
        for k, i in self.starts():
            p = self.path(k, i)
            paths.append({
                "start": [int(k), p.start.x],
                "nodes": p.nodes,
                "rule_events": p.rule_events,
            })
        doc = {
            "params": self.params.as_dict(),
            "restricted": self.restricted,
            "circles": circles,
            "paths": paths,
        }
        return _jsonio.dumps(doc, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "RadialFamily":
        doc = _jsonio.loads(text)
        params = ModelParams(**doc["params"])
        layers = {}
        for c in doc["circles"]:
            layers[int(c["k"])] = CircleLayer(
                int(c["k"]),
                np.asarray(c["marks"], dtype=float),
                np.asarray(c["start"], dtype=bool),
                np.asarray(c["successor"], dtype=np.int64),
                np.asarray(c["event"], dtype=np.int8),
            )
        return cls(params, layers, bool(doc.get("restricted", False)))


def _link(layer: CircleLayer, below: CircleLayer | None, params: ModelParams, coin_stream):
    m = len(layer.x)
    layer.succ = np.full(m, -1, dtype=np.int64)
    layer.event = np.full(m, ORIGIN_EMPTY, dtype=np.int8)
    if m == 0 or below is None or len(below.x) == 0:
        return
    k = layer.k
    ang = layer.x / k
    nxt = below.x / (k - 1)
    z = layer.cart
    w = below.cart
    j = np.searchsorted(nxt, ang)
    left = np.clip(j - 1, 0, len(nxt) - 1)
    right = np.clip(j, 0, len(nxt) - 1)
    dl = np.sum((w[left] - z) ** 2, axis=1)
    dr = np.sum((w[right] - z) ** 2, axis=1)
    pick = np.where(dr < dl, right, left)
    tie = (dr == dl) & (left != right)
    if tie.any():
        coins = coin_stream.generator().integers(0, 2, size=int(tie.sum()))
        pick[tie] = np.where(coins == 1, right[tie], left[tie])
    far = np.abs(z[:, 0] - w[pick, 0]) > params.jump_gap
    layer.succ = np.where(far, -1, pick).astype(np.int64)
    layer.event = np.where(far, ORIGIN_FAR, NORMAL).astype(np.int8)


def build_drpw(params: ModelParams, stream: RngStream, full_circle: bool = False) -> RadialFamily:
    """Sample one realisation of the radial web.

    Each circle ``k`` carries a rate-1 Poisson process on the arc line.  By
    default only the arc that can meet the admissible region is sampled;
    ``full_circle=True`` samples ``[-k*pi, k*pi]`` and filters, which gives the
    same law at a much higher cost.
    """
    layers = {}
    half = params.phi_n / 2 * (1 + 1e-9)
    for k in range(params.lowest_circle, params.n + 1):
        s = stream.child(LABEL_CIRCLE_BASE + k)
        span = k * math.pi if full_circle else min(k * half, k * math.pi)
        marks = sample_poisson_marks(1.0, (-span, span), s).marks
        cart = lift_to_circle(marks, k) if len(marks) else np.zeros((0, 2))
        keep = in_region(cart, "A", params) if len(marks) else np.zeros(0, bool)
        x = marks[keep]
        in_b = in_region(cart[keep], "B", params) if len(x) else np.zeros(0, bool)
        layers[k] = CircleLayer(k, x, np.asarray(in_b, bool), None, None)
    for k in sorted(layers):
        below = layers.get(k - 1)
        _link(layers[k], below, params, stream.child(LABEL_CIRCLE_COIN_BASE + k))
    return RadialFamily(params, layers)


def restrict_family(fam: RadialFamily, params: ModelParams | None = None) -> RadialFamily:
    """Clip every path to the strip of heights ``[-n, -n*alpha]``."""
    params = params or fam.params
    return replace(fam, params=params, restricted=True)


def crossing_count(fam: RadialFamily, pairs, through_jumps: bool = True) -> int:
    """Number of path pairs whose angular order flips strictly somewhere.

    Straight origin-jump segments can be crossed by neighbours that keep
    walking the circles; ``through_jumps=False`` compares only circles that
    both paths visit by rule steps.
    """
    bad = 0
    for (k1, i1), (k2, i2) in pairs:
        a1 = fam.path_angles(k1, i1, through_jumps)
        a2 = fam.path_angles(k2, i2, through_jumps)
        common = sorted(set(a1) & set(a2), reverse=True)
        sign = 0
        for c in common:
            d = a1[c] - a2[c]
            s = (d > 0) - (d < 0)
            if s == 0:
                continue
            if sign == 0:
                sign = s
            elif s != sign:
                bad += 1
                break
    return bad
