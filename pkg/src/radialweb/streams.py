"""Seeded random primitives.

Every random quantity in the package is drawn from a stream addressed by
``(master_seed, trial_index, substream_label)``.  Streams are derived with
:class:`numpy.random.SeedSequence` spawn keys and driven by the counter-based
Philox bit generator, so a trial's randomness never depends on which worker
ran it or in what order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# substream labels; circle/level indices are added to the *_BASE labels
LABEL_MARKS = 1
LABEL_COINS = 2
LABEL_OMEGA = 3
LABEL_COUNTS = 4
LABEL_CIRCLE_BASE = 1 << 20
LABEL_CIRCLE_COIN_BASE = 1 << 21

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    trial_index: int = 0
    substream_label: int = 0

    def __post_init__(self):
        if self.trial_index < 0 or self.substream_label < 0:
            raise ParameterError("trial_index and substream_label must be non-negative")

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.master_seed) & _MASK64,
            spawn_key=(int(self.trial_index), int(self.substream_label)),
        )

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def block_generator(self, *address: int) -> np.random.Generator:
        """Generator for a sub-block addressed by up to three integers.

        The address is written into the upper Philox counter words, so
        blocks are independent of each other and can be materialised in any
        order.
        """
        if len(address) > 3:
            raise ParameterError("block address has at most three components")
        key = self.seed_sequence().generate_state(2, np.uint64)
        counter = np.zeros(4, dtype=np.uint64)
        for i, a in enumerate(address):
            counter[i + 1] = np.uint64(int(a) & _MASK64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def child(self, label: int) -> "RngStream":
        return RngStream(self.master_seed, self.trial_index, label)

    def for_trial(self, trial_index: int) -> "RngStream":
        return RngStream(self.master_seed, trial_index, self.substream_label)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


@dataclass(frozen=True)
class MarkSequence:
    """Sorted marks of a homogeneous Poisson process restricted to a window."""

    marks: np.ndarray
    rate: float
    window: tuple[float, float]

    def __len__(self):
        return len(self.marks)

    def count_in(self, a: float, b: float) -> int:
        lo = np.searchsorted(self.marks, a, side="left")
        hi = np.searchsorted(self.marks, b, side="right")
        return int(hi - lo)


def _check_rate(rate):
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")


def sample_poisson_marks(rate: float, window, rng) -> MarkSequence:
    """Homogeneous Poisson process of intensity ``rate`` on ``window = (a, b)``.

    Marks are generated by accumulating exponential gaps from the left
    endpoint, in batches sized from the expected count.
    """
    _check_rate(rate)
    a, b = float(window[0]), float(window[1])
    if b < a:
        raise ParameterError(f"inverted window [{a}, {b}]")
    gen = as_generator(rng)
    mean = rate * (b - a)
    pieces = []
    pos = a
    while True:
        batch = int(mean + 6.0 * np.sqrt(mean) + 16)
        gaps = gen.exponential(1.0 / rate, size=batch)
        pts = pos + np.cumsum(gaps)
        inside = pts[pts <= b]
        pieces.append(inside)
        if len(inside) < batch:
            break
        pos = pts[-1]
        mean = rate * (b - pos)
    marks = np.concatenate(pieces) if len(pieces) > 1 else pieces[0]
    return MarkSequence(marks, float(rate), (a, b))


def sample_nearest_mark(rate: float, rng, size=None):
    """Mark closest to the origin of a two-sided Poisson process.

    ``|omega|`` is exponential with parameter ``2*rate`` and its sign is an
    independent fair coin.
    """
    _check_rate(rate)
    gen = as_generator(rng)
    mag = gen.exponential(1.0 / (2.0 * rate), size=size)
    sign = 2 * gen.integers(0, 2, size=size) - 1
    return mag * sign


def flip_fair_coin(rng, size=None):
    return as_generator(rng).integers(0, 2, size=size)
