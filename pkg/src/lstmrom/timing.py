"""Wall-clock and query accounting for surrogate prediction."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimingStats:
    min: float
    mean: float
    max: float

    @classmethod
    def of(cls, values) -> "TimingStats":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return cls(0.0, 0.0, 0.0)
        return cls(float(v.min()), float(v.mean()), float(v.max()))


@dataclass
class TimingProbe:
    """Per-instance accumulators.

    ``t_nn`` covers network evaluations only; ``t_rec`` additionally covers the
    lift to full order and the inversion of the scaling.
    """

    stage: str = "predict"
    t_nn: list[float] = field(default_factory=list)
    t_rec: list[float] = field(default_factory=list)
    queries: list[int] = field(default_factory=list)

    def reset(self) -> None:
        self.t_nn.clear()
        self.t_rec.clear()
        self.queries.clear()

    def record(self, t_nn: float, t_rec: float, queries: int) -> None:
        self.t_nn.append(t_nn)
        self.t_rec.append(t_rec)
        self.queries.append(queries)

    def summary(self) -> dict:
        return {
            "t_nn": TimingStats.of(self.t_nn).__dict__,
            "t_rec": TimingStats.of(self.t_rec).__dict__,
            "queries_per_instance": list(self.queries),
        }


def timing_probe(stage: str) -> TimingProbe:
    return TimingProbe(stage)


class Stopwatch:
    """Accumulating ``perf_counter`` timer used as ``with sw.running(): ...``."""

    def __init__(self):
        self.elapsed = 0.0

    @contextmanager
    def running(self):
        t0 = time.perf_counter()
        try:
            yield self
        finally:
            self.elapsed += time.perf_counter() - t0
