"""Noisy four-point concave/convex shape samples."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ETA_MAX = 0.25
CONCAVE_NOMINAL = (1.0, -1.0, -1.0, 1.0)
CONVEX_NOMINAL = (-1.0, 1.0, 1.0, -1.0)


class Label(str, enum.Enum):
    CONCAVE = "concave"
    CONVEX = "convex"

    @property
    def target(self) -> float:
        """Desired network output: +1 for concave, -1 for convex."""
        return 1.0 if self is Label.CONCAVE else -1.0

    @property
    def nominal(self) -> tuple:
        return CONCAVE_NOMINAL if self is Label.CONCAVE else CONVEX_NOMINAL


@dataclass(frozen=True)
class Sample:
    x: tuple
    label: Label

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "label", Label(self.label))


def generate(count_per_class: int, eta: float, rng: np.random.Generator) -> list[Sample]:
    """``2 * count_per_class`` samples, alternating concave and convex.

    Every coordinate of the nominal pattern is shifted by ``eta * n`` with
    ``n`` drawn uniformly from [-1, 1], four consecutive draws per sample.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if count_per_class < 0:
        raise ValueError("count_per_class must be >= 0")
    samples = []
    for _ in range(count_per_class):
        for label in (Label.CONCAVE, Label.CONVEX):
            n = rng.uniform(-1.0, 1.0, 4)
            samples.append(Sample(np.asarray(label.nominal) + eta * n, label))
    return samples


def scale_for_input(sample: Sample | Sequence[float]) -> np.ndarray:
    """Map sample values into the +-1 V non-disturbing input range."""
    x = sample.x if isinstance(sample, Sample) else sample
    return np.asarray(x, dtype=float) / (1.0 + ETA_MAX)


def to_arrays(samples: Iterable[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Scaled input matrix ``(P, 4)`` and target matrix ``(P, 1)``."""
    samples = list(samples)
    if not samples:
        raise ValueError("dataset is empty")
    X = np.array([scale_for_input(s) for s in samples])
    D = np.array([[s.label.target] for s in samples])
    return X, D


def labels_of(samples: Iterable[Sample]) -> list[Label]:
    return [s.label for s in samples]


def nominal_samples() -> list[Sample]:
    return [Sample(CONCAVE_NOMINAL, Label.CONCAVE), Sample(CONVEX_NOMINAL, Label.CONVEX)]


def to_csv(samples: Iterable[Sample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x0", "x1", "x2", "x3", "label"])
    for s in samples:
        writer.writerow([repr(v) for v in s.x] + [s.label.value])
    return buf.getvalue()


def from_csv(text: str) -> list[Sample]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["x0", "x1", "x2", "x3", "label"]:
        raise ValueError(f"unexpected dataset header {reader.fieldnames}")
    return [
        Sample([float(row[f"x{i}"]) for i in range(4)], Label(row["label"].strip().lower()))
        for row in reader
    ]
