"""Outcome containers shared by the counting simulators and the estimators.

Two kinds of outcome families appear throughout: joint photon-number pairs
(n1, n2) from number-resolving detectors, and the four coarse on-off symbols
from click/no-click detectors. The on-off symbols are encoded as two-character
strings, one character per detector: "0" for no click, "c" for a click.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

#: Fixed on-off symbol order used everywhere (probabilities, samplers, tallies).
ON_OFF_SYMBOLS = ("00", "0c", "c0", "cc")

ON_OFF_INDEX = {s: i for i, s in enumerate(ON_OFF_SYMBOLS)}


@dataclass(frozen=True)
class OnOffProbs:
    """Probabilities of the four joint click/no-click outcomes."""

    p00: float
    p0c: float
    pc0: float
    pcc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p00, self.p0c, self.pc0, self.pcc])

    def validate(self, tol: float = 1e-9) -> None:
        p = self.as_array()
        if np.any(p < -tol) or np.any(p > 1 + tol):
            raise ValueError(f"on-off probabilities outside [0, 1]: {p}")
        if abs(p.sum() - 1.0) > tol:
            raise ValueError(f"on-off probabilities sum to {p.sum()}, not 1")


@dataclass
class OutcomeDistribution:
    """Probability table over a discrete outcome family.

    ``support`` holds the outcomes: (n1, n2) integer pairs for joint counting,
    plain integers for single-detector counting, or the on-off symbols.
    """

    support: list = field(repr=False)
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.support) != self.probs.size:
            raise ValueError("support and probs lengths differ")

    @classmethod
    def from_pair_table(cls, table: np.ndarray) -> "OutcomeDistribution":
        """Build a pair distribution from a (dim1, dim2) probability table."""
        table = np.asarray(table, dtype=float)
        d1, d2 = table.shape
        support = [(n1, n2) for n1 in range(d1) for n2 in range(d2)]
        return cls(support=support, probs=table.ravel().copy())

    def pair_table(self) -> np.ndarray:
        """Return the (dim1, dim2) table; only valid for pair support."""
        d1 = max(n1 for n1, _ in self.support) + 1
        d2 = max(n2 for _, n2 in self.support) + 1
        table = np.zeros((d1, d2))
        for (n1, n2), p in zip(self.support, self.probs):
            table[n1, n2] = p
        return table

    def total(self) -> float:
        return float(self.probs.sum())

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.probs < -1e-12):
            raise ValueError("negative probability in distribution")
        if abs(self.total() - 1.0) > tol:
            raise ValueError(f"distribution sums to {self.total()}, not 1")


def pair_distribution_to_csv(dist: OutcomeDistribution) -> str:
    """Serialize a pair distribution as CSV with columns n1, n2, prob."""
    buf = io.StringIO()
    buf.write("n1,n2,prob\n")
    for (n1, n2), p in zip(dist.support, dist.probs):
        buf.write(f"{n1},{n2},{float(p)!r}\n")
    return buf.getvalue()


def pair_distribution_from_csv(text: str) -> OutcomeDistribution:
    support = []
    probs = []
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    for line in lines[1:]:
        n1, n2, p = line.split(",")
        support.append((int(n1), int(n2)))
        probs.append(float(p))
    return OutcomeDistribution(support=support, probs=np.array(probs))
