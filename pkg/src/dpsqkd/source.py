"""Characterized-source quantities for three-pulse blocks.

The only source characterization the security analysis needs is a set of
upper bounds ``q_n`` on the probability that a block of three pulses carries
``n`` or more photons (n = 1, 2, 3), plus bit-independence of the per-pulse
vacuum probability. For a laser emitting coherent pulses of mean photon
number ``mu`` the block photon number is Poisson with mean ``3 * mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Number of tail terms summed directly when the complement loses precision.
_TAIL_TERMS = 50
# Below this value the complement 1 - head is recomputed from the tail series.
_COMPLEMENT_CUTOFF = 0.5
_TAIL_ATOL = 1e-12


@dataclass(frozen=True)
class SourceStats:
    """Tail bounds ``q1 >= q2 >= q3`` on the block photon number.

    ``mu`` is set only when the bounds were generated from a Poisson model;
    measured bounds are supplied without it.
    """

    q1: float
    q2: float
    q3: float
    mu: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("q1", "q2", "q3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if not (self.q3 <= self.q2 <= self.q1):
            raise ValueError(
                f"tail bounds must satisfy q3 <= q2 <= q1, got "
                f"({self.q1}, {self.q2}, {self.q3})"
            )
        if self.mu is not None:
            if not (math.isfinite(self.mu) and self.mu >= 0.0):
                raise ValueError(f"mu must be a finite value >= 0, got {self.mu!r}")
            for n, value in enumerate(self.as_tuple(), start=1):
                expected = poisson_tail(self.mu, n)
                if abs(value - expected) > _TAIL_ATOL:
                    raise ValueError(
                        f"q{n}={value} is inconsistent with a Poisson source "
                        f"at mu={self.mu} (expected {expected})"
                    )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.q1, self.q2, self.q3)

    def q(self, n: int) -> float:
        """Return ``q_n`` for ``n`` in {1, 2, 3}."""
        if n not in (1, 2, 3):
            raise ValueError(f"n must be 1, 2 or 3, got {n!r}")
        return self.as_tuple()[n - 1]


@dataclass(frozen=True)
class PhotonDistribution:
    """Probability mass over the total photon number 0..n_max of one block."""

    probs: tuple[float, ...]

    def __init__(self, probs: Sequence[float]) -> None:
        values = tuple(float(p) for p in probs)
        if not values:
            raise ValueError("distribution must have at least one entry")
        if any(not math.isfinite(p) or p < 0.0 for p in values):
            raise ValueError("probabilities must be finite and nonnegative")
        total = math.fsum(values)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {total}")
        object.__setattr__(self, "probs", values)

    @classmethod
    def point_mass(cls, n: int, n_max: Optional[int] = None) -> "PhotonDistribution":
        n_max = n if n_max is None else n_max
        probs = [0.0] * (n_max + 1)
        probs[n] = 1.0
        return cls(probs)

    @classmethod
    def poisson(cls, mean: float, n_max: int) -> "PhotonDistribution":
        """Poisson(``mean``) truncated at ``n_max`` with the tail folded into the last bin."""
        if mean < 0:
            raise ValueError(f"mean must be >= 0, got {mean!r}")
        terms = [math.exp(-mean)]
        for k in range(1, n_max + 1):
            terms.append(terms[-1] * mean / k)
        terms[-1] += max(0.0, 1.0 - math.fsum(terms))
        return cls(terms)

    def tail(self, n: int) -> float:
        """Probability that the block holds ``n`` or more photons."""
        return math.fsum(self.probs[n:])


def poisson_tail(mu: float, n: int) -> float:
    """Probability that a three-pulse block of mean ``3 * mu`` holds ``n`` or more photons.

    The head sum is accumulated with the recurrence ``t_{k+1} = t_k * x / (k + 1)``
    and complemented. When the complement would cancel catastrophically (tail
    below one half), the leading tail terms are summed directly instead.

    Args:
        mu: Mean photon number per pulse, ``mu >= 0``.
        n: Photon-count threshold in {1, 2, 3}.

    Returns:
        ``Pr{Poisson(3 mu) >= n}``.
    """
    if not (isinstance(mu, (int, float, np.floating, np.integer)) and math.isfinite(mu)):
        raise ValueError(f"mu must be a finite real number, got {mu!r}")
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu!r}")
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2 or 3, got {n!r}")
    x = 3.0 * float(mu)
    if x == 0.0:
        return 0.0

    term = math.exp(-x)
    head = 0.0
    for k in range(n):
        head += term
        term *= x / (k + 1)
    tail = 1.0 - head
    if tail >= _COMPLEMENT_CUTOFF:
        return tail

    # ``term`` now holds e^{-x} x^n / n!.
    total = 0.0
    for k in range(n, n + _TAIL_TERMS):
        total += term
        term *= x / (k + 1)
    return min(total, 1.0)


def make_source_stats(mu: float) -> SourceStats:
    """Tail bounds of an ideal coherent source with ``mu`` photons per pulse."""
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu!r}")
    q1, q2, q3 = (poisson_tail(mu, n) for n in (1, 2, 3))
    return SourceStats(q1=q1, q2=q2, q3=q3, mu=float(mu))


def check_vacuum_equality(
    p_vac_bit0: float, p_vac_bit1: float, tol: float = 1e-9
) -> bool:
    """True iff the vacuum probabilities for bit 0 and bit 1 agree to ``tol``."""
    for name, p in (("p_vac_bit0", p_vac_bit0), ("p_vac_bit1", p_vac_bit1)):
        if not (math.isfinite(p) and 0.0 <= p <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    if not (math.isfinite(tol) and tol >= 0):
        raise ValueError(f"tol must be >= 0, got {tol!r}")
    return abs(p_vac_bit0 - p_vac_bit1) <= tol


def check_tail_bound(dist: PhotonDistribution, stats: SourceStats) -> bool:
    """True iff ``Pr{n_block >= n} <= q_n`` (up to 1e-12) for n = 1, 2, 3.

    Since a weight-``a`` auxiliary string implies at least ``a`` photons in the
    block, this also bounds the weight distribution of Alice's register.
    """
    return all(dist.tail(n) <= stats.q(n) + _TAIL_ATOL for n in (1, 2, 3))
