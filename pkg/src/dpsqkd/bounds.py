"""Phase-error bound and asymptotic secret key rate.

The phase-error rate of the sifted key is bounded by::

    e_ph_U = lam * e_bit + (lam * sqrt(q1 * q3) + q2) / Q,   lam = 3 + sqrt(5)

and the key rate per emitted pulse is ``Q * (1 - f_EC - h(e_ph_U)) / 3``,
clamped at zero. ``e_ph_U`` is deliberately left unclamped; the piecewise
binary entropy (``h(x) = 1`` for ``x > 0.5``) absorbs oversized bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .source import SourceStats

PULSES_PER_BLOCK = 3


class NoDetectionsError(ValueError):
    """Raised when the detection rate is zero and the bound is undefined."""


@dataclass(frozen=True)
class Observables:
    """Detection rate per block ``Q`` and sampled bit error rate ``e_bit``."""

    Q: float
    e_bit: float

    def __post_init__(self) -> None:
        for name in ("Q", "e_bit"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class KeyRateResult:
    R: float
    e_ph_U: float
    f_EC: float
    Q: float
    e_bit: float
    stats: SourceStats
    mu: Optional[float] = None
    # True when the unclamped rate was <= 0 and R was forced to 0.
    aborted: bool = False
    raw_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "key_rate": self.R,
            "raw_key_rate": self.raw_rate,
            "e_ph_u": self.e_ph_U,
            "f_ec": self.f_EC,
            "detection_rate": self.Q,
            "e_bit": self.e_bit,
            "q1": self.stats.q1,
            "q2": self.stats.q2,
            "q3": self.stats.q3,
            "mu": self.mu,
            "aborted": self.aborted,
        }


def binary_entropy(x: float) -> float:
    """Binary entropy in bits, saturated to 1 above one half.

    >>> binary_entropy(0.0), binary_entropy(0.5), binary_entropy(0.9)
    (0.0, 1.0, 1.0)
    """
    if not math.isfinite(x):
        raise ValueError(f"binary entropy argument must be finite, got {x!r}")
    if x < 0:
        raise ValueError(f"binary entropy argument must be >= 0, got {x!r}")
    if x > 0.5:
        return 1.0
    if x == 0.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def lambda_const() -> float:
    """The Lemma-1 constant ``3 + sqrt(5)``, larger root of ``x**2 - 6x + 4``."""
    return 3.0 + math.sqrt(5.0)


def phase_error_bound(
    obs: Observables, stats: SourceStats, lam: Optional[float] = None
) -> float:
    """Upper bound on the phase-error rate from observed ``(Q, e_bit)`` and ``q_n``.

    Raises:
        NoDetectionsError: if ``obs.Q == 0``.
    """
    if obs.Q <= 0.0:
        raise NoDetectionsError("phase-error bound is undefined for Q = 0 (no detections)")
    lam = lambda_const() if lam is None else lam
    return lam * obs.e_bit + (lam * math.sqrt(stats.q1 * stats.q3) + stats.q2) / obs.Q


def key_rate(
    obs: Observables,
    stats: SourceStats,
    f_EC: Union[float, str] = "shannon",
    lam: Optional[float] = None,
) -> KeyRateResult:
    """Asymptotic secret key rate per pulse.

    Args:
        obs: Observed detection rate and bit error rate.
        stats: Source tail bounds.
        f_EC: Error-correction leakage per sifted bit, or ``"shannon"`` for
            ``h(e_bit)``. The cost of random sampling is not charged.
        lam: Override for the Lemma-1 constant (testing only).

    Returns:
        A :class:`KeyRateResult`; ``aborted`` is set when the rate clamps to 0.
    """
    if isinstance(f_EC, str):
        if f_EC != "shannon":
            raise ValueError(f"f_EC must be a number or 'shannon', got {f_EC!r}")
        f_ec = binary_entropy(obs.e_bit)
    else:
        f_ec = float(f_EC)
        if not math.isfinite(f_ec) or f_ec < 0:
            raise ValueError(f"f_EC must be a finite value >= 0, got {f_EC!r}")
    e_ph_u = phase_error_bound(obs, stats, lam=lam)
    raw = obs.Q * (1.0 - f_ec - binary_entropy(e_ph_u)) / PULSES_PER_BLOCK
    aborted = raw <= 0.0
    return KeyRateResult(
        R=0.0 if aborted else raw,
        e_ph_U=e_ph_u,
        f_EC=f_ec,
        Q=obs.Q,
        e_bit=obs.e_bit,
        stats=stats,
        mu=stats.mu,
        aborted=aborted,
        raw_rate=raw,
    )
