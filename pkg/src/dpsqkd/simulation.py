"""Monte Carlo simulation of the three-pulse DPS protocol.

Source model: coherent pulses ``(-1)^b sqrt(eta * mu)`` after a channel of
transmission ``eta``. Bob's one-bit-delay interferometer maps the block onto
four time slots; coherent states in orthogonal output modes factorize, so the
photon counts of every (slot, port) pair are independent Poisson variables.

Only the two interior slots count. A block is *detected* when exactly one
photon lands in slots 1-2; the struck port is Bob's raw bit and is flipped
with probability ``e_mis`` to model misalignment. Dark counts, cross-block
interference in the boundary slots and detector dead time are not modeled.

Random numbers come from Philox streams derived per chunk of
:data:`CHUNK_BLOCKS` blocks, so a transcript depends only on the config and
its seed, never on how many workers produced it.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .bounds import KeyRateResult, Observables, key_rate
from .source import SourceStats, make_source_stats

CHUNK_BLOCKS = 1 << 16
N_SLOTS = 4
N_PORTS = 2


@dataclass(frozen=True)
class SimConfig:
    eta: float = 1.0
    mu: float = 0.0
    e_mis: float = 0.0
    n_blocks: int = 1_000_000
    t_code: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not (math.isfinite(self.mu) and self.mu >= 0.0):
            raise ValueError(f"mu must be >= 0, got {self.mu!r}")
        if not (0.0 <= self.e_mis <= 0.5):
            raise ValueError(f"e_mis must lie in [0, 0.5], got {self.e_mis!r}")
        if int(self.n_blocks) != self.n_blocks or self.n_blocks < 1:
            raise ValueError(f"n_blocks must be a positive integer, got {self.n_blocks!r}")
        if not (0.0 < self.t_code < 1.0):
            raise ValueError(f"t_code must lie in (0, 1), got {self.t_code!r}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _amplitudes(bits: np.ndarray, eta: float, mu: float) -> np.ndarray:
    return np.where(np.asarray(bits) == 0, 1.0, -1.0) * math.sqrt(eta * mu)


def slot_means(bits, eta: float, mu: float) -> np.ndarray:
    """Mean photon number at every (slot, port) for one block.

    Returns:
        Array of shape ``(4, 2)`` indexed ``[slot, port]``. Rows 0 and 3 are the
        boundary slots (``eta * mu / 4`` per port, discarded by Bob); rows 1 and
        2 carry ``|a_j +- a_{j+1}|^2 / 4``.
    """
    bits = np.asarray(bits)
    if bits.shape != (3,) or np.any((bits != 0) & (bits != 1)):
        raise ValueError(f"bits must be three 0/1 values, got {bits!r}")
    a = _amplitudes(bits, eta, mu)
    out = np.empty((N_SLOTS, N_PORTS))
    out[0, :] = out[3, :] = eta * mu / 4.0
    for j in (1, 2):
        out[j, 0] = abs(a[j - 1] + a[j]) ** 2 / 4.0
        out[j, 1] = abs(a[j - 1] - a[j]) ** 2 / 4.0
    return out


def _interior_means(bits: np.ndarray, eta: float, mu: float) -> np.ndarray:
    """Vectorized interior means, columns ``(s1p0, s1p1, s2p0, s2p1)``."""
    a = _amplitudes(bits, eta, mu)
    return np.stack(
        [
            (a[:, 0] + a[:, 1]) ** 2 / 4.0,
            (a[:, 0] - a[:, 1]) ** 2 / 4.0,
            (a[:, 1] + a[:, 2]) ** 2 / 4.0,
            (a[:, 1] - a[:, 2]) ** 2 / 4.0,
        ],
        axis=1,
    )


@dataclass(frozen=True)
class BlockRecord:
    bits: tuple[int, int, int]
    detected: bool
    slot: Optional[int] = None
    k_A: Optional[int] = None
    k_B: Optional[int] = None
    code: Optional[bool] = None


@dataclass
class _Chunk:
    bits: np.ndarray
    detected: np.ndarray
    slot: np.ndarray
    k_A: np.ndarray
    k_B: np.ndarray
    code: np.ndarray
    p_error: np.ndarray


def _simulate_chunk(
    bits: np.ndarray, config: SimConfig, rng: np.random.Generator
) -> _Chunk:
    n = bits.shape[0]
    means = _interior_means(bits, config.eta, config.mu)
    counts = rng.poisson(means)
    flip = rng.random(n) < config.e_mis
    code = rng.random(n) < config.t_code

    detected = counts.sum(axis=1) == 1
    struck = np.argmax(counts, axis=1)
    slot = np.where(detected, struck // 2 + 1, 0).astype(np.int8)
    port = (struck % 2).astype(np.int8)

    rows = np.arange(n)
    j0 = np.clip(slot.astype(np.intp) - 1, 0, 1)
    k_A = (bits[rows, j0] ^ bits[rows, j0 + 1]).astype(np.int8)
    k_B = (port ^ flip).astype(np.int8)
    k_A[~detected] = -1
    k_B[~detected] = -1

    # Probability of a bit error given detection in this block's slot.
    total = means.sum(axis=1)
    wrong = np.where(bits[:, :2].sum(axis=1) % 2 == 0, means[:, 1], means[:, 0])
    wrong2 = np.where(bits[:, 1:].sum(axis=1) % 2 == 0, means[:, 3], means[:, 2])
    with np.errstate(invalid="ignore", divide="ignore"):
        p_wrong = np.where(total > 0, (wrong + wrong2) / total, 0.0)
    p_error = config.e_mis * (1.0 - p_wrong) + (1.0 - config.e_mis) * p_wrong

    return _Chunk(bits, detected, slot, k_A, k_B, code, p_error)


def simulate_block(bits, config: SimConfig, rng: np.random.Generator) -> BlockRecord:
    """Run Bob's measurement on one block with the given bits."""
    b = np.asarray(bits, dtype=np.int8).reshape(1, 3)
    if np.any((b != 0) & (b != 1)):
        raise ValueError(f"bits must be three 0/1 values, got {bits!r}")
    c = _simulate_chunk(b, config, rng)
    bits_t = tuple(int(x) for x in b[0])
    if not c.detected[0]:
        return BlockRecord(bits_t, False, code=bool(c.code[0]))
    return BlockRecord(
        bits_t,
        True,
        slot=int(c.slot[0]),
        k_A=int(c.k_A[0]),
        k_B=int(c.k_B[0]),
        code=bool(c.code[0]),
    )


@dataclass
class SimTranscript:
    """Per-block arrays plus aggregate counts of one simulation run.

    Block arrays are ``None`` when the run was made with ``record_blocks=False``.
    ``slot``, ``k_A`` and ``k_B`` hold 0 / -1 / -1 for undetected blocks.
    """

    config: SimConfig
    n_detected: int
    n_sample: int
    n_sample_errors: int
    n_code: int
    n_errors: int
    # Sum over detected blocks of the conditional bit-error probability.
    expected_errors: float
    bits: Optional[np.ndarray] = None
    detected: Optional[np.ndarray] = None
    slot: Optional[np.ndarray] = None
    k_A: Optional[np.ndarray] = None
    k_B: Optional[np.ndarray] = None
    code: Optional[np.ndarray] = None

    @property
    def n_blocks(self) -> int:
        return self.config.n_blocks

    @property
    def Q_hat(self) -> float:
        return self.n_detected / self.n_blocks

    @property
    def e_bit_hat(self) -> Optional[float]:
        """Bit error rate over detected sample pairs; ``None`` if there are none."""
        if self.n_sample == 0:
            return None
        return self.n_sample_errors / self.n_sample

    @property
    def aborted(self) -> bool:
        return self.n_detected == 0 or self.n_sample == 0

    def summary(self) -> dict:
        return {
            **asdict(self.config),
            "n_detected": self.n_detected,
            "n_code": self.n_code,
            "n_sample": self.n_sample,
            "n_sample_errors": self.n_sample_errors,
            "n_errors": self.n_errors,
            "q_hat": self.Q_hat,
            "e_bit_hat": self.e_bit_hat,
            "aborted": self.aborted,
        }

    def block(self, i: int) -> BlockRecord:
        if self.bits is None:
            raise ValueError("transcript was recorded without per-block data")
        bits = tuple(int(x) for x in self.bits[i])
        if not self.detected[i]:
            return BlockRecord(bits, False, code=bool(self.code[i]))
        return BlockRecord(
            bits,
            True,
            slot=int(self.slot[i]),
            k_A=int(self.k_A[i]),
            k_B=int(self.k_B[i]),
            code=bool(self.code[i]),
        )

    def write_csv(self, path) -> None:
        """Per-block audit log, one row per emitted block."""
        if self.bits is None:
            raise ValueError("transcript was recorded without per-block data")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["block_id", "b1", "b2", "b3", "detected", "slot", "kA", "kB", "assignment"]
            )
            for i in range(self.n_blocks):
                b = self.bits[i]
                det = bool(self.detected[i])
                w.writerow(
                    [
                        i,
                        int(b[0]),
                        int(b[1]),
                        int(b[2]),
                        int(det),
                        int(self.slot[i]) if det else "",
                        int(self.k_A[i]) if det else "",
                        int(self.k_B[i]) if det else "",
                        "code" if self.code[i] else "sample",
                    ]
                )


def _run_chunk(config: SimConfig, index: int) -> _Chunk:
    rng = _rng(config.seed, index)
    size = min(CHUNK_BLOCKS, config.n_blocks - index * CHUNK_BLOCKS)
    bits = rng.integers(0, 2, size=(size, 3), dtype=np.int8)
    return _simulate_chunk(bits, config, rng)


def run_simulation(
    config: SimConfig, record_blocks: bool = True, workers: int = 1
) -> SimTranscript:
    """Simulate ``config.n_blocks`` blocks with uniformly random bits."""
    n_chunks = -(-config.n_blocks // CHUNK_BLOCKS)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda i: _run_chunk(config, i), range(n_chunks)))
    else:
        chunks = [_run_chunk(config, i) for i in range(n_chunks)]

    n_det = n_sample = n_sample_err = n_code = n_err = 0
    expected = 0.0
    for c in chunks:
        err = c.detected & (c.k_A != c.k_B)
        n_det += int(c.detected.sum())
        n_code += int((c.detected & c.code).sum())
        n_sample += int((c.detected & ~c.code).sum())
        n_sample_err += int((err & ~c.code).sum())
        n_err += int(err.sum())
        expected += float(c.p_error[c.detected].sum())

    tr = SimTranscript(
        config=config,
        n_detected=n_det,
        n_sample=n_sample,
        n_sample_errors=n_sample_err,
        n_code=n_code,
        n_errors=n_err,
        expected_errors=expected,
    )
    if record_blocks:
        for name in ("bits", "detected", "slot", "k_A", "k_B", "code"):
            setattr(tr, name, np.concatenate([getattr(c, name) for c in chunks]))
    return tr


def expected_detection_rate(eta: float, mu: float) -> float:
    x = 2.0 * eta * mu
    return x * math.exp(-x)


def _trial_config(config: SimConfig, trial: int) -> SimConfig:
    seed = int(np.random.SeedSequence(config.seed, spawn_key=(1 << 20, trial)).generate_state(1, np.uint64)[0])
    return SimConfig(
        eta=config.eta,
        mu=config.mu,
        e_mis=config.e_mis,
        n_blocks=config.n_blocks,
        t_code=config.t_code,
        seed=seed,
    )


@dataclass
class AzumaReport:
    n_trials: int
    zeta: float
    violations: int
    empirical_violation_rate: float
    bound: float
    slack: float
    mean_detected: float
    max_abs_deviation: float
    passed: bool


def azuma_concentration_test(
    config: SimConfig, zeta: float, n_trials: int = 200
) -> AzumaReport:
    """Empirical check of Azuma's inequality for the sampled bit-error martingale.

    Over the detected events of one run, ``X = P - N`` where ``N`` counts
    events that are both sample pairs and bit errors and ``P`` sums their
    conditional probabilities ``(1 - t_code) * Pr{error | detected}``, which the
    simulator knows exactly. A violation is ``|X| > N_det * zeta``.
    """
    if not zeta > 0:
        raise ValueError(f"zeta must be > 0, got {zeta!r}")
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials!r}")
    violations = 0
    bounds = []
    dets = []
    worst = 0.0
    for trial in range(n_trials):
        tr = run_simulation(_trial_config(config, trial), record_blocks=False)
        x = (1.0 - config.t_code) * tr.expected_errors - tr.n_sample_errors
        n_det = tr.n_detected
        dets.append(n_det)
        if n_det > 0:
            worst = max(worst, abs(x) / n_det)
        if abs(x) > n_det * zeta:
            violations += 1
        bounds.append(min(1.0, 2.0 * math.exp(-n_det * zeta**2 / 2.0)))
    bound = float(np.mean(bounds))
    rate = violations / n_trials
    slack = 3.0 * math.sqrt(bound * (1.0 - bound) / n_trials)
    return AzumaReport(
        n_trials=n_trials,
        zeta=zeta,
        violations=violations,
        empirical_violation_rate=rate,
        bound=bound,
        slack=slack,
        mean_detected=float(np.mean(dets)),
        max_abs_deviation=worst,
        passed=rate <= bound + slack,
    )


@dataclass
class ChernoffReport:
    n_trials: int
    q: tuple[float, float, float]
    chi: tuple[float, float, float]
    max_fraction: tuple[float, float, float]
    trials_passed: int
    pass_fraction: float
    passed: bool


def chernoff_tail_test(
    config: SimConfig,
    n_trials: int = 100,
    stats: Optional[SourceStats] = None,
    chi_factor: float = 5.0,
    min_pass_fraction: float = 0.99,
) -> ChernoffReport:
    """Check ``M_{a>=n} / N_em <= q_n + chi`` over repeated emissions.

    Each of the ``config.n_blocks`` emitted blocks draws its total photon number
    from Poisson(3 mu) and is a code block with probability ``t_code``;
    ``M_{a>=n}`` counts code blocks with at least ``n`` photons. The slack is
    ``chi_n = chi_factor * sqrt(q_n / N_em)``. ``stats`` defaults to the
    Poisson bounds of ``config.mu``.
    """
    stats = make_source_stats(config.mu) if stats is None else stats
    q = stats.as_tuple()
    n_em = config.n_blocks
    chi = tuple(chi_factor * math.sqrt(qn / n_em) for qn in q)
    worst = [0.0, 0.0, 0.0]
    ok = 0
    for trial in range(n_trials):
        rng = _rng(config.seed, 1 << 21, trial)
        photons = rng.poisson(3.0 * config.mu, size=n_em)
        code = rng.random(n_em) < config.t_code
        coded = photons[code]
        fractions = [np.count_nonzero(coded >= n) / n_em for n in (1, 2, 3)]
        worst = [max(w, f) for w, f in zip(worst, fractions)]
        if all(f <= qn + c for f, qn, c in zip(fractions, q, chi)):
            ok += 1
    frac = ok / n_trials
    return ChernoffReport(
        n_trials=n_trials,
        q=q,
        chi=chi,  # type: ignore[arg-type]
        max_fraction=tuple(worst),  # type: ignore[arg-type]
        trials_passed=ok,
        pass_fraction=frac,
        passed=frac >= min_pass_fraction,
    )


@dataclass
class EndToEndResult:
    transcript: SimTranscript
    result: Optional[KeyRateResult]
    aborted: bool
    reason: Optional[str] = None


def end_to_end_rate(
    config: SimConfig, f_EC="shannon", record_blocks: bool = False
) -> EndToEndResult:
    """Simulate, then feed ``(Q_hat, e_bit_hat)`` and the Poisson ``q_n`` into the key rate."""
    tr = run_simulation(config, record_blocks=record_blocks)
    if tr.n_detected == 0:
        return EndToEndResult(tr, None, True, "no detected blocks")
    if tr.n_sample == 0:
        return EndToEndResult(tr, None, True, "no detected sample pairs")
    obs = Observables(Q=tr.Q_hat, e_bit=tr.e_bit_hat)
    res = key_rate(obs, make_source_stats(config.mu), f_EC=f_EC)
    return EndToEndResult(tr, res, res.aborted, "key rate clamped to 0" if res.aborted else None)
