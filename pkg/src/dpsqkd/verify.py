"""Numerical certificates for the operator inequalities behind the phase-error bound.

Each ``verify_*`` function returns a small report dataclass; :func:`run_suite`
collects every check into a :class:`VerificationReport` that serializes to
JSON.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bounds import lambda_const
from .operators import (
    DIM,
    DIM_A,
    DIM_B,
    build_bit_error_op,
    build_detection_povm,
    build_parity_projectors,
    build_phase_error_op,
    build_projector_Pa,
    hermiticity_defect,
    min_eigenvalue,
)

STRUCTURAL_ATOL = 1e-13
SPECTRAL_ATOL = 1e-10
# Chunk size of the random-state batches; fixes the seed-to-state mapping.
SAMPLE_CHUNK = 500


@dataclass
class Lemma1Report:
    lam: float
    min_eigenvalue: float
    shrunk_lam: float
    shrunk_min_eigenvalue: float
    tolerance: float
    passed: bool
    # The inequality breaks once lam shrinks by 0.1 %.
    tight: bool

    @property
    def certified(self) -> bool:
        return self.passed and self.tight


@dataclass
class TwoByTwoReport:
    lam: float
    determinant: float
    min_eigenvalue: float


@dataclass
class SampledReport:
    n_samples: int
    seed: int
    max_violation: float
    tolerance: float
    passed: bool


@dataclass
class OperatorNormReport:
    opnorm: float
    gram_defect: float
    trace_abs: float
    passed: bool


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    checks: list[Check]
    params: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "tool": "dpsqkd",
            "version": __version__,
            **self.params,
            "all_passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "measured": c.measured,
                    "tolerance": c.tolerance,
                    "pass": c.passed,
                    **c.details,
                }
                for c in self.checks
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _sandwich(p: np.ndarray, op: np.ndarray, q: Optional[np.ndarray] = None) -> np.ndarray:
    return p @ op @ (p if q is None else q)


def lemma1_operator(lam: float) -> np.ndarray:
    """``lam * P1 e_bit P1 - P1 e_ph P1``."""
    p1 = build_projector_Pa(1)
    return lam * _sandwich(p1, build_bit_error_op()) - _sandwich(p1, build_phase_error_op())


def verify_lemma1(
    tolerance: float = SPECTRAL_ATOL, lam: Optional[float] = None
) -> Lemma1Report:
    """Certify ``P1 e_ph P1 <= lam P1 e_bit P1`` through the smallest eigenvalue."""
    lam = lambda_const() if lam is None else float(lam)
    shrunk = lam * (1.0 - 1e-3)
    min_eig = min_eigenvalue(lemma1_operator(lam))
    shrunk_eig = min_eigenvalue(lemma1_operator(shrunk))
    return Lemma1Report(
        lam=lam,
        min_eigenvalue=min_eig,
        shrunk_lam=shrunk,
        shrunk_min_eigenvalue=shrunk_eig,
        tolerance=tolerance,
        passed=min_eig >= -tolerance,
        tight=shrunk_eig < -1e-6,
    )


def appendix_matrix(lam: float) -> np.ndarray:
    """Reduced 2x2 block whose smallest eigenvalue hits zero exactly at the optimal constant."""
    r = 1.0 / math.sqrt(2.0)
    return np.array([[1.0 - 2.0 / lam, -r], [-r, 1.0 - 1.0 / lam]])


def verify_appendix_2x2(lam: float) -> TwoByTwoReport:
    if not lam > 0:
        raise ValueError(f"lambda candidate must be > 0, got {lam!r}")
    m = appendix_matrix(lam)
    # Closed-form determinant avoids LAPACK round-off at the root.
    det = (1.0 - 2.0 / lam) * (1.0 - 1.0 / lam) - 0.5
    return TwoByTwoReport(
        lam=float(lam), determinant=det, min_eigenvalue=float(np.linalg.eigvalsh(m)[0])
    )


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.Philox(ss))


def random_density_matrices(
    n: int, rng: np.random.Generator, dim: int = DIM, rank: Optional[int] = None
) -> np.ndarray:
    """Ginibre-ensemble density matrices ``G G^dag / tr(G G^dag)``.

    ``rank`` sets the number of columns of ``G`` (``dim`` by default, giving
    full-rank states; ``1`` gives pure states).
    """
    k = dim if rank is None else rank
    g = rng.standard_normal((n, dim, k)) + 1j * rng.standard_normal((n, dim, k))
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    tr = np.einsum("nii->n", rho).real
    return rho / tr[:, None, None]


def _expect(op: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    """``tr(op rho)`` for a batch of states."""
    return np.einsum("ij,nji->n", op, rhos).real


def _sampled_max(
    margin: Callable[[np.ndarray], np.ndarray],
    n_samples: int,
    seed: int,
    rank: Optional[int],
    workers: int,
) -> float:
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples!r}")
    n_chunks = -(-n_samples // SAMPLE_CHUNK)

    def run(chunk: int) -> float:
        size = min(SAMPLE_CHUNK, n_samples - chunk * SAMPLE_CHUNK)
        rhos = random_density_matrices(size, _chunk_rng(seed, chunk), rank=rank)
        return float(np.max(margin(rhos)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(n_chunks)))
    else:
        results = [run(c) for c in range(n_chunks)]
    return max(results)


def lemma2_margin(rhos: np.ndarray) -> np.ndarray:
    """LHS - RHS of ``tr(P1 e_bit P1 s) <= tr(e_bit s) + sqrt(tr(s P1) tr(s P3))``."""
    ebit = build_bit_error_op()
    p1, p3 = build_projector_Pa(1), build_projector_Pa(3)
    lhs = _expect(_sandwich(p1, ebit), rhos)
    w1 = np.clip(_expect(p1, rhos), 0.0, None)
    w3 = np.clip(_expect(p3, rhos), 0.0, None)
    return lhs - (_expect(ebit, rhos) + np.sqrt(w1 * w3))


def theorem_chain_margin(rhos: np.ndarray, lam: Optional[float] = None) -> np.ndarray:
    """LHS - RHS of the phase-error inequality that combines both lemmas."""
    lam = lambda_const() if lam is None else lam
    ebit, eph = build_bit_error_op(), build_phase_error_op()
    p1, p2, p3 = (build_projector_Pa(a) for a in (1, 2, 3))
    w1 = np.clip(_expect(p1, rhos), 0.0, None)
    w3 = np.clip(_expect(p3, rhos), 0.0, None)
    rhs = lam * (_expect(ebit, rhos) + np.sqrt(w1 * w3)) + _expect(p2 + p3, rhos)
    return _expect(eph, rhos) - rhs


def verify_lemma2_random(
    n_samples: int = 10_000,
    seed: int = 42,
    tolerance: float = SPECTRAL_ATOL,
    rank: Optional[int] = None,
    workers: int = 1,
) -> SampledReport:
    worst = _sampled_max(lemma2_margin, n_samples, seed, rank, workers)
    return SampledReport(n_samples, seed, worst, tolerance, worst <= tolerance)


def verify_theorem_chain_random(
    n_samples: int = 10_000,
    seed: int = 7,
    tolerance: float = SPECTRAL_ATOL,
    rank: Optional[int] = None,
    workers: int = 1,
    lam: Optional[float] = None,
) -> SampledReport:
    worst = _sampled_max(
        lambda r: theorem_chain_margin(r, lam), n_samples, seed, rank, workers
    )
    return SampledReport(n_samples, seed, worst, tolerance, worst <= tolerance)


def pi_difference_squared(j: int) -> np.ndarray:
    d = build_detection_povm(j, 1) - build_detection_povm(j, 0)
    return d @ d


def build_T() -> np.ndarray:
    """``2 P1 e_bit P3``, the only coupling between the weight-1 and weight-3 sectors."""
    return 2.0 * _sandwich(build_projector_Pa(1), build_bit_error_op(), build_projector_Pa(3))


def verify_operator_norm_T() -> OperatorNormReport:
    t = build_T()
    opnorm = float(np.linalg.norm(t, 2))
    a111 = np.zeros((DIM_A, DIM_A), dtype=complex)
    a111[7, 7] = 1.0
    expected_gram = np.kron(a111, pi_difference_squared(1) + pi_difference_squared(2))
    gram_defect = float(np.max(np.abs(t.conj().T @ t - expected_gram)))
    return OperatorNormReport(
        opnorm=opnorm,
        gram_defect=gram_defect,
        trace_abs=float(abs(np.trace(t))),
        passed=opnorm <= 1.0 + 1e-12 and gram_defect <= STRUCTURAL_ATOL,
    )


def structural_defects() -> dict[str, float]:
    """Entrywise residuals of the exact operator identities."""
    ebit, eph = build_bit_error_op(), build_phase_error_op()
    p_even, p_odd = build_parity_projectors()
    pas = [build_projector_Pa(a) for a in range(4)]
    povm_sum = sum(build_detection_povm(j, k) for j in (1, 2) for k in (0, 1))
    povm_min = min(min_eigenvalue(build_detection_povm(j, k)) for j in (1, 2) for k in (0, 1))
    return {
        "parity_decomposition": float(
            np.max(np.abs(ebit - _sandwich(p_even, ebit) - _sandwich(p_odd, ebit)))
        ),
        "weight_block_diagonal": float(
            np.max(np.abs(eph - sum(_sandwich(p, eph) for p in pas)))
        ),
        "phase_commutes_with_weight": max(
            float(np.max(np.abs(eph @ p - p @ eph))) for p in pas
        ),
        "detection_povm_completeness": float(np.max(np.abs(povm_sum - np.eye(DIM_B)))),
        "weight_projector_completeness": float(np.max(np.abs(sum(pas) - np.eye(DIM)))),
        "hermiticity": max(hermiticity_defect(ebit), hermiticity_defect(eph)),
        "negative_eigenvalue": max(
            0.0, -min_eigenvalue(ebit), -min_eigenvalue(eph), -povm_min
        ),
    }


_STRUCTURAL_TOLERANCES = {
    "detection_povm_completeness": 1e-14,
    "weight_projector_completeness": 1e-14,
    "negative_eigenvalue": 1e-12,
}


def run_suite(
    n_samples: int = 10_000,
    seed: int = 42,
    lam: Optional[float] = None,
    workers: int = 1,
) -> VerificationReport:
    """Run every operator check.

    ``lam`` overrides the Lemma-1 constant everywhere it enters; it exists so
    that tests can confirm the suite fails for a wrong constant.
    """
    lam_value = lambda_const() if lam is None else float(lam)
    checks: list[Check] = []

    for name, defect in structural_defects().items():
        tol = _STRUCTURAL_TOLERANCES.get(name, STRUCTURAL_ATOL)
        checks.append(Check(name, defect, tol, defect <= tol))

    l1 = verify_lemma1(lam=lam_value)
    checks.append(
        Check(
            "lemma1",
            l1.min_eigenvalue,
            l1.tolerance,
            l1.certified,
            {
                "lambda": l1.lam,
                "min_eigenvalue": l1.min_eigenvalue,
                "inequality_holds": l1.passed,
                "shrunk_lambda": l1.shrunk_lam,
                "shrunk_min_eigenvalue": l1.shrunk_min_eigenvalue,
                "tight": l1.tight,
            },
        )
    )

    a = verify_appendix_2x2(lam_value)
    lo, hi = verify_appendix_2x2(4.0), verify_appendix_2x2(6.0)
    ok = (
        abs(a.determinant) <= 1e-12
        and abs(a.min_eigenvalue) <= 1e-12
        and lo.min_eigenvalue < 0
        and hi.min_eigenvalue > 0
    )
    checks.append(
        Check(
            "appendix_2x2",
            a.min_eigenvalue,
            1e-12,
            ok,
            {
                "lambda": a.lam,
                "determinant": a.determinant,
                "min_eigenvalue": a.min_eigenvalue,
                "min_eigenvalue_lambda_4": lo.min_eigenvalue,
                "min_eigenvalue_lambda_6": hi.min_eigenvalue,
            },
        )
    )

    t = verify_operator_norm_T()
    checks.append(
        Check(
            "operator_norm_T",
            t.opnorm,
            1e-12,
            t.passed,
            {"opnorm": t.opnorm, "gram_defect": t.gram_defect, "trace_abs": t.trace_abs},
        )
    )

    l2 = verify_lemma2_random(n_samples, seed, workers=workers)
    checks.append(
        Check(
            "lemma2_random",
            l2.max_violation,
            l2.tolerance,
            l2.passed,
            {"n_samples": n_samples, "seed": seed, "max_violation": l2.max_violation},
        )
    )

    chain = verify_theorem_chain_random(n_samples, seed, workers=workers, lam=lam_value)
    checks.append(
        Check(
            "theorem_chain_random",
            chain.max_violation,
            chain.tolerance,
            chain.passed,
            {"n_samples": n_samples, "seed": seed, "max_violation": chain.max_violation},
        )
    )

    return VerificationReport(
        checks=checks,
        params={"n_samples": n_samples, "seed": seed, "lambda": lam_value},
    )


__all__ = [
    "Check",
    "Lemma1Report",
    "OperatorNormReport",
    "SampledReport",
    "TwoByTwoReport",
    "VerificationReport",
    "appendix_matrix",
    "build_T",
    "lemma1_operator",
    "lemma2_margin",
    "random_density_matrices",
    "run_suite",
    "structural_defects",
    "theorem_chain_margin",
    "verify_appendix_2x2",
    "verify_lemma1",
    "verify_lemma2_random",
    "verify_operator_norm_T",
    "verify_theorem_chain_random",
]
