"""Error operators on Alice's three auxiliary qubits and Bob's single-photon space.

The joint space is ``A (x) B`` with ``A`` three qubits in the Z basis
``|z1 z2 z3>`` and ``B`` spanned by ``|1>, |2>, |3>`` (position of the single
photon after the QND measurement: first half pulse, second pulse, third half
pulse). Basis vectors are ordered z-major, photon-position-minor::

    index(z, i) = (4 z1 + 2 z2 + z3) * 3 + (i - 1)

All operators are dense ``complex128`` arrays of shape ``(24, 24)`` unless
they act on ``B`` alone (``(3, 3)``).
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

N_QUBITS = 3
DIM_A = 2**N_QUBITS
DIM_B = 3
DIM = DIM_A * DIM_B

# Interferometer weights of the three photon positions.
WEIGHTS = (1.0, 0.5, 1.0)

HERMITIAN_ATOL = 1e-13
PSD_ATOL = 1e-12


def _bits(z) -> tuple[int, int, int]:
    if isinstance(z, str):
        if len(z) != 3 or set(z) - {"0", "1"}:
            raise ValueError(f"z must be a 3-bit string, got {z!r}")
        return tuple(int(c) for c in z)  # type: ignore[return-value]
    bits = tuple(int(b) for b in z)
    if len(bits) != 3 or any(b not in (0, 1) for b in bits):
        raise ValueError(f"z must be three bits, got {z!r}")
    return bits  # type: ignore[return-value]


def basis_index(z, i: int) -> int:
    """Index of ``|z>_A |i>_B`` in the 24-dimensional product basis."""
    z1, z2, z3 = _bits(z)
    if i not in (1, 2, 3):
        raise ValueError(f"photon position must be 1, 2 or 3, got {i!r}")
    return (4 * z1 + 2 * z2 + z3) * DIM_B + (i - 1)


def weight_of_index(index: int) -> int:
    return bin(index // DIM_B).count("1")


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(v: np.ndarray) -> np.ndarray:
    """``|v><v|`` for a not necessarily normalized vector."""
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def product_ket(z, i: int) -> np.ndarray:
    return ket(DIM, basis_index(z, i))


def _embed_pair(op2: np.ndarray, j: int) -> np.ndarray:
    """Place a two-qubit operator on auxiliary qubits (j, j+1) of A."""
    eye = np.eye(2, dtype=complex)
    if j == 1:
        return np.kron(op2, eye)
    if j == 2:
        return np.kron(eye, op2)
    raise ValueError(f"slot j must be 1 or 2, got {j!r}")


def build_detection_povm(j: int, k: int) -> np.ndarray:
    """Bob's POVM element for detecting bit ``k`` in time slot ``j`` (acts on B)."""
    if j not in (1, 2):
        raise ValueError(f"slot j must be 1 or 2, got {j!r}")
    if k not in (0, 1):
        raise ValueError(f"bit k must be 0 or 1, got {k!r}")
    v = (
        np.sqrt(WEIGHTS[j - 1]) * ket(DIM_B, j - 1)
        + (-1) ** k * np.sqrt(WEIGHTS[j]) * ket(DIM_B, j)
    ) / np.sqrt(2.0)
    return projector(v)


def build_projector_Pa(a: int) -> np.ndarray:
    """Projector onto auxiliary strings of Hamming weight ``a``, tensored with I_B."""
    if a not in range(N_QUBITS + 1):
        raise ValueError(f"Hamming weight must be in 0..3, got {a!r}")
    diag_a = np.array([float(bin(z).count("1") == a) for z in range(DIM_A)])
    return np.kron(np.diag(diag_a), np.eye(DIM_B)).astype(complex)


def build_parity_projectors() -> tuple[np.ndarray, np.ndarray]:
    """``(P_even, P_odd)``."""
    return (
        build_projector_Pa(0) + build_projector_Pa(2),
        build_projector_Pa(1) + build_projector_Pa(3),
    )


def build_slot_bit_error_op(j: int) -> np.ndarray:
    """Bit-error POVM element for slot ``j`` in the Bell-pair form.

    For each sign ``s`` the projectors onto ``(|00> + (-1)^s |11>)/sqrt2`` and
    ``(|01> + (-1)^s |10>)/sqrt2`` on qubits (j, j+1) are paired with Bob's
    outcome ``k_B = s XOR 1``.
    """
    r2 = np.sqrt(2.0)
    e00, e01, e10, e11 = (ket(4, n) for n in range(4))
    op = np.zeros((DIM, DIM), dtype=complex)
    for s in (0, 1):
        sign = (-1) ** s
        pair = projector((e00 + sign * e11) / r2) + projector((e01 + sign * e10) / r2)
        op += np.kron(_embed_pair(pair, j), build_detection_povm(j, s ^ 1))
    return op


def build_slot_bit_error_op_xbasis(j: int) -> np.ndarray:
    """Same operator as :func:`build_slot_bit_error_op`, from X-basis projectors.

    A bit error is a mismatch between Alice's parity ``k_A`` (X-basis parity of
    qubits j, j+1) and Bob's ``k_B``.
    """
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
    same = projector(np.kron(plus, plus)) + projector(np.kron(minus, minus))
    diff = projector(np.kron(plus, minus)) + projector(np.kron(minus, plus))
    return np.kron(_embed_pair(same, j), build_detection_povm(j, 1)) + np.kron(
        _embed_pair(diff, j), build_detection_povm(j, 0)
    )


def build_slot_phase_error_op(j: int) -> np.ndarray:
    if j not in (1, 2):
        raise ValueError(f"slot j must be 1 or 2, got {j!r}")
    diag = np.zeros(DIM)
    for z in itertools.product((0, 1), repeat=N_QUBITS):
        # Alice guesses z_j from z_{j+1} and Bob's which-pulse information.
        if z[j] == 1:
            diag[basis_index(z, j)] += WEIGHTS[j - 1]
        if z[j - 1] == 1:
            diag[basis_index(z, j + 1)] += WEIGHTS[j]
    return np.diag(diag).astype(complex)


@lru_cache(maxsize=None)
def _cached(name: str) -> np.ndarray:
    if name == "ebit":
        op = build_slot_bit_error_op(1) + build_slot_bit_error_op(2)
    elif name == "eph":
        op = build_slot_phase_error_op(1) + build_slot_phase_error_op(2)
    else:  # pragma: no cover
        raise KeyError(name)
    op.setflags(write=False)
    return op


def build_bit_error_op() -> np.ndarray:
    """Total bit-error operator, summed over both time slots."""
    return _cached("ebit").copy()


def build_phase_error_op() -> np.ndarray:
    """Total phase-error operator, summed over both time slots."""
    return _cached("eph").copy()


def hermiticity_defect(op: np.ndarray) -> float:
    return float(np.max(np.abs(op - op.conj().T)))


def is_hermitian(op: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return hermiticity_defect(op) <= atol


def min_eigenvalue(op: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``op``."""
    h = (op + op.conj().T) / 2
    return float(np.linalg.eigvalsh(h)[0])


def is_psd(op: np.ndarray, atol: float = PSD_ATOL) -> bool:
    return is_hermitian(op) and min_eigenvalue(op) >= -atol


def is_density_matrix(rho: np.ndarray, atol: float = PSD_ATOL) -> bool:
    return is_psd(rho, atol) and abs(np.trace(rho).real - 1.0) <= atol
