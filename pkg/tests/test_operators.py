import itertools

import numpy as np
import pytest

from dpsqkd.operators import (
    DIM,
    build_bit_error_op,
    build_detection_povm,
    build_parity_projectors,
    build_phase_error_op,
    build_projector_Pa,
    build_slot_bit_error_op,
    build_slot_bit_error_op_xbasis,
    basis_index,
    is_density_matrix,
    is_hermitian,
    is_psd,
    min_eigenvalue,
    product_ket,
    projector,
)

R2 = np.sqrt(2.0)


def b_ket(i):
    v = np.zeros(3, dtype=complex)
    v[i - 1] = 1
    return v


def a_ket(z):
    v = np.zeros(8, dtype=complex)
    v[int(z, 2)] = 1
    return v


def ab(z, i):
    return np.kron(a_ket(z), b_ket(i))


def test_basis_index_examples():
    assert basis_index("000", 1) == 0
    assert basis_index("111", 3) == 23
    assert basis_index("010", 2) == 7
    assert basis_index((0, 1, 0), 2) == 7


def test_basis_index_bijective():
    seen = {basis_index(z, i) for z in itertools.product((0, 1), repeat=3) for i in (1, 2, 3)}
    assert seen == set(range(24))


@pytest.mark.parametrize("z,i", [("01", 1), ("012", 1), ("000", 0), ("000", 4)])
def test_basis_index_domain(z, i):
    with pytest.raises(ValueError):
        basis_index(z, i)


def test_ordering_matches_kron():
    for z in ("000", "011", "101", "111"):
        for i in (1, 2, 3):
            np.testing.assert_array_equal(product_ket(z, i), ab(z, i))


def test_detection_povm_completeness():
    total = sum(build_detection_povm(j, k) for j in (1, 2) for k in (0, 1))
    assert np.max(np.abs(total - np.eye(3))) <= 1e-14


def test_detection_povm_traces_and_overlap():
    for k in (0, 1):
        assert np.trace(build_detection_povm(1, k)).real == pytest.approx(0.75, abs=1e-15)
    overlap = np.trace(build_detection_povm(1, 0) @ build_detection_povm(1, 1)).real
    assert overlap == pytest.approx(1 / 16, abs=1e-15)


def test_detection_povm_domain():
    with pytest.raises(ValueError):
        build_detection_povm(3, 0)
    with pytest.raises(ValueError):
        build_detection_povm(1, 2)


def test_weight_projectors():
    pas = [build_projector_Pa(a) for a in range(4)]
    assert np.max(np.abs(sum(pas) - np.eye(DIM))) <= 1e-14
    assert [int(round(np.trace(p).real)) for p in pas] == [3, 9, 9, 3]
    assert np.linalg.matrix_rank(pas[1]) == 9
    even, odd = build_parity_projectors()
    np.testing.assert_array_equal(even + odd, np.eye(DIM))
    for p in pas:
        assert np.max(np.abs(p @ p - p)) == 0


def test_weight_projector_domain():
    with pytest.raises(ValueError):
        build_projector_Pa(4)


def test_bit_error_two_constructions_agree():
    for j in (1, 2):
        diff = build_slot_bit_error_op(j) - build_slot_bit_error_op_xbasis(j)
        assert np.max(np.abs(diff)) <= 1e-15


def test_bit_error_spectrum():
    e = build_bit_error_op()
    assert is_psd(e)
    eig = np.linalg.eigvalsh(e)
    assert eig[-1] <= 2.0 + 1e-12
    # Hand count: each slot contributes 4 rank-2 A-projectors x tr(Pi) = 0.75.
    assert np.trace(e).real == pytest.approx(12.0, abs=1e-13)


def test_bit_error_parity_structure():
    e = build_bit_error_op()
    even, odd = build_parity_projectors()
    assert np.max(np.abs(even @ e @ odd)) <= 1e-13
    assert np.max(np.abs(e - even @ e @ even - odd @ e @ odd)) <= 1e-13


def test_bit_error_all_zero_diagonal():
    e = build_bit_error_op()
    i = basis_index("000", 1)
    assert e[i, i].real == pytest.approx(0.5, abs=1e-15)


def test_phase_error_diagonal_and_block_structure():
    e = build_phase_error_op()
    assert np.max(np.abs(e - np.diag(np.diag(e)))) <= 1e-15
    p0 = build_projector_Pa(0)
    assert np.max(np.abs(p0 @ e @ p0)) == 0
    pas = [build_projector_Pa(a) for a in range(4)]
    assert np.max(np.abs(e - sum(p @ e @ p for p in pas))) <= 1e-13
    for p in pas:
        assert np.max(np.abs(e @ p - p @ e)) == 0
    assert np.linalg.eigvalsh(e)[-1] <= 1.0 + 1e-15


def test_phase_error_weight_one_entries():
    e = build_phase_error_op()
    assert e[basis_index("010", 1), basis_index("010", 1)].real == 1.0
    assert e[basis_index("001", 2), basis_index("001", 2)].real == 0.5


def test_weight_one_phase_block_matches_explicit_kets():
    # (P[|001>] + P[|100>]) (x) P[|2>]/2 + P[|010>] (x) (P[|1>] + P[|3>])
    expected = (
        np.kron(projector(a_ket("001")) + projector(a_ket("100")), projector(b_ket(2)) / 2)
        + np.kron(projector(a_ket("010")), projector(b_ket(1)) + projector(b_ket(3)))
    )
    p1 = build_projector_Pa(1)
    assert np.max(np.abs(p1 @ build_phase_error_op() @ p1 - expected)) <= 1e-15


def test_weight_one_bit_block_matches_explicit_kets():
    pi = {(j, k): build_detection_povm(j, k) for j in (1, 2) for k in (0, 1)}
    expected = np.kron(projector(a_ket("001") / R2), projector(b_ket(1)) + projector(b_ket(2)) / 2)
    expected += np.kron(projector(a_ket("100") / R2), projector(b_ket(2)) / 2 + projector(b_ket(3)))
    for s in (0, 1):
        expected += np.kron(projector((a_ket("010") + (-1) ** s * a_ket("100")) / R2), pi[1, s ^ 1])
        expected += np.kron(projector((a_ket("001") + (-1) ** s * a_ket("010")) / R2), pi[2, s ^ 1])
    p1 = build_projector_Pa(1)
    assert np.max(np.abs(p1 @ build_bit_error_op() @ p1 - expected)) <= 1e-14


def test_slot_one_sum_expands_into_two_projectors():
    pi = {k: build_detection_povm(1, k) for k in (0, 1)}
    lhs = sum(
        np.kron(projector((a_ket("010") + (-1) ** s * a_ket("100")) / R2), pi[s ^ 1])
        for s in (0, 1)
    )
    rhs = projector((ab("100", 1) - ab("010", 2) / R2) / R2) + projector(
        (ab("010", 1) - ab("100", 2) / R2) / R2
    )
    assert np.max(np.abs(lhs - rhs)) <= 1e-15


def test_operators_are_returned_as_copies():
    e = build_bit_error_op()
    e[0, 0] = 99
    assert build_bit_error_op()[0, 0] != 99


def test_helpers():
    assert is_hermitian(np.eye(3))
    assert not is_hermitian(np.array([[0, 1], [0, 0]]))
    assert min_eigenvalue(np.diag([2.0, -1.0])) == -1.0
    assert is_density_matrix(np.eye(24) / 24)
    assert not is_density_matrix(np.eye(24))
