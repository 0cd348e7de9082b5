import numpy as np
import pytest

import oracles
from protqubit.lattice import (
    AmbiguousRelationError,
    Axis,
    DenseOperator,
    LatticeSpec,
    PauliString,
    Relation,
    algebra_relation,
    build_collective_field,
    build_local_field,
    build_pauli_string,
    build_protection_hamiltonian,
    build_symmetry_operators,
    iter_strings,
)


def test_lattice_validation():
    assert LatticeSpec(2).dim == 16
    assert LatticeSpec(3).num_sites == 9
    with pytest.raises(ValueError):
        LatticeSpec(1)
    with pytest.raises(ValueError):
        LatticeSpec(4)
    with pytest.raises(ValueError):
        LatticeSpec(2, j_x=-1.0)
    with pytest.raises(ValueError):
        LatticeSpec(2, bonds="triangle")
    with pytest.raises(ValueError):
        LatticeSpec(2).site_index((3, 1))


def test_pauli_string_parsing_and_printing():
    s = PauliString.parse("Y11 Y12")
    assert s.weight == 2
    assert str(s) == "Y11 Y12"
    assert PauliString.parse("X(1,1) X(2,1)") == PauliString.column(1, 2)
    assert PauliString.parse("I").weight == 0
    with pytest.raises(ValueError):
        PauliString.parse("W11")
    with pytest.raises(ValueError):
        PauliString((((1, 1), Axis.X), ((1, 1), Axis.Y)))


def test_identity_string_is_identity():
    op = build_pauli_string(LatticeSpec(2), PauliString())
    assert np.array_equal(op.matrix, np.eye(16))


def test_single_site_involution_and_trace():
    a = build_pauli_string(LatticeSpec(2), PauliString.parse("X11")).matrix
    assert np.allclose(a @ a, np.eye(16), atol=1e-14)
    assert abs(np.trace(a)) < 1e-14


def test_strings_match_oracle_kronecker_products():
    n = 2
    lat = LatticeSpec(n)
    for s in list(iter_strings(n, 2))[::7]:
        ref = oracles.string_op({site: a.value for site, a in s.factors}, n)
        assert np.allclose(build_pauli_string(lat, s).matrix, ref, atol=1e-14), str(s)


def test_row_string_equals_symmetry_operator():
    lat = LatticeSpec(2)
    syms = build_symmetry_operators(lat)
    row = build_pauli_string(lat, PauliString.row(1, 2, "Y")).matrix
    assert np.array_equal(row, syms.p[0].matrix)
    assert np.allclose(syms.p[0].matrix, oracles.p_op(1, 2), atol=1e-15)
    assert np.allclose(syms.q[1].matrix, oracles.q_op(2, 2), atol=1e-15)


def test_pauli_product_phase_matches_matrices():
    lat = LatticeSpec(2)
    for a, b in [("X11 Y12", "Y11 Z21"), ("Z11 Z22", "X11 X22"), ("Y11", "Y11 X12")]:
        sa, sb = PauliString.parse(a), PauliString.parse(b)
        phase, prod = sa * sb
        lhs = build_pauli_string(lat, sa).matrix @ build_pauli_string(lat, sb).matrix
        assert np.allclose(lhs, phase * build_pauli_string(lat, prod).matrix, atol=1e-14)


@pytest.mark.parametrize("bonds", ["pair", "square"])
def test_h0_matches_oracle(bonds):
    lat = LatticeSpec(2, 1.0, 0.7, bonds=bonds)
    ref = oracles.h0_pair(2, 1.0, 0.7) if bonds == "pair" else oracles.h0_square(2, 1.0, 0.7)
    assert np.allclose(build_protection_hamiltonian(lat).matrix, ref, atol=1e-12)


def test_h0_commutes_with_symmetries_n2():
    lat = LatticeSpec(2)
    h = build_protection_hamiltonian(lat).matrix
    syms = build_symmetry_operators(lat)
    for op in (syms.p[0], syms.q[1]):
        assert np.max(np.abs(h @ op.matrix - op.matrix @ h)) < 1e-12


def test_ground_level_doubly_degenerate_n2():
    w = np.linalg.eigvalsh(build_protection_hamiltonian(LatticeSpec(2)).matrix)
    assert w[1] - w[0] < 1e-10
    assert w[2] - w[1] > 0.5


def test_symmetry_rules_n2():
    syms = build_symmetry_operators(LatticeSpec(2))
    p1, p2 = syms.p
    q1, q2 = syms.q
    assert algebra_relation(p1, p2) is Relation.COMMUTE
    assert algebra_relation(q1, q2) is Relation.COMMUTE
    assert algebra_relation(p1, q1) is Relation.ANTICOMMUTE
    assert np.max(np.abs(p1.matrix @ q1.matrix + q1.matrix @ p1.matrix)) == 0
    assert np.allclose(p1.matrix @ p1.matrix, np.eye(16), atol=1e-15)


def test_single_site_relation():
    lat = LatticeSpec(2)
    x = build_pauli_string(lat, PauliString.parse("X11"))
    y = build_pauli_string(lat, PauliString.parse("Y11"))
    assert algebra_relation(x, y) is Relation.ANTICOMMUTE
    z = build_pauli_string(lat, PauliString.parse("Z11"))
    # X + Z neither commutes nor anticommutes with X
    assert algebra_relation(x.matrix + z.matrix, x) is Relation.NEITHER
    with pytest.raises(AmbiguousRelationError):
        algebra_relation(np.zeros((16, 16)), x)
    with pytest.raises(ValueError):
        algebra_relation(np.eye(4), x)


def test_collective_field_spectrum_and_symmetry():
    lat = LatticeSpec(2)
    sy = build_collective_field(lat, "Y").matrix
    w = np.round(np.linalg.eigvalsh(sy), 9)
    values, counts = np.unique(w, return_counts=True)
    assert values.tolist() == [-4, -2, 0, 2, 4]
    assert counts.tolist() == [1, 4, 6, 4, 1]
    syms = build_symmetry_operators(lat)
    for p in syms.p:
        assert np.max(np.abs(sy @ p.matrix - p.matrix @ sy)) < 1e-12
    sx = build_collective_field(lat, "X").matrix
    for q in syms.q:
        assert np.max(np.abs(sx @ q.matrix - q.matrix @ sx)) < 1e-12
    assert np.allclose(sx, oracles.collective("X", 2), atol=1e-14)


def test_local_field_reduces_to_collective():
    lat = LatticeSpec(2)
    dirs = np.tile([0.0, 0.0, 1.0], (4, 1))
    assert np.allclose(build_local_field(lat, dirs).matrix, build_collective_field(lat, "Z").matrix)
    with pytest.raises(ValueError):
        build_local_field(lat, np.ones((3, 3)))


def test_dense_operator_checks():
    with pytest.raises(ValueError):
        DenseOperator(np.array([[0, 1], [0, 0]]), hermitian=True)
    with pytest.raises(ValueError):
        DenseOperator(np.ones((2, 3)))
    op = DenseOperator(np.eye(2), hermitian=True)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 5


def test_iter_strings_count():
    # sum_w C(4, w) 3^w for w <= 2 on 4 sites
    assert sum(1 for _ in iter_strings(2, 2)) == 1 + 12 + 54
