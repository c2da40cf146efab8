"""Tableau conjugation and recombination against dense conjugation oracles."""
import numpy as np
import pytest

from qgate import pauli, statevector as sv
from qgate.pauli import PauliString, multiply
from qgate.stabilizer import (
    InternalConsistencyError,
    StabilizerTableau,
    conjugate,
    conjugate_string,
    pretty,
    recombine,
    stabilizes,
    symplectic_rank,
)

_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_CY = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, -1j], [0, 0, 1j, 0]], dtype=complex)


def dense_gate(gate, qubits, n):
    """Independent dense embedding of a Clifford gate into n qubits."""
    if gate in ("CX", "CY", "CZ"):
        two = {"CX": _CX, "CY": _CY, "CZ": _CZ}[gate]
        c, t = qubits
        dim = 1 << n
        U = np.zeros((dim, dim), dtype=complex)
        for idx in range(dim):
            cb = (idx >> (n - 1 - c)) & 1
            tb = (idx >> (n - 1 - t)) & 1
            for tb2 in (0, 1):
                amp = two[(cb << 1) | tb2, (cb << 1) | tb]
                if amp:
                    j = idx ^ ((tb ^ tb2) << (n - 1 - t))
                    U[j, idx] += amp
        return U
    mats = [np.eye(2, dtype=complex)] * n
    mats[qubits[0]] = sv.gate_matrix(gate)
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def random_string(rng, n, sign=True):
    letters = "".join(rng.choice(list("IXYZ")) for _ in range(n))
    return PauliString.from_letters(letters, 2 * int(rng.integers(2)) if sign else 0)


def test_cz_grows_ancilla_row():
    # S_A = X_A, CZ(A, 1) -> X_A Z_1
    g = PauliString.from_letters("XI")
    out = conjugate_string(g, "CZ", (0, 1))
    assert str(out) == "XZ"


def test_cx_cy_on_fresh_x_rows():
    g = PauliString.from_letters("XI")
    assert str(conjugate_string(g, "CX", (0, 1))) == "XX"
    assert str(conjugate_string(g, "CY", (0, 1))) == "XY"


def test_entanglement_transfer_conjugation():
    # S_2' = X_2, CX with qubit 2 (index 1) controlling qubit 1 (index 0): X1X2
    g = PauliString.from_letters("IX")
    out = conjugate_string(g, "CX", (1, 0))
    assert str(out) == "XX"


def test_conjugation_matches_dense_all_gates():
    rng = np.random.default_rng(23)
    for gate in ("H", "S", "SDG", "X", "Y", "Z", "CX", "CY", "CZ"):
        for _ in range(25):
            n = 3
            g = random_string(rng, n)
            if gate in ("CX", "CY", "CZ"):
                qubits = tuple(int(q) for q in rng.choice(n, size=2, replace=False))
            else:
                qubits = (int(rng.integers(n)),)
            got = conjugate_string(g, gate, qubits)
            C = dense_gate(gate, qubits, n)
            expected = C @ pauli.to_dense(g) @ C.conj().T
            np.testing.assert_allclose(pauli.to_dense(got), expected, atol=1e-12,
                                       err_msg=f"{gate} on {qubits} applied to {g}")


def test_conjugation_preserves_commutation_and_rank():
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        # build a valid tableau from disjoint single-qubit X's then scramble it
        gens = [PauliString.single(n, q, "X") for q in range(int(rng.integers(1, n + 1)))]
        tab = StabilizerTableau(n, tuple(gens))
        for _ in range(15):
            gate = str(rng.choice(["H", "S", "X", "CZ", "CX", "CY"]))
            if gate in ("CX", "CY", "CZ"):
                qubits = tuple(int(q) for q in rng.choice(n, size=2, replace=False))
            else:
                qubits = (int(rng.integers(n)),)
            tab = conjugate(tab, gate, *qubits)
        tab.validate()


def test_recombine_matches_paper_example():
    # {X1 Pm, X1X2} -> {X1 Pm, X2 Pm} with Pm = Z on qubit 3
    g1 = PauliString.from_letters("XIZ")
    g2 = PauliString.from_letters("XXI")
    tab = StabilizerTableau(3, (g1, g2))
    out = recombine(tab, 1, 0)
    assert str(out.generators[1]) == "IXZ"
    assert str(out.generators[0]) == "XIZ"
    # involution: recombining twice restores the original generator
    back = recombine(out, 1, 0)
    assert back.generators == tab.generators


def test_chain_recombination_builds_product_string():
    # ancilla rows X_{n-1} X_n P_n recombine to X_n prod_k P_k
    n_anc, n_log = 3, 3
    n = n_anc + n_log
    paulis = [PauliString.single(n, n_anc + k, "Z") for k in range(n_log)]
    rows = []
    for k in range(n_anc):
        row = PauliString.single(n, k, "X")
        if k > 0:
            row = multiply(row, PauliString.single(n, k - 1, "X"))
        row = multiply(row, paulis[k])
        rows.append(row)
    tab = StabilizerTableau(n, tuple(rows))
    for k in range(1, n_anc):
        tab = recombine(tab, k, k - 1)
    final = tab.generators[-1]
    expected = PauliString.single(n, n_anc - 1, "X")
    for p in paulis:
        expected = multiply(expected, p)
    assert final == expected


def test_stabilizes_plus_state():
    plus = sv.apply_single(sv.init_basis(1, 0), 0, "H")
    assert stabilizes(StabilizerTableau(1, (PauliString.from_letters("X"),)), plus)
    assert not stabilizes(StabilizerTableau(1, (PauliString.from_letters("Z"),)), plus)


def test_stabilizes_controlled_pauli_string_state():
    # CP_m|+>|psi> is stabilized by X_A P_m
    rng = np.random.default_rng(2)
    p = PauliString.from_letters("ZX")
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    full = sv.StateVector(3, np.kron([1, 1] / np.sqrt(2), psi))
    for q, letter in enumerate(p.letters):
        full = sv.apply_controlled_pauli(full, 0, 1 + q, letter)
    row = multiply(PauliString.single(3, 0, "X"),
                   PauliString.from_letters("I" + p.letters))
    assert stabilizes(StabilizerTableau(3, (row,)), full)


def test_negative_sign_generator():
    # -Z stabilizes |1>
    minus_z = PauliString.from_letters("Z", phase_exponent=2)
    assert stabilizes(StabilizerTableau(1, (minus_z,)), sv.init_basis(1, 1))


def test_odd_phase_rejected():
    with pytest.raises(InternalConsistencyError):
        StabilizerTableau(1, (PauliString.from_letters("Z", phase_exponent=1),))


def test_symplectic_rank():
    gens = [PauliString.from_letters("XX"), PauliString.from_letters("ZZ")]
    assert symplectic_rank(gens) == 2
    gens.append(multiply(gens[0], gens[1]).with_phase(0))
    assert symplectic_rank(gens) == 2


def test_fig2_graph_tableau_end_to_end():
    # build the five-qubit construction for ZIXZX: ancilla row grows to
    # X_A (Z I X Z X) and stabilizes the simulated state
    p = PauliString.from_letters("ZIXZX")
    n = 6  # ancilla + 5 logicals
    rng = np.random.default_rng(14)
    psi = rng.normal(size=32) + 1j * rng.normal(size=32)
    psi /= np.linalg.norm(psi)
    state = sv.StateVector(n, np.kron([1, 1] / np.sqrt(2), psi))
    tab = StabilizerTableau(n, (PauliString.single(n, 0, "X"),))
    for q, letter in enumerate(p.letters):
        if letter == "I":
            continue
        gate = {"X": "CX", "Y": "CY", "Z": "CZ"}[letter]
        state = sv.apply_controlled_pauli(state, 0, 1 + q, letter)
        tab = conjugate(tab, gate, 0, 1 + q)
    assert str(tab.generators[0]) == "XZIXZX"
    assert stabilizes(tab, state)


def test_pretty_printer():
    tab = StabilizerTableau(3, (PauliString.from_letters("XIZ"),
                                PauliString.from_letters("IYI", 2)))
    text = pretty(tab, labels=["A", "1", "2"])
    assert text.splitlines() == ["XA Z2", "-Y1"]
