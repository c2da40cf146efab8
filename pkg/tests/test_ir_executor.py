"""Program IR, validation, and executor semantics."""
import numpy as np
import pytest

from qgate import ir, statevector as sv
from qgate.executor import branch_spread, execute, program_unitary
from qgate.ir import (
    InvalidTransferError,
    MalformedProgramError,
    MeasureRotated,
    ProgramBuilder,
    QGateProgram,
    QubitRef,
    from_json,
    to_json,
    validate,
)
from qgate.pauli import PauliString, multiply
from qgate.statevector import states_equal_up_to_phase


def rotation_program(p: PauliString, phi: float, teleport: bool = False) -> QGateProgram:
    """Single Pauli-string rotation exp(+i phi P / 2) built by hand."""
    b = ProgramBuilder(p.n_qubits)
    a = b.alloc_ancilla()
    for q, letter in enumerate(p.letters):
        if letter != "I":
            b.cpauli(a, q, letter)
    if teleport:
        m = b.teleport_rotation(a, phi)
        b.measure_rotated(m, phi, pre_rotated=phi)
    else:
        b.measure_rotated(a, phi)
    return b.finish()


def multi_rotation_program(pairs, n, teleport=False) -> QGateProgram:
    b = ProgramBuilder(n)
    for p, phi in pairs:
        a = b.alloc_ancilla()
        for q, letter in enumerate(p.letters):
            if letter != "I":
                b.cpauli(a, q, letter)
        if teleport:
            m = b.teleport_rotation(a, phi)
            b.measure_rotated(m, phi, pre_rotated=phi)
        else:
            b.measure_rotated(a, phi)
    return b.finish()


def random_state(rng, n):
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return sv.from_amplitudes(amps)


def test_qubit_ref_text():
    assert str(ir.ancilla(3)) == "a3"
    assert QubitRef.parse("q12") == ir.logical(12)
    with pytest.raises(ValueError):
        QubitRef.parse("z0")


def test_json_round_trip():
    p = PauliString.from_letters("ZIXZX")
    prog = rotation_program(p, 0.37, teleport=True)
    text = to_json(prog)
    back = from_json(text)
    assert back == prog
    assert to_json(back) == text


def test_validate_clean_program():
    prog = rotation_program(PauliString.from_letters("ZIXZX"), 0.3)
    assert validate(prog) == []


def test_validate_double_measurement():
    prog = rotation_program(PauliString.from_letters("ZZ"), 0.3)
    extra = prog.instructions + (prog.instructions[-1],)
    bad = QGateProgram(prog.n_logical, extra)
    codes = {v.code for v in validate(bad)}
    assert "double-measurement" in codes


def test_validate_frame_mismatch():
    prog = rotation_program(PauliString.from_letters("ZZ"), 0.3)
    instrs = list(prog.instructions)
    for k, instr in enumerate(instrs):
        if isinstance(instr, MeasureRotated):
            instrs[k] = MeasureRotated(instr.ref, instr.angle,
                                       PauliString.from_letters("XZ"))
    bad = QGateProgram(prog.n_logical, tuple(instrs))
    codes = {v.code for v in validate(bad)}
    assert "frame-mismatch" in codes


def test_validate_use_before_alloc():
    bad = QGateProgram(1, (ir.CPauli(ir.ancilla(0), ir.logical(0), "Z"),))
    codes = {v.code for v in validate(bad)}
    assert "malformed" in codes


def test_eigenstate_rotation_all_modes():
    # exp(i phi Z/2) on |0> is a pure phase in every mode
    prog = rotation_program(PauliString.from_letters("Z"), 1.1)
    zero = sv.init_basis(1, 0)
    expected = sv.StateVector(1, np.array([np.exp(1j * 0.55), 0]))
    res = execute(prog, zero, mode="postselect_zero")
    assert states_equal_up_to_phase(res.final_state, expected, 1e-12)
    res = execute(prog, zero, mode="sampled", seed=5)
    assert states_equal_up_to_phase(res.final_state, expected, 1e-12)
    for branch in execute(prog, zero, mode="all_branches"):
        assert states_equal_up_to_phase(branch.final_state, expected, 1e-12)


def test_fig2_string_matches_rotation_oracle():
    rng = np.random.default_rng(42)
    p = PauliString.from_letters("ZIXZX")
    phi = 0.7234
    prog = rotation_program(p, phi)
    psi = random_state(rng, 5)
    res = execute(prog, psi, mode="postselect_zero", debug_check_tableau=True)
    oracle = sv.apply_pauli_rotation(psi, p, phi)
    assert np.max(np.abs(res.final_state.amplitudes - oracle.amplitudes)) < 1e-10
    assert res.records[0].outcome == 0 and abs(res.records[0].probability - 0.5) < 1e-12


def test_all_branches_correct_and_weighted():
    rng = np.random.default_rng(1)
    p = PauliString.from_letters("XY")
    phi = -1.3
    prog = rotation_program(p, phi)
    psi = random_state(rng, 2)
    branches = execute(prog, psi, mode="all_branches")
    assert len(branches) == 2
    assert abs(sum(b.branch_weight for b in branches) - 1.0) < 1e-12
    oracle = sv.apply_pauli_rotation(psi, p, phi)
    for b in branches:
        assert states_equal_up_to_phase(b.final_state, oracle, 1e-10)


def test_sign_rule_anticommuting_sequence():
    # two anticommuting rotations: outcome 1 on the first ancilla flips the
    # second dial under track_to_end; both policies land on the same state
    rng = np.random.default_rng(9)
    pairs = [(PauliString.from_letters("XI"), 0.8),
             (PauliString.from_letters("ZI"), -0.45)]
    prog = multi_rotation_program(pairs, 2)
    psi = random_state(rng, 2)
    oracle = sv.apply_pauli_rotation(
        sv.apply_pauli_rotation(psi, pairs[0][0], pairs[0][1]), pairs[1][0], pairs[1][1])
    for seed in range(8):
        imm = execute(prog, psi, mode="sampled", frame_policy="apply_immediately", seed=seed)
        def_ = execute(prog, psi, mode="sampled", frame_policy="track_to_end", seed=seed)
        assert [r.outcome for r in imm.records] == [r.outcome for r in def_.records]
        np.testing.assert_allclose(imm.final_state.amplitudes,
                                   def_.final_state.amplitudes, atol=1e-12)
        assert states_equal_up_to_phase(imm.final_state, oracle, 1e-10)


def test_branch_independence_random_programs():
    rng = np.random.default_rng(123)
    letters = list("IXYZ")
    for _ in range(10):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        pairs = []
        for _ in range(k):
            s = "".join(rng.choice(letters) for _ in range(n))
            if s == "I" * n:
                s = s[:-1] + "Z"
            pairs.append((PauliString.from_letters(s), float(rng.uniform(-3, 3))))
        prog = multi_rotation_program(pairs, n)
        psi = random_state(rng, n)
        for policy in ("apply_immediately", "track_to_end"):
            branches = execute(prog, psi, mode="all_branches", frame_policy=policy)
            assert len(branches) == 1 << k
            assert branch_spread(branches) < 1e-9
            assert abs(sum(b.branch_weight for b in branches) - 1.0) < 1e-10


def test_teleported_rotation_matches_direct():
    rng = np.random.default_rng(31)
    for _ in range(6):
        n = int(rng.integers(1, 4))
        s = "".join(rng.choice(list("IXYZ")) for _ in range(n))
        if s == "I" * n:
            s = "X" + s[1:]
        p = PauliString.from_letters(s)
        theta = float(rng.uniform(-3, 3))
        psi = random_state(rng, n)
        direct = execute(rotation_program(p, theta), psi, mode="postselect_zero")
        tele = execute(rotation_program(p, theta, teleport=True), psi,
                       mode="all_branches", debug_check_tableau=True)
        assert len(tele) == 4  # X readout x rotated readout
        for b in tele:
            assert states_equal_up_to_phase(b.final_state, direct.final_state, 1e-10)


def test_teleport_theta_zero_magic_is_zero_state():
    # theta=0 magic state is |0>; both X-readout branches give the unrotated result
    p = PauliString.from_letters("Z")
    psi = sv.apply_single(sv.init_basis(1, 0), 0, "H")
    tele = execute(rotation_program(p, 0.0, teleport=True), psi, mode="all_branches")
    for b in tele:
        assert states_equal_up_to_phase(b.final_state, psi, 1e-12)


def test_transfer_double_evolution():
    # two ancillas sharing one entanglement graph evolve the logicals twice
    rng = np.random.default_rng(8)
    p = PauliString.from_letters("XZ")
    phi1, phi2 = 0.63, -1.15
    b = ProgramBuilder(2)
    a1 = b.alloc_ancilla()
    for q, letter in enumerate(p.letters):
        b.cpauli(a1, q, letter)
    a2 = b.alloc_ancilla()
    b.transfer_entanglement(a1, a2)
    b.measure_rotated(a1, phi1)
    b.measure_rotated(a2, phi2)
    prog = b.finish()
    assert validate(prog) == []
    psi = random_state(rng, 2)
    oracle = sv.apply_pauli_rotation(sv.apply_pauli_rotation(psi, p, phi2), p, phi1)
    branches = execute(prog, psi, mode="all_branches", debug_check_tableau=True)
    assert len(branches) == 4
    for br in branches:
        assert states_equal_up_to_phase(br.final_state, oracle, 1e-10)


def test_transfer_copies_row():
    # from-row X1 Pm, fresh to-row X2 -> to-row X2 Pm (paper s2-bar example)
    b = ProgramBuilder(1)
    a1 = b.alloc_ancilla()
    b.cpauli(a1, 0, "Z")
    a2 = b.alloc_ancilla()
    b.transfer_entanglement(a1, a2)
    _, part, _ = b.tracker.row_parts(a2, 1)
    assert part.letters == "Z"


def test_transfer_rejects_anticommuting_rows():
    b = ProgramBuilder(1)
    a1 = b.alloc_ancilla()
    b.cpauli(a1, 0, "Z")
    a2 = b.alloc_ancilla()
    b.cpauli(a2, 0, "X")
    with pytest.raises(InvalidTransferError):
        b.transfer_entanglement(a1, a2)


def test_chained_transfer_builds_product_rotation():
    # N=3 ancillas on disjoint logical subsets, CX chain: the last ancilla
    # imparts the product-string rotation (4 logical qubits)
    rng = np.random.default_rng(77)
    parts = [PauliString.from_letters("ZIII"), PauliString.from_letters("IXYI"),
             PauliString.from_letters("IIIZ")]
    phi = 0.943
    b = ProgramBuilder(4)
    ancillas = []
    for p in parts:
        a = b.alloc_ancilla()
        for q, letter in enumerate(p.letters):
            if letter != "I":
                b.cpauli(a, q, letter)
        ancillas.append(a)
    b.transfer_entanglement(ancillas[0], ancillas[1])
    b.transfer_entanglement(ancillas[1], ancillas[2])
    # first two ancillas read out at angle zero: identity rotations
    b.measure_rotated(ancillas[0], 0.0)
    b.measure_rotated(ancillas[1], 0.0)
    b.measure_rotated(ancillas[2], phi)
    prog = b.finish()
    product = multiply(multiply(parts[0], parts[1]), parts[2])
    psi = random_state(rng, 4)
    oracle = sv.apply_pauli_rotation(psi, product, phi)
    branches = execute(prog, psi, mode="all_branches", debug_check_tableau=True)
    assert len(branches) == 8
    for br in branches:
        assert states_equal_up_to_phase(br.final_state, oracle, 1e-10)


def test_sampled_determinism():
    prog = multi_rotation_program(
        [(PauliString.from_letters("XZ"), 0.3), (PauliString.from_letters("ZY"), 0.9)], 2)
    psi = sv.init_basis(2, 1)
    a = execute(prog, psi, mode="sampled", seed=99)
    b = execute(prog, psi, mode="sampled", seed=99)
    assert [r.outcome for r in a.records] == [r.outcome for r in b.records]
    np.testing.assert_array_equal(a.final_state.amplitudes, b.final_state.amplitudes)
    with pytest.raises(ValueError):
        execute(prog, psi, mode="sampled")


def test_controlled_block_and_work_qubits():
    # Toffoli ladder by hand: w0 = q0 AND q1, CX(w0 -> q2), uncompute
    b = ProgramBuilder(3)
    w = b.alloc_work()
    toffoli = ir.ControlledBlock(((ir.logical(0), 1), (ir.logical(1), 1)),
                                 (ir.SingleClifford(w, "X"),))
    b.instructions.append(toffoli)
    b.controlled_block([(w, 1)], [ir.SingleClifford(ir.logical(2), "X")])
    b.instructions.append(toffoli)
    b.release_work(w)
    prog = b.finish()
    U = program_unitary(prog)
    expected = np.eye(8, dtype=complex)
    expected[[6, 7]] = expected[[7, 6]]  # |110> <-> |111>
    np.testing.assert_allclose(U, expected, atol=1e-12)


def test_release_uncomputed_work_fails():
    b = ProgramBuilder(1)
    w = b.alloc_work()
    b.controlled_block([(ir.logical(0), 0)], [ir.SingleClifford(w, "X")])
    b.release_work(w)
    prog = b.finish()
    with pytest.raises(MalformedProgramError):
        execute(prog, sv.init_basis(1, 0), mode="postselect_zero")


def test_program_unitary_matches_rotation():
    from qgate.pauli import pauli_rotation_matrix
    p = PauliString.from_letters("YZX")
    phi = 1.234
    U = program_unitary(rotation_program(p, phi))
    np.testing.assert_allclose(U, pauli_rotation_matrix(p, phi), atol=1e-11)


def test_global_phase_folded_into_unitary():
    b = ProgramBuilder(1)
    b.add_global_phase(0.5)
    prog = b.finish()
    U = program_unitary(prog)
    np.testing.assert_allclose(U, np.exp(0.5j) * np.eye(2), atol=1e-14)


def test_concatenate_renumbers_ancillas():
    p1 = rotation_program(PauliString.from_letters("Z"), 0.2)
    p2 = rotation_program(PauliString.from_letters("X"), 0.4)
    joined = ir.concatenate([p1, p2])
    assert validate(joined) == []
    ancillas = {i.ref for i in joined.instructions if isinstance(i, ir.AllocAncilla)}
    assert len(ancillas) == 2
    U = program_unitary(joined)
    from qgate.pauli import pauli_rotation_matrix
    expected = (pauli_rotation_matrix(PauliString.from_letters("X"), 0.4)
                @ pauli_rotation_matrix(PauliString.from_letters("Z"), 0.2))
    np.testing.assert_allclose(U, expected, atol=1e-12)
