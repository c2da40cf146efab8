"""Program execution against the dense statevector backend.

Semantics implemented here, in stabilizer language: a live gate ancilla a
carries a tableau row (+/-) X_a . Q with Q a Pauli over the logical
register.  A rotated readout of a with dial angle beta applies
exp(+i beta X_a / 2), measures, and leaves Q^mu exp(+i s beta Q / 2) on the
rest, where s is the row sign.  The executor therefore dials

    beta = s * f * angle - pre_rotated

with f = -1 when the pending by-product frame anticommutes with Q (the
deferred-correction sign rule), so that the corrected logical state is the
same for every outcome branch and for both frame policies.

Execution modes: postselect_zero forces every readout to mu=0 (the
deterministic compiled unitary), sampled draws outcomes from a seeded
generator, all_branches enumerates every outcome combination.  Frame
policies: apply_immediately applies each by-product as it is produced
(flipping the signs of remaining anticommuting rows); track_to_end folds
them into one Pauli frame applied once at the end.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import cmath
import math

import numpy as np

from . import statevector as sv
from .ir import (
    AllocAncilla,
    AllocLogical,
    AllocMagic,
    AllocWork,
    AncillaCX,
    ControlledBlock,
    CPauli,
    CPAULI_GATE,
    MalformedProgramError,
    MeasureRotated,
    MeasureX,
    PhaseGate,
    QGateProgram,
    QubitRef,
    ReleaseWork,
    Rotate,
    RowTracker,
    SingleClifford,
    logical,
)
from .pauli import PauliString, commutes, multiply
from .statevector import PostselectionError

MODES = ("postselect_zero", "sampled", "all_branches")
FRAME_POLICIES = ("apply_immediately", "track_to_end")


@dataclass(frozen=True)
class OutcomeRecord:
    ref: QubitRef
    outcome: int
    probability: float
    mode: str


@dataclass
class ExecutionResult:
    final_state: sv.StateVector
    records: list[OutcomeRecord]
    frame_applied: bool
    branch_weight: float


class _Engine:
    def __init__(self, program: QGateProgram, amps: np.ndarray, frame_policy: str,
                 rng: np.random.Generator | None, debug_check: bool):
        self.program = program
        self.amps = amps  # shape (2^n,) or (2^n, batch)
        self.tracker = RowTracker()
        for q in range(program.n_logical):
            self.tracker.add_qubit(logical(q))
        self.frame_policy = frame_policy
        self.frame = PauliString.identity(program.n_logical)
        self.rng = rng
        self.debug_check = debug_check
        self.records: list[OutcomeRecord] = []
        self.weight = 1.0

    def clone(self) -> "_Engine":
        other = _Engine.__new__(_Engine)
        other.program = self.program
        other.amps = self.amps.copy()
        other.tracker = self.tracker.clone()
        other.frame_policy = self.frame_policy
        other.frame = self.frame
        other.rng = self.rng
        other.debug_check = self.debug_check
        other.records = list(self.records)
        other.weight = self.weight
        return other

    # -- register helpers ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.tracker.n

    def pos(self, ref: QubitRef) -> int:
        return self.tracker.position(ref)

    def _append_qubit(self, ref: QubitRef, vec: np.ndarray) -> None:
        self.tracker.add_qubit(ref)
        if self.amps.ndim == 1:
            self.amps = np.kron(self.amps, vec)
        else:
            dim, batch = self.amps.shape
            out = self.amps[:, None, :] * vec[None, :, None]
            self.amps = out.reshape(dim * 2, batch)

    def _project_out(self, ref: QubitRef, outcome: int) -> float:
        """Project `ref` onto `outcome`, delete it, return the branch probability.

        In batch mode the probability must be column-uniform (asserted); the
        whole batch is rescaled by the shared factor to keep the map linear.
        """
        pos = self.pos(ref)
        n = self.n
        if self.amps.ndim == 1:
            t = self.amps.reshape((2,) * n)
            sub = np.take(t, outcome, axis=pos).reshape(-1)
            prob = float(np.sum(np.abs(sub) ** 2))
            if prob < sv.POSTSELECTION_FLOOR:
                raise PostselectionError(
                    f"outcome {outcome} on {ref} has probability {prob:.2e}")
            self.amps = sub / math.sqrt(prob)
        else:
            batch = self.amps.shape[1]
            t = self.amps.reshape((2,) * n + (batch,))
            sub = np.take(t, outcome, axis=pos).reshape(-1, batch)
            probs = np.sum(np.abs(sub) ** 2, axis=0)
            prob = float(np.mean(probs))
            if prob < sv.POSTSELECTION_FLOOR:
                raise PostselectionError(f"outcome {outcome} on {ref} vanished")
            if np.max(np.abs(probs - prob)) > 1e-9 * max(prob, 1.0):
                raise MalformedProgramError(
                    "branch probability is input-dependent; cannot reconstruct a unitary")
            self.amps = sub / math.sqrt(prob)
        self.tracker.remove_qubit(ref)
        return prob

    def _branch_probability(self, ref: QubitRef, outcome: int) -> float:
        pos = self.pos(ref)
        t = self.amps.reshape((2,) * self.n + ((-1,) if self.amps.ndim > 1 else ()))
        sub = np.take(t, outcome, axis=pos)
        total = float(np.sum(np.abs(self.amps) ** 2))
        return float(np.sum(np.abs(sub) ** 2)) / total

    def _apply_1q(self, ref: QubitRef, mat: np.ndarray) -> None:
        self.amps = sv.apply_1q(self.amps, mat, self.pos(ref), self.n)

    def _apply_logical_pauli(self, p: PauliString) -> None:
        """Apply a logical-register Pauli, embedded into the live register."""
        letters = ["I"] * self.n
        for q in range(p.n_qubits):
            letters[self.pos(logical(q))] = p.letter(q)
        full = PauliString.from_letters("".join(letters), p.phase_exponent)
        self.amps = sv.apply_pauli(self.amps, full, self.n)

    def debug_assert_rows(self, where: str) -> None:
        if self.amps.ndim != 1:
            return
        for ref, row in self.tracker.rows.items():
            moved = sv.apply_pauli(self.amps, row, self.n)
            err = float(np.max(np.abs(moved - self.amps)))
            if err > 1e-9:
                raise AssertionError(
                    f"tableau row of {ref} stopped stabilizing the state "
                    f"after {where} (deviation {err:.2e})")


def _measurement_points(program: QGateProgram) -> int:
    return sum(isinstance(i, (MeasureRotated, MeasureX)) for i in program.instructions)


def execute(program: QGateProgram, initial_logical: sv.StateVector,
            mode: str = "postselect_zero", frame_policy: str = "apply_immediately",
            seed: int | None = None, debug_check_tableau: bool = False):
    """Run a program; returns ExecutionResult, or a list of them in
    all_branches mode (one per outcome combination, zero-weight branches
    pruned)."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if frame_policy not in FRAME_POLICIES:
        raise ValueError(f"unknown frame policy {frame_policy!r}")
    if initial_logical.n_qubits != program.n_logical:
        raise MalformedProgramError(
            f"initial state on {initial_logical.n_qubits} qubits, "
            f"program wants {program.n_logical}")
    rng = None
    if mode == "sampled":
        if seed is None:
            raise ValueError("sampled mode requires a seed")
        rng = np.random.default_rng(seed)
    engine = _Engine(program, initial_logical.amplitudes.copy(), frame_policy, rng,
                     debug_check_tableau)
    results = _run(engine, 0, mode)
    if mode == "all_branches":
        return results
    return results[0]


def _run(engine: _Engine, start: int, mode: str) -> list[ExecutionResult]:
    instrs = engine.program.instructions
    i = start
    while i < len(instrs):
        instr = instrs[i]
        if isinstance(instr, (MeasureRotated, MeasureX)) and mode == "all_branches":
            results = []
            for outcome in (0, 1):
                sub = engine.clone()
                try:
                    _apply_measurement(sub, instr, outcome, "forced")
                except PostselectionError:
                    continue  # zero-amplitude branch
                if sub.debug_check:
                    sub.debug_assert_rows(f"instruction {i} ({instr.op})")
                results.extend(_run(sub, i + 1, mode))
            return results
        _step(engine, instr, mode)
        if engine.debug_check:
            engine.debug_assert_rows(f"instruction {i} ({instr.op})")
        i += 1
    return [_finalize(engine)]


def _finalize(engine: _Engine) -> ExecutionResult:
    leftovers = [r for r in engine.tracker.order if r.kind != "logical"]
    if leftovers:
        raise MalformedProgramError(f"program ended with live qubits {list(map(str, leftovers))}")
    amps = engine.amps
    if engine.frame_policy == "track_to_end":
        # undo the collected by-product operator exactly: apply its inverse,
        # which for a Pauli with phase i^k is the same letters at phase i^-k
        frame = engine.frame
        if not frame.is_identity_letters() or frame.phase_exponent:
            inverse = frame.with_phase(-frame.phase_exponent)
            amps = sv.apply_pauli(amps, inverse, engine.program.n_logical)
    frame_applied = True
    if engine.program.global_phase:
        amps = amps * cmath.exp(1j * engine.program.global_phase)
    state = sv.StateVector(engine.program.n_logical, amps) if amps.ndim == 1 else amps
    return ExecutionResult(state, engine.records, frame_applied, engine.weight)


def _step(engine: _Engine, instr, mode: str) -> None:
    if isinstance(instr, AllocLogical):
        if instr.count != engine.program.n_logical:
            raise MalformedProgramError("AllocLogical width mismatch")
    elif isinstance(instr, AllocAncilla):
        engine._append_qubit(instr.ref, np.array([1, 1], dtype=complex) / math.sqrt(2))
        engine.tracker.new_row(instr.ref)
    elif isinstance(instr, AllocMagic):
        theta = instr.angle
        engine._append_qubit(instr.ref, np.array(
            [math.cos(theta / 2), 1j * math.sin(theta / 2)], dtype=complex))
    elif isinstance(instr, AllocWork):
        engine._append_qubit(instr.ref, np.array([1, 0], dtype=complex))
    elif isinstance(instr, ReleaseWork):
        try:
            prob = engine._project_out(instr.ref, 0)
        except PostselectionError:
            prob = 0.0
        if abs(prob - 1.0) > 1e-9:
            raise MalformedProgramError(
                f"work qubit {instr.ref} released while uncomputed (p0={prob})")
    elif isinstance(instr, CPauli):
        engine.amps = sv.apply_controlled(
            engine.amps, sv.FIXED_GATES[instr.letter],
            [(engine.pos(instr.control), 1)], engine.pos(instr.target), engine.n)
        engine.tracker.conjugate_2q(CPAULI_GATE[instr.letter], instr.control, instr.target)
    elif isinstance(instr, AncillaCX):
        engine.amps = sv.apply_controlled(
            engine.amps, sv.FIXED_GATES["X"],
            [(engine.pos(instr.control), 1)], engine.pos(instr.target), engine.n)
        engine.tracker.conjugate_2q("CX", instr.control, instr.target)
        if instr.target in engine.tracker.rows and instr.control in engine.tracker.rows:
            engine.tracker.recombine(instr.control, instr.target)
    elif isinstance(instr, SingleClifford):
        engine._apply_1q(instr.ref, sv.gate_matrix(instr.gate))
        engine.tracker.conjugate_1q(instr.gate, instr.ref)
    elif isinstance(instr, Rotate):
        _require_row_free(engine, instr.ref)
        engine._apply_1q(instr.ref, sv.gate_matrix("R" + instr.axis.upper(), instr.angle))
    elif isinstance(instr, PhaseGate):
        _require_row_free(engine, instr.ref)
        engine._apply_1q(instr.ref, sv.gate_matrix("PHASE", instr.angle))
    elif isinstance(instr, ControlledBlock):
        controls = [(engine.pos(r), k) for r, k in instr.controls]
        for r, _ in instr.controls:
            _require_row_free(engine, r)
        for body in instr.body:
            _require_row_free(engine, body.ref)
            if isinstance(body, SingleClifford):
                mat = sv.gate_matrix(body.gate)
            elif isinstance(body, Rotate):
                mat = sv.gate_matrix("R" + body.axis.upper(), body.angle)
            elif isinstance(body, PhaseGate):
                mat = sv.gate_matrix("PHASE", body.angle)
            else:
                raise MalformedProgramError(
                    f"controlled block body cannot contain {type(body).__name__}")
            engine.amps = sv.apply_controlled(engine.amps, mat, controls,
                                              engine.pos(body.ref), engine.n)
    elif isinstance(instr, (MeasureRotated, MeasureX)):
        # outcome -1 means: sample after the pre-measurement rotation
        outcome = 0 if mode == "postselect_zero" else -1
        _apply_measurement(engine, instr, outcome,
                           "sampled" if mode == "sampled" else "forced")
    else:
        raise MalformedProgramError(f"cannot execute {type(instr).__name__}")


def _require_row_free(engine: _Engine, ref: QubitRef) -> None:
    if engine.tracker.touched_by_row(ref):
        raise MalformedProgramError(
            f"non-Clifford action on {ref} while a live ancilla row touches it")


def _apply_measurement(engine: _Engine, instr, outcome: int, label: str) -> None:
    if isinstance(instr, MeasureRotated):
        _measure_rotated(engine, instr, outcome, label)
    else:
        _measure_x(engine, instr, outcome, label)


def _measure_rotated(engine: _Engine, instr: MeasureRotated, outcome: int,
                     label: str) -> None:
    ref = instr.ref
    if ref not in engine.tracker.rows:
        raise MalformedProgramError(f"{ref} is not a live ancilla")
    sign, row_logical, extras = engine.tracker.row_parts(ref, engine.program.n_logical)
    if extras:
        raise MalformedProgramError(
            f"row of {ref} still touches {sorted(map(str, extras))} at readout")
    if row_logical.letters != instr.byproduct.letters:
        raise MalformedProgramError(
            f"byproduct {instr.byproduct.letters} disagrees with tableau row "
            f"{row_logical.letters}")
    flip = -1 if (engine.frame_policy == "track_to_end"
                  and not commutes(engine.frame, row_logical)) else 1
    dial = sign * flip * instr.angle - instr.pre_rotated
    if dial:
        engine._apply_1q(ref, sv.gate_matrix("RX", -dial))
    if outcome == -1:
        outcome = int(engine.rng.random() < engine._branch_probability(ref, 1))
    engine.tracker.drop_row(ref)
    prob = engine._project_out(ref, outcome)
    engine.weight *= prob
    engine.records.append(OutcomeRecord(ref, outcome, prob, label))
    if outcome == 1:
        _apply_byproduct(engine, row_logical)


def _apply_byproduct(engine: _Engine, q: PauliString) -> None:
    if engine.frame_policy == "apply_immediately":
        engine._apply_logical_pauli(q)
        for ref in list(engine.tracker.rows):
            _, other_logical, _ = engine.tracker.row_parts(ref, engine.program.n_logical)
            if not commutes(q, other_logical):
                engine.tracker.flip_sign(ref)
    else:
        engine.frame = multiply(q, engine.frame)


def _measure_x(engine: _Engine, instr: MeasureX, outcome: int, label: str) -> None:
    ref = instr.ref
    if instr.compensate_ref is not None and ref not in engine.tracker.rows:
        raise MalformedProgramError(f"{ref} is not a live ancilla")
    engine._apply_1q(ref, sv.gate_matrix("H"))
    if outcome == -1:
        outcome = int(engine.rng.random() < engine._branch_probability(ref, 1))
    if instr.compensate_ref is not None:
        engine.tracker.teleport_row(ref, instr.compensate_ref)
    else:
        engine.tracker.drop_row(ref)
    prob = engine._project_out(ref, outcome)
    engine.weight *= prob
    engine.records.append(OutcomeRecord(ref, outcome, prob, label))
    if outcome == 1 and instr.compensate_ref is not None:
        # outcome |-> left the magic qubit rotated the wrong way; Z then
        # R_X(-2 theta) restores the R_X(-theta) branch exactly (Appendix-G
        # fix-up folded into the simulation; repeat-until-success physics is
        # out of scope).
        m = instr.compensate_ref
        engine._apply_1q(m, sv.gate_matrix("Z"))
        engine._apply_1q(m, sv.gate_matrix("RX", -2 * instr.compensate_angle))


def program_unitary(program: QGateProgram) -> np.ndarray:
    """Exact 2^n x 2^n unitary of the postselected (mu=0 everywhere) program,
    reconstructed by batched execution on the identity."""
    dim = 1 << program.n_logical
    engine = _Engine(program, np.eye(dim, dtype=complex), "apply_immediately",
                     None, False)
    for instr in program.instructions:
        _step(engine, instr, "postselect_zero")
    result = _finalize(engine)
    return np.asarray(result.final_state)


def branch_spread(results: list[ExecutionResult]) -> float:
    """Max amplitude deviation between corrected branch states after aligning
    global phases against the first branch."""
    ref = results[0].final_state.amplitudes
    worst = 0.0
    for res in results[1:]:
        other = res.final_state.amplitudes
        overlap = np.vdot(ref, other)
        if abs(overlap) < 1e-12:
            return 2.0
        aligned = other * (abs(overlap) / overlap)
        worst = max(worst, float(np.max(np.abs(aligned - ref))))
    return worst
