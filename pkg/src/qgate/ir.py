"""Program representation for the ancilla-mediated gate architecture.

A program is an ordered instruction list over four qubit kinds: the logical
register (fixed width n_logical), gate ancillas (prepared in |+>, entangled
via controlled Paulis, measured once in a rotated basis), magic ancillas
(R_X(-theta)|0> resources consumed by gate teleportation), and work qubits
(Toffoli-ladder temporaries, always uncomputed and released).

JSON wire format (version 1):

    {"version": 1, "n_logical": N, "name": ..., "source": ...,
     "global_phase": radians, "instructions": [{"op": ..., ...}, ...]}

Qubit refs are compact strings "q<i>" (logical), "a<i>" (gate ancilla),
"m<i>" (magic), "w<i>" (work); angles are decimal radians; byproduct Pauli
strings are letter strings over the logical register, qubit 0 leftmost.
Round-tripping parse(print(program)) is exact and tested.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math

from .pauli import PauliString, commutes, multiply
from .stabilizer import InternalConsistencyError, conjugate_string

KINDS = ("logical", "gate_ancilla", "magic_ancilla", "work")
_KIND_PREFIX = {"logical": "q", "gate_ancilla": "a", "magic_ancilla": "m", "work": "w"}
_PREFIX_KIND = {v: k for k, v in _KIND_PREFIX.items()}

CPAULI_GATE = {"X": "CX", "Y": "CY", "Z": "CZ"}


class MalformedProgramError(ValueError):
    """Instruction stream violates the program well-formedness rules."""


class InvalidTransferError(ValueError):
    """Entanglement transfer between rows with anticommuting logical parts."""


@dataclass(frozen=True, order=True)
class QubitRef:
    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown qubit kind {self.kind!r}")

    def __str__(self) -> str:
        return f"{_KIND_PREFIX[self.kind]}{self.index}"

    @staticmethod
    def parse(text: str) -> "QubitRef":
        if not text or text[0] not in _PREFIX_KIND:
            raise ValueError(f"bad qubit ref {text!r}")
        return QubitRef(_PREFIX_KIND[text[0]], int(text[1:]))


def logical(i: int) -> QubitRef:
    return QubitRef("logical", i)


def ancilla(i: int) -> QubitRef:
    return QubitRef("gate_ancilla", i)


def magic(i: int) -> QubitRef:
    return QubitRef("magic_ancilla", i)


def work(i: int) -> QubitRef:
    return QubitRef("work", i)


# ---------------------------------------------------------------------------
# instruction set

@dataclass(frozen=True)
class AllocLogical:
    count: int
    op = "alloc_logical"


@dataclass(frozen=True)
class AllocAncilla:
    ref: QubitRef
    initial: str = "plus"
    op = "alloc_ancilla"


@dataclass(frozen=True)
class AllocMagic:
    ref: QubitRef
    angle: float
    op = "alloc_magic"


@dataclass(frozen=True)
class AllocWork:
    ref: QubitRef
    op = "alloc_work"


@dataclass(frozen=True)
class ReleaseWork:
    ref: QubitRef
    op = "release_work"


@dataclass(frozen=True)
class CPauli:
    control: QubitRef
    target: QubitRef
    letter: str
    op = "cpauli"


@dataclass(frozen=True)
class AncillaCX:
    control: QubitRef
    target: QubitRef
    op = "ancilla_cx"


@dataclass(frozen=True)
class SingleClifford:
    ref: QubitRef
    gate: str  # H, S, SDG, X, Y, Z
    op = "clifford"


@dataclass(frozen=True)
class Rotate:
    ref: QubitRef
    axis: str  # X or Z, standard convention exp(-i angle P / 2)
    angle: float
    op = "rotate"


@dataclass(frozen=True)
class PhaseGate:
    ref: QubitRef
    angle: float  # diag(1, e^{i angle})
    op = "phase"


@dataclass(frozen=True)
class MeasureRotated:
    """Rotate the ancilla by exp(+i angle X / 2) and read out in the
    computational basis, imparting exp(+i angle P / 2) with by-product P^mu.

    pre_rotated records how much of the angle was already imparted by a
    consumed magic state (gate teleportation); the executor only dials the
    remainder.
    """
    ref: QubitRef
    angle: float
    byproduct: PauliString
    pre_rotated: float = 0.0
    op = "measure_rotated"


@dataclass(frozen=True)
class MeasureX:
    """X-basis readout.  With compensation (magic teleportation), outcome 1
    triggers the exact simulation-side fix-up that restores the R_X(-angle)
    branch on the magic qubit."""
    ref: QubitRef
    compensate_ref: QubitRef | None = None
    compensate_angle: float = 0.0
    op = "measure_x"


@dataclass(frozen=True)
class ControlledBlock:
    """Apply every body gate conditioned on all control qubits matching
    their key bits.  Executed natively by the verification backend; the
    compiler can also lower it to a Toffoli ladder."""
    controls: tuple[tuple[QubitRef, int], ...]
    body: tuple
    op = "controlled_block"

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple((r, int(k)) for r, k in self.controls))
        object.__setattr__(self, "body", tuple(self.body))


Instruction = (AllocLogical | AllocAncilla | AllocMagic | AllocWork | ReleaseWork |
               CPauli | AncillaCX | SingleClifford | Rotate | PhaseGate |
               MeasureRotated | MeasureX | ControlledBlock)

_GATE_BODY_TYPES = (SingleClifford, Rotate, PhaseGate)


@dataclass(frozen=True)
class QGateProgram:
    n_logical: int
    instructions: tuple
    name: str = ""
    source: str = ""
    global_phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    def __len__(self) -> int:
        return len(self.instructions)


def concatenate(programs: list[QGateProgram], name: str = "", source: str = "") -> QGateProgram:
    """Sequential composition; ancilla/magic/work indices are renumbered fresh."""
    if not programs:
        raise ValueError("nothing to concatenate")
    n_logical = programs[0].n_logical
    if any(p.n_logical != n_logical for p in programs):
        raise MalformedProgramError("programs act on different logical registers")
    counters = {"gate_ancilla": 0, "magic_ancilla": 0, "work": 0}
    instructions = [AllocLogical(n_logical)]
    phase = 0.0
    for prog in programs:
        remap: dict[QubitRef, QubitRef] = {}

        def rename(ref: QubitRef) -> QubitRef:
            if ref.kind == "logical":
                return ref
            if ref not in remap:
                remap[ref] = QubitRef(ref.kind, counters[ref.kind])
                counters[ref.kind] += 1
            return remap[ref]

        for instr in prog.instructions:
            if isinstance(instr, AllocLogical):
                continue
            instructions.append(_rename_instruction(instr, rename))
        phase += prog.global_phase
    return QGateProgram(n_logical, tuple(instructions), name=name, source=source,
                        global_phase=phase)


def _rename_instruction(instr, rename):
    if isinstance(instr, (AllocAncilla, AllocWork, ReleaseWork)):
        return type(instr)(rename(instr.ref), *(
            (instr.initial,) if isinstance(instr, AllocAncilla) else ()))
    if isinstance(instr, AllocMagic):
        return AllocMagic(rename(instr.ref), instr.angle)
    if isinstance(instr, (CPauli,)):
        return CPauli(rename(instr.control), rename(instr.target), instr.letter)
    if isinstance(instr, AncillaCX):
        return AncillaCX(rename(instr.control), rename(instr.target))
    if isinstance(instr, SingleClifford):
        return SingleClifford(rename(instr.ref), instr.gate)
    if isinstance(instr, Rotate):
        return Rotate(rename(instr.ref), instr.axis, instr.angle)
    if isinstance(instr, PhaseGate):
        return PhaseGate(rename(instr.ref), instr.angle)
    if isinstance(instr, MeasureRotated):
        return MeasureRotated(rename(instr.ref), instr.angle, instr.byproduct,
                              instr.pre_rotated)
    if isinstance(instr, MeasureX):
        comp = rename(instr.compensate_ref) if instr.compensate_ref else None
        return MeasureX(rename(instr.ref), comp, instr.compensate_angle)
    if isinstance(instr, ControlledBlock):
        controls = tuple((rename(r), k) for r, k in instr.controls)
        body = tuple(_rename_instruction(b, rename) for b in instr.body)
        return ControlledBlock(controls, body)
    raise TypeError(f"cannot rename {instr!r}")


# ---------------------------------------------------------------------------
# live stabilizer-row tracking (shared by builder, validator and executor)

class RowTracker:
    """Rows X_a . P conjugated through the instruction stream.

    The register is the ordered list of live qubit refs; every row is a
    PauliString over that register.  Allocation appends identity columns,
    deallocation requires an identity column in every row.
    """

    def __init__(self):
        self.order: list[QubitRef] = []
        self.rows: dict[QubitRef, PauliString] = {}

    def clone(self) -> "RowTracker":
        other = RowTracker.__new__(RowTracker)
        other.order = list(self.order)
        other.rows = dict(self.rows)
        return other

    @property
    def n(self) -> int:
        return len(self.order)

    def position(self, ref: QubitRef) -> int:
        try:
            return self.order.index(ref)
        except ValueError:
            raise MalformedProgramError(f"{ref} used before allocation") from None

    def add_qubit(self, ref: QubitRef) -> None:
        if ref in self.order:
            raise MalformedProgramError(f"{ref} allocated twice")
        self.order.append(ref)
        self.rows = {a: PauliString(g.n_qubits + 1, g.x_bits + (0,), g.z_bits + (0,),
                                    g.phase_exponent)
                     for a, g in self.rows.items()}

    def remove_qubit(self, ref: QubitRef) -> None:
        pos = self.position(ref)
        for a, g in self.rows.items():
            if g.letter(pos) != "I":
                raise MalformedProgramError(
                    f"cannot remove {ref}: row of {a} still holds {g.letter(pos)} there")
        self.order.pop(pos)
        self.rows = {a: _drop_column(g, pos) for a, g in self.rows.items()}

    def new_row(self, ref: QubitRef) -> None:
        pos = self.position(ref)
        self.rows[ref] = PauliString.single(self.n, pos, "X")

    def drop_row(self, ref: QubitRef) -> None:
        self.rows.pop(ref, None)

    def touched_by_row(self, ref: QubitRef) -> bool:
        pos = self.position(ref)
        return any(g.letter(pos) != "I" for g in self.rows.values())

    def conjugate_1q(self, gate: str, ref: QubitRef) -> None:
        pos = self.position(ref)
        self.rows = {a: conjugate_string(g, gate, (pos,)) for a, g in self.rows.items()}

    def conjugate_2q(self, gate: str, control: QubitRef, target: QubitRef) -> None:
        c, t = self.position(control), self.position(target)
        self.rows = {a: conjugate_string(g, gate, (c, t)) for a, g in self.rows.items()}

    def recombine(self, target_ref: QubitRef, factor_ref: QubitRef) -> None:
        product = multiply(self.rows[target_ref], self.rows[factor_ref])
        if product.phase_exponent % 2:
            raise InternalConsistencyError("row recombination produced odd phase")
        self.rows[target_ref] = product

    def flip_sign(self, ref: QubitRef) -> None:
        g = self.rows[ref]
        self.rows[ref] = g.with_phase(g.phase_exponent + 2)

    def row_parts(self, ref: QubitRef, n_logical: int):
        """Split a row into (sign, logical PauliString, extras dict).

        sign is +1/-1; the logical part is over refs q0..q{n-1}; extras maps
        any non-logical ref other than `ref` itself to its letter.
        """
        g = self.rows[ref]
        pos = self.position(ref)
        if g.letter(pos) != "X":
            raise MalformedProgramError(f"row of {ref} does not carry X on its own qubit")
        letters = ["I"] * n_logical
        extras: dict[QubitRef, str] = {}
        for p, r in enumerate(self.order):
            if p == pos:
                continue
            letter = g.letter(p)
            if letter == "I":
                continue
            if r.kind == "logical":
                letters[r.index] = letter
            else:
                extras[r] = letter
        sign = -1 if g.phase_exponent == 2 else 1
        return sign, PauliString.from_letters("".join(letters)), extras

    def teleport_row(self, a_ref: QubitRef, m_ref: QubitRef) -> None:
        """Rebind a's row to the magic qubit after the teleport X-readout."""
        g = self.rows.pop(a_ref)
        a_pos, m_pos = self.position(a_ref), self.position(m_ref)
        if g.letter(a_pos) != "X" or g.letter(m_pos) != "X":
            raise MalformedProgramError("teleport row is not in X_a X_m P form")
        letters = list(g.letters)
        letters[a_pos] = "I"
        self.rows[m_ref] = PauliString.from_letters("".join(letters), g.phase_exponent)


def _drop_column(g: PauliString, pos: int) -> PauliString:
    x = g.x_bits[:pos] + g.x_bits[pos + 1:]
    z = g.z_bits[:pos] + g.z_bits[pos + 1:]
    return PauliString(g.n_qubits - 1, x, z, g.phase_exponent)


# ---------------------------------------------------------------------------
# builder

class ProgramBuilder:
    """Incrementally assembles a program while tracking ancilla rows, so
    rotated measurements always carry the tableau-true by-product string."""

    def __init__(self, n_logical: int, name: str = "", source: str = ""):
        self.n_logical = n_logical
        self.name = name
        self.source = source
        self.instructions: list = [AllocLogical(n_logical)]
        self.global_phase = 0.0
        self.tracker = RowTracker()
        self._counters = {"gate_ancilla": 0, "magic_ancilla": 0, "work": 0}
        for q in range(n_logical):
            self.tracker.add_qubit(logical(q))

    def _fresh(self, kind: str) -> QubitRef:
        ref = QubitRef(kind, self._counters[kind])
        self._counters[kind] += 1
        return ref

    def alloc_ancilla(self) -> QubitRef:
        ref = self._fresh("gate_ancilla")
        self.instructions.append(AllocAncilla(ref))
        self.tracker.add_qubit(ref)
        self.tracker.new_row(ref)
        return ref

    def cpauli(self, control: QubitRef, target_logical: int, letter: str) -> None:
        target = logical(target_logical)
        self.instructions.append(CPauli(control, target, letter))
        self.tracker.conjugate_2q(CPAULI_GATE[letter], control, target)

    def clifford(self, ref: QubitRef, gate: str) -> None:
        self.instructions.append(SingleClifford(ref, gate))
        self.tracker.conjugate_1q(gate, ref)

    def ancilla_cx(self, control: QubitRef, target: QubitRef) -> None:
        self.instructions.append(AncillaCX(control, target))
        self.tracker.conjugate_2q("CX", control, target)
        if target in self.tracker.rows and control in self.tracker.rows:
            self.tracker.recombine(control, target)

    def transfer_entanglement(self, from_ref: QubitRef, to_ref: QubitRef) -> None:
        """Copy from_ref's logical entanglement onto to_ref (one ancilla CX).

        After the gate, to_ref's row becomes X_to (P_from P_to); requires the
        two logical parts to commute."""
        for ref in (from_ref, to_ref):
            if ref not in self.tracker.rows:
                raise InvalidTransferError(f"{ref} has no live row")
        _, p_from, extras_f = self.tracker.row_parts(from_ref, self.n_logical)
        _, p_to, extras_t = self.tracker.row_parts(to_ref, self.n_logical)
        if extras_f or extras_t:
            raise InvalidTransferError("rows are not in X_a x logical form")
        if not commutes(p_from, p_to):
            raise InvalidTransferError(
                f"logical parts {p_from} and {p_to} anticommute")
        self.ancilla_cx(to_ref, from_ref)

    def measure_rotated(self, ref: QubitRef, angle: float, pre_rotated: float = 0.0) -> None:
        sign, logical_part, extras = self.tracker.row_parts(ref, self.n_logical)
        if extras:
            raise MalformedProgramError(
                f"row of {ref} still touches {sorted(map(str, extras))}")
        self.instructions.append(MeasureRotated(ref, angle, logical_part, pre_rotated))
        self.tracker.drop_row(ref)
        self.tracker.remove_qubit(ref)

    def teleport_rotation(self, ref: QubitRef, angle: float) -> QubitRef:
        """Consume a magic state to impart the ancilla rotation; returns the
        magic ref that subsequent instructions (and the final rotated
        readout) must target."""
        if ref not in self.tracker.rows:
            raise MalformedProgramError(f"{ref} is not an unmeasured ancilla")
        m = self._fresh("magic_ancilla")
        self.instructions.append(AllocMagic(m, angle))
        self.tracker.add_qubit(m)
        self.instructions.append(AncillaCX(ref, m))
        self.tracker.conjugate_2q("CX", ref, m)
        self.instructions.append(MeasureX(ref, compensate_ref=m, compensate_angle=angle))
        self.tracker.teleport_row(ref, m)
        self.tracker.remove_qubit(ref)
        return m

    def alloc_work(self) -> QubitRef:
        ref = self._fresh("work")
        self.instructions.append(AllocWork(ref))
        self.tracker.add_qubit(ref)
        return ref

    def release_work(self, ref: QubitRef) -> None:
        self.instructions.append(ReleaseWork(ref))
        self.tracker.remove_qubit(ref)

    def rotate(self, ref: QubitRef, axis: str, angle: float) -> None:
        self._require_row_free(ref)
        self.instructions.append(Rotate(ref, axis, angle))

    def phase_gate(self, ref: QubitRef, angle: float) -> None:
        self._require_row_free(ref)
        self.instructions.append(PhaseGate(ref, angle))

    def controlled_block(self, controls, body) -> None:
        block = ControlledBlock(tuple(controls), tuple(body))
        for r, _ in block.controls:
            self._require_row_free(r)
        for instr in block.body:
            if not isinstance(instr, _GATE_BODY_TYPES):
                raise MalformedProgramError(
                    f"controlled block body cannot contain {type(instr).__name__}")
            self._require_row_free(instr.ref)
        self.instructions.append(block)

    def add_global_phase(self, gamma: float) -> None:
        self.global_phase += gamma

    def _require_row_free(self, ref: QubitRef) -> None:
        self.tracker.position(ref)
        if self.tracker.touched_by_row(ref):
            raise MalformedProgramError(
                f"non-Clifford gate on {ref} while a live ancilla row touches it")

    def finish(self) -> QGateProgram:
        if self.tracker.rows:
            raise MalformedProgramError(
                f"unmeasured ancillas: {sorted(map(str, self.tracker.rows))}")
        leftovers = [r for r in self.tracker.order if r.kind != "logical"]
        if leftovers:
            raise MalformedProgramError(f"unreleased qubits: {list(map(str, leftovers))}")
        return QGateProgram(self.n_logical, tuple(self.instructions),
                            name=self.name, source=self.source,
                            global_phase=self.global_phase)


# ---------------------------------------------------------------------------
# validation diagnostics

@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    index: int


def validate(program: QGateProgram) -> list[Violation]:
    """Static diagnostics: ref discipline, single-measurement rule, and
    byproduct/tableau consistency (rows are rebuilt by conjugation and
    compared against each MeasureRotated byproduct field)."""
    out: list[Violation] = []
    tracker = RowTracker()
    for q in range(program.n_logical):
        tracker.add_qubit(logical(q))
    measured: set[QubitRef] = set()

    def bad(code, message, i):
        out.append(Violation(code, message, i))

    for i, instr in enumerate(program.instructions):
        try:
            _validate_step(program, instr, tracker, measured, bad, i)
        except MalformedProgramError as exc:
            bad("malformed", str(exc), i)
        except InternalConsistencyError as exc:
            bad("internal-consistency", str(exc), i)
    for ref in list(tracker.rows):
        bad("unmeasured-ancilla", f"{ref} never measured", len(program.instructions) - 1)
    for ref in tracker.order:
        if ref.kind == "work":
            bad("unreleased-work", f"{ref} never released", len(program.instructions) - 1)
    return out


def _validate_step(program, instr, tracker, measured, bad, i):
    if isinstance(instr, AllocLogical):
        if instr.count != program.n_logical:
            bad("logical-width", f"AllocLogical({instr.count}) != n_logical", i)
    elif isinstance(instr, AllocAncilla):
        tracker.add_qubit(instr.ref)
        tracker.new_row(instr.ref)
    elif isinstance(instr, AllocMagic):
        tracker.add_qubit(instr.ref)
    elif isinstance(instr, AllocWork):
        tracker.add_qubit(instr.ref)
    elif isinstance(instr, ReleaseWork):
        tracker.remove_qubit(instr.ref)
    elif isinstance(instr, CPauli):
        tracker.conjugate_2q(CPAULI_GATE[instr.letter], instr.control, instr.target)
    elif isinstance(instr, AncillaCX):
        tracker.conjugate_2q("CX", instr.control, instr.target)
        if instr.target in tracker.rows and instr.control in tracker.rows:
            tracker.recombine(instr.control, instr.target)
    elif isinstance(instr, SingleClifford):
        tracker.conjugate_1q(instr.gate, instr.ref)
    elif isinstance(instr, (Rotate, PhaseGate)):
        if tracker.touched_by_row(instr.ref):
            bad("row-clobbered", f"non-Clifford gate on {instr.ref} under a live row", i)
    elif isinstance(instr, ControlledBlock):
        for r, k in instr.controls:
            tracker.position(r)
            if tracker.touched_by_row(r):
                bad("row-clobbered", f"controlled block control {r} under a live row", i)
        for b in instr.body:
            if not isinstance(b, _GATE_BODY_TYPES):
                bad("bad-block-body", f"{type(b).__name__} inside controlled block", i)
            else:
                tracker.position(b.ref)
                if tracker.touched_by_row(b.ref):
                    bad("row-clobbered", f"block body target {b.ref} under a live row", i)
    elif isinstance(instr, MeasureRotated):
        if instr.ref in measured:
            bad("double-measurement", f"{instr.ref} measured twice", i)
            return
        if instr.ref not in tracker.rows:
            bad("not-an-ancilla", f"{instr.ref} has no live row", i)
            return
        _, logical_part, extras = tracker.row_parts(instr.ref, program.n_logical)
        if extras:
            bad("row-entangled", f"row of {instr.ref} touches {sorted(map(str, extras))}", i)
        if logical_part.letters != instr.byproduct.letters:
            bad("frame-mismatch",
                f"byproduct {instr.byproduct.letters} != tableau row {logical_part.letters}", i)
        measured.add(instr.ref)
        tracker.drop_row(instr.ref)
        tracker.remove_qubit(instr.ref)
    elif isinstance(instr, MeasureX):
        if instr.ref in measured:
            bad("double-measurement", f"{instr.ref} measured twice", i)
            return
        measured.add(instr.ref)
        if instr.compensate_ref is not None:
            tracker.teleport_row(instr.ref, instr.compensate_ref)
            tracker.remove_qubit(instr.ref)
        else:
            if instr.ref in tracker.rows:
                _, logical_part, extras = tracker.row_parts(instr.ref, program.n_logical)
                if extras or not logical_part.is_identity_letters():
                    bad("row-entangled",
                        f"bare X measurement of entangled {instr.ref}", i)
                tracker.drop_row(instr.ref)
            tracker.remove_qubit(instr.ref)
    else:
        bad("unknown-op", f"{type(instr).__name__}", i)


# ---------------------------------------------------------------------------
# JSON serialization

WIRE_VERSION = 1


def _ref_json(ref: QubitRef) -> str:
    return str(ref)


def _instr_json(instr) -> dict:
    if isinstance(instr, AllocLogical):
        return {"op": instr.op, "count": instr.count}
    if isinstance(instr, AllocAncilla):
        return {"op": instr.op, "ref": _ref_json(instr.ref), "initial": instr.initial}
    if isinstance(instr, AllocMagic):
        return {"op": instr.op, "ref": _ref_json(instr.ref), "angle": instr.angle}
    if isinstance(instr, (AllocWork, ReleaseWork)):
        return {"op": instr.op, "ref": _ref_json(instr.ref)}
    if isinstance(instr, CPauli):
        return {"op": instr.op, "control": _ref_json(instr.control),
                "target": _ref_json(instr.target), "letter": instr.letter}
    if isinstance(instr, AncillaCX):
        return {"op": instr.op, "control": _ref_json(instr.control),
                "target": _ref_json(instr.target)}
    if isinstance(instr, SingleClifford):
        return {"op": instr.op, "ref": _ref_json(instr.ref), "gate": instr.gate}
    if isinstance(instr, Rotate):
        return {"op": instr.op, "ref": _ref_json(instr.ref), "axis": instr.axis,
                "angle": instr.angle}
    if isinstance(instr, PhaseGate):
        return {"op": instr.op, "ref": _ref_json(instr.ref), "angle": instr.angle}
    if isinstance(instr, MeasureRotated):
        doc = {"op": instr.op, "ref": _ref_json(instr.ref), "angle": instr.angle,
               "byproduct": instr.byproduct.letters}
        if instr.pre_rotated:
            doc["pre_rotated"] = instr.pre_rotated
        return doc
    if isinstance(instr, MeasureX):
        doc = {"op": instr.op, "ref": _ref_json(instr.ref)}
        if instr.compensate_ref is not None:
            doc["compensate_ref"] = _ref_json(instr.compensate_ref)
            doc["compensate_angle"] = instr.compensate_angle
        return doc
    if isinstance(instr, ControlledBlock):
        return {"op": instr.op,
                "controls": [[_ref_json(r), k] for r, k in instr.controls],
                "body": [_instr_json(b) for b in instr.body]}
    raise TypeError(f"cannot serialize {instr!r}")


def _instr_from_json(doc: dict):
    op = doc["op"]
    if op == "alloc_logical":
        return AllocLogical(int(doc["count"]))
    if op == "alloc_ancilla":
        return AllocAncilla(QubitRef.parse(doc["ref"]), doc.get("initial", "plus"))
    if op == "alloc_magic":
        return AllocMagic(QubitRef.parse(doc["ref"]), float(doc["angle"]))
    if op == "alloc_work":
        return AllocWork(QubitRef.parse(doc["ref"]))
    if op == "release_work":
        return ReleaseWork(QubitRef.parse(doc["ref"]))
    if op == "cpauli":
        return CPauli(QubitRef.parse(doc["control"]), QubitRef.parse(doc["target"]),
                      doc["letter"])
    if op == "ancilla_cx":
        return AncillaCX(QubitRef.parse(doc["control"]), QubitRef.parse(doc["target"]))
    if op == "clifford":
        return SingleClifford(QubitRef.parse(doc["ref"]), doc["gate"])
    if op == "rotate":
        return Rotate(QubitRef.parse(doc["ref"]), doc["axis"], float(doc["angle"]))
    if op == "phase":
        return PhaseGate(QubitRef.parse(doc["ref"]), float(doc["angle"]))
    if op == "measure_rotated":
        return MeasureRotated(QubitRef.parse(doc["ref"]), float(doc["angle"]),
                              PauliString.from_letters(doc["byproduct"]),
                              float(doc.get("pre_rotated", 0.0)))
    if op == "measure_x":
        comp = doc.get("compensate_ref")
        return MeasureX(QubitRef.parse(doc["ref"]),
                        QubitRef.parse(comp) if comp else None,
                        float(doc.get("compensate_angle", 0.0)))
    if op == "controlled_block":
        controls = tuple((QubitRef.parse(r), int(k)) for r, k in doc["controls"])
        body = tuple(_instr_from_json(b) for b in doc["body"])
        return ControlledBlock(controls, body)
    raise ValueError(f"unknown instruction op {op!r}")


def to_json_dict(program: QGateProgram) -> dict:
    return {
        "version": WIRE_VERSION,
        "n_logical": program.n_logical,
        "name": program.name,
        "source": program.source,
        "global_phase": program.global_phase,
        "instructions": [_instr_json(instr) for instr in program.instructions],
    }


def to_json(program: QGateProgram, indent: int | None = 2) -> str:
    return json.dumps(to_json_dict(program), indent=indent) + "\n"


def from_json_dict(doc: dict) -> QGateProgram:
    if doc.get("version") != WIRE_VERSION:
        raise ValueError(f"unsupported program version {doc.get('version')!r}")
    instructions = tuple(_instr_from_json(d) for d in doc["instructions"])
    return QGateProgram(int(doc["n_logical"]), instructions,
                        name=doc.get("name", ""), source=doc.get("source", ""),
                        global_phase=float(doc.get("global_phase", 0.0)))


def from_json(text: str) -> QGateProgram:
    return from_json_dict(json.loads(text))
