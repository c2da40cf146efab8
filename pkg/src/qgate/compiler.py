"""Lowering of Hamiltonians to ancilla-mediated programs.

Two routes to the same unitary:

* Pauli route -- a weighted Pauli-term list is Trotterized (orders 1, 2, 4)
  and every term becomes one entanglement graph: a fresh |+> ancilla,
  one controlled Pauli per non-identity letter, one rotated readout.
* Direct route -- a sparse Hermitian matrix is split into a diagonal block
  (aggregated by a Walsh-Hadamard transform into commuting Z-string
  rotations, exact) and Hermitian off-diagonal pairs, each implemented
  exactly by label extraction, a fan-out cascade over the flipping qubits,
  and one (N-1)-controlled X rotation of angle -2*theta.

Angle convention, used everywhere: a rotation entry (P, phi) means
exp(+i phi P / 2), so evolving exp(-i H delta) maps a term coefficient c
to phi = -2 c delta (divided further by the Trotter schedule).
"""
from __future__ import annotations

from dataclasses import dataclass
import itertools
import math
import warnings

import numpy as np

from . import ir
from .ir import ProgramBuilder, QGateProgram, QubitRef, logical
from .pauli import PauliString, WeightedPauli, multiply

SUZUKI_S4 = 1.351207191959657   # triple-jump fourth-order coefficient
COEFF_PRUNE = 1e-14

TROTTER_ORDERS = (1, 2, 4)


class UnsupportedHamiltonianError(ValueError):
    """Hamiltonian feature outside the implemented routes (complex off-diagonals)."""


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class SparseHamiltonian:
    """Hermitian matrix as (row, col, value) entries over a 2^n basis.

    Entries may list either or both of a Hermitian pair; the missing partner
    is implied.  Diagonal values must be real to 1e-12.
    """

    n_qubits: int
    entries: tuple[tuple[int, int, complex], ...]

    def __post_init__(self):
        dim = 1 << self.n_qubits
        merged: dict[tuple[int, int], complex] = {}
        for row, col, value in self.entries:
            if not (0 <= row < dim and 0 <= col < dim):
                raise ValueError(f"entry ({row},{col}) outside a {dim}-dimensional basis")
            merged[row, col] = merged.get((row, col), 0j) + complex(value)
        for (row, col), value in list(merged.items()):
            if row == col:
                if abs(value.imag) > 1e-12:
                    raise ValueError(f"diagonal entry ({row},{row}) is not real: {value}")
                merged[row, col] = complex(value.real, 0.0)
            elif (col, row) in merged:
                if abs(merged[col, row] - value.conjugate()) > 1e-9:
                    raise ValueError(f"entries ({row},{col}) and ({col},{row}) break Hermiticity")
        object.__setattr__(self, "entries",
                           tuple((r, c, v) for (r, c), v in sorted(merged.items())))

    @staticmethod
    def from_dense(matrix: np.ndarray, prune: float = COEFF_PRUNE) -> "SparseHamiltonian":
        matrix = np.asarray(matrix, dtype=complex)
        dim = matrix.shape[0]
        n = int(round(math.log2(dim)))
        if (1 << n) != dim or matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {matrix.shape} is not square power-of-two")
        entries = [(i, j, matrix[i, j]) for i in range(dim) for j in range(dim)
                   if abs(matrix[i, j]) > prune]
        return SparseHamiltonian(n, tuple(entries))

    def to_dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for row, col, value in self.entries:
            out[row, col] = value
            if row != col:
                out[col, row] = value.conjugate()
        return out

    def diagonal_vector(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        out = np.zeros(dim)
        for row, col, value in self.entries:
            if row == col:
                out[row] = value.real
        return out

    def hermitian_pairs(self) -> list[tuple[int, int, complex]]:
        """Off-diagonal content as one (i, j, h) per pair with i < j."""
        seen: dict[tuple[int, int], complex] = {}
        for row, col, value in self.entries:
            if row == col:
                continue
            key = (min(row, col), max(row, col))
            h = value if row < col else value.conjugate()
            seen.setdefault(key, h)
        return [(i, j, h) for (i, j), h in sorted(seen.items())]


@dataclass(frozen=True)
class TermLabels:
    """Per-qubit one-hot classification of a transition |i><j|:
    f = flipped to |1| (ket 1, bra 0), b = flipped to |0|,
    t = stays |1|, d = stays |0|."""
    f: tuple[int, ...]
    b: tuple[int, ...]
    t: tuple[int, ...]
    d: tuple[int, ...]

    @property
    def flip_set(self) -> tuple[int, ...]:
        return tuple(k for k in range(len(self.f)) if self.f[k] or self.b[k])

    @property
    def number_set(self) -> tuple[int, ...]:
        return tuple(k for k in range(len(self.t)) if self.t[k] or self.d[k])

    @property
    def control_keys(self) -> tuple[tuple[int, int], ...]:
        """(qubit, key) for the non-flipping qubits; key 1 marks a qubit held in |1>."""
        return tuple((k, self.t[k]) for k in self.number_set)


@dataclass(frozen=True)
class PauliTermList:
    terms: tuple[WeightedPauli, ...]
    ordering: str = "as-given"  # or "random"
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.ordering not in ("as-given", "random"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.ordering == "random" and self.seed is None:
            raise ValueError("random ordering requires a seed")
        if self.terms:
            n = self.terms[0].string.n_qubits
            if any(t.string.n_qubits != n for t in self.terms):
                raise ValueError("terms act on different register widths")

    @property
    def n_qubits(self) -> int:
        return self.terms[0].string.n_qubits

    def to_dense(self) -> np.ndarray:
        out = 0
        for term in self.terms:
            out = out + term.to_dense()
        return out


@dataclass(frozen=True)
class CostReport:
    """Resource counts.  entangling_gates counts ancilla-logical controlled
    Paulis (the paper's figure-of-merit); ancilla-ancilla CX gates used by
    entanglement transfer are reported separately."""
    gate_ancillas: int
    magic_states: int
    entangling_gates: int
    ancilla_cx_gates: int
    work_qubits: int
    rotations: int
    toffoli_count: int

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "gate_ancillas", "magic_states", "entangling_gates", "ancilla_cx_gates",
            "work_qubits", "rotations", "toffoli_count")}

    def to_csv(self) -> str:
        keys = list(self.to_json_dict())
        return ",".join(keys) + "\n" + ",".join(str(getattr(self, k)) for k in keys) + "\n"


# ---------------------------------------------------------------------------
# single Pauli-string rotation graphs

def _normalize_rotation(p: PauliString, phi: float) -> tuple[PauliString, float]:
    if p.phase_exponent % 2:
        raise ValueError(f"rotation generator {p} is not Hermitian")
    if p.phase_exponent == 2:
        return p.with_phase(0), -phi
    return p, phi


def _emit_rotation(builder: ProgramBuilder, p: PauliString, phi: float,
                   teleport: bool = False) -> None:
    p, phi = _normalize_rotation(p, phi)
    if p.is_identity_letters():
        builder.add_global_phase(phi / 2)
        return
    a = builder.alloc_ancilla()
    for q, letter in enumerate(p.letters):
        if letter != "I":
            builder.cpauli(a, q, letter)
    if teleport:
        m = builder.teleport_rotation(a, phi)
        builder.measure_rotated(m, phi, pre_rotated=phi)
    else:
        builder.measure_rotated(a, phi)


def compile_pauli_rotation(p: PauliString, phi: float, name: str = "",
                           teleport: bool = False) -> QGateProgram:
    """One entanglement graph applying exp(+i phi P / 2).

    An all-identity string is a global phase: compiles to an empty program
    (with a warning) whose global_phase carries phi/2.
    """
    if p.is_identity_letters():
        warnings.warn("identity Pauli string compiles to a bare global phase",
                      stacklevel=2)
    builder = ProgramBuilder(p.n_qubits, name=name or f"rot[{p.letters}]")
    _emit_rotation(builder, p, phi, teleport=teleport)
    return builder.finish()


def compile_rotation_graph(rotations, n_qubits: int, use_transfer: bool = False,
                           global_phase: float = 0.0, name: str = "",
                           teleport: bool = False) -> QGateProgram:
    """Compile a list of (PauliString, angle) rotations.

    use_transfer keeps all ancillas live and builds any weight >= 3 string
    whose letters factor as the product of two already-built rows with two
    ancilla-ancilla CX gates instead of fresh ancilla-logical edges.
    """
    builder = ProgramBuilder(n_qubits, name=name)
    builder.add_global_phase(global_phase)
    if not use_transfer:
        for p, phi in rotations:
            _emit_rotation(builder, p, phi, teleport=teleport)
        return builder.finish()
    normalized = [_normalize_rotation(p, phi) for p, phi in rotations]
    built: list[tuple[QubitRef, PauliString]] = []
    angles: list[tuple[QubitRef, float]] = []
    for p, phi in normalized:
        if p.is_identity_letters():
            builder.add_global_phase(phi / 2)
            continue
        a = builder.alloc_ancilla()
        sources = None
        if p.weight >= 3:
            for (r1, s1), (r2, s2) in itertools.combinations(built, 2):
                prod = multiply(s1, s2)
                if prod.letters == p.letters and prod.phase_exponent == 0:
                    sources = (r1, r2)
                    break
        if sources:
            builder.transfer_entanglement(sources[0], a)
            builder.transfer_entanglement(sources[1], a)
        else:
            for q, letter in enumerate(p.letters):
                if letter != "I":
                    builder.cpauli(a, q, letter)
        built.append((a, p))
        angles.append((a, phi))
    for a, phi in angles:
        builder.measure_rotated(a, phi)
    return builder.finish()


# ---------------------------------------------------------------------------
# Trotter-Suzuki schedules

def trotter_schedule(n_terms: int, order: int, steps: int,
                     rng: np.random.Generator | None = None) -> list[tuple[int, float]]:
    """(term index, step fraction) pairs; fractions sum to `steps * (1/steps)`
    per term.  Order 2 is the palindrome with the last term unhalved in the
    middle; order 4 is the triple jump S2(s)*S2(1-2s)*S2(s)."""
    if n_terms < 1:
        raise ValueError("empty term list")
    if order not in TROTTER_ORDERS:
        raise ValueError(f"order must be one of {TROTTER_ORDERS}")
    if steps < 1:
        raise ValueError("steps must be >= 1")

    def s2(perm, scale):
        if n_terms == 1:
            return [(perm[0], scale)]
        head = [(m, scale / 2) for m in perm[:-1]]
        return head + [(perm[-1], scale)] + head[::-1]

    out: list[tuple[int, float]] = []
    for _ in range(steps):
        perm = list(range(n_terms))
        if rng is not None:
            perm = [int(x) for x in rng.permutation(n_terms)]
        if order == 1:
            out.extend((m, 1 / steps) for m in perm)
        elif order == 2:
            out.extend(s2(perm, 1 / steps))
        else:
            s = SUZUKI_S4
            out.extend(s2(perm, s / steps))
            out.extend(s2(perm, (1 - 2 * s) / steps))
            out.extend(s2(perm, s / steps))
    return out


def trotter_sequence(terms: PauliTermList, order: int, steps: int) -> list[tuple[PauliString, float]]:
    """Expand a term list into per-graph rotation angles.

    Each term's coefficient is read as the full rotation angle phi_m of
    exp(+i phi_m P_m / 2); the schedule divides it across the steps."""
    rng = np.random.default_rng(terms.seed) if terms.ordering == "random" else None
    schedule = trotter_schedule(len(terms.terms), order, steps, rng)
    out = []
    for index, scale in schedule:
        term = terms.terms[index]
        if abs(term.coefficient.imag) > 1e-12:
            raise ValueError(f"term {term.string.letters} has a complex angle")
        out.append((term.string, term.coefficient.real * scale))
    return out


def compile_trotter(terms: PauliTermList, order: int, steps: int, delta: float,
                    name: str = "", teleport: bool = False) -> QGateProgram:
    """Trotterized exp(-i H delta) for H = sum_m c_m P_m."""
    angles = PauliTermList(
        tuple(WeightedPauli(-2.0 * t.coefficient * delta, t.string) for t in terms.terms),
        ordering=terms.ordering, seed=terms.seed)
    rotations = trotter_sequence(angles, order, steps)
    return compile_rotation_graph(rotations, terms.n_qubits, name=name, teleport=teleport)


# ---------------------------------------------------------------------------
# direct route: labels, fan-out, n-controlled rotation, one exact term

def label_coefficients(i: int, j: int, n_qubits: int) -> TermLabels:
    """Boolean labels of the transition |i><j| (ket index i, bra index j)."""
    dim = 1 << n_qubits
    if not (0 <= i < dim and 0 <= j < dim):
        raise ValueError(f"basis index out of range for {n_qubits} qubits")
    f, b, t, d = [], [], [], []
    for k in range(n_qubits):
        ket = (i >> (n_qubits - 1 - k)) & 1
        bra = (j >> (n_qubits - 1 - k)) & 1
        f.append(ket & (bra ^ 1))
        b.append((ket ^ 1) & bra)
        t.append(ket & bra)
        d.append((ket | bra) ^ 1)
    return TermLabels(tuple(f), tuple(b), tuple(t), tuple(d))


def expand_projector_pauli(i: int, j: int, h: complex, n_qubits: int) -> PauliTermList:
    """Pauli expansion of h|i><j| + h*|j><i| (or h|i><i| on the diagonal)."""
    dim = 1 << n_qubits
    if not (0 <= i < dim and 0 <= j < dim):
        raise ValueError(f"basis index out of range for {n_qubits} qubits")
    acc: dict[str, complex] = {}

    def accumulate(ket: int, bra: int, coeff: complex):
        options = []
        for k in range(n_qubits):
            kb = (ket >> (n_qubits - 1 - k)) & 1
            bb = (bra >> (n_qubits - 1 - k)) & 1
            options.append({
                (0, 0): [("I", 0.5), ("Z", 0.5)],
                (1, 1): [("I", 0.5), ("Z", -0.5)],
                (0, 1): [("X", 0.5), ("Y", 0.5j)],
                (1, 0): [("X", 0.5), ("Y", -0.5j)],
            }[kb, bb])
        for combo in itertools.product(*options):
            letters = "".join(c[0] for c in combo)
            weight = coeff
            for c in combo:
                weight *= c[1]
            acc[letters] = acc.get(letters, 0j) + weight

    h = complex(h)
    if i == j:
        if abs(h.imag) > 1e-12:
            raise ValueError("diagonal coefficient must be real")
        accumulate(i, i, h)
    else:
        accumulate(i, j, h)
        accumulate(j, i, h.conjugate())
    terms = tuple(WeightedPauli(v, PauliString.from_letters(k))
                  for k, v in acc.items() if abs(v) > COEFF_PRUNE)
    return PauliTermList(terms)


def _fwht(values: np.ndarray) -> np.ndarray:
    """In-place-free fast Walsh-Hadamard transform (unnormalized)."""
    v = np.array(values, dtype=float)
    h = 1
    while h < len(v):
        v = v.reshape(-1, 2, h)
        v = np.stack((v[:, 0] + v[:, 1], v[:, 0] - v[:, 1]), axis=1)
        v = v.reshape(-1)
        h *= 2
    return v


def diagonal_rotations(diag: np.ndarray, delta: float,
                       prune: float = COEFF_PRUNE) -> tuple[list[tuple[PauliString, float]], float]:
    """Z-string rotations realizing exp(-i delta diag(d)), plus the global phase.

    The Walsh-Hadamard transform of the diagonal yields the coefficient c_s
    of every Z-type string; all of them commute, so the product is exact."""
    diag = np.asarray(diag, dtype=float)
    dim = len(diag)
    n = int(round(math.log2(dim)))
    if 1 << n != dim:
        raise ValueError(f"diagonal length {dim} is not a power of two")
    coeffs = _fwht(diag) / dim
    rotations = []
    for s in range(1, dim):
        c = coeffs[s]
        if abs(c) <= prune:
            continue
        letters = "".join("Z" if (s >> (n - 1 - k)) & 1 else "I" for k in range(n))
        rotations.append((PauliString.from_letters(letters), -2.0 * delta * c))
    return rotations, -delta * float(coeffs[0])


def compile_diagonal(diag: np.ndarray, delta: float, name: str = "") -> QGateProgram:
    dim = len(np.asarray(diag))
    n = int(round(math.log2(dim)))
    if 1 << n != dim:
        raise ValueError(f"diagonal length {dim} is not a power of two")
    rotations, phase = diagonal_rotations(diag, delta)
    return compile_rotation_graph(rotations, n, global_phase=phase,
                                  name=name or "diag")


def compile_fanout(qubits: list[int], designated: int) -> list:
    """CNOT cascade with common control = designated; self-inverse."""
    if not qubits:
        raise ValueError("empty fan-out set")
    if designated not in qubits:
        raise ValueError("designated qubit must belong to the fan-out set")
    return [ir.ControlledBlock(((logical(designated), 1),),
                               (ir.SingleClifford(logical(q), "X"),))
            for q in qubits if q != designated]


def compile_ncontrolled_rotation(controls: list[tuple[int, int]], target: int,
                                 angle: float, lower: bool = False,
                                 axis: str = "X", work_start: int = 0) -> list:
    """Key-controlled single-qubit rotation fragment.

    Native form is one ControlledBlock.  Lowered form brackets control-on-0
    qubits with X, computes the conjunction into n-1 work qubits with a
    Toffoli ladder (2(n-1) Toffolis for n >= 2 controls), rotates off the
    last work qubit, then uncomputes."""
    if not controls:
        raise ValueError("need at least one control")
    if any(q == target for q, _ in controls):
        raise ValueError("target collides with a control")
    rotate = ir.Rotate(logical(target), axis, angle)
    if not lower:
        return [ir.ControlledBlock(tuple((logical(q), k) for q, k in controls), (rotate,))]
    out = []
    brackets = [ir.SingleClifford(logical(q), "X") for q, k in controls if k == 0]
    out.extend(brackets)
    if len(controls) == 1:
        out.append(ir.ControlledBlock(((logical(controls[0][0]), 1),), (rotate,)))
    else:
        works = [ir.work(work_start + w) for w in range(len(controls) - 1)]
        out.extend(ir.AllocWork(w) for w in works)
        ladder = []
        prev = logical(controls[0][0])
        for idx, (q, _) in enumerate(controls[1:]):
            ladder.append(ir.ControlledBlock(
                ((prev, 1), (logical(q), 1)), (ir.SingleClifford(works[idx], "X"),)))
            prev = works[idx]
        out.extend(ladder)
        out.append(ir.ControlledBlock(((works[-1], 1),), (rotate,)))
        out.extend(reversed(ladder))
        out.extend(ir.ReleaseWork(w) for w in works)
    out.extend(brackets)
    return out


def direct_term_plan(i: int, j: int, n_qubits: int):
    """Control keys and fan-out layout for one off-diagonal transition."""
    labels = label_coefficients(i, j, n_qubits)
    flips = labels.flip_set
    if not flips:
        raise ValueError("diagonal transition: use compile_diagonal")
    designated = flips[0]
    bits_i = [(i >> (n_qubits - 1 - k)) & 1 for k in range(n_qubits)]
    anchor = bits_i[designated]
    controls = list(labels.control_keys)
    # after the cascade both basis states agree on every non-designated flip
    # qubit at bit (x_k XOR x_designated); those become plain key controls
    controls += [(k, bits_i[k] ^ anchor) for k in flips[1:]]
    controls.sort()
    return labels, designated, controls


def compile_direct_term(i: int, j: int, h: float, delta: float, n_qubits: int,
                        lower: bool = False, name: str = "") -> QGateProgram:
    """Exact exp(-i delta h (|i><j| + |j><i|)) for real h and i != j."""
    if i == j:
        raise ValueError("diagonal entry: route through compile_diagonal")
    h = complex(h)
    if abs(h.imag) > 1e-12:
        raise UnsupportedHamiltonianError(
            "complex off-diagonal coefficients are not supported")
    labels, designated, controls = direct_term_plan(i, j, n_qubits)
    theta = delta * h.real
    fanout = compile_fanout(list(labels.flip_set), designated)
    # exp(-i theta X) on the designated qubit is Rotate(X, +2 theta) in the
    # standard gate convention exp(-i angle X / 2)
    dial = 2.0 * theta
    instructions = [ir.AllocLogical(n_qubits)]
    instructions += fanout
    if controls:
        instructions += compile_ncontrolled_rotation(controls, designated, dial,
                                                     lower=lower)
    else:
        instructions.append(ir.Rotate(logical(designated), "X", dial))
    instructions += fanout
    return QGateProgram(n_qubits, tuple(instructions),
                        name=name or f"direct[{i},{j}]")


def compile_sparse(H: SparseHamiltonian, delta: float, order: int = 1, steps: int = 1,
                   ordering: str = "as-given", seed: int | None = None,
                   lower: bool = False, name: str = "") -> QGateProgram:
    """Trotterized exp(-i H delta): one diagonal block plus one direct
    fragment per Hermitian off-diagonal pair."""
    pairs = H.hermitian_pairs()
    for i, j, h in pairs:
        if abs(h.imag) > 1e-12:
            raise UnsupportedHamiltonianError(
                f"off-diagonal ({i},{j}) has a complex coefficient {h}")
    diag = H.diagonal_vector()
    terms: list = []
    if np.max(np.abs(diag), initial=0.0) > COEFF_PRUNE:
        terms.append(("diag", diag))
    terms.extend(("pair", i, j, h.real) for i, j, h in pairs)
    if not terms:
        raise ValueError("Hamiltonian has no nonzero entries")
    rng = None
    if ordering == "random":
        if seed is None:
            raise ValueError("random ordering requires a seed")
        rng = np.random.default_rng(seed)
    elif ordering != "as-given":
        raise ValueError(f"unknown ordering {ordering!r}")
    schedule = trotter_schedule(len(terms), order, steps, rng)
    programs = []
    for index, scale in schedule:
        term = terms[index]
        if term[0] == "diag":
            programs.append(compile_diagonal(term[1], delta * scale))
        else:
            _, i, j, h = term
            programs.append(compile_direct_term(i, j, h, delta * scale, H.n_qubits,
                                                lower=lower))
    return ir.concatenate(programs, name=name or "sparse-evolution")


# ---------------------------------------------------------------------------
# projector-exponential decompositions (multi-controlled phase / Z rotation)

def _z_string(sites: tuple[int, ...], n_qubits: int) -> PauliString:
    letters = "".join("Z" if k in sites else "I" for k in range(n_qubits))
    return PauliString.from_letters(letters)


def expand_controlled_phase(controls: list[tuple[int, int]], targets: list[int],
                            phi: float, n_qubits: int
                            ) -> tuple[list[tuple[PauliString, float]], float]:
    """C^n P^m (phi) = exp{i phi/2^{n+m} prod_ctrl(I + (-1)^k Z) prod_tgt(I - Z)}
    expanded into Z-string rotations; returns (rotations, global phase)."""
    ctrl_qubits = [q for q, _ in controls]
    if set(ctrl_qubits) & set(targets) or len(set(ctrl_qubits + list(targets))) != len(
            ctrl_qubits) + len(targets):
        raise ValueError("controls and targets must be disjoint")
    sites = [(q, -1.0 if k else 1.0) for q, k in controls] + [(t, -1.0) for t in targets]
    base = phi / (1 << len(sites))
    rotations = []
    global_phase = base
    for mask in range(1, 1 << len(sites)):
        chosen = [sites[b] for b in range(len(sites)) if (mask >> b) & 1]
        sign = 1.0
        for _, s in chosen:
            sign *= s
        angle = 2.0 * base * sign
        if abs(angle) < 1e-15:
            continue
        rotations.append((_z_string(tuple(q for q, _ in chosen), n_qubits), angle))
    if abs(phi) < 1e-15:
        return [], 0.0
    return rotations, global_phase


def expand_controlled_zrotation(controls: list[tuple[int, int]], targets: list[int],
                                phi: float, n_qubits: int
                                ) -> list[tuple[PauliString, float]]:
    """C^n R_Z^m (phi) = exp{-i phi/2^{n+1} prod_ctrl(I + (-1)^k Z) sum_tgt Z}
    expanded into 2^n * m Z-string rotations (no identity term)."""
    ctrl_qubits = [q for q, _ in controls]
    if set(ctrl_qubits) & set(targets):
        raise ValueError("controls and targets must be disjoint")
    base = -phi / (1 << len(controls))
    rotations = []
    for mask in range(1 << len(controls)):
        chosen = [controls[b] for b in range(len(controls)) if (mask >> b) & 1]
        sign = 1.0
        for _, k in chosen:
            sign *= -1.0 if k else 1.0
        for t in targets:
            angle = base * sign
            if abs(angle) < 1e-15:
                continue
            rotations.append((_z_string(tuple(q for q, _ in chosen) + (t,), n_qubits),
                              angle))
    return rotations


def compile_controlled_phase_exponential(controls: list[tuple[int, int]],
                                         targets: list[int], phi: float,
                                         n_qubits: int, use_transfer: bool = False
                                         ) -> tuple[list[tuple[PauliString, float]], QGateProgram]:
    rotations, phase = expand_controlled_phase(controls, targets, phi, n_qubits)
    program = compile_rotation_graph(rotations, n_qubits, use_transfer=use_transfer,
                                     global_phase=phase, name="controlled-phase")
    return rotations, program


def compile_controlled_zrotation_exponential(controls: list[tuple[int, int]],
                                             targets: list[int], phi: float,
                                             n_qubits: int, use_transfer: bool = False
                                             ) -> tuple[list[tuple[PauliString, float]], QGateProgram]:
    rotations = expand_controlled_zrotation(controls, targets, phi, n_qubits)
    program = compile_rotation_graph(rotations, n_qubits, use_transfer=use_transfer,
                                     name="controlled-zrotation")
    return rotations, program


def compile_multi_controlled_x(controls: list[tuple[int, int]], target: int,
                               n_qubits: int, use_transfer: bool = False) -> QGateProgram:
    """C^n X as H_t C^n P(pi) H_t (CNOT for one control, Toffoli for two)."""
    rotations, phase = expand_controlled_phase(controls, [target], math.pi, n_qubits)
    hadamard = QGateProgram(n_qubits, (ir.AllocLogical(n_qubits),
                                       ir.SingleClifford(logical(target), "H")))
    inner = compile_rotation_graph(rotations, n_qubits, use_transfer=use_transfer,
                                   global_phase=phase)
    return ir.concatenate([hadamard, inner, hadamard], name="controlled-x")


# ---------------------------------------------------------------------------
# lowering and cost

def lower_controlled_blocks(program: QGateProgram) -> QGateProgram:
    """Rewrite every multi-control block into the X-bracketed Toffoli ladder."""
    out = []
    counter = 1 + max((instr.ref.index for instr in program.instructions
                       if isinstance(instr, ir.AllocWork)), default=-1)
    for instr in program.instructions:
        if not isinstance(instr, ir.ControlledBlock) or len(instr.controls) < 2 \
                or len(instr.body) != 1 or not isinstance(instr.body[0], ir.Rotate):
            out.append(instr)
            continue
        body = instr.body[0]
        controls = [(r.index, k) for r, k in instr.controls]
        if any(r.kind != "logical" for r, _ in instr.controls) or body.ref.kind != "logical":
            out.append(instr)
            continue
        fragment = compile_ncontrolled_rotation(controls, body.ref.index, body.angle,
                                                lower=True, axis=body.axis,
                                                work_start=counter)
        counter += max(len(controls) - 1, 0)
        out.extend(fragment)
    return QGateProgram(program.n_logical, tuple(out), name=program.name,
                        source=program.source, global_phase=program.global_phase)


def cost(program: QGateProgram) -> CostReport:
    """Deterministic resource counts; the program must validate cleanly."""
    violations = ir.validate(program)
    if violations:
        raise ValueError(f"cannot cost an invalid program: {violations[:3]}")
    counts = dict(gate_ancillas=0, magic_states=0, entangling_gates=0,
                  ancilla_cx_gates=0, work_qubits=0, rotations=0, toffoli_count=0)

    def walk(instrs):
        for instr in instrs:
            if isinstance(instr, ir.AllocAncilla):
                counts["gate_ancillas"] += 1
            elif isinstance(instr, ir.AllocMagic):
                counts["magic_states"] += 1
            elif isinstance(instr, ir.CPauli):
                counts["entangling_gates"] += 1
            elif isinstance(instr, ir.AncillaCX):
                counts["ancilla_cx_gates"] += 1
            elif isinstance(instr, ir.AllocWork):
                counts["work_qubits"] += 1
            elif isinstance(instr, ir.MeasureRotated):
                counts["rotations"] += 1
            elif isinstance(instr, ir.Rotate):
                counts["rotations"] += 1
            elif isinstance(instr, ir.ControlledBlock):
                n_ctrl = len(instr.controls)
                only_x = (len(instr.body) == 1
                          and isinstance(instr.body[0], ir.SingleClifford)
                          and instr.body[0].gate == "X")
                if n_ctrl == 2 and only_x:
                    counts["toffoli_count"] += 1
                elif n_ctrl >= 2:
                    counts["toffoli_count"] += 2 * (n_ctrl - 1)
                walk(instr.body)
    walk(program.instructions)
    return CostReport(**counts)
