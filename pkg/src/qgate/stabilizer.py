"""Stabilizer-generator bookkeeping for ancilla-mediated compilation.

A tableau holds only the generators a derivation actively tracks (one row
per gate ancilla plus any logical generators of interest), not a full
canonical 2n-row tableau.  Signs live in each generator's phase_exponent,
restricted to {0, 2}; a conjugation that produces an odd power of i is a
bug and raises InternalConsistencyError.

Conjugation is letter-compositional: a generator is split into its global
phase and per-qubit letter factors, each factor is rewritten by the gate's
Heisenberg table, and the pieces are remultiplied, so phases are exact by
construction.  The tables themselves are pinned against dense C g C^dag
oracles in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import statevector as _sv
from .pauli import DimensionError, PauliString, commutes, multiply

CLIFFORD_1Q = ("H", "S", "SDG", "X", "Y", "Z")
CLIFFORD_2Q = ("CX", "CY", "CZ")


class InternalConsistencyError(RuntimeError):
    """A tableau operation produced a non-Hermitian sign (odd power of i)."""


# single-qubit Heisenberg action: gate -> {letter: (letter', sign exponent)}
_TABLE_1Q = {
    "H": {"X": ("Z", 0), "Y": ("Y", 2), "Z": ("X", 0)},
    "S": {"X": ("Y", 0), "Y": ("X", 2), "Z": ("Z", 0)},
    "SDG": {"X": ("Y", 2), "Y": ("X", 0), "Z": ("Z", 0)},
    "X": {"X": ("X", 0), "Y": ("Y", 2), "Z": ("Z", 2)},
    "Y": {"X": ("X", 2), "Y": ("Y", 0), "Z": ("Z", 2)},
    "Z": {"X": ("X", 2), "Y": ("Y", 2), "Z": ("Z", 0)},
}

# two-qubit Heisenberg action on single-letter factors:
# gate -> {(site, letter): ((letter_on_control, letter_on_target), sign exponent)}
_TABLE_2Q = {
    "CX": {
        ("c", "X"): (("X", "X"), 0), ("c", "Y"): (("Y", "X"), 0), ("c", "Z"): (("Z", "I"), 0),
        ("t", "X"): (("I", "X"), 0), ("t", "Y"): (("Z", "Y"), 0), ("t", "Z"): (("Z", "Z"), 0),
    },
    "CY": {
        ("c", "X"): (("X", "Y"), 0), ("c", "Y"): (("Y", "Y"), 0), ("c", "Z"): (("Z", "I"), 0),
        ("t", "X"): (("Z", "X"), 0), ("t", "Y"): (("I", "Y"), 0), ("t", "Z"): (("Z", "Z"), 0),
    },
    "CZ": {
        ("c", "X"): (("X", "Z"), 0), ("c", "Y"): (("Y", "Z"), 0), ("c", "Z"): (("Z", "I"), 0),
        ("t", "X"): (("Z", "X"), 0), ("t", "Y"): (("Z", "Y"), 0), ("t", "Z"): (("I", "Z"), 0),
    },
}


def conjugate_string(g: PauliString, gate: str, qubits: tuple[int, ...]) -> PauliString:
    """C g C^dagger for a single supported Clifford gate."""
    gate = gate.upper()
    n = g.n_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise DimensionError(f"qubit {q} out of range for {n}-qubit generator")
    out = PauliString.identity(n).with_phase(g.phase_exponent)
    if gate in _TABLE_1Q:
        (q,) = qubits
        for site in range(n):
            letter = g.letter(site)
            if letter == "I":
                continue
            if site == q:
                letter, sign = _TABLE_1Q[gate][letter]
                out = multiply(out, PauliString.single(n, site, letter, sign))
            else:
                out = multiply(out, PauliString.single(n, site, letter))
    elif gate in _TABLE_2Q:
        c, t = qubits
        if c == t:
            raise DimensionError("control and target collide")
        for site in range(n):
            letter = g.letter(site)
            if letter == "I":
                continue
            if site == c or site == t:
                (lc, lt), sign = _TABLE_2Q[gate][("c" if site == c else "t", letter)]
                factor = PauliString.identity(n).with_phase(sign)
                if lc != "I":
                    factor = multiply(factor, PauliString.single(n, c, lc))
                if lt != "I":
                    factor = multiply(factor, PauliString.single(n, t, lt))
                out = multiply(out, factor)
            else:
                out = multiply(out, PauliString.single(n, site, letter))
    else:
        raise ValueError(f"unsupported Clifford gate {gate!r}")
    if out.phase_exponent % 2:
        raise InternalConsistencyError(
            f"conjugation of {g} by {gate}{qubits} produced phase i^{out.phase_exponent}")
    return out


def symplectic_rank(generators: list[PauliString]) -> int:
    """GF(2) rank of the stacked (x|z) rows."""
    if not generators:
        return 0
    n = generators[0].n_qubits
    rows = [list(g.x_bits) + list(g.z_bits) for g in generators]
    rank = 0
    for col in range(2 * n):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                rows[r] = [(a + b) % 2 for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


@dataclass(frozen=True)
class StabilizerTableau:
    n_qubits: int
    generators: tuple[PauliString, ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        for g in self.generators:
            if g.n_qubits != self.n_qubits:
                raise DimensionError("generator length does not match tableau")
            if g.phase_exponent % 2:
                raise InternalConsistencyError(f"generator {g} has sign i^{g.phase_exponent}")

    def validate(self) -> None:
        """Check pairwise commutation and independence."""
        gens = self.generators
        for i in range(len(gens)):
            for j in range(i + 1, len(gens)):
                if not commutes(gens[i], gens[j]):
                    raise ValueError(f"generators {i} and {j} anticommute")
        if symplectic_rank(list(gens)) != len(gens):
            raise ValueError("generators are not independent")


def conjugate(tableau: StabilizerTableau, gate: str, *qubits: int) -> StabilizerTableau:
    gens = tuple(conjugate_string(g, gate, tuple(qubits)) for g in tableau.generators)
    return StabilizerTableau(tableau.n_qubits, gens)


def recombine(tableau: StabilizerTableau, target_index: int, factor_index: int) -> StabilizerTableau:
    """Replace generator[target] by generator[target] * generator[factor]."""
    if target_index == factor_index:
        raise ValueError("target and factor indices collide")
    gens = list(tableau.generators)
    product = multiply(gens[target_index], gens[factor_index])
    if product.phase_exponent % 2:
        raise InternalConsistencyError(
            f"recombination produced phase i^{product.phase_exponent}")
    gens[target_index] = product
    return StabilizerTableau(tableau.n_qubits, tuple(gens))


def stabilizes(tableau: StabilizerTableau, state: "_sv.StateVector",
               tol: float = 1e-9) -> bool:
    """True iff every generator fixes the state to within tol per amplitude."""
    if tableau.n_qubits != state.n_qubits:
        raise DimensionError("tableau and state qubit counts differ")
    for g in tableau.generators:
        moved = _sv.apply_pauli(state.amplitudes, g, state.n_qubits)
        if np.max(np.abs(moved - state.amplitudes)) > tol:
            return False
    return True


def pretty(tableau: StabilizerTableau, labels: list[str] | None = None) -> str:
    """Render generators as lines like "X_A Z1 X3" for debug dumps."""
    labels = labels or [str(q) for q in range(tableau.n_qubits)]
    lines = []
    for g in tableau.generators:
        sign = "-" if g.phase_exponent == 2 else ""
        parts = [f"{g.letter(q)}{labels[q]}" for q in range(g.n_qubits) if g.letter(q) != "I"]
        lines.append(sign + (" ".join(parts) if parts else "I"))
    return "\n".join(lines)
