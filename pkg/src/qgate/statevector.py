"""Dense 2^n statevector engine and exact matrix oracles.

Bit-order convention (global to the package): qubit 0 is the most
significant bit of the basis index, so |q0 q1 ... q_{n-1}> lives at index
sum_k q_k * 2^(n-1-k).

Gate-name rotations follow the standard convention R_P(theta) =
exp(-i theta P / 2); Pauli-string rotations follow the opposite sign,
exp(+i phi P / 2), and are exposed as apply_pauli_rotation /
pauli.pauli_rotation_matrix.  Both conventions are exercised against each
other in the tests.

All kernels accept amplitudes shaped (2^n,) or (2^n, batch); the batch form
backs full-unitary reconstruction in the executor.
"""
from __future__ import annotations

from dataclasses import dataclass
import cmath
import math

import numpy as np

from .pauli import (
    DimensionError,
    PauliString,
    ResourceError,
    DEFAULT_DENSE_QUBIT_CAP,
)

POSTSELECTION_FLOOR = 1e-12

_SQ2 = 1 / math.sqrt(2)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

FIXED_GATES = {"H": _H, "S": _S, "SDG": _SDG, "X": _X, "Y": _Y, "Z": _Z}


class PostselectionError(ValueError):
    """Forced measurement branch has probability below the floor."""


def gate_matrix(name: str, angle: float | None = None) -> np.ndarray:
    """2x2 matrix for a named gate; RX/RZ/PHASE need an angle."""
    name = name.upper()
    if name in FIXED_GATES:
        return FIXED_GATES[name]
    if angle is None or not math.isfinite(angle):
        raise ValueError(f"gate {name} needs a finite angle")
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if name == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if name == "RZ":
        return np.array([[cmath.exp(-1j * angle / 2), 0],
                         [0, cmath.exp(1j * angle / 2)]], dtype=complex)
    if name == "PHASE":
        return np.array([[1, 0], [0, cmath.exp(1j * angle)]], dtype=complex)
    raise ValueError(f"unknown gate {name!r}")


# ---------------------------------------------------------------------------
# raw kernels (amplitudes shaped (2^n,) or (2^n, batch))

def apply_1q(amps: np.ndarray, mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    shape = amps.shape
    a = amps.reshape(1 << qubit, 2, -1)
    return np.einsum("ij,ajb->aib", mat, a).reshape(shape)


def apply_controlled(amps: np.ndarray, mat: np.ndarray,
                     controls: list[tuple[int, int]], target: int, n: int) -> np.ndarray:
    """Apply `mat` to `target` on the subspace where each control matches its key bit."""
    seen = {target}
    for q, k in controls:
        if q in seen or not 0 <= q < n:
            raise DimensionError(f"bad control {(q, k)} (target {target}, n={n})")
        if k not in (0, 1):
            raise ValueError(f"control key must be 0 or 1, got {k!r}")
        seen.add(q)
    out = amps.reshape((2,) * n + (-1,)).copy()
    idx = [slice(None)] * (n + 1)
    for q, k in controls:
        idx[q] = k
    sub = out[tuple(idx)]
    ax = target - sum(1 for q, _ in controls if q < target)
    moved = np.moveaxis(sub, ax, -2)
    moved[...] = np.einsum("ij,...jb->...ib", mat, moved)
    return out.reshape(amps.shape)


def apply_pauli(amps: np.ndarray, p: PauliString, n: int) -> np.ndarray:
    """Apply a Pauli string without forming the dense matrix."""
    if p.n_qubits != n:
        raise DimensionError(f"Pauli on {p.n_qubits} qubits vs state on {n}")
    dim = 1 << n
    flip = 0
    zmask = 0
    n_y = 0
    for q in range(n):
        bit = 1 << (n - 1 - q)
        if p.x_bits[q]:
            flip |= bit
        if p.z_bits[q]:
            zmask |= bit
        if p.x_bits[q] and p.z_bits[q]:
            n_y += 1
    idx = np.arange(dim)
    par = _bit_parity(idx & zmask)
    coeff = (1j) ** ((p.phase_exponent + n_y) % 4) * np.where(par, -1.0, 1.0)
    out = np.empty_like(amps)
    if amps.ndim == 1:
        out[idx ^ flip] = coeff * amps
    else:
        out[idx ^ flip] = coeff[:, None] * amps
    return out


def _bit_parity(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for shift in (16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


def measure_qubit(amps: np.ndarray, qubit: int, n: int, outcome: int) -> tuple[np.ndarray, float]:
    """Project onto `outcome`, delete the qubit, return (unnormalized amps, probability).

    Only defined for single (unbatched) states; batched projection lives in
    the executor where column-uniform probabilities are asserted.
    """
    t = amps.reshape((2,) * n)
    sub = np.take(t, outcome, axis=qubit)
    prob = float(np.sum(np.abs(sub) ** 2))
    return sub.reshape(-1), prob


@dataclass(frozen=True)
class MeasurementRecord:
    qubit_index: int
    outcome: int
    probability: float
    mode: str  # "forced" | "sampled"


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitude vector over 2^n_qubits basis states."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise DimensionError(
                f"amplitude vector of length {amps.shape} for {self.n_qubits} qubits")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check_normalized(self, tol: float = 1e-10) -> None:
        if abs(self.norm() - 1.0) > tol:
            raise ValueError(f"state norm drifted to {self.norm()}")

    def dump_csv(self) -> str:
        """State as CSV lines "index,re,im"."""
        lines = ["index,re,im"]
        for i, a in enumerate(self.amplitudes):
            lines.append(f"{i},{float(a.real)!r},{float(a.imag)!r}")
        return "\n".join(lines) + "\n"


def init_basis(n: int, index: int) -> StateVector:
    if not 0 <= index < (1 << n):
        raise ValueError(f"basis index {index} out of range for {n} qubits")
    amps = np.zeros(1 << n, dtype=complex)
    amps[index] = 1.0
    return StateVector(n, amps)


def from_amplitudes(amps) -> StateVector:
    amps = np.asarray(amps, dtype=complex)
    n = int(round(math.log2(len(amps))))
    if 1 << n != len(amps):
        raise DimensionError(f"amplitude length {len(amps)} is not a power of two")
    norm = np.linalg.norm(amps)
    if norm < POSTSELECTION_FLOOR:
        raise ValueError("cannot normalize a zero vector")
    return StateVector(n, amps / norm)


def apply_single(sv: StateVector, qubit: int, gate: str, angle: float | None = None) -> StateVector:
    if not 0 <= qubit < sv.n_qubits:
        raise DimensionError(f"qubit {qubit} out of range")
    mat = gate_matrix(gate, angle)
    return StateVector(sv.n_qubits, apply_1q(sv.amplitudes, mat, qubit, sv.n_qubits))


def apply_controlled_pauli(sv: StateVector, control: int, target: int, letter: str) -> StateVector:
    if control == target:
        raise DimensionError("control and target collide")
    if letter not in ("X", "Y", "Z"):
        raise ValueError(f"controlled-Pauli letter must be X, Y or Z, got {letter!r}")
    amps = apply_controlled(sv.amplitudes, FIXED_GATES[letter], [(control, 1)],
                            target, sv.n_qubits)
    return StateVector(sv.n_qubits, amps)


def apply_arbitrary_controlled(sv: StateVector, controls: list[tuple[int, int]],
                               target: int, gate: str | np.ndarray,
                               angle: float | None = None) -> StateVector:
    mat = gate if isinstance(gate, np.ndarray) else gate_matrix(gate, angle)
    amps = apply_controlled(sv.amplitudes, mat, list(controls), target, sv.n_qubits)
    return StateVector(sv.n_qubits, amps)


def apply_pauli_string(sv: StateVector, p: PauliString) -> StateVector:
    return StateVector(sv.n_qubits, apply_pauli(sv.amplitudes, p, sv.n_qubits))


def apply_pauli_rotation(sv: StateVector, p: PauliString, phi: float) -> StateVector:
    """exp(+i phi/2 P)|sv> = cos(phi/2)|sv> + i sin(phi/2) P|sv>, matrix-free."""
    if p.n_qubits != sv.n_qubits:
        raise DimensionError(f"Pauli on {p.n_qubits} qubits vs state on {sv.n_qubits}")
    rotated = apply_pauli(sv.amplitudes, p, sv.n_qubits)
    amps = math.cos(phi / 2) * sv.amplitudes + 1j * math.sin(phi / 2) * rotated
    return StateVector(sv.n_qubits, amps)


def measure(sv: StateVector, qubit: int, mode: str, forced_bit: int | None = None,
            rng: np.random.Generator | None = None,
            floor: float = POSTSELECTION_FLOOR) -> tuple[StateVector, MeasurementRecord]:
    """Projective computational-basis measurement; the qubit is deleted.

    mode "forced" projects onto forced_bit (error below the postselection
    floor); mode "sampled" draws the outcome from the Born rule using rng.
    """
    if not 0 <= qubit < sv.n_qubits:
        raise DimensionError(f"qubit {qubit} out of range")
    _, p1 = measure_qubit(sv.amplitudes, qubit, sv.n_qubits, 1)
    probs = [1.0 - p1, p1]
    if mode == "forced":
        if forced_bit not in (0, 1):
            raise ValueError("forced mode needs forced_bit in {0, 1}")
        outcome = forced_bit
        if probs[outcome] < floor:
            raise PostselectionError(
                f"forced outcome {outcome} on qubit {qubit} has probability {probs[outcome]:.2e}")
    elif mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        outcome = int(rng.random() < p1)
    else:
        raise ValueError(f"unknown measurement mode {mode!r}")
    sub, prob = measure_qubit(sv.amplitudes, qubit, sv.n_qubits, outcome)
    post = StateVector(sv.n_qubits - 1, sub / math.sqrt(prob))
    return post, MeasurementRecord(qubit, outcome, prob, mode)


@dataclass(frozen=True)
class DenseUnitary:
    dimension: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (self.dimension, self.dimension):
            raise DimensionError(f"expected {self.dimension}x{self.dimension} matrix")
        object.__setattr__(self, "entries", entries)

    def check_unitary(self, tol: float = 1e-9) -> "DenseUnitary":
        err = np.max(np.abs(self.entries @ self.entries.conj().T - np.eye(self.dimension)))
        if err > tol:
            raise ValueError(f"matrix is not unitary (deviation {err:.2e})")
        return self


def hermitian_exponential_oracle(H: np.ndarray, t: float,
                                 qubit_cap: int = DEFAULT_DENSE_QUBIT_CAP,
                                 check: bool = True) -> DenseUnitary:
    """exp(-i H t) through Hermitian eigendecomposition (exactly unitary up to rounding)."""
    H = np.asarray(H, dtype=complex)
    dim = H.shape[0]
    if H.shape != (dim, dim):
        raise DimensionError("Hamiltonian must be square")
    if dim > (1 << qubit_cap):
        raise ResourceError(f"dimension {dim} exceeds 2^{qubit_cap}")
    herm_err = np.max(np.abs(H - H.conj().T)) if dim else 0.0
    if herm_err > 1e-9:
        raise ValueError(f"matrix is not Hermitian (max deviation {herm_err:.2e})")
    vals, vecs = np.linalg.eigh(H)
    U = (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T
    out = DenseUnitary(dim, U)
    return out.check_unitary() if check else out


def apply_unitary(sv: StateVector, U: DenseUnitary) -> StateVector:
    if U.dimension != 1 << sv.n_qubits:
        raise DimensionError("unitary dimension does not match state")
    return StateVector(sv.n_qubits, U.entries @ sv.amplitudes)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError("states have different qubit counts")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def frobenius_distance(U, V) -> float:
    """Raw ||U - V||_F; no global-phase quotient."""
    Ue = U.entries if isinstance(U, DenseUnitary) else np.asarray(U)
    Ve = V.entries if isinstance(V, DenseUnitary) else np.asarray(V)
    if Ue.shape != Ve.shape:
        raise DimensionError("operator shapes differ")
    return float(np.linalg.norm(Ue - Ve))


def states_equal_up_to_phase(a: StateVector, b: StateVector, tol: float = 1e-9) -> bool:
    if a.n_qubits != b.n_qubits:
        return False
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    if abs(overlap) < tol:
        return False
    phased = b.amplitudes * (abs(overlap) / overlap)
    return bool(np.max(np.abs(a.amplitudes - phased)) <= tol)
