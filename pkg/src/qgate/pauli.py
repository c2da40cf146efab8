"""Symplectic algebra for N-qubit Pauli strings.

A string is stored as per-qubit (x, z) bits plus a global power of i:

    operator = i**phase_exponent * L(x_0, z_0) (x) ... (x) L(x_{n-1}, z_{n-1})

with the letter decode L(0,0)=I, L(1,0)=X, L(1,1)=Y, L(0,1)=Z.  Qubit 0 is
the leftmost letter in text form and the most significant bit of a basis
index throughout the package.

Commutation is a symplectic inner product, so it never touches dense
matrices; dense realisations exist only to back oracles at small qubit
counts (default cap 12).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
import math

import numpy as np

DEFAULT_DENSE_QUBIT_CAP = 12

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z2 = np.array([[1, 0], [0, -1]], dtype=complex)

LETTER_MATRICES = {"I": _I2, "X": _X2, "Y": _Y2, "Z": _Z2}

_BITS_TO_LETTER = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_LETTER_TO_BITS = {v: k for k, v in _BITS_TO_LETTER.items()}

# (a, b) -> (a*b letter, power of i) for single-qubit letters.
_PRODUCT = {
    ("I", "I"): ("I", 0), ("I", "X"): ("X", 0), ("I", "Y"): ("Y", 0), ("I", "Z"): ("Z", 0),
    ("X", "I"): ("X", 0), ("X", "X"): ("I", 0), ("X", "Y"): ("Z", 1), ("X", "Z"): ("Y", 3),
    ("Y", "I"): ("Y", 0), ("Y", "X"): ("Z", 3), ("Y", "Y"): ("I", 0), ("Y", "Z"): ("X", 1),
    ("Z", "I"): ("Z", 0), ("Z", "X"): ("Y", 1), ("Z", "Y"): ("X", 3), ("Z", "Z"): ("I", 0),
}

_PHASE_PREFIXES = {
    "": 0, "+": 0, "+1": 0, "1": 0,
    "i": 1, "+i": 1,
    "-": 2, "-1": 2,
    "-i": 3,
}
_PHASE_TEXT = {0: "", 1: "i", 2: "-", 3: "-i"}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class ResourceError(ValueError):
    """Requested dense object exceeds the configured qubit cap."""


@dataclass(frozen=True)
class PauliString:
    """An N-qubit Pauli operator in symplectic (x, z, i^k) form."""

    n_qubits: int
    x_bits: tuple[int, ...]
    z_bits: tuple[int, ...]
    phase_exponent: int = 0

    def __post_init__(self):
        if len(self.x_bits) != self.n_qubits or len(self.z_bits) != self.n_qubits:
            raise DimensionError("bit-vector lengths must equal n_qubits")
        object.__setattr__(self, "phase_exponent", self.phase_exponent % 4)

    @staticmethod
    def identity(n_qubits: int) -> "PauliString":
        return PauliString(n_qubits, (0,) * n_qubits, (0,) * n_qubits, 0)

    @staticmethod
    def from_letters(letters: str, phase_exponent: int = 0) -> "PauliString":
        """Build from a letter string like "ZIXZX" (qubit 0 leftmost)."""
        try:
            bits = [_LETTER_TO_BITS[c] for c in letters.upper()]
        except KeyError as exc:
            raise ValueError(f"invalid Pauli letter {exc.args[0]!r}") from exc
        x = tuple(b[0] for b in bits)
        z = tuple(b[1] for b in bits)
        return PauliString(len(bits), x, z, phase_exponent)

    @staticmethod
    def single(n_qubits: int, qubit: int, letter: str, phase_exponent: int = 0) -> "PauliString":
        letters = ["I"] * n_qubits
        letters[qubit] = letter
        return PauliString.from_letters("".join(letters), phase_exponent)

    @property
    def letters(self) -> str:
        return "".join(_BITS_TO_LETTER[x, z] for x, z in zip(self.x_bits, self.z_bits))

    def letter(self, qubit: int) -> str:
        return _BITS_TO_LETTER[self.x_bits[qubit], self.z_bits[qubit]]

    @property
    def weight(self) -> int:
        """Number of non-identity letters."""
        return sum(1 for x, z in zip(self.x_bits, self.z_bits) if x or z)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if self.x_bits[q] or self.z_bits[q])

    def is_identity_letters(self) -> bool:
        return self.weight == 0

    def phase(self) -> complex:
        return 1j ** self.phase_exponent

    def with_phase(self, phase_exponent: int) -> "PauliString":
        return PauliString(self.n_qubits, self.x_bits, self.z_bits, phase_exponent)

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase_exponent] + self.letters

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)


def parse(text: str) -> PauliString:
    """Parse "ZIXZX" with an optional phase prefix ("+i", "-1", ...)."""
    text = text.strip()
    split = 0
    while split < len(text) and text[split] in "+-i1":
        split += 1
    prefix, letters = text[:split], text[split:]
    if prefix not in _PHASE_PREFIXES:
        raise ValueError(f"invalid phase prefix {prefix!r}")
    if not letters:
        raise ValueError("empty Pauli letter string")
    return PauliString.from_letters(letters, _PHASE_PREFIXES[prefix])


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Exact product a.b with i^k phase bookkeeping."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"length mismatch: {a.n_qubits} vs {b.n_qubits}")
    phase = a.phase_exponent + b.phase_exponent
    x, z = [], []
    for q in range(a.n_qubits):
        letter, k = _PRODUCT[a.letter(q), b.letter(q)]
        phase += k
        xb, zb = _LETTER_TO_BITS[letter]
        x.append(xb)
        z.append(zb)
    return PauliString(a.n_qubits, tuple(x), tuple(z), phase % 4)


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the symplectic inner product of a and b vanishes."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"length mismatch: {a.n_qubits} vs {b.n_qubits}")
    acc = 0
    for q in range(a.n_qubits):
        acc += a.x_bits[q] * b.z_bits[q] + a.z_bits[q] * b.x_bits[q]
    return acc % 2 == 0


def to_dense(p: PauliString, qubit_cap: int = DEFAULT_DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense 2^n x 2^n realisation; guarded by the qubit cap."""
    if p.n_qubits > qubit_cap:
        raise ResourceError(f"dense matrix for {p.n_qubits} qubits exceeds cap {qubit_cap}")
    mat = reduce(np.kron, (LETTER_MATRICES[p.letter(q)] for q in range(p.n_qubits)),
                 np.eye(1, dtype=complex))
    return p.phase() * mat


def pauli_rotation_matrix(p: PauliString, phi: float,
                          qubit_cap: int = DEFAULT_DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense exp(i*phi/2 * P) = cos(phi/2) I + i sin(phi/2) P."""
    if not math.isfinite(phi):
        raise ValueError(f"rotation angle must be finite, got {phi!r}")
    dense = to_dense(p, qubit_cap)
    dim = dense.shape[0]
    return math.cos(phi / 2) * np.eye(dim, dtype=complex) + 1j * math.sin(phi / 2) * dense


@dataclass(frozen=True)
class WeightedPauli:
    """A complex coefficient attached to a Pauli string (one Hamiltonian term)."""

    coefficient: complex
    string: PauliString

    def __post_init__(self):
        c = complex(self.coefficient)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError("coefficient must be finite")
        object.__setattr__(self, "coefficient", c)

    def to_dense(self, qubit_cap: int = DEFAULT_DENSE_QUBIT_CAP) -> np.ndarray:
        return self.coefficient * to_dense(self.string, qubit_cap)
