"""File formats: MatrixMarket / JSON Hamiltonians, Pauli term text, CSV."""
from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .compiler import PauliTermList, SparseHamiltonian
from .pauli import PauliString, WeightedPauli


class ParseError(ValueError):
    """Malformed input file; message names the offending location."""


def load_matrix_market(path: str | Path) -> SparseHamiltonian:
    try:
        mat = scipy.io.mmread(os.fspath(path))
    except Exception as exc:
        raise ParseError(f"{path}: not a readable MatrixMarket file ({exc})") from exc
    mat = scipy.sparse.coo_matrix(mat)
    if mat.shape[0] != mat.shape[1]:
        raise ParseError(f"{path}: matrix is {mat.shape[0]}x{mat.shape[1]}, not square")
    n = int(round(math.log2(mat.shape[0])))
    if (1 << n) != mat.shape[0]:
        raise ParseError(f"{path}: dimension {mat.shape[0]} is not a power of two")
    entries = tuple((int(r), int(c), complex(v))
                    for r, c, v in zip(mat.row, mat.col, mat.data))
    try:
        return SparseHamiltonian(n, entries)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_hamiltonian_json(path: str | Path) -> SparseHamiltonian:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        n = int(doc["n_qubits"])
        entries = []
        for k, item in enumerate(doc["entries"]):
            row, col = int(item[0]), int(item[1])
            value = complex(float(item[2]), float(item[3]) if len(item) > 3 else 0.0)
            entries.append((row, col, value))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{path}: bad Hamiltonian JSON ({exc})") from exc
    try:
        return SparseHamiltonian(n, tuple(entries))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_hamiltonian_json(H: SparseHamiltonian, path: str | Path) -> None:
    doc = {"n_qubits": H.n_qubits,
           "entries": [[r, c, v.real, v.imag] for r, c, v in H.entries]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def parse_pauli_terms(text: str, source: str = "<text>") -> PauliTermList:
    """Lines of "coefficient letter-string", e.g. "0.24801 XX"; '#' comments."""
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{source}:{lineno}: expected 'coeff letters', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError as exc:
            raise ParseError(f"{source}:{lineno}: bad coefficient {parts[0]!r}") from exc
        try:
            string = PauliString.from_letters(parts[1])
        except ValueError as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from exc
        terms.append(WeightedPauli(coeff, string))
    if not terms:
        raise ParseError(f"{source}: no terms found")
    widths = {t.string.n_qubits for t in terms}
    if len(widths) > 1:
        raise ParseError(f"{source}: mixed string lengths {sorted(widths)}")
    return PauliTermList(tuple(terms))


def load_pauli_terms(path: str | Path) -> PauliTermList:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_pauli_terms(text, source=os.fspath(path))


def load_hamiltonian(path: str | Path) -> SparseHamiltonian:
    """Dispatch on extension: .mtx/.mm -> MatrixMarket, .json -> JSON."""
    suffix = Path(path).suffix.lower()
    if suffix in (".mtx", ".mm"):
        return load_matrix_market(path)
    if suffix == ".json":
        return load_hamiltonian_json(path)
    raise ParseError(f"{path}: unknown Hamiltonian format {suffix!r} "
                     "(expected .mtx, .mm or .json)")


def parse_state_csv(text: str, source: str = "<text>") -> np.ndarray:
    """Amplitudes from "index,re,im" lines (header optional)."""
    values: dict[int, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.lower().startswith("index"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"{source}:{lineno}: expected 'index,re,im'")
        try:
            values[int(parts[0])] = complex(float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from exc
    if not values:
        raise ParseError(f"{source}: no amplitudes found")
    dim = max(values) + 1
    n = max(1, int(math.ceil(math.log2(dim))))
    amps = np.zeros(1 << n, dtype=complex)
    for idx, amp in values.items():
        amps[idx] = amp
    return amps
