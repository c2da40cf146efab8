"""Jordan-Wigner mapping of fermionic ladder-operator products.

Convention: site occupation maps to |1>, annihilation lowers it,

    a_j   = sigma+_j prod_{i<j} Z_i,      sigma+ = (X + iY)/2 = |0><1|
    a_j^t = sigma-_j prod_{i<j} Z_i,      sigma- = (X - iY)/2 = |1><0|

so the Z chain runs over the sites strictly below j.  Products of ladder
operators are multiplied out symbolically into weighted Pauli strings and
validated in the tests against a direct occupation-basis construction of
the fermionic matrices.
"""
from __future__ import annotations

import numpy as np

from .compiler import COEFF_PRUNE, PauliTermList
from .pauli import PauliString, WeightedPauli, multiply


def jw_ladder(site: int, dagger: bool, n_sites: int) -> list[WeightedPauli]:
    """a_site (or its adjoint, dagger=True) as two weighted Pauli strings."""
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} out of range for {n_sites} sites")
    chain = ["Z"] * site + ["I"] * (n_sites - site)
    x = list(chain)
    y = list(chain)
    x[site], y[site] = "X", "Y"
    sign = -0.5j if dagger else 0.5j
    return [WeightedPauli(0.5, PauliString.from_letters("".join(x))),
            WeightedPauli(sign, PauliString.from_letters("".join(y)))]


def _combine(terms) -> list[WeightedPauli]:
    acc: dict[str, complex] = {}
    for t in terms:
        phase = (1j) ** t.string.phase_exponent
        acc[t.string.letters] = acc.get(t.string.letters, 0j) + t.coefficient * phase
    return [WeightedPauli(v, PauliString.from_letters(k))
            for k, v in acc.items() if abs(v) > COEFF_PRUNE]


def _product(a: list[WeightedPauli], b: list[WeightedPauli]) -> list[WeightedPauli]:
    out = []
    for ta in a:
        for tb in b:
            s = multiply(ta.string, tb.string)
            out.append(WeightedPauli(ta.coefficient * tb.coefficient, s))
    return _combine(out)


def jordan_wigner(ops: list[tuple[int, bool]], n_sites: int,
                  coefficient: complex = 1.0) -> PauliTermList:
    """Pauli expansion of coefficient * prod_k a_{site_k}^(dagger_k)."""
    acc = [WeightedPauli(complex(coefficient), PauliString.identity(n_sites))]
    for site, dagger in ops:
        acc = _product(acc, jw_ladder(site, dagger, n_sites))
    return PauliTermList(tuple(acc))


def _hermitian_sum(parts: list[PauliTermList]) -> PauliTermList:
    out = _combine(t for part in parts for t in part.terms)
    out.sort(key=lambda t: t.string.letters)
    return PauliTermList(tuple(out))


def jordan_wigner_one_body(p: int, q: int, h: complex, n_sites: int) -> PauliTermList:
    """h a_p^t a_q + h* a_q^t a_p (the number operator h n_p when p == q)."""
    h = complex(h)
    if p == q:
        if abs(h.imag) > 1e-12:
            raise ValueError("diagonal one-body coefficient must be real")
        return _hermitian_sum([jordan_wigner([(p, True), (p, False)], n_sites, h)])
    return _hermitian_sum([
        jordan_wigner([(p, True), (q, False)], n_sites, h),
        jordan_wigner([(q, True), (p, False)], n_sites, h.conjugate()),
    ])


def jordan_wigner_two_body(p: int, q: int, r: int, s: int, h: complex,
                           n_sites: int) -> PauliTermList:
    """h a_p^t a_q^t a_r a_s + h.c. for normal-ordered indices p >= q >= r >= s."""
    if not (p >= q >= r >= s):
        raise ValueError("unsorted indices for two-body term (need p >= q >= r >= s)")
    h = complex(h)
    forward = jordan_wigner([(p, True), (q, True), (r, False), (s, False)], n_sites, h)
    backward = jordan_wigner([(s, True), (r, True), (q, False), (p, False)], n_sites,
                             h.conjugate())
    return _hermitian_sum([forward, backward])


def fermion_operator_dense(ops: list[tuple[int, bool]], n_sites: int) -> np.ndarray:
    """Occupation-basis matrix of a ladder-operator product, built directly
    from the fermionic definition a_j|...n_j...> = delta_{n_j,1} (-1)^{sum_{i<j} n_i}
    |...0...>; the independent oracle for the symbolic mapping."""
    dim = 1 << n_sites
    out = np.eye(dim, dtype=complex)
    for site, dagger in reversed(ops):
        mat = np.zeros((dim, dim), dtype=complex)
        for idx in range(dim):
            bit = (idx >> (n_sites - 1 - site)) & 1
            if dagger == bool(bit):
                continue  # annihilating empty / creating occupied
            parity = bin(idx >> (n_sites - site)).count("1")
            mat[idx ^ (1 << (n_sites - 1 - site)), idx] = (-1.0) ** parity
        out = mat @ out
    return out
