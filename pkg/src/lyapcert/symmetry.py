"""Finite groups of diagonal sign changes and the SOS block structure they induce.

A group element is stored as its diagonal, a tuple of +1/-1.  Because such
groups are abelian and every element is an involution, the character of a
monomial is fixed by its sign under each generator; monomials sharing that
signature form one block of an invariant Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .polyalg import Polynomial, linear_substitute, sign_signature


def _as_signs(g) -> tuple[int, ...]:
    a = np.asarray(g, dtype=float)
    if a.ndim == 2:
        if a.shape[0] != a.shape[1] or np.count_nonzero(a - np.diag(np.diag(a))):
            raise ValueError("symmetry generators must be diagonal matrices")
        a = np.diag(a)
    if a.ndim != 1 or not np.all(np.isin(a, (-1.0, 1.0))):
        raise ValueError("symmetry generators must have diagonal entries +1 or -1")
    return tuple(int(v) for v in a)


def _mul(a, b):
    return tuple(x * y for x, y in zip(a, b))


@dataclass(frozen=True)
class SignSymmetryGroup:
    elements: tuple
    generators: tuple
    size: int

    @property
    def order(self) -> int:
        return len(self.elements)

    def matrices(self) -> list[np.ndarray]:
        return [np.diag(np.array(e, dtype=float)) for e in self.elements]

    def __contains__(self, signs) -> bool:
        return _as_signs(signs) in self.elements

    def signature(self, mono) -> tuple[int, ...]:
        return sign_signature(mono, self.generators)

    def is_invariant_monomial(self, mono) -> bool:
        return all(s == 1 for s in self.signature(mono))


def group_closure(generators: Iterable, size: int | None = None) -> SignSymmetryGroup:
    """Smallest group of diagonal sign matrices containing ``generators``."""
    gens = [_as_signs(g) for g in generators]
    if size is None:
        if not gens:
            raise ValueError("size is required when no generators are given")
        size = len(gens[0])
    if any(len(g) != size for g in gens):
        raise ValueError("all generators must have the same size")
    identity = (1,) * size
    elems = {identity}
    frontier = [identity]
    while frontier:
        new = []
        for e in frontier:
            for g in gens:
                h = _mul(e, g)
                if h not in elems:
                    elems.add(h)
                    new.append(h)
        frontier = new
    canon = tuple(sorted(set(g for g in gens if g != identity), reverse=True))
    return SignSymmetryGroup(tuple(sorted(elems, reverse=True)), canon, size)


def trivial_group(size: int) -> SignSymmetryGroup:
    return group_closure([], size)


def lift_group(G: SignSymmetryGroup) -> SignSymmetryGroup:
    """Group on (x, z) generated by (Lx, Lz) for L in G and by (x, -z)."""
    n = G.size
    gens = [g + g for g in G.generators]
    gens.append((1,) * n + (-1,) * n)
    return group_closure(gens, 2 * n)


def parse_signed_generator(spec: Sequence[str], names: Sequence[str]) -> tuple[int, ...]:
    """``["-x1", "-x2", "x3"]`` -> (-1, -1, 1)."""
    if len(spec) != len(names):
        raise ValueError(f"generator {list(spec)} must list all {len(names)} variables")
    signs = []
    for entry, name in zip(spec, names):
        entry = entry.strip()
        sign = -1 if entry.startswith("-") else 1
        if entry.lstrip("+-") != name:
            raise ValueError(f"generator entry {entry!r} does not match variable {name!r}")
        signs.append(sign)
    return tuple(signs)


def format_signed_generator(signs: Sequence[int], names: Sequence[str]) -> list[str]:
    return [("-" if s < 0 else "") + name for s, name in zip(signs, names)]


def check_equivariance(f, L, tol: float = 1e-12) -> bool:
    """True iff f(L x) = L f(x) coefficient-wise for a polynomial vector field f."""
    L = np.asarray(L, dtype=float)
    comps = f.components
    n = len(comps)
    if L.shape != (n, n):
        raise ValueError(f"transformation must be {n}x{n}")
    lhs = [linear_substitute(c, L) for c in comps]
    for i in range(n):
        rhs = Polynomial.zero(n)
        for j in range(n):
            if L[i, j] != 0.0:
                rhs = rhs + comps[j] * L[i, j]
        if not (lhs[i] - rhs).is_zero(tol):
            return False
    return True


def check_invariance(p: Polynomial, G, tol: float = 1e-12) -> bool:
    """True iff p(L x) = p(x) for every L in G (a group or a list of matrices)."""
    mats = G.matrices() if isinstance(G, SignSymmetryGroup) else [np.asarray(L, dtype=float) for L in G]
    for L in mats:
        if L.shape != (p.nvars, p.nvars):
            raise ValueError("group acts on a different number of variables")
        if not (linear_substitute(p, L) - p).is_zero(tol):
            return False
    return True


def symmetrize(p: Polynomial, G: SignSymmetryGroup) -> Polynomial:
    """Group average (1/|G|) sum_L p(L x)."""
    if G.size != p.nvars:
        raise ValueError("group acts on a different number of variables")
    acc = Polynomial.zero(p.nvars)
    for L in G.matrices():
        acc = acc + linear_substitute(p, L)
    return acc * (1.0 / G.order)


def character_classes(basis: Sequence[tuple], G: SignSymmetryGroup) -> list[list[int]]:
    """Partition basis indices by sign signature; classes ordered by signature."""
    classes: dict = {}
    for k, m in enumerate(basis):
        classes.setdefault(G.signature(m), []).append(k)
    return [classes[s] for s in sorted(classes, reverse=True)]
