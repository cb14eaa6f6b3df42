"""Sparse multivariate polynomials with float coefficients.

A :class:`Polynomial` maps exponent tuples to coefficients.  Values are
immutable; every arithmetic operation returns a new pruned polynomial.
Monomials are ordered graded-lexicographically wherever a deterministic
order is needed (basis indexing, text output).
"""

from __future__ import annotations

import itertools
import math
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

PRUNE_TOL = 1e-14

Monomial = tuple


def grlex_key(mono: Sequence[int]) -> tuple:
    """Sort key: total degree first, then lexicographic with x1 > x2 > ..."""
    return (sum(mono), tuple(-e for e in mono))


def _pruned(terms: Mapping[tuple, float], tol: float = PRUNE_TOL) -> dict:
    return {m: float(c) for m, c in terms.items() if abs(c) >= tol}


class Polynomial:
    """Sparse polynomial in ``nvars`` variables.

    Parameters
    ----------
    terms : mapping
        Exponent tuple -> coefficient.  Terms with ``|c| < 1e-14`` are dropped.
    nvars : int
        Number of variables.
    """

    __slots__ = ("_terms", "_nvars")

    def __init__(self, terms: Mapping[tuple, float] | None = None, nvars: int = 1, *, prune=True):
        terms = dict(terms or {})
        for m in terms:
            if len(m) != nvars:
                raise ValueError(f"monomial {m} does not have {nvars} exponents")
            if any(e < 0 for e in m):
                raise ValueError(f"negative exponent in {m}")
        object.__setattr__(self, "_nvars", int(nvars))
        object.__setattr__(self, "_terms", _pruned(terms) if prune else terms)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    # constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls({}, nvars)

    @classmethod
    def constant(cls, c: float, nvars: int) -> "Polynomial":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Polynomial":
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        mono = [0] * nvars
        mono[i] = 1
        return cls({tuple(mono): 1.0}, nvars)

    @classmethod
    def monomial(cls, mono: Sequence[int], coeff: float = 1.0) -> "Polynomial":
        return cls({tuple(mono): coeff}, len(mono))

    # basic properties -----------------------------------------------------

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.sorted_terms())

    def sorted_terms(self) -> list[tuple[tuple, float]]:
        return sorted(self._terms.items(), key=lambda mc: grlex_key(mc[0]))

    def coeff(self, mono: Sequence[int]) -> float:
        return self._terms.get(tuple(mono), 0.0)

    @property
    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(m) for m in self._terms)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self._terms.values())

    def support(self) -> list[tuple]:
        return sorted(self._terms, key=grlex_key)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # arithmetic -----------------------------------------------------------

    def _check(self, other: "Polynomial"):
        if self._nvars != other._nvars:
            raise ValueError(f"dimension mismatch: {self._nvars} vs {other._nvars} variables")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(float(other), self._nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0.0) + c
        return Polynomial(out, self._nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._terms.items()}, self._nvars, prune=False)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial({m: c * other for m, c in self._terms.items()}, self._nvars)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0.0) + c1 * c2
        return Polynomial(out, self._nvars)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __pow__(self, k: int):
        if k < 0 or int(k) != k:
            raise ValueError("only nonnegative integer powers are supported")
        result = Polynomial.constant(1.0, self._nvars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._nvars == other._nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self._nvars, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", atol: float = 1e-12) -> bool:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coeff(m) - other.coeff(m)) <= atol for m in keys)

    # calculus and evaluation ---------------------------------------------

    def diff(self, i: int) -> "Polynomial":
        if not 0 <= i < self._nvars:
            raise IndexError(f"variable index {i} out of range for {self._nvars} variables")
        out: dict = {}
        for m, c in self._terms.items():
            if m[i]:
                mm = list(m)
                mm[i] -= 1
                mm = tuple(mm)
                out[mm] = out.get(mm, 0.0) + c * m[i]
        return Polynomial(out, self._nvars)

    def __call__(self, point) -> float:
        return evaluate(self, point)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponent matrix (terms x nvars) and coefficient vector, grlex order."""
        st = self.sorted_terms()
        exps = np.array([m for m, _ in st], dtype=np.int64).reshape(len(st), self._nvars)
        coefs = np.array([c for _, c in st], dtype=float)
        return exps, coefs

    def eval_many(self, points) -> np.ndarray:
        """Evaluate at each row of ``points`` (N x nvars)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self._nvars:
            raise ValueError(f"points have {pts.shape[1]} coordinates, expected {self._nvars}")
        exps, coefs = self.arrays()
        if not len(coefs):
            return np.zeros(len(pts))
        return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2) @ coefs

    def substitute(self, L) -> "Polynomial":
        return linear_substitute(self, L)

    def map_variables(self, index_map: Sequence[int], nvars: int) -> "Polynomial":
        """Embed into ``nvars`` variables, sending variable i to ``index_map[i]``."""
        out: dict = {}
        for m, c in self._terms.items():
            mm = [0] * nvars
            for i, e in enumerate(m):
                mm[index_map[i]] += e
            mm = tuple(mm)
            out[mm] = out.get(mm, 0.0) + c
        return Polynomial(out, nvars)

    # text form -----------------------------------------------------------

    def to_text(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else default_names(self._nvars)
        if not self._terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            factors = []
            for name, e in zip(names, m):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            coeff = format_coeff(c)
            parts.append(coeff if not factors else f"{coeff} * {'*'.join(factors)}")
        return " + ".join(parts)

    def __repr__(self):
        return f"Polynomial({self.to_text()!r}, nvars={self._nvars})"

    __str__ = to_text


def format_coeff(c: float) -> str:
    return f"{c:.17g}"


def default_names(nvars: int) -> list[str]:
    return [f"x{i + 1}" for i in range(nvars)]


def xz_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + [f"z{i + 1}" for i in range(n)]


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\^|\*\*)|([-+*/()]))")


def parse_polynomial(text: str, names: Sequence[str]) -> Polynomial:
    """Parse a polynomial expression over the given variable names.

    Accepts the canonical output of :meth:`Polynomial.to_text` as well as
    hand-written expressions using ``+ - * / ^ **`` and parentheses.
    Division is only allowed by numeric constants.
    """
    index = {name: i for i, name in enumerate(names)}
    nvars = len(names)
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial near {text[pos:pos + 20]!r}")
        num, name, power, op = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            if name not in index:
                raise ValueError(f"unknown variable {name!r}; declared: {list(names)}")
            tokens.append(("var", index[name]))
        elif power is not None:
            tokens.append(("op", "^"))
        else:
            tokens.append(("op", op))
        pos = m.end()
    tokens.append(("end", None))
    state = {"i": 0}

    def peek():
        return tokens[state["i"]]

    def take():
        tok = tokens[state["i"]]
        state["i"] += 1
        return tok

    def expr():
        sign = 1.0
        if peek() == ("op", "-"):
            take()
            sign = -1.0
        elif peek() == ("op", "+"):
            take()
        result = term() * sign
        while peek() in (("op", "+"), ("op", "-")):
            op = take()[1]
            rhs = term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term():
        result = factor()
        while peek() in (("op", "*"), ("op", "/")):
            op = take()[1]
            rhs = factor()
            if op == "*":
                result = result * rhs
            else:
                if rhs.degree > 0:
                    raise ValueError("division by a non-constant polynomial")
                result = result * (1.0 / rhs.coeff((0,) * nvars))
        return result

    def factor():
        base = atom()
        if peek() == ("op", "^"):
            take()
            kind, val = take()
            if kind != "num" or val != int(val):
                raise ValueError("exponent must be a nonnegative integer")
            base = base ** int(val)
        return base

    def atom():
        kind, val = take()
        if kind == "num":
            return Polynomial.constant(val, nvars)
        if kind == "var":
            return Polynomial.variable(val, nvars)
        if (kind, val) == ("op", "("):
            inner = expr()
            if take() != ("op", ")"):
                raise ValueError("unbalanced parentheses")
            return inner
        if (kind, val) == ("op", "-"):
            return -factor()
        raise ValueError(f"unexpected token {val!r}")

    result = expr()
    if peek()[0] != "end":
        raise ValueError(f"trailing input in polynomial {text!r}")
    return result


# module-level operations ------------------------------------------------


def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    p._check(q)
    return p + q


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    p._check(q)
    return p * q


def poly_diff(p: Polynomial, var_index: int) -> Polynomial:
    return p.diff(var_index)


def evaluate(p: Polynomial, point) -> float:
    pt = np.asarray(point, dtype=float).ravel()
    if pt.shape[0] != p.nvars:
        raise ValueError(f"point has {pt.shape[0]} coordinates, expected {p.nvars}")
    total = 0.0
    for m, c in p._terms.items():
        v = c
        for x, e in zip(pt, m):
            if e:
                v *= x**e
        total += v
    return float(total)


poly_eval = evaluate


def linear_substitute(p: Polynomial, L) -> Polynomial:
    """Return q with q(x) = p(L x), expanded exactly."""
    L = np.asarray(L, dtype=float)
    n = p.nvars
    if L.shape != (n, n):
        raise ValueError(f"substitution matrix must be {n}x{n}, got {L.shape}")
    # diagonal fast path: only sign/scale changes per monomial
    if np.count_nonzero(L - np.diag(np.diag(L))) == 0:
        d = np.diag(L)
        out = {}
        for m, c in p._terms.items():
            v = c
            for di, e in zip(d, m):
                if e:
                    v *= di**e
            out[m] = v
        return Polynomial(out, n)
    rows = [
        Polynomial({tuple(int(k == j) for k in range(n)): L[i, j] for j in range(n) if L[i, j] != 0.0}, n)
        for i in range(n)
    ]
    powers: dict = {}

    def power(i, e):
        key = (i, e)
        if key not in powers:
            powers[key] = rows[i] ** e
        return powers[key]

    acc: dict = {}
    for m, c in p._terms.items():
        term = Polynomial.constant(c, n)
        for i, e in enumerate(m):
            if e:
                term = term * power(i, e)
        for mm, cc in term._terms.items():
            acc[mm] = acc.get(mm, 0.0) + cc
    return Polynomial(acc, n)


def sign_signature(mono: Sequence[int], sign_vectors: Iterable[Sequence[int]]) -> tuple[int, ...]:
    """Character value (+1/-1) of a monomial under each diagonal sign vector."""
    sig = []
    for s in sign_vectors:
        odd = sum(e for e, si in zip(mono, s) if si < 0) % 2
        sig.append(-1 if odd else 1)
    return tuple(sig)


def basis_monomials(
    nvars: int,
    max_degree: int,
    parity_filter: tuple[Sequence[Sequence[int]], Sequence[int]] | None = None,
    min_degree: int = 0,
) -> list[tuple]:
    """All monomials of total degree in ``[min_degree, max_degree]``, grlex order.

    ``parity_filter`` is ``(sign_vectors, signature)``: keep only monomials whose
    sign signature under ``sign_vectors`` equals ``signature``.
    """
    if nvars < 1 or max_degree < 0:
        raise ValueError("need nvars >= 1 and max_degree >= 0")
    monos = []
    for d in range(min_degree, max_degree + 1):
        block = []
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            m = [0] * nvars
            for i in combo:
                m[i] += 1
            block.append(tuple(m))
        block.sort(key=grlex_key)
        monos.extend(block)
    if parity_filter is not None:
        vectors, target = parity_filter
        target = tuple(target)
        monos = [m for m in monos if sign_signature(m, vectors) == target]
    return monos


def n_monomials(nvars: int, max_degree: int) -> int:
    return math.comb(nvars + max_degree, max_degree)
