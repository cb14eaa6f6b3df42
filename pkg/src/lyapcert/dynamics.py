"""Tangent-augmented dynamics of a polynomial vector field.

For dx/dt = f(x) the unit tangent direction z evolves on the sphere by

    dz/dt = ell(x, z) = Df(x) z - phi(x, z) z,   phi = z^T Df(x) z,

and the leading Lyapunov exponent of a trajectory is the time average of
phi.  With a fixed weight matrix A the growth is measured in the norm
|y|_A = sqrt(y^T A y); then phi = z^T A Df(x) z and the sphere becomes
z^T A z = 1.

Polynomials in 2n variables always use the ordering (x1..xn, z1..zn).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polyalg import Polynomial, default_names, xz_names


@dataclass(frozen=True)
class VectorField:
    """Right-hand side f of dx/dt = f(x); one polynomial per state variable.

    ``hamiltonian`` may be given for separable Hamiltonian systems whose
    first half of the variables are positions and second half momenta.
    """

    components: tuple
    names: tuple = None
    hamiltonian: Polynomial | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        n = len(comps)
        for c in comps:
            if c.nvars != n:
                raise ValueError(f"component has {c.nvars} variables, expected {n}")
        object.__setattr__(self, "components", comps)
        names = tuple(self.names) if self.names is not None else tuple(default_names(n))
        if len(names) != n:
            raise ValueError("one variable name per component required")
        object.__setattr__(self, "names", names)
        if self.hamiltonian is not None and self.hamiltonian.nvars != n:
            raise ValueError("hamiltonian must be a polynomial in the state variables")

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def __call__(self, x) -> np.ndarray:
        return np.array([c(x) for c in self.components])

    def arrays(self):
        """Per-component (exponents, coefficients) arrays for compiled kernels."""
        return [c.arrays() for c in self.components]

    def substitute(self, L) -> "VectorField":
        return VectorField(tuple(c.substitute(L) for c in self.components), self.names, self.hamiltonian)


def jacobian(f: VectorField) -> list[list[Polynomial]]:
    """Matrix of polynomials with entry (i, j) = d f_i / d x_j."""
    return [[fi.diff(j) for j in range(f.n)] for fi in f.components]


def jacobian_at(f: VectorField, x) -> np.ndarray:
    J = jacobian(f)
    return np.array([[Jij(x) for Jij in row] for row in J])


def _check_weight(weight, n):
    A = np.asarray(weight, dtype=float)
    if A.shape != (n, n):
        raise ValueError(f"weight must be {n}x{n}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-14):
        raise ValueError("weight matrix must be symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError("weight matrix must be positive definite") from None
    return A


@dataclass(frozen=True)
class TangentSystem:
    """(f, ell) on 2n variables together with the growth-rate density phi."""

    base: VectorField
    ell: tuple
    phi: Polynomial
    weight: np.ndarray | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def f_lifted(self) -> tuple:
        """Components of f embedded in the 2n (x, z) variables."""
        n = self.n
        return tuple(c.map_variables(range(n), 2 * n) for c in self.base.components)

    def sphere(self) -> Polynomial:
        """h0 = 1 - z^T A z (A = I when unweighted)."""
        n = self.n
        z = [Polynomial.variable(n + i, 2 * n) for i in range(n)]
        A = self.weight if self.weight is not None else np.eye(n)
        q = Polynomial.zero(2 * n)
        for i in range(n):
            for j in range(n):
                if A[i, j] != 0.0:
                    q = q + z[i] * z[j] * A[i, j]
        return 1.0 - q

    def lie_derivative(self, V: Polynomial) -> Polynomial:
        """f . grad_x V + ell . grad_z V."""
        n = self.n
        if V.nvars != 2 * n:
            raise ValueError(f"V must have {2 * n} variables")
        out = Polynomial.zero(2 * n)
        for i, fi in enumerate(self.f_lifted):
            dV = V.diff(i)
            if len(dV):
                out = out + fi * dV
        for i, li in enumerate(self.ell):
            dV = V.diff(n + i)
            if len(dV):
                out = out + li * dV
        return out

    def names(self) -> list[str]:
        return xz_names(self.n)


def build_tangent(f: VectorField, weight=None) -> TangentSystem:
    n = f.n
    N = 2 * n
    A = None if weight is None else _check_weight(weight, n)
    J = jacobian(f)
    lift = list(range(n))
    z = [Polynomial.variable(n + i, N) for i in range(n)]
    # Df(x) z, component-wise
    Dfz = []
    for i in range(n):
        acc = Polynomial.zero(N)
        for j in range(n):
            Jij = J[i][j].map_variables(lift, N)
            if len(Jij):
                acc = acc + Jij * z[j]
        Dfz.append(acc)
    if A is None:
        phi = Polynomial.zero(N)
        for i in range(n):
            phi = phi + z[i] * Dfz[i]
    else:
        ADfz = [sum((Dfz[j] * A[i, j] for j in range(n) if A[i, j] != 0.0), Polynomial.zero(N)) for i in range(n)]
        phi = Polynomial.zero(N)
        for i in range(n):
            phi = phi + z[i] * ADfz[i]
    ell = tuple(Dfz[i] - phi * z[i] for i in range(n))
    return TangentSystem(f, ell, phi, A)


def build_P(ts: TangentSystem, V: Polynomial | None, B: float) -> Polynomial:
    """P = B - phi - f . grad_x V - ell . grad_z V for numeric V and B."""
    N = 2 * ts.n
    P = B - ts.phi
    if V is not None:
        P = P - ts.lie_derivative(V)
    return P if isinstance(P, Polynomial) else Polynomial.constant(P, N)


def fixed_point_les(f: VectorField, x_star: Sequence[float], tol: float = 1e-9) -> list[float]:
    """Real parts of the eigenvalues of Df at a fixed point, sorted descending."""
    x_star = np.asarray(x_star, dtype=float)
    res = np.linalg.norm(f(x_star))
    if res > tol:
        raise ValueError(f"not a fixed point: |f(x*)| = {res:.3e} > {tol:.1e}")
    eig = np.linalg.eigvals(jacobian_at(f, x_star))
    return sorted((float(v) for v in eig.real), reverse=True)
