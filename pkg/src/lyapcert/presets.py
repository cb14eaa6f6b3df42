"""Built-in example systems: Lorenz and Henon-Heiles."""

from __future__ import annotations

from .dynamics import VectorField
from .polyalg import Polynomial, parse_polynomial

LORENZ_PARAMS = {"beta": 8.0 / 3.0, "sigma": 10.0, "r": 28.0}
HH_ENERGY = 1.0 / 7.0


def lorenz(beta: float = 8.0 / 3.0, sigma: float = 10.0, r: float = 28.0) -> VectorField:
    x1, x2, x3 = (Polynomial.variable(i, 3) for i in range(3))
    return VectorField(
        (sigma * (x2 - x1), r * x1 - x2 - x1 * x3, x1 * x2 - beta * x3),
        ("x1", "x2", "x3"),
    )


def henon_heiles_hamiltonian() -> Polynomial:
    return parse_polynomial("(x1^2 + x2^2 + x3^2 + x4^2)/2 + x1^2*x2 - x2^3/3", ["x1", "x2", "x3", "x4"])


def henon_heiles() -> VectorField:
    """Positions (x1, x2), momenta (x3, x4)."""
    names = ["x1", "x2", "x3", "x4"]
    comps = [parse_polynomial(s, names) for s in ("x3", "x4", "-x1 - 2*x1*x2", "-x2 - x1^2 + x2^2")]
    return VectorField(tuple(comps), tuple(names), henon_heiles_hamiltonian())


def henon_heiles_set(energy: float = HH_ENERGY) -> list[Polynomial]:
    """Inequalities g_i >= 0 cutting out the bounded region 0 <= H <= energy, x1^2 + x2^2 <= 1."""
    H = henon_heiles_hamiltonian()
    g3 = parse_polynomial("1 - x1^2 - x2^2", ["x1", "x2", "x3", "x4"])
    return [energy - H, H, g3]


def preset_problem(name: str) -> dict:
    """Problem description dict (same schema as the JSON problem file)."""
    if name == "lorenz":
        f = lorenz()
        return {
            "name": "lorenz",
            "variables": list(f.names),
            "field": [c.to_text(f.names) for c in f.components],
            "inequalities": [],
            "equalities": [],
            "symmetry": [["-x1", "-x2", "x3"]],
            "degrees": [2, 4],
            "options": {"degree_rule": "uniform", "v_degree": 2, "fixed_point": [0.0, 0.0, 0.0]},
        }
    if name in ("henon-heiles", "henon_heiles", "hh"):
        f = henon_heiles()
        return {
            "name": "henon-heiles",
            "variables": list(f.names),
            "field": [c.to_text(f.names) for c in f.components],
            "hamiltonian": f.hamiltonian.to_text(f.names),
            "inequalities": [g.to_text(f.names) for g in henon_heiles_set()],
            "equalities": [],
            "symmetry": [["-x1", "x2", "-x3", "x4"]],
            "degrees": [2, 4],
            "options": {"degree_rule": "uniform", "energy": HH_ENERGY},
        }
    raise ValueError(f"unknown preset {name!r}; choose 'lorenz' or 'henon-heiles'")
