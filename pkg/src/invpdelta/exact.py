"""Closed-form exact solutions of the invariant schemes and their lattices.

Each entry couples a solution ``u(x, t)`` with a point generator
``points(m, n) -> (x, t)`` on which the discrete solution is exact.  Several
entries are produced from simpler seeds by the symmetry group, and
:func:`generate_by_group` extends the catalog on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, NumericError
from .lattice import MeshFunctions, MovingLattice, lattice_from_arrays
from .schemes import make_scheme
from .symmetry import GroupElement, group_element

__all__ = [
    "ExactSolution",
    "catalog",
    "get_exact",
    "generate_by_group",
    "exactness_residual",
    "EXACT_TOL",
]

EXACT_TOL = 1e-10

INVARIANT_PAIR = ("invariant_explicit", "invariant_implicit")
ALL_FOUR = INVARIANT_PAIR + ("adapted_explicit", "adapted_implicit")


def _mesh_points(mesh: MeshFunctions):
    def points(m, n):
        M, N = np.meshgrid(np.asarray(m), np.asarray(n), indexing="ij")
        gamma, h, x0 = mesh.evaluate(M)
        return h * N + x0, gamma

    return points


@dataclass(frozen=True)
class ExactSolution:
    """An exact discrete solution together with the lattice it lives on."""

    equation: str
    name: str
    u: Callable
    points: Callable = field(repr=False)
    m_range: tuple = (0, 29)
    n_range: tuple = (0, 29)
    variants: tuple = INVARIANT_PAIR
    mesh: MeshFunctions | None = field(default=None, repr=False)
    provenance: dict = field(default_factory=dict)

    def lattice(self, m_range=None, n_range=None) -> MovingLattice:
        m_range = m_range or self.m_range
        n_range = n_range or self.n_range
        m = np.arange(m_range[0], m_range[1] + 1)
        n = np.arange(n_range[0], n_range[1] + 1)
        x, t = self.points(m, n)
        lat = lattice_from_arrays(range(m[0], m[-1] + 1), range(n[0], n[-1] + 1), x, t, self.u(x, t),
                                  self.equation)
        lat.check_mesh()
        return lat

    def mesh_functions(self, m_range=None, n_range=None) -> MeshFunctions:
        """Mesh functions reproducing the lattice (tabulated if not given in closed form)."""
        if self.mesh is not None:
            return self.mesh
        return MeshFunctions.from_lattice(self.lattice(m_range, n_range))

    def with_window(self, m_range=None, n_range=None) -> "ExactSolution":
        return replace(self, m_range=m_range or self.m_range, n_range=n_range or self.n_range)


def exactness_residual(entry: ExactSolution, variant: str, m_range=None, n_range=None) -> float:
    """Largest scaled residual component of ``variant`` on the entry's lattice."""
    from .verify import lattice_residuals

    scheme = make_scheme(entry.equation, variant)
    lat = entry.lattice(m_range, n_range)
    vals, sc = lattice_residuals(scheme, lat)
    return float(np.max(np.abs(vals) / sc))


# ---------------------------------------------------------------------------
# group generation
# ---------------------------------------------------------------------------


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("group action produced non-finite values on the window")


def generate_by_group(seed: ExactSolution, g: GroupElement, name: str | None = None,
                      verify: bool = True, tol: float = EXACT_TOL) -> ExactSolution:
    """Image of ``seed`` under ``g``: new lattice points and transformed values.

    The new value at a transformed point is found by pulling the point back
    with ``g^-1``, evaluating the seed there and pushing the value forward.
    """
    if g.equation != seed.equation:
        raise ConfigError(f"group of {g.equation} cannot act on a {seed.equation} solution")
    ginv = g.inverse()

    def points(m, n):
        x, t = seed.points(m, n)
        with np.errstate(all="raise"):
            try:
                xt, tt, _ = g.apply(x, t, np.ones_like(x))
            except FloatingPointError as exc:
                raise DomainError(f"singular group action: {exc}") from exc
        _check_finite(xt, tt)
        return xt, tt

    def u(xt, tt):
        x, t, _ = ginv.apply(xt, tt, np.ones_like(np.asarray(xt, dtype=float)))
        _, _, ut = g.apply(x, t, seed.u(x, t))
        return ut

    variants = tuple(v for v in seed.variants if not v.startswith("standard"))
    out = ExactSolution(
        seed.equation,
        name or f"{seed.name}|{g.label}",
        u,
        points,
        seed.m_range,
        seed.n_range,
        variants,
        None,
        dict(seed=seed.name, steps=[list(s) for s in g.steps],
             parent=seed.provenance or None),
    )
    if verify:
        out.lattice()  # raises on singular actions or tangling
        for v in variants:
            r = exactness_residual(out, v)
            if not r <= tol:
                raise NumericError(f"{out.name} is not exact for {v}: residual {r:.3g}")
    return out


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def _fundamental_u(x, t):
    return np.sqrt(1 / (4 * np.pi * t)) * np.exp(-x * x / (4 * t))


def _heat_catalog():
    out = []
    b = 1.5
    uni = MeshFunctions.uniform(h=0.1, x0=0.0, tau=0.002, t0=0.0)
    const = ExactSolution("heat", "constant", lambda x, t: b + 0 * x, _mesh_points(uni),
                          variants=INVARIANT_PAIR + ("standard_explicit", "standard_implicit"),
                          mesh=uni, provenance=dict(b=b))
    out.append(const)

    a, b_lin = 0.5, 2.0
    linear = ExactSolution("heat", "linear", lambda x, t: a * x + b_lin, _mesh_points(uni),
                           variants=INVARIANT_PAIR + ("standard_explicit", "standard_implicit"),
                           mesh=uni, provenance=dict(a=a, b=b_lin))
    out.append(linear)

    h, x0, tau, t0 = 0.05, 0.0, 0.005, 10.0
    fund = MeshFunctions.fundamental(h=h, x0=x0, tau=tau, t0=t0)
    steps = ((6, 0.25), (3, float(np.log(np.sqrt(1 / (4 * np.pi * b * b))))), (2, 1.0))
    out.append(ExactSolution(
        "heat", "fundamental", _fundamental_u, _mesh_points(fund), (0, 29), (-15, 14),
        INVARIANT_PAIR, fund,
        dict(seed="constant", b=b, steps=[list(s) for s in steps],
             seed_lattice="x = h n + x0, t = 1 - 1/(tau m + t0)", h=h, x0=x0, tau=tau, t0=t0)))

    c = 0.5
    gal = MeshFunctions.galilean(c=c, h=0.1, x0=0.0, tau=0.002, t0=0.0)
    out.append(ExactSolution(
        "heat", "traveling_wave",
        lambda x, t: (a * (x - 2 * c * t) + b_lin) * np.exp(-c * x + c * c * t),
        _mesh_points(gal), variants=INVARIANT_PAIR, mesh=gal,
        provenance=dict(seed="linear", steps=[[5, c]], a=a, b=b_lin, c=c)))

    g = group_element("heat", (0.1, 0.05, 0.1, 0.1, 0.2, 0.05))
    out.append(generate_by_group(linear, g, "transformed_linear", verify=False))
    return out


def _potential_catalog():
    out = []
    for entry in _heat_catalog():
        def w(x, t, f=entry.u):
            u = f(x, t)
            if np.any(~(np.real(u) > 0)):
                raise DomainError("heat solution must be positive for the potential image")
            return -2 * np.log(u)

        variants = tuple(v for v in entry.variants if not v.startswith("standard"))
        out.append(replace(entry, equation="potential_burgers", u=w, variants=variants,
                           provenance=dict(image_of=f"heat/{entry.name}", map="w = -2 ln u")))
    return out


def _burgers_catalog():
    v0 = 0.5
    uni = MeshFunctions.uniform(h=0.1, x0=0.0, tau=0.002, t0=0.0)
    moving = MeshFunctions.galilean(c=v0 / 2, h=0.1, x0=0.0, tau=0.002, t0=0.0)
    fund = MeshFunctions.fundamental(h=0.05, x0=0.0, tau=0.005, t0=10.0)
    return [
        ExactSolution("burgers", "constant", lambda x, t: v0 + 0 * x, _mesh_points(uni),
                      variants=INVARIANT_PAIR + ("standard_explicit", "standard_implicit"),
                      mesh=uni, provenance=dict(v0=v0)),
        ExactSolution("burgers", "constant_moving", lambda x, t: v0 + 0 * x, _mesh_points(moving),
                      variants=ALL_FOUR, mesh=moving, provenance=dict(v0=v0, sigma="tau v0")),
        ExactSolution("burgers", "rational", lambda x, t: x / t, _mesh_points(fund), (0, 29), (-15, 14),
                      ALL_FOUR, fund,
                      dict(seed="constant v=0", steps=[[5, 1.0], [1, 0.0], [2, 1.0]],
                           seed_lattice="x = h n + x0, t = 1 - 1/(tau m + t0)")),
    ]


def _kdv_catalog():
    u0 = 0.5
    # tau / h^3 kept small: the explicit dispersive update amplifies round-off otherwise
    uni = MeshFunctions.uniform(h=0.5, x0=0.0, tau=0.002, t0=0.0)
    moving = MeshFunctions.galilean(c=-u0 / 2, h=0.5, x0=0.0, tau=0.002, t0=0.0)
    fund = MeshFunctions.fundamental(h=0.05, x0=0.0, tau=0.005, t0=10.0)
    return [
        ExactSolution("kdv", "constant", lambda x, t: u0 + 0 * x, _mesh_points(uni),
                      variants=INVARIANT_PAIR + ("standard_explicit", "standard_implicit"),
                      mesh=uni, provenance=dict(u0=u0)),
        ExactSolution("kdv", "constant_moving", lambda x, t: u0 + 0 * x, _mesh_points(moving),
                      variants=ALL_FOUR, mesh=moving, provenance=dict(u0=u0, sigma="-tau u0")),
        ExactSolution("kdv", "galilean_invariant", lambda x, t: -x / t, _mesh_points(fund), (0, 29),
                      (-15, 14), ALL_FOUR, fund,
                      dict(invariant_under="t d/dx - d/du", lattice="x = (h n + x0)(tau m + t0)")),
    ]


def _wave_catalog():
    def nonuniform(m, n):
        M, N = np.meshgrid(np.asarray(m, dtype=float), np.asarray(n, dtype=float), indexing="ij")
        return 0.1 * N + 0.02 * np.sin(N), 0.01 * M + 0.002 * np.sin(M)

    uni = MeshFunctions.uniform(h=0.1, x0=0.0, tau=0.01, t0=0.0)

    def sep(x, t):
        return np.sin(x) + np.cos(3 * t)

    return [
        ExactSolution("wave_demo", "separable", sep, nonuniform, variants=("wave_demo",),
                      provenance=dict(f="sin x", g="cos 3t", lattice="orthogonal, nonuniform")),
        ExactSolution("wave_demo", "separable_uniform", sep, _mesh_points(uni),
                      variants=("wave_demo", "wave_demo_uniform"), mesh=uni,
                      provenance=dict(f="sin x", g="cos 3t", lattice="uniform")),
    ]


_CATALOGS = {
    "heat": _heat_catalog,
    "potential_burgers": _potential_catalog,
    "burgers": _burgers_catalog,
    "kdv": _kdv_catalog,
    "wave_demo": _wave_catalog,
}


def catalog(tag: str) -> list:
    """Exact solutions known for ``tag``."""
    try:
        return _CATALOGS[tag]()
    except KeyError:
        raise ConfigError(f"no catalog for {tag!r}") from None


def get_exact(tag: str, name: str) -> ExactSolution:
    for entry in catalog(tag):
        if entry.name == name:
            return entry
    raise ConfigError(f"no exact solution {name!r} for {tag}")
