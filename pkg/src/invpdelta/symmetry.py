"""Lie point symmetries of the supported equations and their action on lattices.

Each generator ``V = xi d/dx + eta d/dt + phi d/du`` is stored with a
closed-form one-parameter flow.  The discrete prolongation applies the same
coefficients at every stencil point, and invariance of a stencil function is
checked numerically by two independent estimators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, DomainError, MeshError, NumericError, SamplingError
from .lattice import MovingLattice, StencilView, random_stencils

__all__ = [
    "VectorField",
    "SymmetryAlgebra",
    "GroupElement",
    "EQUATIONS",
    "builtin_algebra",
    "prolong",
    "invariance_defect",
    "invariant_count",
    "flat_layer_slots",
    "group_element",
    "one_parameter",
    "apply_group",
    "apply_to_stencil",
    "sigma_tau_under_group",
    "potential_map",
]

EQUATIONS = ("heat", "burgers", "potential_burgers", "kdv", "wave_demo")

GRADIENT_STEP = 1e-6
FLOW_STEP = 1e-5


def _zero(x, t, u):
    return 0 * x


def _one(x, t, u):
    return 0 * x + 1


def _positive(d, what):
    if np.any(np.real(d) <= 0):
        raise DomainError(f"singular {what}: denominator not positive")
    return d


@dataclass(frozen=True)
class VectorField:
    """Generator with evaluable coefficients and an optional closed-form flow."""

    xi: Callable
    eta: Callable
    phi: Callable
    label: str = "V"
    flow_fn: Callable | None = field(default=None, repr=False)

    def coefficients(self, x, t, u):
        return self.xi(x, t, u), self.eta(x, t, u), self.phi(x, t, u)

    def flow(self, x, t, u, eps):
        """Image of points ``(x, t, u)`` under ``exp(eps V)``."""
        if eps == 0:
            return x, t, u
        if self.flow_fn is not None:
            return self.flow_fn(x, t, u, eps)
        return self._integrate(x, t, u, eps)

    def _integrate(self, x, t, u, eps):
        shape = np.shape(x)
        x, t, u = (np.broadcast_to(np.asarray(a, dtype=float), shape).ravel() for a in (x, t, u))
        n = x.size

        def rhs(_, y):
            a, b, c = y[:n], y[n:2 * n], y[2 * n:]
            return np.concatenate([np.broadcast_to(f(a, b, c), (n,))
                                   for f in (self.xi, self.eta, self.phi)])

        sol = solve_ivp(rhs, (0.0, eps), np.concatenate([x, t, u]), method="DOP853",
                        rtol=1e-13, atol=1e-14)
        if not sol.success:
            raise NumericError(f"flow integration failed for {self.label}: {sol.message}")
        y = sol.y[:, -1]
        return y[:n].reshape(shape), y[n:2 * n].reshape(shape), y[2 * n:].reshape(shape)

    def check_finite(self, rng=None, count=64, box=1.0) -> bool:
        rng = np.random.default_rng(rng)
        pts = rng.uniform(-box, box, (3, count))
        return all(np.all(np.isfinite(c)) for c in self.coefficients(*pts))


@dataclass(frozen=True)
class SymmetryAlgebra:
    equation: str
    basis: tuple

    @property
    def dim(self) -> int:
        return len(self.basis)

    def __iter__(self):
        return iter(self.basis)

    def __len__(self):
        return len(self.basis)

    def __getitem__(self, key) -> VectorField:
        if isinstance(key, str):
            for v in self.basis:
                if v.label == key:
                    return v
            raise KeyError(key)
        return self.basis[key]


# ---------------------------------------------------------------------------
# builtin algebras
# ---------------------------------------------------------------------------


def _translate_x(x, t, u, e):
    return x + e, t, u


def _translate_t(x, t, u, e):
    return x, t + e, u


def _heat_algebra():
    def v3_flow(x, t, u, e):
        return x, t, u * np.exp(e)

    def v4_flow(x, t, u, e):
        return x * np.exp(e), t * np.exp(2 * e), u

    def v5_flow(x, t, u, e):
        return x + 2 * t * e, t, u * np.exp(-(x * e + t * e * e))

    def v6_flow(x, t, u, e):
        d = _positive(1 - 4 * e * t, "projective map")
        return x / d, t / d, u * np.sqrt(d) * np.exp(-x * x * e / d)

    return (
        VectorField(_one, _zero, _zero, "V1", _translate_x),
        VectorField(_zero, _one, _zero, "V2", _translate_t),
        VectorField(_zero, _zero, lambda x, t, u: u, "V3", v3_flow),
        VectorField(lambda x, t, u: x, lambda x, t, u: 2 * t, _zero, "V4", v4_flow),
        VectorField(lambda x, t, u: 2 * t, _zero, lambda x, t, u: -x * u, "V5", v5_flow),
        VectorField(lambda x, t, u: 4 * t * x, lambda x, t, u: 4 * t * t,
                    lambda x, t, u: -(x * x + 2 * t) * u, "V6", v6_flow),
    )


def _burgers_algebra():
    def v3_flow(x, t, v, e):
        return x + e * t, t, v + e

    def v4_flow(x, t, v, e):
        return x * np.exp(e), t * np.exp(2 * e), v * np.exp(-e)

    def v5_flow(x, t, v, e):
        d = _positive(1 - e * t, "projective map")
        # x - t v is conserved along the flow
        return x / d, t / d, v * d + e * x

    return (
        VectorField(_one, _zero, _zero, "V1", _translate_x),
        VectorField(_zero, _one, _zero, "V2", _translate_t),
        VectorField(lambda x, t, v: t, _zero, _one, "V3", v3_flow),
        VectorField(lambda x, t, v: x, lambda x, t, v: 2 * t, lambda x, t, v: -v, "V4", v4_flow),
        VectorField(lambda x, t, v: t * x, lambda x, t, v: t * t, lambda x, t, v: x - t * v,
                    "V5", v5_flow),
    )


def _potential_algebra():
    def v3_flow(x, t, w, e):
        return x + e * t, t, w + e * x + 0.5 * e * e * t

    def v4_flow(x, t, w, e):
        return x * np.exp(e), t * np.exp(2 * e), w

    def v5_flow(x, t, w, e):
        d = _positive(1 - e * t, "projective map")
        return x / d, t / d, w + 0.5 * x * x * e / d - np.log(d)

    def v6_flow(x, t, w, e):
        return x, t, w + e

    return (
        VectorField(_one, _zero, _zero, "V1", _translate_x),
        VectorField(_zero, _one, _zero, "V2", _translate_t),
        VectorField(lambda x, t, w: t, _zero, lambda x, t, w: x, "V3", v3_flow),
        VectorField(lambda x, t, w: x, lambda x, t, w: 2 * t, _zero, "V4", v4_flow),
        VectorField(lambda x, t, w: t * x, lambda x, t, w: t * t,
                    lambda x, t, w: 0.5 * x * x + t, "V5", v5_flow),
        VectorField(_zero, _zero, _one, "V6", v6_flow),
    )


def _kdv_algebra():
    def v3_flow(x, t, u, e):
        return x + e * t, t, u - e

    def v4_flow(x, t, u, e):
        return x * np.exp(e), t * np.exp(3 * e), u * np.exp(-2 * e)

    return (
        VectorField(_one, _zero, _zero, "V1", _translate_x),
        VectorField(_zero, _one, _zero, "V2", _translate_t),
        VectorField(lambda x, t, u: t, _zero, lambda x, t, u: 0 * x - 1, "V3", v3_flow),
        VectorField(lambda x, t, u: x, lambda x, t, u: 3 * t, lambda x, t, u: -2 * u, "V4",
                    v4_flow),
    )


def _wave_algebra():
    return (
        VectorField(_one, _zero, _zero, "V1", _translate_x),
        VectorField(_zero, _one, _zero, "V2", _translate_t),
        VectorField(lambda x, t, u: x, _zero, _zero, "V3",
                    lambda x, t, u, e: (x * np.exp(e), t, u)),
        VectorField(_zero, lambda x, t, u: t, _zero, "V4",
                    lambda x, t, u, e: (x, t * np.exp(e), u)),
    )


_BUILDERS = {
    "heat": _heat_algebra,
    "burgers": _burgers_algebra,
    "potential_burgers": _potential_algebra,
    "kdv": _kdv_algebra,
    "wave_demo": _wave_algebra,
}


def builtin_algebra(tag: str) -> SymmetryAlgebra:
    """Finite-dimensional symmetry algebra of ``tag`` in its conventional basis order."""
    try:
        return SymmetryAlgebra(tag, _BUILDERS[tag]())
    except KeyError:
        raise ConfigError(f"unknown equation {tag!r}; expected one of {EQUATIONS}") from None


def superposition_field(alpha: Callable, tag: str = "heat") -> VectorField:
    """Generator ``alpha(x, t) d/du`` of the linear superposition pseudogroup.

    For the potential form the same transformation reads
    ``alpha exp(w/2) d/dw`` after ``u = exp(-w/2)``.
    """
    if tag == "heat":
        return VectorField(_zero, _zero, lambda x, t, u: alpha(x, t) + 0 * u, "Valpha",
                           lambda x, t, u, e: (x, t, u + e * alpha(x, t)))
    if tag == "potential_burgers":
        def flow(x, t, w, e):
            # exp(-w/2) moves by -e alpha / 2
            return x, t, -2 * np.log(np.exp(-w / 2) - 0.5 * e * alpha(x, t))

        return VectorField(_zero, _zero, lambda x, t, w: alpha(x, t) * np.exp(w / 2), "Valpha",
                           flow)
    raise ConfigError(f"no superposition generator for {tag!r}")


# ---------------------------------------------------------------------------
# prolongation and invariance
# ---------------------------------------------------------------------------


def prolong(v: VectorField, s: StencilView) -> np.ndarray:
    """Coefficients of the prolonged field, shape ``(*batch, 3, L, K)``.

    Slot ordering matches :meth:`StencilView.coords`.
    """
    xi, eta, phi = v.coefficients(s.x, s.t, s.u)
    return np.stack(np.broadcast_arrays(xi, eta, phi), axis=-3)


def apply_to_stencil(g, s: StencilView) -> StencilView:
    if isinstance(g, VectorField):
        raise TypeError("use flow_stencil for a vector field")
    return StencilView(*g.apply(s.x, s.t, s.u), levels=s.levels)


def flow_stencil(v: VectorField, s: StencilView, eps: float) -> StencilView:
    return StencilView(*v.flow(s.x, s.t, s.u, eps), levels=s.levels)


def _gradient_defect(v, F, s):
    c = s.coords()
    coef = prolong(v, s)
    batch = c.shape[:-3]
    total = np.zeros(batch)
    magnitude = np.zeros(batch)
    sens = np.zeros(batch)
    for idx in np.ndindex(c.shape[-3:]):
        k = (Ellipsis,) + idx
        ck = coef[k]
        if not np.any(ck):
            continue
        step = GRADIENT_STEP * (1.0 + np.abs(c[k]))
        cp = c.copy()
        cp[k] += step
        cm = c.copy()
        cm[k] -= step
        g = (F(StencilView.from_coords(cp, s.levels)) - F(StencilView.from_coords(cm, s.levels))) / (
            cp[k] - cm[k])
        total = total + ck * g
        magnitude = magnitude + np.abs(ck * g)
        sens = sens + np.abs(g) * (1.0 + np.abs(c[k]))
    return total, magnitude, sens


def _flow_defect(v, F, s):
    def central(e):
        return (F(flow_stencil(v, s, e)) - F(flow_stencil(v, s, -e))) / (2 * e)

    d1 = central(FLOW_STEP)
    d2 = central(FLOW_STEP / 2)
    return (4 * d2 - d1) / 3


def invariance_defect(v: VectorField, F: Callable, s: StencilView, mode: str = "strong",
                      rtol: float = 1e-6) -> np.ndarray:
    """``pr V[F]`` at ``s`` (batched).

    Two estimators are computed: prolonged coefficients dotted with a central
    finite-difference gradient of ``F``, and the derivative of ``F`` along the
    group flow by Richardson-extrapolated central differences.  The first is
    returned; disagreement beyond ``rtol`` of the term magnitudes raises
    :class:`NumericError`.

    ``mode='on_manifold'`` additionally requires ``F(s)`` to vanish, i.e. the
    caller has projected ``s`` onto ``F = 0``.
    """
    if mode not in ("strong", "on_manifold"):
        raise ValueError(f"unknown mode {mode!r}")
    with np.errstate(over="raise", invalid="raise"):
        try:
            value = np.asarray(F(s), dtype=float)
            a, magnitude, sens = _gradient_defect(v, F, s)
            b = _flow_defect(v, F, s)
        except FloatingPointError as exc:
            raise NumericError(f"overflow evaluating defect of {v.label}: {exc}") from exc
    if mode == "on_manifold":
        off = np.abs(value) > 1e-8 * (1.0 + sens)
        if np.any(off):
            raise NumericError(f"stencil not on the manifold F = 0 (|F| = {np.max(np.abs(value)):.3g})")
    tol = rtol * (1.0 + magnitude + np.abs(value))
    if np.any(np.abs(a - b) > tol):
        worst = np.max(np.abs(a - b) - tol)
        raise NumericError(f"defect estimators disagree for {v.label} (excess {worst:.3g})")
    return a


def flat_layer_slots(levels=(0, 1), reach=1) -> list:
    """Coordinates of the flat-layer stencil space: every x and u, one t per level."""
    offsets = range(-reach, reach + 1)
    slots = [("x", lv, k) for lv in levels for k in offsets]
    slots += [("t", lv, 0) for lv in levels]
    slots += [("u", lv, k) for lv in levels for k in offsets]
    return slots


def invariant_count(alg: SymmetryAlgebra, s: StencilView | None = None, active_coords=None, *,
                    width: int = 6, n_samples: int = 5, seed=0) -> int:
    """Number of functionally independent invariants: ``len(active) - rank Z``.

    ``Z`` stacks the prolonged coefficients restricted to the active
    coordinates.  The rank is the largest numerical rank over the sampled
    stencils (threshold ``max(Z.shape) * eps * sigma_max``).
    """
    if s is None:
        s = random_stencils(n_samples, width, seed)
    if not s.batch_shape:
        s = s[None]
    if active_coords is None:
        active_coords = flat_layer_slots(s.levels, s.reach)
    idx = [s.slot_index(slot) for slot in active_coords]
    coefs = [prolong(v, s) for v in alg]
    ranks = []
    for b in range(s.batch_shape[0]):
        Z = np.array([[c[(b,) + i] for i in idx] for c in coefs], dtype=float)
        sv = np.linalg.svd(Z, compute_uv=False)
        thresh = max(Z.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        ranks.append(int(np.sum(sv > thresh)))
    if len(ranks) > 1 and len(set(ranks)) == len(ranks):
        raise SamplingError(f"inconsistent ranks over samples: {ranks}")
    return len(active_coords) - max(ranks)


# ---------------------------------------------------------------------------
# finite group actions
# ---------------------------------------------------------------------------


def _heat_composite(params):
    e1, e2, e3, e4, e5, e6 = params

    def act(x, t, u):
        ts = t + e2
        xs = x + e1
        d = _positive(1 - 4 * e6 * np.exp(2 * e4) * ts, "projective map")
        xt = (np.exp(e4) * xs + 2 * e5 * np.exp(2 * e4) * ts) / d
        tt = np.exp(2 * e4) * ts / d
        q = 1 + 4 * e6 * tt
        ut = u / np.sqrt(q) * np.exp(e3 - (e5 * xt - e5 * e5 * tt + e6 * xt * xt) / q)
        return xt, tt, ut

    return act


@dataclass(frozen=True)
class GroupElement:
    """Composition of one-parameter flows, applied first to last.

    ``steps`` holds ``(generator_number, eps)`` pairs with 1-based generator
    numbers of the equation's algebra.
    """

    equation: str
    steps: tuple
    closed_form: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def parameters(self):
        return tuple(e for _, e in self.steps)

    @property
    def algebra(self) -> SymmetryAlgebra:
        return builtin_algebra(self.equation)

    @property
    def label(self) -> str:
        parts = [f"exp({e:g}V{i})" for i, e in reversed(self.steps) if e != 0]
        return "*".join(parts) if parts else "id"

    def is_identity(self) -> bool:
        return all(e == 0 for _, e in self.steps)

    def apply(self, x, t, u):
        if self.closed_form is not None:
            return self.closed_form(x, t, u)
        alg = self.algebra
        for i, e in self.steps:
            x, t, u = alg[i - 1].flow(x, t, u, e)
        return x, t, u

    def inverse(self) -> "GroupElement":
        return GroupElement(self.equation, tuple((i, -e) for i, e in reversed(self.steps)))

    def then(self, other: "GroupElement") -> "GroupElement":
        """``other`` applied after ``self``."""
        if other.equation != self.equation:
            raise ConfigError("cannot compose elements of different groups")
        return GroupElement(self.equation, self.steps + other.steps)

    def sequential(self) -> "GroupElement":
        """Same element without the closed-form shortcut."""
        return GroupElement(self.equation, self.steps)


def group_element(tag: str, params: Sequence[float]) -> GroupElement:
    """Element ``exp(e_l V_l) ... exp(e_1 V_1)`` of the equation's group.

    For the heat equation the six-parameter composite is evaluated in closed
    form.  Fewer parameters than generators are padded with zeros.
    """
    alg = builtin_algebra(tag)
    params = [float(p) for p in params]
    if len(params) > alg.dim:
        raise ConfigError(f"{tag} group has {alg.dim} parameters, got {len(params)}")
    params += [0.0] * (alg.dim - len(params))
    steps = tuple((i + 1, e) for i, e in enumerate(params))
    closed = _heat_composite(params) if tag == "heat" else None
    return GroupElement(tag, steps, closed)


def one_parameter(tag: str, generator, eps: float) -> GroupElement:
    alg = builtin_algebra(tag)
    if isinstance(generator, str):
        generator = [v.label for v in alg].index(generator) + 1
    if not 1 <= generator <= alg.dim:
        raise ConfigError(f"generator {generator} out of range for {tag}")
    return GroupElement(tag, ((int(generator), float(eps)),))


def apply_group(g: GroupElement, lat: MovingLattice) -> MovingLattice:
    """Map every lattice point and value by ``g``; re-checks the mesh."""
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        try:
            x, t, u = g.apply(lat.x, lat.t, lat.u)
        except FloatingPointError as exc:
            raise DomainError(f"group action failed: {exc}") from exc
    out = MovingLattice(lat.m.copy(), lat.n.copy(), np.asarray(x, float), np.asarray(t, float),
                        np.asarray(u, float), lat.equation)
    out.check_mesh()
    if out.t.shape[0] > 1 and np.any(np.diff(out.t, axis=0) <= 0):
        raise MeshError("time levels lost their ordering under the group action")
    return out


def sigma_tau_under_group(g: GroupElement, s: StencilView) -> np.ndarray:
    """Ratio ``sigma / tau`` of the transformed stencil."""
    gs = apply_to_stencil(g, s)
    return gs.sigma / gs.tau


def potential_map(direction: str, lat: MovingLattice) -> MovingLattice:
    """Pointwise ``u = exp(-w/2)`` (``potential_to_heat``) or its inverse."""
    out = lat.copy()
    if direction == "potential_to_heat":
        out.u = np.exp(-lat.u / 2)
        out.equation = "heat"
    elif direction == "heat_to_potential":
        if np.any(~(lat.u > 0)):
            raise DomainError("heat values must be positive to take the logarithm")
        out.u = -2 * np.log(lat.u)
        out.equation = "potential_burgers"
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return out
