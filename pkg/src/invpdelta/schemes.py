"""Invariant and standard difference schemes as residual triples.

A scheme is three (or five) stencil functions ``E1, E2, E3, ...`` whose joint
zero set defines both the solution values and the lattice.  ``E1`` is scaled
to carry the units of ``u_t``; the lattice equations are left dimensionless or
in units of length.  Invariant variants are composed from the invariant sets
only, never from expanded coordinate formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, SingularUpdateError
from .invariants import burgers_invariants, heat_invariants, kdv_invariants, potential_invariants
from .lattice import StencilView

__all__ = [
    "SchemeDef",
    "VARIANTS",
    "SCHEME_TABLE",
    "make_scheme",
    "residual",
    "scale",
    "solve_explicit_update",
    "available_schemes",
]

VARIANTS = (
    "invariant_explicit",
    "invariant_implicit",
    "adapted_explicit",
    "adapted_implicit",
    "standard_explicit",
    "standard_implicit",
    "wave_demo",
    "wave_demo_uniform",
)

_LEVELS = {6: ((0, 1), 1), 10: ((0, 1), 2), 9: ((-1, 0, 1), 1)}


@dataclass(frozen=True)
class SchemeDef:
    """Residual functions of one scheme plus what the solver needs to march it.

    ``projection`` pairs each residual index with the stencil slot that is
    solved for when a random stencil is pushed onto the scheme's zero set.
    ``lattice_rule(x, tau, u_lower, u_upper)`` gives the new-level abscissae of
    solution-adapted schemes.  ``transform`` / ``inverse`` map the unknown to the
    variable in which ``E1`` is affine (identity except for the potential form).
    """

    equation: str
    variant: str
    residuals: tuple
    width: int
    implicit: bool
    invariant: bool
    projection: tuple
    scale_fn: Callable = field(repr=False)
    lattice_rule: Callable | None = field(default=None, repr=False)
    transform: Callable | None = field(default=None, repr=False)
    inverse: Callable | None = field(default=None, repr=False)

    @property
    def name(self) -> str:
        return f"{self.equation}/{self.variant}"

    @property
    def levels(self):
        return _LEVELS[self.width][0]

    @property
    def reach(self) -> int:
        return _LEVELS[self.width][1]

    @property
    def explicit(self) -> bool:
        return not self.implicit

    @property
    def adapted(self) -> bool:
        return self.lattice_rule is not None

    def __call__(self, s: StencilView):
        return residual(self, s)


# ---------------------------------------------------------------------------
# scales
# ---------------------------------------------------------------------------


def _u_scale(s):
    umax = np.max(np.abs(np.real(s.u)), axis=(-2, -1))
    return np.maximum(1.0, umax / np.abs(np.real(s.tau)))


def _potential_scale(s):
    umax = np.max(np.exp(-np.real(s.u) / 2), axis=(-2, -1))
    return np.maximum(1.0, umax / np.abs(np.real(s.tau)))


def scale(scheme: SchemeDef, s: StencilView):
    """Tolerance scale ``max(1, |u|_inf / tau)`` per stencil."""
    return scheme.scale_fn(s)


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------


def _t_plus(s):
    return s.T_plus


def _ratio_lower(inv_fn):
    return lambda s: inv_fn(s)[1] - 1


def _ratio_upper(inv_fn):
    return lambda s: inv_fn(s)[2] - 1


def _sigma(s):
    return s.sigma


def _second_difference(s, level):
    """``2 (u_x^+ - u_x^-) / (h_+ + h_-)`` on the given level."""
    if level == 0:
        hp, hm = s.h_plus, s.h_minus
    else:
        hp, hm = s.hh_plus, s.hh_minus
    u, up, um = s.U(level, 0), s.U(level, 1), s.U(level, -1)
    return 2 * ((up - u) / hp - (u - um) / hm) / (hp + hm)


# heat ---------------------------------------------------------------------


def _heat_combination_explicit(I):
    return I[3] ** 1.5 * I[4] - I[3] - (I[5] + I[6]) * np.exp(I[3] / 4) + 2


def _heat_combination_implicit(I):
    return I[3] - np.sqrt(I[3]) / I[4] - (I[7] + I[8]) * np.exp(-I[3] / 4) + 2


def _heat_explicit_E1(s):
    I = heat_invariants(s)
    return s.U(0, 0) / (s.h_plus * s.hh_plus) * _heat_combination_explicit(I)


def _heat_implicit_E1(s):
    I = heat_invariants(s)
    return s.U(1, 0) / (s.h_plus * s.hh_plus) * _heat_combination_implicit(I)


def _heat_standard_explicit_E1(s):
    return (s.U(1, 0) - s.U(0, 0)) / s.tau - _second_difference(s, 0)


def _heat_standard_implicit_E1(s):
    return (s.U(1, 0) - s.U(0, 0)) / s.tau - _second_difference(s, 1)


# potential Burgers ----------------------------------------------------------


def _potential_explicit_E1(s):
    I = potential_invariants(s)
    return np.exp(-s.U(0, 0) / 2) / (s.h_plus * s.hh_plus) * _heat_combination_explicit(I)


def _potential_implicit_E1(s):
    I = potential_invariants(s)
    return np.exp(-s.U(1, 0) / 2) / (s.h_plus * s.hh_plus) * _heat_combination_implicit(I)


def _potential_standard_E1(level):
    def E1(s):
        hp = s.h_plus if level == 0 else s.hh_plus
        w, wp = s.U(level, 0), s.U(level, 1)
        return (s.U(1, 0) - s.U(0, 0)) / s.tau + 0.5 * ((wp - w) / hp) ** 2 - _second_difference(s, level)

    return E1


def _exp_half(w):
    return np.exp(-np.asarray(w) / 2)


def _log_half(z):
    z = np.asarray(z)
    if np.any(~(z > 0)):
        raise DomainError("potential update requires exp(-w/2) > 0")
    return -2 * np.log(z)


# Burgers ----------------------------------------------------------------------


def _burgers_explicit_E1(s):
    I = burgers_invariants(s)
    return ((2 * I[6] - I[7]) * I[3] - I[8] * I[6] - I[4]) / s.h_plus ** 3


def _burgers_implicit_E1(s):
    I = burgers_invariants(s)
    return ((I[6] - 2 * I[7]) * I[3] - I[9] * I[7] - I[5]) / s.hh_plus ** 3


def _burgers_adapted_explicit_E1(s):
    I = burgers_invariants(s)
    return (-I[7] * I[3] - I[4]) / (s.h_plus * s.hh_plus ** 2)


def _burgers_adapted_implicit_E1(s):
    I = burgers_invariants(s)
    return (I[6] * I[3] - I[5]) / (s.h_plus ** 2 * s.hh_plus)


def _burgers_standard_E1(level):
    def E1(s):
        hp = s.h_plus if level == 0 else s.hh_plus
        v, vp = s.U(level, 0), s.U(level, 1)
        return (s.U(1, 0) - s.U(0, 0)) / s.tau + v * (vp - v) / hp - _second_difference(s, level)

    return E1


# KdV ------------------------------------------------------------------------------


def _kdv_norm(s):
    return s.h_plus ** 2 * s.tau


def _kdv_explicit_E1(s):
    I = kdv_invariants(s)
    rhs = I[9] * I[8] * (I[12] + I[11]) / 2 + 0.5 * (I[13] - I[12] - I[11] + I[10])
    return (I[14] - rhs) / _kdv_norm(s)


def _kdv_implicit_E1(s):
    I = kdv_invariants(s)
    rhs = ((I[9] + I[14] / I[8]) * I[8] * (I[17] + I[16]) / 2
           + 0.5 * (I[18] - I[17] - I[16] + I[15]) * I[7] ** 2)
    return (I[14] - rhs) / _kdv_norm(s)


def _kdv_adapted_explicit_E1(s):
    I = kdv_invariants(s)
    return (I[14] - 0.5 * (I[13] - I[12] - I[11] + I[10])) / _kdv_norm(s)


def _kdv_adapted_implicit_E1(s):
    I = kdv_invariants(s)
    return (I[14] - 0.5 * (I[18] - I[17] - I[16] + I[15]) * I[7] ** 2) / _kdv_norm(s)


def _kdv_standard_E1(level):
    def E1(s):
        h = s.h_plus if level == 0 else s.hh_plus
        u = [s.U(level, k) for k in range(-2, 3)]
        adv = u[2] * (u[3] - u[1]) / (2 * h)
        disp = (u[4] - 2 * u[3] + 2 * u[1] - u[0]) / (2 * h ** 3)
        return (s.U(1, 0) - s.U(0, 0)) / s.tau - adv - disp

    return E1


def _kdv_I9(s):
    return kdv_invariants(s)[9]


def _kdv_I9_implicit(s):
    I = kdv_invariants(s)
    return I[9] + I[14] / I[8]


# wave demo ---------------------------------------------------------------------


def _wave_E1(s):
    up = (s.U(1, 1) - s.U(1, 0)) / (s.X(1, 1) - s.X(1, 0))
    lo = (s.U(0, 1) - s.U(0, 0)) / (s.X(0, 1) - s.X(0, 0))
    return (up - lo) / (s.T(1, 0) - s.T(0, 0))


def _wave_E3(s):
    return s.X(1, 0) - s.X(0, 0)


def _wave_E4(s):
    return s.T(1, 0) - 2 * s.T(0, 0) + s.T(-1, 0)


def _wave_E5(s):
    return s.h_plus - s.h_minus


# ---------------------------------------------------------------------------
# table
# ---------------------------------------------------------------------------

_U0 = ("u", 1, 0)
_XM = ("x", 0, -1)
_XHM = ("x", 1, -1)
_XH = ("x", 1, 0)


def _entry(E1, E3, width, implicit, invariant, e3_slot, **extra):
    return dict(residuals=(E1, _t_plus, E3), width=width, implicit=implicit,
                invariant=invariant, projection=((0, _U0), (2, e3_slot)), **extra)


def _burgers_rule(sign, which):
    def rule(x, tau, u_lower, u_upper):
        u = u_lower if which == "lower" else u_upper
        return x + sign * tau * u

    return rule


def _table():
    heat = lambda s: heat_invariants(s)  # noqa: E731
    burg = lambda s: burgers_invariants(s)  # noqa: E731
    pot = lambda s: potential_invariants(s)  # noqa: E731
    kdv = lambda s: kdv_invariants(s)  # noqa: E731
    T = {}
    T["heat", "invariant_explicit"] = _entry(_heat_explicit_E1, _ratio_lower(heat), 6, False, True, _XM)
    T["heat", "invariant_implicit"] = _entry(_heat_implicit_E1, _ratio_upper(heat), 6, True, True, _XHM)
    T["heat", "standard_explicit"] = _entry(_heat_standard_explicit_E1, _sigma, 6, False, False, _XH)
    T["heat", "standard_implicit"] = _entry(_heat_standard_implicit_E1, _sigma, 6, True, False, _XH)

    pt = dict(transform=_exp_half, inverse=_log_half, scale_fn=_potential_scale)
    T["potential_burgers", "invariant_explicit"] = _entry(_potential_explicit_E1, _ratio_lower(pot), 6,
                                                          False, True, _XM, **pt)
    T["potential_burgers", "invariant_implicit"] = _entry(_potential_implicit_E1, _ratio_upper(pot), 6,
                                                          True, True, _XHM, **pt)
    T["potential_burgers", "standard_explicit"] = _entry(_potential_standard_E1(0), _sigma, 6, False,
                                                         False, _XH, scale_fn=_potential_scale)
    T["potential_burgers", "standard_implicit"] = _entry(_potential_standard_E1(1), _sigma, 6, True,
                                                         False, _XH, scale_fn=_potential_scale)

    T["burgers", "invariant_explicit"] = _entry(_burgers_explicit_E1, _ratio_lower(burg), 6, False, True, _XM)
    T["burgers", "invariant_implicit"] = _entry(_burgers_implicit_E1, _ratio_upper(burg), 6, True, True, _XHM)
    T["burgers", "adapted_explicit"] = _entry(_burgers_adapted_explicit_E1, lambda s: burg(s)[6], 6, False,
                                              True, _XH, lattice_rule=_burgers_rule(1, "lower"))
    T["burgers", "adapted_implicit"] = _entry(_burgers_adapted_implicit_E1, lambda s: burg(s)[7], 6, True,
                                              True, _XH, lattice_rule=_burgers_rule(1, "upper"))
    T["burgers", "standard_explicit"] = _entry(_burgers_standard_E1(0), _sigma, 6, False, False, _XH)
    T["burgers", "standard_implicit"] = _entry(_burgers_standard_E1(1), _sigma, 6, True, False, _XH)

    T["kdv", "invariant_explicit"] = _entry(_kdv_explicit_E1, _ratio_lower(kdv), 10, False, True, _XM)
    T["kdv", "invariant_implicit"] = _entry(_kdv_implicit_E1, lambda s: kdv(s)[4] - 1, 10, True, True, _XHM)
    T["kdv", "adapted_explicit"] = _entry(_kdv_adapted_explicit_E1, _kdv_I9, 10, False, True, _XH,
                                          lattice_rule=_burgers_rule(-1, "lower"))
    T["kdv", "adapted_implicit"] = _entry(_kdv_adapted_implicit_E1, _kdv_I9_implicit, 10, True, True, _XH,
                                          lattice_rule=_burgers_rule(-1, "upper"))
    T["kdv", "standard_explicit"] = _entry(_kdv_standard_E1(0), _sigma, 10, False, False, _XH)
    T["kdv", "standard_implicit"] = _entry(_kdv_standard_E1(1), _sigma, 10, True, False, _XH)

    T["wave_demo", "wave_demo"] = dict(
        residuals=(_wave_E1, _t_plus, _wave_E3), width=6, implicit=True, invariant=True,
        projection=((0, ("u", 1, 1)), (2, _XH)))
    T["wave_demo", "wave_demo_uniform"] = dict(
        residuals=(_wave_E1, _t_plus, _wave_E3, _wave_E4, _wave_E5), width=9, implicit=True,
        invariant=True,
        projection=((0, ("u", 1, 1)), (2, _XH), (3, ("t", 1, 0)), (4, _XM)))
    return T


SCHEME_TABLE = _table()


def available_schemes(tag: str | None = None) -> list:
    return [k for k in SCHEME_TABLE if tag is None or k[0] == tag]


def make_scheme(tag: str, variant: str) -> SchemeDef:
    """Scheme definition for an (equation, variant) pair."""
    try:
        spec = dict(SCHEME_TABLE[tag, variant])
    except KeyError:
        raise ConfigError(f"unsupported scheme {tag}/{variant}") from None
    spec.setdefault("scale_fn", _u_scale)
    return SchemeDef(equation=tag, variant=variant, **spec)


def residual(scheme: SchemeDef, s: StencilView) -> tuple:
    """Values ``(E1, E2, E3[, E4, E5])`` at ``s``."""
    if s.levels != scheme.levels or s.reach != scheme.reach:
        raise ConfigError(f"{scheme.name} needs a {scheme.width}-point stencil, got {s.width}")
    return tuple(E(s) for E in scheme.residuals)


def solve_explicit_update(scheme: SchemeDef, s: StencilView):
    """Value of ``u_hat`` (centre of the upper level) that makes ``E1`` vanish.

    ``E1`` is affine in the transformed unknown, so two trial evaluations
    determine it.  The whole upper row is set to the trial value, which keeps
    the invariant evaluators away from their zero-value domain limits.
    """
    if scheme.implicit:
        raise ConfigError(f"{scheme.name} is not explicit")
    inv = scheme.inverse or (lambda a: a)
    E1 = scheme.residuals[0]
    li = scheme.levels.index(1)

    def at(z):
        u = np.array(s.u, dtype=float)
        u[..., li, :] = inv(np.full(u.shape[:-2] + (1,), z))
        return E1(StencilView(s.x, s.t, u, s.levels))

    r1, r2 = at(1.0), at(2.0)
    a = r2 - r1
    if np.any(np.abs(a) <= 1e-14 * (np.abs(r1) + np.abs(r2))) or not np.all(np.isfinite(a)):
        raise SingularUpdateError(f"{scheme.name}: coefficient of the unknown vanishes")
    return inv(1.0 - r1 / a)
