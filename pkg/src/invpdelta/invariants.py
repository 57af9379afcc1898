"""Elementary difference invariants on flat-layer stencils.

Every evaluator accepts a (possibly batched, possibly complex) StencilView
and returns an :class:`InvariantSet` keyed ``I1 .. In``.  Domain checks look
at real parts only so the complex-step Jacobian in the solver can pass
through.
"""

from __future__ import annotations

from collections.abc import Mapping
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError
from .lattice import StencilView

__all__ = [
    "InvariantSet",
    "heat_invariants",
    "burgers_invariants",
    "potential_invariants",
    "kdv_invariants",
    "invariants",
    "invariant_functions",
    "INVARIANT_COUNTS",
    "STENCIL_WIDTH",
]

INVARIANT_COUNTS = {"heat": 8, "burgers": 9, "potential_burgers": 8, "kdv": 18}
STENCIL_WIDTH = {"heat": 6, "burgers": 6, "potential_burgers": 6, "kdv": 10}


class InvariantSet(Mapping):
    """Ordered named invariant values ``I1 .. In``."""

    def __init__(self, equation: str, values):
        self.equation = equation
        self._values = list(values)
        self._names = [f"I{k}" for k in range(1, len(self._values) + 1)]

    def __getitem__(self, key):
        if isinstance(key, int):
            return self._values[key - 1]
        return self._values[self._names.index(key)]

    def __iter__(self):
        return iter(self._names)

    def __len__(self):
        return len(self._values)

    @property
    def names(self):
        return list(self._names)

    def as_array(self) -> np.ndarray:
        """Values stacked on the last axis."""
        return np.stack(np.broadcast_arrays(*self._values), axis=-1)

    def __repr__(self):
        body = ", ".join(f"{k}={np.asarray(v)!r}" for k, v in zip(self._names, self._values))
        return f"InvariantSet({self.equation}: {body})"


def _require_positive(**values):
    for name, v in values.items():
        if np.any(~(np.real(v) > 0)):
            raise DomainError(f"{name} must be positive")


def _require_nonzero(**values):
    for name, v in values.items():
        if np.any(np.real(v) == 0):
            raise DomainError(f"{name} must be nonzero")


def _flat_steps(s: StencilView):
    hp, hm, Hp, Hm, sig, tau = s.h_plus, s.h_minus, s.hh_plus, s.hh_minus, s.sigma, s.tau
    _require_positive(tau=tau, h_plus=hp, h_minus=hm, hh_plus=Hp, hh_minus=Hm)
    return hp, hm, Hp, Hm, sig, tau


def _heat_exponents(s):
    hp, hm, Hp, Hm, sig, tau = _flat_steps(s)
    q = 4 * tau
    return dict(
        hp=hp, hm=hm, Hp=Hp, Hm=Hm, sig=sig, tau=tau,
        a4=sig * sig / q,
        a5=hp * (2 * sig - hp) / q,
        a6=-hm * (2 * sig + hm) / q,
        a7=Hp * (2 * sig + Hp) / q,
        a8=-Hm * (2 * sig - Hm) / q,
    )


def heat_invariants(s: StencilView) -> InvariantSet:
    """Eight invariants of the heat group on the 14-dimensional flat-layer space."""
    e = _heat_exponents(s)
    u, up, um = s.U(0, 0), s.U(0, 1), s.U(0, -1)
    U, Up, Um = s.U(1, 0), s.U(1, 1), s.U(1, -1)
    _require_nonzero(u=u, u_hat=U)
    hp, Hp, tau = e["hp"], e["Hp"], e["tau"]
    return InvariantSet("heat", [
        hp / e["hm"],
        Hp / e["Hm"],
        hp * Hp / tau,
        np.sqrt(tau) / hp * (U / u) * np.exp(e["a4"]),
        up / u * np.exp(e["a5"]),
        um / u * np.exp(e["a6"]),
        Up / U * np.exp(e["a7"]),
        Um / U * np.exp(e["a8"]),
    ])


def potential_invariants(s: StencilView) -> InvariantSet:
    """Heat invariants rewritten for ``u = exp(-w/2)``; the u-slots hold w."""
    e = _heat_exponents(s)
    w, wp, wm = s.U(0, 0), s.U(0, 1), s.U(0, -1)
    W, Wp, Wm = s.U(1, 0), s.U(1, 1), s.U(1, -1)
    hp, Hp, tau = e["hp"], e["Hp"], e["tau"]
    return InvariantSet("potential_burgers", [
        hp / e["hm"],
        Hp / e["Hm"],
        hp * Hp / tau,
        np.sqrt(tau) / hp * np.exp(-(W - w) / 2 + e["a4"]),
        np.exp(-(wp - w) / 2 + e["a5"]),
        np.exp((w - wm) / 2 + e["a6"]),
        np.exp(-(Wp - W) / 2 + e["a7"]),
        np.exp((W - Wm) / 2 + e["a8"]),
    ])


def burgers_invariants(s: StencilView) -> InvariantSet:
    """Nine invariants of the Burgers group (u-slots hold v)."""
    hp, hm, Hp, Hm, sig, tau = _flat_steps(s)
    v, vp, vm = s.U(0, 0), s.U(0, 1), s.U(0, -1)
    V, Vp, Vm = s.U(1, 0), s.U(1, 1), s.U(1, -1)
    vxp, vxm = (vp - v) / hp, (v - vm) / hm
    Vxp, Vxm = (Vp - V) / Hp, (V - Vm) / Hm
    return InvariantSet("burgers", [
        hp / hm,
        Hp / Hm,
        hp * Hp / tau,
        hp * hm * (vxp - vxm),
        Hp * Hm * (Vxp - Vxm),
        hp * (sig / tau - v),
        Hp * (sig / tau - V),
        hp * hp * (vxp + 1 / tau),
        Hp * Hp * (Vxp - 1 / tau),
    ])


def kdv_invariants(s: StencilView) -> InvariantSet:
    """Eighteen invariants of the KdV group on the 10-point flat-layer stencil."""
    if s.reach < 2:
        raise DomainError("KdV invariants need a 10-point stencil")
    hp, hm, Hp, Hm, sig, tau = _flat_steps(s)
    hpp, hmm, Hpp, Hmm = s.h_plusplus, s.h_minusminus, s.hh_plusplus, s.hh_minusminus
    _require_positive(h_plusplus=hpp, h_minusminus=hmm, hh_plusplus=Hpp, hh_minusminus=Hmm)
    u = [s.U(0, k) for k in range(-2, 3)]
    U = [s.U(1, k) for k in range(-2, 3)]
    lower = [(u[1] - u[0]) / hmm, (u[2] - u[1]) / hm, (u[3] - u[2]) / hp, (u[4] - u[3]) / hpp]
    upper = [(U[1] - U[0]) / Hmm, (U[2] - U[1]) / Hm, (U[3] - U[2]) / Hp, (U[4] - U[3]) / Hpp]
    return InvariantSet("kdv", [
        hp / hm,
        hpp / hp,
        hm / hmm,
        Hp / Hm,
        Hpp / Hp,
        Hm / Hmm,
        hp / Hp,
        hp ** 3 / tau,
        (sig + tau * u[2]) / hp,
        *(tau * q for q in lower),
        hp * hp * (U[2] - u[2]),
        *(tau * q for q in upper),
    ])


_EVALUATORS = {
    "heat": heat_invariants,
    "burgers": burgers_invariants,
    "potential_burgers": potential_invariants,
    "kdv": kdv_invariants,
}


def invariants(tag: str, s: StencilView) -> InvariantSet:
    try:
        fn = _EVALUATORS[tag]
    except KeyError:
        raise ConfigError(f"no invariant set for {tag!r}") from None
    return fn(s)


def invariant_functions(tag: str) -> list[Callable]:
    """One stencil function per invariant, for defect checks."""
    if tag not in _EVALUATORS:
        raise ConfigError(f"no invariant set for {tag!r}")
    fn = _EVALUATORS[tag]
    return [(lambda s, k=k: fn(s)[k]) for k in range(1, INVARIANT_COUNTS[tag] + 1)]
