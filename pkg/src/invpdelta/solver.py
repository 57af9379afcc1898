"""Time marching of difference schemes on evolving lattices.

Explicit variants update each interior node in closed form.  Implicit variants
solve one nonlinear system per level by damped Newton; the Jacobian is banded
(bandwidth equal to the stencil reach) and is assembled column-colour by
column-colour with the complex step.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, MeshError, SolverError
from .lattice import MeshFunctions, MovingLattice, stencils_from_rows
from .schemes import SchemeDef, make_scheme, solve_explicit_update

__all__ = ["NewtonOptions", "SimConfig", "Trajectory", "run", "monitor_sigma_tau", "BOUNDARY_POLICIES"]

BOUNDARY_POLICIES = ("exact", "copy", "linear")
COMPLEX_STEP = 1e-30


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-12
    max_iter: int = 50
    damping: bool = True
    max_halvings: int = 8

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("newton.tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("newton.max_iter must be at least 1")


@dataclass
class SimConfig:
    """Everything needed to march one scheme.

    ``initial`` is either a callable ``u(x, t)`` or the tabulated values on row
    ``m0``.  ``exact`` supplies Dirichlet data for the ``exact`` boundary
    policy; for adapted schemes it is also used to locate the moving boundary
    nodes.
    """

    scheme: SchemeDef
    mesh: MeshFunctions
    initial: Callable | np.ndarray
    n_range: tuple
    steps: int
    m0: int = 0
    boundary: str = "exact"
    exact: Callable | None = None
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    def __post_init__(self):
        if isinstance(self.scheme, (tuple, list)):
            self.scheme = make_scheme(*self.scheme)
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigError(f"unknown boundary policy {self.boundary!r}")
        if self.boundary == "exact" and self.exact is None:
            raise ConfigError("boundary policy 'exact' needs an exact solution")
        if self.scheme.width == 9:
            raise ConfigError("three-level schemes are not marched by the solver")
        if isinstance(self.newton, dict):
            self.newton = NewtonOptions(**self.newton)


@dataclass
class Trajectory:
    lattice: MovingLattice
    diagnostics: list
    scheme: str = ""

    def report(self) -> dict:
        return dict(scheme=self.scheme, levels=self.diagnostics,
                    sigma_tau_max=monitor_sigma_tau(self))

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _row_scale(u, tau, scheme):
    u = np.real(u)
    umax = np.max(np.exp(-u / 2)) if scheme.equation == "potential_burgers" else np.max(np.abs(u))
    return max(1.0, umax / tau)


def _secant(f, x0, x1, tol=1e-15, max_iter=60):
    f0, f1 = f(x0), f(x1)
    for _ in range(max_iter):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x0, f0 = x1, f1
        x1, f1 = x2, f(x2)
        if abs(x1 - x0) <= tol * (1 + abs(x1)):
            return x1
    if abs(f1) > 1e-12 * (1 + abs(x1)):
        raise SolverError("moving boundary node did not converge")
    return x1


class _Level:
    """State for advancing from one row to the next."""

    def __init__(self, cfg: SimConfig, x, t, u, t_new, x_new_mesh):
        self.cfg = cfg
        self.sc = cfg.scheme
        self.r = self.sc.reach
        self.x, self.t, self.u = x, t, u
        self.t_new = t_new
        self.tau = t_new - t[0]
        self.x_mesh = x_new_mesh
        N = len(x)
        self.left = np.arange(self.r)
        self.right = np.arange(N - self.r, N)
        self.inner = np.arange(self.r, N - self.r)

    # boundary handling --------------------------------------------------------
    def _adapted_x(self, u_new):
        return self.sc.lattice_rule(self.x, self.tau, self.u, u_new)

    def boundary_nodes(self):
        """Fixed boundary values and abscissae (exact / copy policies)."""
        cfg, sc = self.cfg, self.sc
        idx = np.concatenate([self.left, self.right])
        if cfg.boundary == "copy":
            ub = self.u[idx].copy()
            xb = self.x_mesh[idx] if not sc.adapted else self.sc.lattice_rule(
                self.x[idx], self.tau, self.u[idx], ub)
            return idx, xb, ub
        if cfg.boundary == "linear":
            return idx, None, None
        if not sc.adapted:
            xb = self.x_mesh[idx]
            return idx, xb, np.asarray(cfg.exact(xb, self.t_new), dtype=float)
        if sc.explicit:
            xb = sc.lattice_rule(self.x[idx], self.tau, self.u[idx], None)
            return idx, xb, np.asarray(cfg.exact(xb, self.t_new), dtype=float)
        xb = np.empty(len(idx))
        for k, j in enumerate(idx):
            def g(xh, j=j):
                return xh - float(sc.lattice_rule(self.x[j], self.tau, self.u[j],
                                                  cfg.exact(xh, self.t_new)))
            xb[k] = _secant(g, self.x[j], self.x[j] + 1e-3 * (1 + abs(self.x[j])))
        return idx, xb, np.asarray(cfg.exact(xb, self.t_new), dtype=float)

    def fill(self, u_inner):
        """Full new row (x, u) from interior values, applying the boundary policy."""
        N = len(self.x)
        u = np.zeros(N, dtype=np.result_type(u_inner, float))
        u[self.inner] = u_inner
        x = self._x_new(u)
        if self.cfg.boundary != "linear":
            u[self.bidx] = self.ub
            x[self.bidx] = self.xb
            return x, u
        if self.sc.adapted and self.sc.implicit:
            # boundary abscissae follow the interior spacing
            for j in self.left[::-1]:
                x[j] = 2 * x[j + 1] - x[j + 2]
            for j in self.right:
                x[j] = 2 * x[j - 1] - x[j - 2]
        for j in self.left[::-1]:
            u[j] = u[j + 1] + (u[j + 2] - u[j + 1]) * (x[j] - x[j + 1]) / (x[j + 2] - x[j + 1])
        for j in self.right:
            u[j] = u[j - 1] + (u[j - 1] - u[j - 2]) * (x[j] - x[j - 1]) / (x[j - 1] - x[j - 2])
        return x, u

    def _x_new(self, u):
        if not self.sc.adapted:
            return np.array(self.x_mesh, dtype=np.result_type(u, float))
        if self.sc.explicit:
            return np.array(self._adapted_x(None), dtype=float)
        return self._adapted_x(u)

    def stencils(self, x_new, u_new):
        xs = [self.x, x_new]
        ts = [self.t, np.full(len(self.x), self.t_new)]
        us = [self.u, u_new]
        return stencils_from_rows(xs, ts, us, self.r, self.sc.levels)

    def residual(self, u_inner):
        x, u = self.fill(u_inner)
        return self.sc.residuals[0](self.stencils(x, u))


def _banded_jacobian(R, u, lev: _Level):
    r = lev.r
    n = len(u)
    width = 2 * r + 1
    ab = np.zeros((width, n))
    cols = np.arange(n)
    for c in range(width):
        mask = cols % width == c
        up = u.astype(complex)
        up[mask] += 1j * COMPLEX_STEP
        d = R(up).imag / COMPLEX_STEP
        for j in cols[mask]:
            lo, hi = max(0, j - r), min(n, j + r + 1)
            ab[r + np.arange(lo, hi) - j, j] = d[lo:hi]
    return ab


def _newton(lev: _Level, level_index: int, opts: NewtonOptions):
    u = lev.u[lev.inner].astype(float)
    r = lev.r
    scale = _row_scale(lev.u, lev.tau, lev.sc)
    R = lev.residual
    res = np.real(R(u))
    norm = np.max(np.abs(res))
    it = 0
    while norm > opts.tol * scale:
        if it >= opts.max_iter:
            raise SolverError(f"Newton did not converge (|R| = {norm:.3g})", level=level_index)
        ab = _banded_jacobian(R, u, lev)
        try:
            du = solve_banded((r, r), ab, -res)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"singular Jacobian: {exc}", level=level_index) from exc
        if not np.all(np.isfinite(du)):
            raise SolverError("singular Jacobian", level=level_index)
        lam = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = u + lam * du
            try:
                tres = np.real(R(trial))
                tnorm = np.max(np.abs(tres))
            except (FloatingPointError, ArithmeticError):
                tnorm = np.inf
            if not opts.damping or tnorm < norm:
                break
            lam /= 2
        u, res, norm = trial, tres, tnorm
        it += 1
        if not np.isfinite(norm):
            raise SolverError("Newton iterate left the domain", level=level_index)
    return u, it, norm


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def run(cfg: SimConfig) -> Trajectory:
    """March ``cfg.steps`` levels starting from row ``m0``."""
    sc = cfg.scheme
    n = np.arange(cfg.n_range[0], cfg.n_range[1] + 1)
    m = np.arange(cfg.m0, cfg.m0 + cfg.steps + 1)
    if len(n) < 2 * sc.reach + 1:
        raise ConfigError("spatial window smaller than the stencil")
    cfg.mesh.validate(m)
    t_rows = np.asarray(cfg.mesh.gamma(m), dtype=float)
    M, N = len(m), len(n)
    X = np.full((M, N), np.nan)
    T = np.repeat(t_rows[:, None], N, axis=1)
    U = np.full((M, N), np.nan)
    X[0] = cfg.mesh.hstep(m[0]) * n + cfg.mesh.xorigin(m[0])
    if callable(cfg.initial):
        U[0] = cfg.initial(X[0], t_rows[0])
    else:
        U[0] = np.asarray(cfg.initial, dtype=float)
    diagnostics = []
    for k in range(cfg.steps):
        mesh_x = cfg.mesh.hstep(m[k + 1]) * n + cfg.mesh.xorigin(m[k + 1])
        lev = _Level(cfg, X[k], T[k], U[k], t_rows[k + 1], mesh_x)
        lev.bidx, lev.xb, lev.ub = lev.boundary_nodes()
        iters = 0
        if sc.explicit:
            x_new, _ = lev.fill(np.zeros(len(lev.inner)))
            if np.any(np.diff(np.real(x_new)) <= 0):
                raise MeshError(f"mesh tangled at level m={m[k + 1]}")
            s = lev.stencils(x_new, np.zeros(N))
            u_inner = solve_explicit_update(sc, s)
        else:
            u_inner, iters, _ = _newton(lev, int(m[k + 1]), cfg.newton)
        x_new, u_new = lev.fill(u_inner)
        x_new, u_new = np.real(x_new), np.real(u_new)
        if np.any(np.diff(x_new) <= 0):
            raise MeshError(f"mesh tangled at level m={m[k + 1]}")
        X[k + 1], U[k + 1] = x_new, u_new
        s = lev.stencils(x_new, u_new)
        e1 = np.abs(sc.residuals[0](s))
        sig = np.abs(x_new - X[k]) / lev.tau
        diagnostics.append(dict(m=int(m[k + 1]), t=float(t_rows[k + 1]),
                                max_residual=float(np.max(e1)),
                                scale=_row_scale(U[k], lev.tau, sc),
                                newton_iters=int(iters),
                                sigma_tau_max=float(np.max(sig))))
    lat = MovingLattice(m, n, X, T, U, sc.equation)
    return Trajectory(lat, diagnostics, sc.name)


def monitor_sigma_tau(traj) -> float:
    """Largest ``|sigma / tau|`` over consecutive rows of a trajectory or lattice."""
    lat = traj.lattice if isinstance(traj, Trajectory) else traj
    if lat.x.shape[0] < 2:
        return 0.0
    sigma = np.diff(lat.x, axis=0)
    tau = np.diff(lat.t, axis=0)
    return float(np.max(np.abs(sigma / tau)))


def warn_if_unbounded(ratios, growth: float = 1.5) -> bool:
    """Flag a refinement sequence whose ``max |sigma/tau|`` keeps growing."""
    ratios = np.asarray(ratios, dtype=float)
    if len(ratios) >= 3 and np.all(ratios[1:] > growth * ratios[:-1]) and ratios[-1] > 0:
        warnings.warn("sigma/tau grows under refinement; the continuous limit may not exist",
                      RuntimeWarning, stacklevel=2)
        return True
    return False
