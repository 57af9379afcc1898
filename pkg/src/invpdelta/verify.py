"""Verification harness: invariance suites, residual reports, convergence and orbit tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvPDeltaError, NumericError
from .lattice import MeshFunctions, MovingLattice, StencilView, random_stencils, stencils_from_rows
from .schemes import SchemeDef, make_scheme, residual, scale
from .symmetry import SymmetryAlgebra, builtin_algebra, invariance_defect

__all__ = [
    "GeneratorStats",
    "InvarianceReport",
    "ConvergenceLevel",
    "ConvergenceReport",
    "project_onto_scheme",
    "sample_on_shell",
    "invariance_suite",
    "residual_report",
    "lattice_residuals",
    "convergence_study",
    "orthogonal_refinements",
    "exact_refinements",
    "Refinement",
    "OrbitResult",
    "orbit_test",
    "INVARIANCE_TOL",
]

INVARIANCE_TOL = 1e-7
COMPLEX_STEP = 1e-30

# u-slot sampling ranges per equation; the potential form needs moderate w so
# that exp(-w/2) stays comparable across the stencil
_SAMPLE_U = {
    "heat": (0.5, 2.0),
    "burgers": (-0.5, 0.5),
    "potential_burgers": (-0.3, 0.3),
    "kdv": (-0.5, 0.5),
    "wave_demo": (-1.0, 1.0),
}


# ---------------------------------------------------------------------------
# projection onto the scheme
# ---------------------------------------------------------------------------


def project_onto_scheme(scheme: SchemeDef, s: StencilView, max_iter: int = 40) -> StencilView:
    """Newton-solve the scheme's projected residuals for their designated slots.

    ``s`` is a single (unbatched) stencil.  The Jacobian is taken by complex
    step.  Raises :class:`NumericError` if the iteration does not settle.
    """
    pairs = scheme.projection
    idx = [s.slot_index(slot) for _, slot in pairs]
    which = [i for i, _ in pairs]
    c = s.coords().astype(complex)
    k = len(pairs)

    def R(cc):
        vals = residual(scheme, StencilView.from_coords(cc, s.levels))
        return np.array([vals[i] for i in which], dtype=complex)

    for _ in range(max_iter):
        r = R(c).real
        J = np.empty((k, k))
        for j, pos in enumerate(idx):
            cj = c.copy()
            cj[pos] += 1j * COMPLEX_STEP
            J[:, j] = R(cj).imag / COMPLEX_STEP
        try:
            dz = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular projection Jacobian: {exc}") from exc
        if not np.all(np.isfinite(dz)):
            raise NumericError("projection diverged")
        z = np.array([c[p].real for p in idx])
        for j, pos in enumerate(idx):
            c[pos] = z[j] + dz[j]
        if np.all(np.abs(dz) <= 1e-15 * (1 + np.abs(z))):
            break
    else:
        raise NumericError("projection did not converge")
    out = StencilView.from_coords(c.real, s.levels)
    final = np.array([residual(scheme, out)[i] for i in which])
    if not np.all(np.isfinite(final)):
        raise NumericError("projection left non-finite residuals")
    return out


def sample_on_shell(scheme: SchemeDef, n_samples: int, seed=0, min_step: float = 0.1,
                    max_attempts: int | None = None):
    """``n_samples`` random generic stencils pushed onto ``E = 0``.

    Draws continue until enough projections succeed; stencils whose projected
    steps fall below ``min_step`` count as skipped, since near-coincident
    nodes only measure round-off.  Returns ``(batch, n_skipped)``.
    """
    rng = np.random.default_rng(seed)
    max_attempts = max_attempts or 10 * n_samples
    kept, skipped, drawn = [], 0, 0
    while len(kept) < n_samples and drawn < max_attempts:
        chunk = n_samples - len(kept)
        raw = random_stencils(chunk, scheme.width, rng, u_range=_SAMPLE_U[scheme.equation])
        drawn += chunk
        for b in range(chunk):
            try:
                p = project_onto_scheme(scheme, raw[b])
                if np.any(np.diff(p.x, axis=-1) < min_step):
                    raise NumericError("projection left a degenerate stencil")
                kept.append(p)
            except InvPDeltaError:
                skipped += 1
    if len(kept) < n_samples:
        raise NumericError(f"only {len(kept)} of {n_samples} stencils could be projected onto "
                           f"{scheme.name}")
    batch = StencilView(np.stack([p.x for p in kept]), np.stack([p.t for p in kept]),
                        np.stack([p.u for p in kept]), scheme.levels)
    return batch, skipped


# ---------------------------------------------------------------------------
# invariance suite
# ---------------------------------------------------------------------------


@dataclass
class GeneratorStats:
    generator: str
    max_defect: float
    mean_defect: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(generator=self.generator, max_defect=self.max_defect,
                    mean_defect=self.mean_defect, **{"pass": self.passed})


@dataclass
class InvarianceReport:
    scheme: str
    n_samples: int
    n_skipped: int
    seed: int
    tol: float
    generators: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.generators)

    @property
    def failures(self) -> list:
        return [g.generator for g in self.generators if not g.passed]

    def __getitem__(self, label) -> GeneratorStats:
        for g in self.generators:
            if g.generator == label:
                return g
        raise KeyError(label)

    def to_dict(self) -> dict:
        return dict(scheme=self.scheme, n_samples=self.n_samples, n_skipped=self.n_skipped,
                    seed=self.seed, tol=self.tol, passed=self.passed,
                    generators=[g.to_dict() for g in self.generators])


def invariance_suite(scheme: SchemeDef, algebra: SymmetryAlgebra | None = None, n_samples: int = 200,
                     seed=1, tol: float = INVARIANCE_TOL) -> InvarianceReport:
    """On-manifold defect of every residual under every generator, scaled per stencil."""
    if algebra is None:
        algebra = builtin_algebra(scheme.equation)
    s, skipped = sample_on_shell(scheme, n_samples, seed)
    sc = scale(scheme, s)
    report = InvarianceReport(scheme.name, n_samples, skipped, seed, tol)
    for v in algebra:
        worst = np.zeros(len(s))
        for E in scheme.residuals:
            d = np.abs(invariance_defect(v, E, s, mode="on_manifold")) / sc
            worst = np.maximum(worst, d)
        report.generators.append(GeneratorStats(v.label, float(worst.max()), float(worst.mean()),
                                                bool(worst.max() <= tol)))
    return report


# ---------------------------------------------------------------------------
# residuals on lattices
# ---------------------------------------------------------------------------


def lattice_residuals(scheme: SchemeDef, lat: MovingLattice, m_levels=None):
    """Scaled residual components on every interior stencil of ``lat``.

    Returns ``(values, scales)`` where ``values`` has shape
    ``(n_components, n_stencils)``.
    """
    lo = -min(scheme.levels)
    hi = len(lat.m) - max(scheme.levels)
    rows = range(lo, hi) if m_levels is None else [lat.row(m) for m in m_levels]
    vals, scales = [], []
    for r in rows:
        xs = [lat.x[r + lv] for lv in scheme.levels]
        ts = [lat.t[r + lv] for lv in scheme.levels]
        us = [lat.u[r + lv] for lv in scheme.levels]
        s = stencils_from_rows(xs, ts, us, scheme.reach, scheme.levels)
        vals.append(np.array([np.broadcast_to(e, s.batch_shape) for e in residual(scheme, s)]))
        scales.append(scale(scheme, s))
    if not vals:
        raise NumericError("lattice too small for the scheme stencil")
    return np.concatenate(vals, axis=1), np.concatenate(scales)


def residual_report(scheme: SchemeDef, lat: MovingLattice) -> dict:
    """Max and mean absolute residual per component, plus the scaled maximum of E1."""
    vals, sc = lattice_residuals(scheme, lat)
    comps = {}
    for a, row in enumerate(vals, start=1):
        comps[f"E{a}"] = dict(max=float(np.max(np.abs(row))), mean=float(np.mean(np.abs(row))))
    return dict(scheme=scheme.name, n_stencils=int(vals.shape[1]), components=comps,
                max_scaled_E1=float(np.max(np.abs(vals[0]) / sc)), scale_max=float(np.max(sc)))


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Refinement:
    """One level of a refinement study: mesh, spatial window and number of steps."""

    mesh: MeshFunctions
    n_range: tuple
    steps: int
    m0: int = 0

    @property
    def tau(self) -> float:
        g = self.mesh.gamma(np.array([self.m0, self.m0 + 1]))
        return float(g[1] - g[0])

    @property
    def h(self) -> float:
        """Smallest spatial step on the initial row."""
        return float(np.min(self.mesh.hstep(np.array([self.m0]))))


@dataclass
class ConvergenceLevel:
    tau: float
    h: float
    err_max: float
    err_l2: float
    order: float | None
    sigma_tau_max: float
    scale: float = 1.0

    def to_dict(self) -> dict:
        return dict(tau=self.tau, h=self.h, err_max=self.err_max, err_l2=self.err_l2,
                    order=self.order, sigma_tau_max=self.sigma_tau_max, scale=self.scale)


@dataclass
class ConvergenceReport:
    scheme: str
    reference: str
    levels: list

    def __post_init__(self):
        taus = [lv.tau for lv in self.levels]
        hs = [lv.h for lv in self.levels]
        if np.any(np.diff(taus) >= 0) or np.any(np.diff(hs) >= 0):
            raise ValueError("refinement levels must decrease strictly in tau and h")

    @property
    def orders(self) -> list:
        return [lv.order for lv in self.levels[1:]]

    @property
    def errors(self) -> list:
        return [lv.err_max for lv in self.levels]

    def to_dict(self) -> dict:
        return dict(scheme=self.scheme, reference=self.reference,
                    levels=[lv.to_dict() for lv in self.levels])


def orthogonal_refinements(levels: int = 4, h0: float = 0.1, ratio: float = 0.4,
                           x_span=(0.0, 1.0), t_end: float = 0.1, t0: float = 0.0) -> list:
    """Orthogonal uniform meshes with ``h = h0 / 2^k`` and ``tau = ratio h^2``."""
    out = []
    for k in range(levels):
        h = h0 / 2 ** k
        tau = ratio * h * h
        steps = int(round(t_end / tau))
        n_hi = int(round((x_span[1] - x_span[0]) / h))
        out.append(Refinement(MeshFunctions.uniform(h=h, x0=x_span[0], tau=tau, t0=t0), (0, n_hi), steps))
    return out


def exact_refinements(entry, levels: int = 3) -> list:
    """Refinements of a catalog entry's own preset: ``h / 2^k`` and ``tau / 4^k``.

    The window and final time stay fixed, so the number of columns doubles and
    the number of steps quadruples per level.
    """
    mesh = entry.mesh
    if mesh is None or mesh.name not in ("uniform", "fundamental", "galilean"):
        raise ValueError(f"{entry.name} has no preset mesh to refine")
    m_lo, m_hi = entry.m_range
    n_lo, n_hi = entry.n_range
    out = []
    for k in range(levels):
        p = dict(mesh.params)
        p["h"] = p["h"] / 2 ** k
        p["tau"] = p["tau"] / 4 ** k
        refined = MeshFunctions.preset(mesh.name, **p)
        # keep t0 and the starting row fixed
        rows = (m_hi - m_lo) * 4 ** k
        out.append(Refinement(refined, (n_lo * 2 ** k, n_hi * 2 ** k), rows, m_lo * 4 ** k))
    return out


def convergence_study(scheme: SchemeDef, reference, refinements, boundary: str = "exact",
                      name: str | None = None) -> ConvergenceReport:
    """Errors of ``scheme`` against ``reference`` over a refinement sequence.

    ``reference`` is an ExactSolution or a callable ``u(x, t)``; it supplies
    the initial row and the boundary data.
    """
    from .solver import SimConfig, _row_scale, monitor_sigma_tau, run, warn_if_unbounded

    u_ref = getattr(reference, "u", reference)
    label = name or getattr(reference, "name", getattr(reference, "__name__", "reference"))
    levels, prev = [], None
    ratios = []
    for ref in refinements:
        cfg = SimConfig(scheme, ref.mesh, u_ref, ref.n_range, ref.steps, m0=ref.m0,
                        boundary=boundary, exact=u_ref)
        traj = run(cfg)
        lat = traj.lattice
        err = np.abs(lat.u - u_ref(lat.x, lat.t))
        e_max = float(np.max(err))
        e_l2 = float(np.sqrt(np.mean(err ** 2)))
        st = monitor_sigma_tau(traj)
        ratios.append(st)
        order = None
        if prev is not None and e_max > 0 and prev[1] > 0:
            order = float(np.log(prev[1] / e_max) / np.log(prev[0] / ref.h))
        sc = float(np.max(_row_scale(lat.u, ref.tau, scheme)))
        levels.append(ConvergenceLevel(ref.tau, ref.h, e_max, e_l2, order, st, sc))
        prev = (ref.h, e_max)
    warn_if_unbounded(ratios)
    return ConvergenceReport(scheme.name, label, levels)


# ---------------------------------------------------------------------------
# orbit tests
# ---------------------------------------------------------------------------


@dataclass
class OrbitResult:
    scheme: str
    solution: str
    element: str
    max_residual: float
    lattice_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol and self.lattice_residual <= self.tol

    def to_dict(self) -> dict:
        return dict(scheme=self.scheme, solution=self.solution, element=self.element,
                    max_residual=self.max_residual, lattice_residual=self.lattice_residual,
                    tol=self.tol, **{"pass": self.passed})


def orbit_test(scheme: SchemeDef, exact, g, tol: float = 1e-9) -> OrbitResult:
    """Residual of ``scheme`` on the image of an exact discrete solution under ``g``.

    ``max_residual`` is the scaled ``E1``; ``lattice_residual`` the largest of
    the remaining (lattice) equations.
    """
    from .symmetry import apply_group

    lat = exact.lattice() if hasattr(exact, "lattice") else exact
    moved = apply_group(g, lat)
    vals, sc = lattice_residuals(scheme, moved)
    e1 = float(np.max(np.abs(vals[0]) / sc))
    rest = float(np.max(np.abs(vals[1:]))) if len(vals) > 1 else 0.0
    return OrbitResult(scheme.name, getattr(exact, "name", "lattice"), g.label, e1, rest, tol)
