"""Command-line entry point.

Subcommands write ``lattice.csv``, ``report.json`` and ``manifest.json`` into
``--out`` when it is given; the report is always printed.  Exit codes: 0 ok,
1 a check failed, 2 usage or configuration error, 3 numeric or solver error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InvPDeltaError, MeshError
from .exact import EXACT_TOL, catalog, exactness_residual, get_exact
from .invariants import INVARIANT_COUNTS, STENCIL_WIDTH, invariants
from .lattice import MeshFunctions, MovingLattice, random_stencils
from .schemes import available_schemes, make_scheme
from .solver import NewtonOptions, SimConfig, run
from .symmetry import EQUATIONS, builtin_algebra, invariant_count, one_parameter
from .verify import (
    convergence_study,
    exact_refinements,
    invariance_suite,
    orbit_test,
    orthogonal_refinements,
    residual_report,
)

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "INVPDELTA_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _seed(value):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return value


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _emit(args, report: dict, lattice: MovingLattice | None = None, seed=None, config=None):
    """Print the report and, with ``--out``, write the artifacts and manifest."""
    text = json.dumps(report, indent=2, default=_json_default)
    print(text)
    out = getattr(args, "out", None)
    if not out:
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if lattice is not None:
        lattice.to_csv(out / "lattice.csv")
        files.append("lattice.csv")
    (out / "report.json").write_text(text + "\n")
    files.append("report.json")
    manifest = dict(
        command=args.command,
        config=str(config) if config else None,
        seed=seed,
        output_dir=str(out),
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        files={f: _sha256(out / f) for f in files},
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_list(args) -> int:
    schemes = {}
    for tag, variant in available_schemes():
        schemes.setdefault(tag, []).append(variant)
    report = dict(
        equations=list(EQUATIONS),
        schemes=schemes,
        mesh_presets=["uniform", "fundamental", "galilean"],
        catalog={tag: [e.name for e in catalog(tag)] for tag in schemes},
        invariant_counts=INVARIANT_COUNTS,
    )
    _emit(args, report)
    return EXIT_OK


def cmd_invariants(args) -> int:
    seed = _seed(args.seed)
    rng = np.random.default_rng(seed)
    tag = args.equation
    if tag not in INVARIANT_COUNTS:
        raise ConfigError(f"no invariant set for {tag!r}")
    u_range = (-0.3, 0.3) if tag == "potential_burgers" else (0.5, 2.0)
    s = random_stencils(1, STENCIL_WIDTH[tag], rng, u_range=u_range)[0]
    vals = invariants(tag, s)
    count = invariant_count(builtin_algebra(tag), width=STENCIL_WIDTH[tag], seed=seed)
    report = dict(
        equation=tag,
        seed=seed,
        stencil=dict(x=s.x, t=s.t, u=s.u),
        invariants={k: float(np.real(vals[k])) for k in vals},
        numerical_count=count,
        expected_count=INVARIANT_COUNTS[tag],
    )
    _emit(args, report, seed=seed)
    return EXIT_OK if count == INVARIANT_COUNTS[tag] else EXIT_FAIL


def cmd_check(args) -> int:
    lat = MovingLattice.from_csv(args.lattice, args.equation)
    scheme = make_scheme(args.equation, args.variant)
    report = residual_report(scheme, lat)
    report["tol"] = args.tol
    report["pass"] = report["max_scaled_E1"] <= args.tol
    _emit(args, report)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_exact(args) -> int:
    entry = get_exact(args.equation, args.name)
    variants = [args.variant] if args.variant else list(entry.variants)
    residuals = {v: exactness_residual(entry, v) for v in variants}
    ok = all(r <= args.tol for r in residuals.values())
    report = dict(equation=entry.equation, name=entry.name, m_range=entry.m_range,
                  n_range=entry.n_range, provenance=entry.provenance, tol=args.tol,
                  max_scaled_residual=residuals, **{"pass": ok})
    _emit(args, report, lattice=entry.lattice())
    return EXIT_OK if ok else EXIT_FAIL


def cmd_invariance(args) -> int:
    seed = _seed(args.seed)
    scheme = make_scheme(args.equation, args.variant)
    rep = invariance_suite(scheme, n_samples=args.n_samples, seed=seed)
    _emit(args, rep.to_dict(), seed=seed)
    if not rep.passed:
        print(f"non-invariant under: {', '.join(rep.failures)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _exp_reference(x, t):
    return np.exp(t + x)


def cmd_converge(args) -> int:
    scheme = make_scheme(args.equation, args.variant)
    if args.reference == "exp":
        if args.equation != "heat":
            raise ConfigError("the exp(t+x) reference solves the heat equation only")
        refs = orthogonal_refinements(args.levels, h0=args.h0, ratio=args.ratio, t_end=args.t_end)
        rep = convergence_study(scheme, _exp_reference, refs, name="exp(t+x)")
        ok = all(abs(o - 2.0) <= 0.3 for o in rep.orders)
    else:
        entry = get_exact(args.equation, args.reference)
        rep = convergence_study(scheme, entry, exact_refinements(entry, args.levels))
        ok = all(lv.err_max <= 1e-9 * lv.scale for lv in rep.levels)
    report = rep.to_dict()
    report["pass"] = ok
    _emit(args, report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_orbit(args) -> int:
    entry = get_exact(args.equation, args.name)
    g = one_parameter(args.equation, args.generator, args.eps)
    res = orbit_test(make_scheme(args.equation, args.variant), entry, g, tol=args.tol)
    _emit(args, res.to_dict())
    return EXIT_OK if res.passed else EXIT_FAIL


# --- solve -------------------------------------------------------------------


def _initial_from_config(equation: str, section: dict, seed):
    """``(initial, exact)`` callables from the ``[initial]`` table."""
    name = section.get("name")
    if name is None:
        raise ConfigError("[initial] needs a name")
    exact = None
    if name == "gaussian":
        amp, width, center = (float(section.get(k, d)) for k, d in
                              (("amplitude", 1.0), ("width", 1.0), ("center", 0.0)))
        base = float(section.get("offset", 0.0))

        def f(x, t):
            return base + amp * np.exp(-((x - center) / width) ** 2)
    elif name == "sine":
        amp, k = float(section.get("amplitude", 1.0)), float(section.get("wavenumber", 1.0))
        base = float(section.get("offset", 0.0))

        def f(x, t):
            return base + amp * np.sin(k * x)
    else:
        exact = get_exact(equation, name).u
        f = exact
    noise = float(section.get("noise", 0.0))
    if noise:
        rng = np.random.default_rng(seed)

        def g(x, t, f=f):
            v = f(x, t)
            return v + noise * rng.standard_normal(np.shape(v))

        return g, exact
    return f, exact


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config {path}: {exc}") from None


def config_to_sim(cfg: dict):
    """Translate a parsed config into ``(SimConfig, seed)``."""
    try:
        equation, variant = cfg["equation"], cfg["variant"]
        steps = int(cfg["steps"])
        mesh_tab = dict(cfg["mesh"])
        window = cfg["window"]
        n_range = (int(window["n_lo"]), int(window["n_hi"]))
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc.args[0]!r}") from None
    seed = _seed(cfg.get("seed", 0))
    preset = mesh_tab.pop("preset", "uniform")
    try:
        mesh = MeshFunctions.preset(preset, **mesh_tab)
    except (MeshError, TypeError) as exc:
        raise ConfigError(f"[mesh]: {exc}") from None
    initial, exact = _initial_from_config(equation, cfg.get("initial", {}), seed)
    try:
        newton = NewtonOptions(**cfg.get("newton", {}))
    except TypeError as exc:
        raise ConfigError(f"[newton]: {exc}") from None
    boundary = cfg.get("boundary", "exact" if exact is not None else "copy")
    sim = SimConfig(
        scheme=make_scheme(equation, variant),
        mesh=mesh,
        initial=initial,
        n_range=n_range,
        steps=steps,
        m0=int(window.get("m0", 0)),
        boundary=boundary,
        exact=exact,
        newton=newton,
    )
    return sim, seed


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    sim, seed = config_to_sim(cfg)
    traj = run(sim)
    report = traj.report()
    report["seed"] = seed
    _emit(args, report, lattice=traj.lattice, seed=seed, config=args.config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="invpdelta", description="Symmetry-preserving difference schemes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", help="directory for lattice.csv, report.json, manifest.json")
        return sp

    add("list", cmd_list, "equations, scheme variants, presets and exact solutions")

    sp = add("invariants", cmd_invariants, "evaluate invariants on a random stencil")
    sp.add_argument("--equation", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("check", cmd_check, "residuals of a scheme on a lattice CSV")
    sp.add_argument("--equation", required=True)
    sp.add_argument("--variant", required=True)
    sp.add_argument("--lattice", required=True, help="CSV with header m,n,t,x,u")
    sp.add_argument("--tol", type=float, default=EXACT_TOL)

    sp = add("solve", cmd_solve, "march a scheme from a TOML config")
    sp.add_argument("--config", required=True)

    sp = add("exact", cmd_exact, "exact discrete solution and its residuals")
    sp.add_argument("--equation", required=True)
    sp.add_argument("--name", required=True)
    sp.add_argument("--variant")
    sp.add_argument("--tol", type=float, default=EXACT_TOL)

    sp = add("invariance", cmd_invariance, "on-manifold symmetry defects of a scheme")
    sp.add_argument("--equation", required=True)
    sp.add_argument("--variant", required=True)
    sp.add_argument("--n-samples", type=int, default=200)
    sp.add_argument("--seed", type=int, default=1)

    sp = add("converge", cmd_converge, "refinement study against a reference solution")
    sp.add_argument("--equation", required=True)
    sp.add_argument("--variant", required=True)
    sp.add_argument("--reference", default="exp", help="'exp' for exp(t+x) or a catalog name")
    sp.add_argument("--levels", type=int, default=4)
    sp.add_argument("--h0", type=float, default=0.1)
    sp.add_argument("--ratio", type=float, default=0.4, help="tau / h^2")
    sp.add_argument("--t-end", type=float, default=0.1)

    sp = add("orbit", cmd_orbit, "scheme residual on a transformed exact solution")
    sp.add_argument("--equation", required=True)
    sp.add_argument("--name", required=True)
    sp.add_argument("--variant", required=True)
    sp.add_argument("--generator", required=True, help="generator index or label, e.g. 5 or V5")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-9)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "orbit" and args.generator.isdigit():
            args.generator = int(args.generator)
        return args.func(args)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvPDeltaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"error: floating point: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
