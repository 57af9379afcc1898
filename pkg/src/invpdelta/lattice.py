"""Evolving lattices, mesh functions and stencil windows.

A lattice point ``(m, n)`` carries coordinates ``(x, t)`` and a value ``u``.
Rows are time levels (index ``m``), columns are spatial positions (``n``).
Mesh functions give ``t = gamma(m)`` and ``x = hstep(m) * n + xorigin(m)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BoundaryError, MeshError

__all__ = [
    "MeshFunctions",
    "MovingLattice",
    "StencilView",
    "constant",
    "affine",
    "tabulated",
    "build_lattice",
    "lattice_from_arrays",
    "stencil_at",
    "flat_time_layers",
    "stencils_from_rows",
    "random_stencils",
    "WIDTHS",
]

# width -> (levels, reach)
WIDTHS = {
    6: ((0, 1), 1),
    10: ((0, 1), 2),
    9: ((-1, 0, 1), 1),
}


# ---------------------------------------------------------------------------
# mesh functions
# ---------------------------------------------------------------------------


def constant(value: float) -> Callable[[np.ndarray], np.ndarray]:
    value = float(value)

    def f(m):
        return np.full(np.shape(m), value)

    f.describe = {"kind": "constant", "value": value}
    return f


def affine(slope: float, intercept: float) -> Callable[[np.ndarray], np.ndarray]:
    slope, intercept = float(slope), float(intercept)

    def f(m):
        return slope * np.asarray(m, dtype=float) + intercept

    f.describe = {"kind": "affine", "slope": slope, "intercept": intercept}
    return f


def tabulated(values: Sequence[float], m_start: int = 0) -> Callable[[np.ndarray], np.ndarray]:
    """Table lookup ``values[m - m_start]``; indices outside the table raise."""
    table = np.asarray(values, dtype=float)

    def f(m):
        idx = np.asarray(m) - m_start
        if np.any(idx < 0) or np.any(idx >= len(table)):
            raise MeshError(f"m outside tabulated range [{m_start}, {m_start + len(table) - 1}]")
        return table[idx]

    f.describe = {"kind": "tabulated", "m_start": m_start, "values": table.tolist()}
    return f


@dataclass(frozen=True)
class MeshFunctions:
    """Row-wise lattice geometry: ``t = gamma(m)``, ``x = hstep(m) n + xorigin(m)``."""

    gamma: Callable[[np.ndarray], np.ndarray]
    hstep: Callable[[np.ndarray], np.ndarray]
    xorigin: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @classmethod
    def uniform(cls, h=0.1, x0=0.0, tau=0.005, t0=0.0):
        return cls(affine(tau, t0), constant(h), constant(x0), "uniform",
                   dict(h=h, x0=x0, tau=tau, t0=t0))

    @classmethod
    def fundamental(cls, h=0.05, x0=0.0, tau=0.005, t0=10.0):
        """``x = (h n + x0)(tau m + t0)``, ``t = tau m + t0``."""
        return cls(
            affine(tau, t0),
            affine(h * tau, h * t0),
            affine(x0 * tau, x0 * t0),
            "fundamental",
            dict(h=h, x0=x0, tau=tau, t0=t0),
        )

    @classmethod
    def galilean(cls, c=0.5, h=0.1, x0=0.0, tau=0.005, t0=0.0):
        """``x = h n + x0 + 2 c t``, ``t = tau m + t0``."""
        return cls(
            affine(tau, t0),
            constant(h),
            affine(2.0 * c * tau, x0 + 2.0 * c * t0),
            "galilean",
            dict(c=c, h=h, x0=x0, tau=tau, t0=t0),
        )

    @classmethod
    def preset(cls, name: str, **params):
        try:
            factory = {"uniform": cls.uniform, "fundamental": cls.fundamental,
                       "galilean": cls.galilean}[name]
        except KeyError:
            raise MeshError(f"unknown mesh preset {name!r}") from None
        return factory(**params)

    @classmethod
    def from_lattice(cls, lat: "MovingLattice"):
        """Tabulate the geometry of a lattice whose rows are affine in ``n``."""
        if len(lat.n) < 2:
            raise MeshError("need at least two columns to recover the row step")
        hstep = (lat.x[:, -1] - lat.x[:, 0]) / (lat.n[-1] - lat.n[0])
        xorigin = lat.x[:, 0] - hstep * lat.n[0]
        m0 = int(lat.m[0])
        return cls(tabulated(lat.t[:, 0], m0), tabulated(hstep, m0), tabulated(xorigin, m0),
                   "tabulated")

    def evaluate(self, m):
        m = np.asarray(m)
        return (np.asarray(self.gamma(m), dtype=float),
                np.asarray(self.hstep(m), dtype=float),
                np.asarray(self.xorigin(m), dtype=float))

    def validate(self, m) -> None:
        gamma, hstep, _ = self.evaluate(m)
        if np.any(~np.isfinite(gamma)) or np.any(~np.isfinite(hstep)):
            raise MeshError("mesh functions returned non-finite values")
        if np.any(np.diff(gamma) <= 0):
            raise MeshError("gamma must be strictly increasing in m")
        if np.any(hstep <= 0):
            raise MeshError("hstep must be positive")


# ---------------------------------------------------------------------------
# lattice
# ---------------------------------------------------------------------------


def _as_index_range(r) -> np.ndarray:
    if isinstance(r, range):
        out = np.arange(r.start, r.stop, r.step)
    else:
        lo, hi = r
        out = np.arange(int(lo), int(hi) + 1)
    if out.size == 0:
        raise MeshError("empty index range")
    return out


@dataclass
class MovingLattice:
    """Full discrete field over a window of time levels.

    ``x``, ``t`` and ``u`` have shape ``(len(m), len(n))``.  Ranges given as
    tuples are inclusive.
    """

    m: np.ndarray
    n: np.ndarray
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    equation: str | None = None

    @property
    def shape(self):
        return self.x.shape

    def row(self, m: int) -> int:
        i = int(m) - int(self.m[0])
        if not 0 <= i < len(self.m):
            raise BoundaryError(f"row m={m} outside lattice")
        return i

    def col(self, n: int) -> int:
        j = int(n) - int(self.n[0])
        if not 0 <= j < len(self.n):
            raise BoundaryError(f"column n={n} outside lattice")
        return j

    def copy(self) -> "MovingLattice":
        return MovingLattice(self.m.copy(), self.n.copy(), self.x.copy(), self.t.copy(),
                             self.u.copy(), self.equation)

    def check_mesh(self) -> None:
        """Raise :class:`MeshError` on non-finite coordinates or tangling."""
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.t))):
            raise MeshError("non-finite lattice coordinates")
        if self.x.shape[1] > 1 and np.any(np.diff(self.x, axis=1) <= 0):
            bad = np.argwhere(np.diff(self.x, axis=1) <= 0)[0]
            raise MeshError(f"mesh tangling at m={self.m[bad[0]]}, n={self.n[bad[1]]}")

    def stencil_at(self, m: int, n: int, width: int = 6) -> "StencilView":
        return stencil_at(self, m, n, width)

    def stencils(self, m: int, width: int = 6):
        """Batch of all stencils based on row ``m``; returns ``(view, n_values)``."""
        levels, reach = _width(width)
        rows = [self.row(m + lv) for lv in levels]
        N = len(self.n)
        if N < 2 * reach + 1:
            raise BoundaryError("lattice too narrow for the stencil")
        view = stencils_from_rows(
            [self.x[r] for r in rows], [self.t[r] for r in rows], [self.u[r] for r in rows],
            reach, levels)
        return view, self.n[reach:N - reach]

    def to_csv(self, path=None) -> str:
        """Serialize as ``m,n,t,x,u`` rows (row-major in m then n)."""
        buf = io.StringIO()
        buf.write("m,n,t,x,u\n")
        for i, m in enumerate(self.m):
            for j, n in enumerate(self.n):
                buf.write(f"{int(m)},{int(n)},{self.t[i, j]:.17g},{self.x[i, j]:.17g},"
                          f"{self.u[i, j]:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, equation=None) -> "MovingLattice":
        """Read a lattice written by :meth:`to_csv` (path or text with a header)."""
        if isinstance(source, str) and "\n" in source:
            rows = list(csv.DictReader(io.StringIO(source)))
        else:
            with open(source, newline="") as fh:
                rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"m", "n", "t", "x", "u"}:
            raise MeshError("lattice CSV must have header m,n,t,x,u")
        ms = sorted({int(r["m"]) for r in rows})
        ns = sorted({int(r["n"]) for r in rows})
        m = np.arange(ms[0], ms[-1] + 1)
        n = np.arange(ns[0], ns[-1] + 1)
        if len(rows) != len(m) * len(n):
            raise MeshError("lattice CSV is not a full rectangular window")
        x = np.full((len(m), len(n)), np.nan)
        t, u = x.copy(), x.copy()
        for r in rows:
            i, j = int(r["m"]) - m[0], int(r["n"]) - n[0]
            t[i, j], x[i, j], u[i, j] = float(r["t"]), float(r["x"]), float(r["u"])
        return cls(m, n, x, t, u, equation)


def lattice_from_arrays(m_range, n_range, x, t, u=None, equation=None) -> MovingLattice:
    m = _as_index_range(m_range)
    n = _as_index_range(n_range)
    x = np.array(x, dtype=float)
    t = np.array(t, dtype=float)
    if x.shape != (len(m), len(n)) or t.shape != x.shape:
        raise MeshError("coordinate arrays do not match the index ranges")
    u = np.full(x.shape, np.nan) if u is None else np.array(u, dtype=float)
    lat = MovingLattice(m, n, x, t, u, equation)
    lat.check_mesh()
    return lat


def build_lattice(mesh: MeshFunctions, m_range, n_range, u_init=None, equation=None) -> MovingLattice:
    """Evaluate mesh functions eagerly over the window and fill ``u``.

    ``u_init`` may be a callable ``u(x, t)``, an array of shape ``(M, N)`` or
    ``None`` (values left as NaN).
    """
    m = _as_index_range(m_range)
    n = _as_index_range(n_range)
    mesh.validate(m)
    gamma, hstep, xorigin = mesh.evaluate(m)
    x = hstep[:, None] * n[None, :] + xorigin[:, None]
    t = np.repeat(gamma[:, None], len(n), axis=1)
    if u_init is None:
        u = np.full(x.shape, np.nan)
    elif callable(u_init):
        u = np.asarray(u_init(x, t), dtype=float) * np.ones_like(x)
    else:
        u = np.array(u_init, dtype=float)
        if u.shape != x.shape:
            raise MeshError("tabulated u_init does not match the lattice window")
    lat = MovingLattice(m, n, x, t, u, equation)
    lat.check_mesh()
    return lat


def flat_time_layers(lat: MovingLattice) -> bool:
    """True iff every row has exactly one stored ``t`` value."""
    return bool(np.all(lat.t == lat.t[:, :1]))


# ---------------------------------------------------------------------------
# stencils
# ---------------------------------------------------------------------------


def _width(width):
    try:
        return WIDTHS[int(width)]
    except (KeyError, ValueError, TypeError):
        raise BoundaryError(f"unsupported stencil width {width!r}") from None


class StencilView:
    """Local window of lattice points, possibly batched.

    Coordinates are stored as arrays of shape ``(*batch, L, K)`` where ``L``
    indexes time levels (``levels``, relative to the base row) and ``K``
    indexes spatial offsets ``-reach .. reach``.  Arrays may be complex so
    that residuals can be differentiated by the complex step.
    """

    __slots__ = ("x", "t", "u", "levels", "reach")

    def __init__(self, x, t, u, levels=(0, 1)):
        x = np.asarray(x)
        self.x = x if np.iscomplexobj(x) else x.astype(float)
        t = np.asarray(t)
        self.t = t if np.iscomplexobj(t) else t.astype(float)
        u = np.asarray(u)
        self.u = u if np.iscomplexobj(u) else u.astype(float)
        self.levels = tuple(levels)
        self.reach = self.x.shape[-1] // 2
        if self.x.shape[-2:] != (len(self.levels), 2 * self.reach + 1):
            raise BoundaryError("stencil arrays do not match levels/offsets")

    # -- construction ------------------------------------------------------
    @property
    def width(self) -> int:
        return len(self.levels) * (2 * self.reach + 1)

    @property
    def batch_shape(self):
        return self.x.shape[:-2]

    def coords(self) -> np.ndarray:
        """All slot values stacked as ``(*batch, 3, L, K)`` in (x, t, u) order."""
        return np.stack(np.broadcast_arrays(self.x, self.t, self.u), axis=-3)

    @classmethod
    def from_coords(cls, c, levels=(0, 1)) -> "StencilView":
        return cls(c[..., 0, :, :], c[..., 1, :, :], c[..., 2, :, :], levels)

    def slot_index(self, slot) -> tuple:
        field_, level, offset = slot
        return ("xtu".index(field_), self.levels.index(level), self.reach + offset)

    def get(self, slot):
        f, li, k = self.slot_index(slot)
        return (self.x, self.t, self.u)[f][..., li, k]

    def replace(self, slot, value) -> "StencilView":
        f, li, k = self.slot_index(slot)
        arrs = [self.x, self.t, self.u]
        a = np.array(arrs[f], dtype=np.result_type(arrs[f], np.asarray(value)))
        a[..., li, k] = value
        arrs[f] = a
        return StencilView(*arrs, levels=self.levels)

    def __getitem__(self, idx) -> "StencilView":
        idx = idx if isinstance(idx, tuple) else (idx,)
        sl = idx + (slice(None), slice(None))
        return StencilView(self.x[sl], self.t[sl], self.u[sl], self.levels)

    def __len__(self):
        return self.batch_shape[0] if self.batch_shape else 1

    # -- point access ------------------------------------------------------
    def _at(self, arr, level, offset):
        return arr[..., self.levels.index(level), self.reach + offset]

    def X(self, level, offset):
        return self._at(self.x, level, offset)

    def T(self, level, offset):
        return self._at(self.t, level, offset)

    def U(self, level, offset):
        return self._at(self.u, level, offset)

    def u_slots(self, level):
        return self.u[..., self.levels.index(level), :]

    # -- derived steps -----------------------------------------------------
    @property
    def h_plus(self):
        return self.X(0, 1) - self.X(0, 0)

    @property
    def h_minus(self):
        return self.X(0, 0) - self.X(0, -1)

    @property
    def h_plusplus(self):
        return self.X(0, 2) - self.X(0, 1)

    @property
    def h_minusminus(self):
        return self.X(0, -1) - self.X(0, -2)

    @property
    def hh_plus(self):
        return self.X(1, 1) - self.X(1, 0)

    @property
    def hh_minus(self):
        return self.X(1, 0) - self.X(1, -1)

    @property
    def hh_plusplus(self):
        return self.X(1, 2) - self.X(1, 1)

    @property
    def hh_minusminus(self):
        return self.X(1, -1) - self.X(1, -2)

    @property
    def sigma(self):
        return self.X(1, 0) - self.X(0, 0)

    @property
    def sigma_plus(self):
        return self.X(1, 1) - self.X(0, 1)

    @property
    def tau(self):
        return self.T(1, 0) - self.T(0, 0)

    @property
    def T_plus(self):
        return self.T(0, 1) - self.T(0, 0)

    @property
    def T_minus(self):
        return self.T(0, 0) - self.T(0, -1)

    def steps(self) -> dict:
        out = dict(h_plus=self.h_plus, h_minus=self.h_minus, hh_plus=self.hh_plus,
                   hh_minus=self.hh_minus, sigma=self.sigma, sigma_plus=self.sigma_plus,
                   tau=self.tau, T_plus=self.T_plus, T_minus=self.T_minus)
        if self.reach >= 2:
            out.update(h_plusplus=self.h_plusplus, h_minusminus=self.h_minusminus,
                       hh_plusplus=self.hh_plusplus, hh_minusminus=self.hh_minusminus)
        return out

    def __repr__(self):
        return f"StencilView(width={self.width}, batch={self.batch_shape})"


def stencils_from_rows(xs, ts, us, reach, levels=(0, 1)) -> StencilView:
    """Batch of stencils centred at every column that has ``reach`` neighbours.

    ``xs``, ``ts``, ``us`` are sequences of 1-d rows, one per level.
    """
    K = 2 * reach + 1

    def windows(rows):
        return np.stack([sliding_window_view(np.asarray(r), K) for r in rows], axis=-2)

    return StencilView(windows(xs), windows(ts), windows(us), levels)


def stencil_at(lat: MovingLattice, m: int, n: int, width: int = 6) -> StencilView:
    levels, reach = _width(width)
    rows = [lat.row(m + lv) for lv in levels]
    j = lat.col(n)
    if j - reach < 0 or j + reach >= len(lat.n):
        raise BoundaryError(f"{width}-point stencil at n={n} leaves the lattice")
    sl = slice(j - reach, j + reach + 1)
    return StencilView(lat.x[rows, sl], lat.t[rows, sl], lat.u[rows, sl], levels)


def random_stencils(count: int, width: int = 6, rng=None, *, u_range=(0.5, 2.0),
                    step_range=(0.3, 1.0), sigma_range=(-0.5, 0.5), t_range=(0.2, 1.0),
                    tau_range=(0.2, 0.8), x_range=(-1.0, 1.0)) -> StencilView:
    """Generic flat-layer stencils with independent random steps and values."""
    rng = np.random.default_rng(rng)
    levels, reach = _width(width)
    K, L = 2 * reach + 1, len(levels)
    x = np.empty((count, L, K))
    t = np.empty((count, L, K))
    t0 = rng.uniform(*t_range, count)
    x0 = rng.uniform(*x_range, count)
    level_t = {0: t0}
    level_x = {0: x0}
    for lv in levels:
        if lv == 0:
            continue
        sign = 1 if lv > 0 else -1
        level_t[lv] = t0 + sign * abs(lv) * rng.uniform(*tau_range, count)
        level_x[lv] = x0 + rng.uniform(*sigma_range, count)
    for li, lv in enumerate(levels):
        t[:, li, :] = level_t[lv][:, None]
        centre = level_x[lv]
        x[:, li, reach] = centre
        for k in range(1, reach + 1):
            x[:, li, reach + k] = x[:, li, reach + k - 1] + rng.uniform(*step_range, count)
            x[:, li, reach - k] = x[:, li, reach - k + 1] - rng.uniform(*step_range, count)
    u = rng.uniform(*u_range, (count, L, K))
    return StencilView(x, t, u, levels)
