import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invpdelta.errors import ConfigError, SingularUpdateError
from invpdelta.exact import get_exact
from invpdelta.invariants import heat_invariants, kdv_invariants
from invpdelta.lattice import StencilView, random_stencils, stencil_at
from invpdelta.schemes import SCHEME_TABLE, available_schemes, make_scheme, residual, scale, \
    solve_explicit_update

INVARIANT_VARIANTS = [k for k, v in SCHEME_TABLE.items() if v["invariant"] and k[0] != "wave_demo"]


def _uniformize(s, level):
    """Force equal neighbour spacing on one level, keeping the centre."""
    x = np.array(s.x)
    r = s.reach
    li = s.levels.index(level)
    h = x[..., li, r + 1] - x[..., li, r]
    for k in range(-r, r + 1):
        x[..., li, r + k] = x[..., li, r] + k * h
    return StencilView(x, s.t, s.u, s.levels)


def _orthogonal(s):
    """Upper level copied from the lower one in x (sigma = 0, same steps)."""
    x = np.array(s.x)
    x[..., 1, :] = x[..., 0, :]
    return StencilView(x, s.t, s.u, s.levels)


# --- construction ------------------------------------------------------------------


def test_catalog_of_variants():
    for tag in ("heat", "potential_burgers"):
        assert {v for _, v in available_schemes(tag)} == {
            "invariant_explicit", "invariant_implicit", "standard_explicit", "standard_implicit"}
    for tag in ("burgers", "kdv"):
        assert len(available_schemes(tag)) == 6
    assert len(INVARIANT_VARIANTS) == 12


def test_unsupported_pair():
    with pytest.raises(ConfigError):
        make_scheme("heat", "adapted_explicit")
    with pytest.raises(ConfigError):
        make_scheme("maxwell", "invariant_explicit")


def test_width_mismatch():
    with pytest.raises(ConfigError):
        residual(make_scheme("kdv", "invariant_explicit"), random_stencils(1, 6, 0)[0])


@pytest.mark.parametrize("key", [k for k in SCHEME_TABLE if k[0] != "wave_demo"])
def test_second_equation_is_flat_layer(key):
    sch = make_scheme(*key)
    s = random_stencils(4, sch.width, 0)
    x, t = s.x, s.t.copy()
    t[..., 0, sch.reach + 1] += 0.25
    assert np.all(sch.residuals[1](s) == 0)
    np.testing.assert_allclose(sch.residuals[1](StencilView(x, t, s.u)), 0.25)


def test_heat_explicit_triple():
    sch = make_scheme("heat", "invariant_explicit")
    s = random_stencils(10, 6, 1)
    I = heat_invariants(s)
    comb = I[3] ** 1.5 * I[4] - I[3] - (I[5] + I[6]) * np.exp(I[3] / 4) + 2
    E1, E2, E3 = residual(sch, s)
    np.testing.assert_allclose(E1 * s.h_plus * s.hh_plus / s.U(0, 0), comb, rtol=1e-13, atol=1e-13)
    np.testing.assert_array_equal(E2, s.T_plus)
    np.testing.assert_allclose(E3, I[1] - 1, rtol=1e-15)


def test_kdv_adapted_explicit_triple():
    sch = make_scheme("kdv", "adapted_explicit")
    s = random_stencils(10, 10, 1)
    I = kdv_invariants(s)
    E1, E2, E3 = residual(sch, s)
    np.testing.assert_allclose(E1 * s.h_plus ** 2 * s.tau, I[14] - 0.5 * (I[13] - I[12] - I[11] + I[10]),
                               rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(E3, I[9])
    assert sch.adapted and sch.explicit and sch.reach == 2


def test_wave_demo_triple():
    sch = make_scheme("wave_demo", "wave_demo")
    s = random_stencils(5, 6, 2)
    E1, E2, E3 = residual(sch, s)
    up = (s.U(1, 1) - s.U(1, 0)) / (s.X(1, 1) - s.X(1, 0))
    lo = (s.U(0, 1) - s.U(0, 0)) / (s.X(0, 1) - s.X(0, 0))
    np.testing.assert_allclose(E1, (up - lo) / s.tau)
    np.testing.assert_array_equal(E3, s.sigma)
    assert len(make_scheme("wave_demo", "wave_demo_uniform").residuals) == 5


# --- residual values -------------------------------------------------------------------


@pytest.mark.parametrize("key", [k for k in SCHEME_TABLE if k[0] in ("heat", "potential_burgers")])
def test_constant_on_orthogonal_uniform_is_zero(key):
    sch = make_scheme(*key)
    x = 0.2 * np.arange(-1, 2)
    s = StencilView([x, x], [[0.0] * 3, [0.01] * 3], np.full((2, 3), 0.7))
    np.testing.assert_allclose(residual(sch, s), 0.0, atol=1e-12)


def test_burgers_constant_cancels():
    for variant in ("invariant_explicit", "invariant_implicit", "standard_explicit"):
        sch = make_scheme("burgers", variant)
        x = 0.2 * np.arange(-1, 2)
        s = StencilView([x, x], [[0.0] * 3, [0.01] * 3], np.full((2, 3), -0.45))
        assert residual(sch, s)[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("tag,width", [("heat", 6), ("kdv", 10), ("burgers", 6)])
@pytest.mark.parametrize("kind", ["explicit", "implicit"])
def test_orthogonal_reduction_to_standard(tag, width, kind):
    inv = make_scheme(tag, f"invariant_{kind}")
    std = make_scheme(tag, f"standard_{kind}")
    s = _orthogonal(_uniformize(random_stencils(100, width, 8), 0))
    s = StencilView(s.x, s.t, np.random.default_rng(0).uniform(-2, 2, s.u.shape) + (3 if tag == "heat" else 0))
    diff = np.abs(residual(inv, s)[0] - residual(std, s)[0]) / scale(inv, s)
    assert np.max(diff) <= 1e-12


def test_kdv_combination_needs_sum_of_slopes():
    """A difference of the two inner slopes would not reduce to the centred advection term."""
    s = _orthogonal(_uniformize(random_stencils(20, 10, 8), 0))
    I = kdv_invariants(s)
    std = residual(make_scheme("kdv", "standard_explicit"), s)[0]
    alt = (I[14] - I[9] * I[8] * (I[12] - I[11]) / 2 - 0.5 * (I[13] - I[12] - I[11] + I[10])) / (
        s.h_plus ** 2 * s.tau)
    assert np.max(np.abs(alt - std) / scale(make_scheme("kdv", "standard_explicit"), s)) > 1e-3


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 10 ** 6),
       variant=st.sampled_from(["invariant_explicit", "invariant_implicit", "standard_explicit",
                                "standard_implicit"]))
def test_heat_residual_linear_in_u(a, b, seed, variant):
    sch = make_scheme("heat", variant)
    s = random_stencils(5, 6, seed)
    w = random_stencils(5, 6, seed + 1).u
    combo = a * s.u + b * w
    if np.any(np.abs(combo[..., :, 1]) < 1e-3):
        return  # the centre values enter as divisors of the invariants
    E = lambda u: sch.residuals[0](StencilView(s.x, s.t, u))  # noqa: E731
    lhs = E(combo)
    rhs = a * E(s.u) + b * E(w)
    bound = 1e-9 * (np.abs(a * E(s.u)) + np.abs(b * E(w)) + 1)
    assert np.all(np.abs(lhs - rhs) <= bound)


@pytest.mark.parametrize("kind", ["explicit", "implicit"])
def test_potential_residual_is_heat_residual_of_exp(kind):
    s = random_stencils(20, 6, 3, u_range=(-0.5, 0.5))
    pot = make_scheme("potential_burgers", f"invariant_{kind}").residuals[0](s)
    heat = make_scheme("heat", f"invariant_{kind}").residuals[0](StencilView(s.x, s.t, np.exp(-s.u / 2)))
    np.testing.assert_allclose(pot, heat, rtol=1e-12, atol=1e-14)


def test_wave_demo_separable_solutions_exact():
    rng = np.random.default_rng(4)
    f, g = rng.normal(size=3), rng.normal(size=2)
    x = np.cumsum(rng.uniform(0.1, 1, 3))
    s = StencilView([x, x], [[0.0] * 3, [0.4] * 3], g[:, None] + f[None, :])
    E = residual(make_scheme("wave_demo", "wave_demo"), s)
    assert abs(E[0]) < 1e-14 and E[1] == 0 and E[2] == 0
    # the uniform variant also fixes the steps
    t = np.array([[-0.3] * 3, [0.0] * 3, [0.3] * 3])
    xs = np.tile(np.array([-0.2, 0.0, 0.2]), (3, 1))
    s9 = StencilView(xs, t, t ** 2 + xs, levels=(-1, 0, 1))
    np.testing.assert_allclose(residual(make_scheme("wave_demo", "wave_demo_uniform"), s9), 0.0, atol=1e-12)
    bent = StencilView(xs, t + np.array([[0.0], [0.0], [0.1]]), s9.u, levels=(-1, 0, 1))
    assert residual(make_scheme("wave_demo", "wave_demo_uniform"), bent)[3] != 0


# --- hand-expanded coordinate forms as a second implementation ---------------------------


def _heat_explicit_expanded(s):
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    u, up, um, U = s.U(0, 0), s.U(0, 1), s.U(0, -1), s.U(1, 0)
    lhs = (np.sqrt(H / h) * U * np.exp(sg ** 2 / (4 * tau)) - u) / tau
    rhs = (up * np.exp(h * (2 * sg - h + H) / (4 * tau)) - 2 * u
           + um * np.exp(-h * (2 * sg + h - H) / (4 * tau))) / (H * h)
    return lhs - rhs


def _heat_implicit_expanded(s):
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    u, U, Up, Um = s.U(0, 0), s.U(1, 0), s.U(1, 1), s.U(1, -1)
    lhs = (U - np.sqrt(h / H) * u * np.exp(-sg ** 2 / (4 * tau))) / tau
    rhs = (Up * np.exp(H * (2 * sg - h + H) / (4 * tau)) - 2 * U
           + Um * np.exp(-H * (2 * sg + h - H) / (4 * tau))) / (H * h)
    return lhs - rhs


def _potential_explicit_expanded(s):
    e = lambda w: np.exp(-w / 2)  # noqa: E731
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    w, wp, wm, W = s.U(0, 0), s.U(0, 1), s.U(0, -1), s.U(1, 0)
    lhs = (np.sqrt(H / h) * np.exp(-W / 2 + sg ** 2 / (4 * tau)) - e(w)) / tau
    rhs = (np.exp(-wp / 2 + h * (2 * sg - h + H) / (4 * tau)) - 2 * e(w)
           + np.exp(-wm / 2 - h * (2 * sg + h - H) / (4 * tau))) / (H * h)
    return lhs - rhs


def _potential_implicit_expanded(s):
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    w, W, Wp, Wm = s.U(0, 0), s.U(1, 0), s.U(1, 1), s.U(1, -1)
    lhs = (np.exp(-W / 2) - np.sqrt(h / H) * np.exp(-w / 2 - sg ** 2 / (4 * tau))) / tau
    rhs = (np.exp(-Wp / 2 + H * (2 * sg - h + H) / (4 * tau)) - 2 * np.exp(-W / 2)
           + np.exp(-Wm / 2 - H * (2 * sg + h - H) / (4 * tau))) / (H * h)
    return lhs - rhs


def _burgers_explicit_expanded(s):
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    v, V = s.U(0, 0), s.U(1, 0)
    vxp, vxm = (s.U(0, 1) - v) / h, (v - s.U(0, -1)) / h
    lhs = (2 * (sg / tau - v) + H / h * (V - sg / tau)) * H / (h * tau) + (vxp + 1 / tau) * (v - sg / tau)
    return lhs - (vxp - vxm) / h


def _burgers_implicit_expanded(s):
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    v, V = s.U(0, 0), s.U(1, 0)
    Vxp, Vxm = (s.U(1, 1) - V) / H, (V - s.U(1, -1)) / H
    lhs = (h / H * (sg / tau - v) - 2 * (sg / tau - V)) * h / (H * tau) - (sg / tau - V) * (Vxp - 1 / tau)
    return lhs - (Vxp - Vxm) / H


def _kdv_explicit_expanded(s):
    h, sg, tau = s.h_plus, s.sigma, s.tau
    u = [s.U(0, k) for k in range(-2, 3)]
    rhs = (u[2] * (u[3] - u[1]) / (2 * h) + (u[4] - 2 * u[3] + 2 * u[1] - u[0]) / (2 * h ** 3)
           + sg / tau * (u[3] - u[1]) / (2 * h))
    return (s.U(1, 0) - u[2]) / tau - rhs


def _kdv_implicit_expanded(s):
    H, sg, tau = s.hh_plus, s.sigma, s.tau
    U = [s.U(1, k) for k in range(-2, 3)]
    rhs = (U[2] * (U[3] - U[1]) / (2 * H) + (U[4] - 2 * U[3] + 2 * U[1] - U[0]) / (2 * H ** 3)
           + sg / tau * (U[3] - U[1]) / (2 * H))
    return (U[2] - s.U(0, 0)) / tau - rhs


def _slopes(s, level):
    x = [s.X(level, k) for k in range(-2, 3)]
    u = [s.U(level, k) for k in range(-2, 3)]
    return [(u[i + 1] - u[i]) / (x[i + 1] - x[i]) for i in range(4)]


def _kdv_adapted_explicit_expanded(s):
    mm, m, p, pp = _slopes(s, 0)
    return (s.U(1, 0) - s.U(0, 0)) / s.tau - 0.5 * ((pp - p) - (m - mm)) / s.h_plus ** 2


def _kdv_adapted_implicit_expanded(s):
    mm, m, p, pp = _slopes(s, 1)
    return (s.U(1, 0) - s.U(0, 0)) / s.tau - 0.5 * ((pp - p) - (m - mm)) / s.hh_plus ** 2


EXPANDED = [
    ("heat", "invariant_explicit", _heat_explicit_expanded, 6, 0),
    ("heat", "invariant_implicit", _heat_implicit_expanded, 6, 1),
    ("potential_burgers", "invariant_explicit", _potential_explicit_expanded, 6, 0),
    ("potential_burgers", "invariant_implicit", _potential_implicit_expanded, 6, 1),
    ("burgers", "invariant_explicit", _burgers_explicit_expanded, 6, 0),
    ("burgers", "invariant_implicit", _burgers_implicit_expanded, 6, 1),
    ("kdv", "invariant_explicit", _kdv_explicit_expanded, 10, 0),
    ("kdv", "invariant_implicit", _kdv_implicit_expanded, 10, 1),
    ("kdv", "adapted_explicit", _kdv_adapted_explicit_expanded, 10, None),
    ("kdv", "adapted_implicit", _kdv_adapted_implicit_expanded, 10, None),
]


@pytest.mark.parametrize("tag,variant,expanded,width,uniform_level", EXPANDED,
                         ids=[f"{a}-{b}" for a, b, *_ in EXPANDED])
def test_expanded_forms_agree(tag, variant, expanded, width, uniform_level):
    u_range = (-0.5, 0.5) if tag == "potential_burgers" else (0.5, 2.0)
    s = random_stencils(100, width, 21, u_range=u_range)
    if uniform_level is not None:
        s = _uniformize(s, uniform_level)
    sch = make_scheme(tag, variant)
    diff = np.abs(sch.residuals[0](s) - expanded(s)) / scale(sch, s)
    assert np.max(diff) <= 1e-9


def test_linear_sigma_exponent_does_not_agree():
    s = _uniformize(random_stencils(50, 6, 2), 0)
    sch = make_scheme("heat", "invariant_explicit")
    h, H, sg, tau = s.h_plus, s.hh_plus, s.sigma, s.tau
    alt = _heat_explicit_expanded(s) + np.sqrt(H / h) * s.U(1, 0) * (
        np.exp(sg / (4 * tau)) - np.exp(sg ** 2 / (4 * tau))) / tau
    assert np.max(np.abs(sch.residuals[0](s) - alt) / scale(sch, s)) > 1e-3


# --- explicit update -------------------------------------------------------------------


def test_explicit_update_fundamental_solution():
    entry = get_exact("heat", "fundamental")
    lat = entry.lattice()
    sch = make_scheme("heat", "invariant_explicit")
    view, _ = lat.stencils(10)
    got = solve_explicit_update(sch, view)
    np.testing.assert_allclose(got, lat.u[11, 1:-1], rtol=1e-10)


def test_explicit_update_linear_solution():
    lat = get_exact("heat", "linear").lattice()
    sch = make_scheme("heat", "invariant_explicit")
    view, _ = lat.stencils(3)
    np.testing.assert_allclose(solve_explicit_update(sch, view), 0.5 * lat.x[4, 1:-1] + 2.0, rtol=1e-12)


def test_explicit_update_kdv_rational():
    lat = get_exact("kdv", "galilean_invariant").lattice()
    for variant in ("invariant_explicit", "adapted_explicit"):
        sch = make_scheme("kdv", variant)
        view, _ = lat.stencils(5, width=10)
        np.testing.assert_allclose(solve_explicit_update(sch, view), -lat.x[6, 2:-2] / lat.t[6, 2:-2],
                                   rtol=1e-12, atol=1e-14)


def test_explicit_update_potential_uses_transformed_unknown():
    lat = get_exact("potential_burgers", "fundamental").lattice()
    sch = make_scheme("potential_burgers", "invariant_explicit")
    view, _ = lat.stencils(2)
    np.testing.assert_allclose(solve_explicit_update(sch, view), lat.u[3, 1:-1], rtol=1e-11)


def test_explicit_update_errors():
    with pytest.raises(ConfigError):
        solve_explicit_update(make_scheme("heat", "invariant_implicit"), random_stencils(1, 6, 0))
    s = random_stencils(1, 6, 0)
    x = np.array(s.x)
    x[..., 1, :] += 10.0
    t = np.array(s.t)
    t[..., 1, :] = t[..., 0, :] + 1e-4
    with pytest.raises(SingularUpdateError):
        with np.errstate(over="ignore", invalid="ignore"):
            solve_explicit_update(make_scheme("heat", "invariant_explicit"), StencilView(x, t, s.u))


def test_stencil_at_feeds_schemes():
    lat = get_exact("burgers", "rational").lattice()
    s = stencil_at(lat, 4, 0)
    for variant in ("invariant_explicit", "invariant_implicit", "adapted_explicit", "adapted_implicit"):
        E = residual(make_scheme("burgers", variant), s)
        assert max(abs(e) for e in E) <= 1e-10 * scale(make_scheme("burgers", variant), s)
