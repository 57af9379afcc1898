import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invpdelta.errors import ConfigError, DomainError
from invpdelta.invariants import (
    INVARIANT_COUNTS,
    STENCIL_WIDTH,
    burgers_invariants,
    heat_invariants,
    invariant_functions,
    invariants,
    kdv_invariants,
    potential_invariants,
)
from invpdelta.lattice import StencilView, random_stencils
from invpdelta.symmetry import apply_to_stencil, builtin_algebra, flat_layer_slots, invariance_defect, \
    one_parameter

# Reference values from an independent 30-digit evaluation of the formulas
# (mpmath, direct substitution); stencils are given level by level.
HEAT_STENCIL = ([-2, 0, 1], [-0.2, 0.3, 0.8], 0.1, [1.2, 1.0, 0.9], [1.1, 1.05, 0.95])
HEAT_REF = [0.5, 1.0, 5.0, 0.41582017561716641, 0.33109149705429809, 2.7123952883772652e-6,
            3.5784027493090936, 0.92452056461243328]
SIX_STENCIL = ([-0.5, 0, 0.4], [-0.3, 0.1, 0.6], 0.2, [0.1, -0.2, 0.25], [0.05, 0.15, -0.1])
POTENTIAL_REF = [0.8, 1.25, 1.0, 0.95034687985629239, 0.72252735364207219, 0.55571483666357141,
                 1.7550546569602986, 1.1618342427282831]
BURGERS_REF = [0.8, 1.25, 1.0, 0.345, -0.15, 0.28, 0.175, 0.98, -1.375]
KDV_STENCIL = ([-1.1, -0.5, 0, 0.4, 0.9], [-0.8, -0.3, 0.1, 0.6, 1.2], 0.2,
               [0.3, 0.1, -0.2, 0.25, 0.4], [0.2, 0.05, 0.15, -0.1, 0.0])
KDV_REF = [0.8, 1.25, 0.83333333333333333, 1.25, 1.2, 0.8, 0.8, 0.32, 0.15, -0.066666666666666667,
           -0.12, 0.225, 0.06, 0.056, -0.06, 0.05, -0.1, 0.033333333333333333]


def _stencil(xl, xu, tau, ul, uu, t0=1.0):
    K = len(xl)
    return StencilView([xl, xu], [[t0] * K, [t0 + tau] * K], [ul, uu])


def _uniform(h, tau, values, sigma=0.0, width=6):
    reach = 1 if width == 6 else 2
    k = np.arange(-reach, reach + 1)
    return StencilView([h * k, h * k + sigma], [[0.0] * len(k), [tau] * len(k)], values)


@pytest.mark.parametrize("fn,stencil,ref", [
    (heat_invariants, HEAT_STENCIL, HEAT_REF),
    (potential_invariants, SIX_STENCIL, POTENTIAL_REF),
    (burgers_invariants, SIX_STENCIL, BURGERS_REF),
    (kdv_invariants, KDV_STENCIL, KDV_REF),
])
def test_frozen_reference_values(fn, stencil, ref):
    vals = fn(_stencil(*stencil)).as_array()
    np.testing.assert_allclose(vals, ref, rtol=1e-13, atol=1e-15)


def test_heat_constant_orthogonal():
    h, tau, c = 0.2, 0.05, 1.7
    I = heat_invariants(_uniform(h, tau, np.full((2, 3), c)))
    r = h * h / (4 * tau)
    expect = [1, 1, h * h / tau, np.sqrt(tau) / h, np.exp(-r), np.exp(-r), np.exp(r), np.exp(r)]
    np.testing.assert_allclose(I.as_array(), expect, rtol=1e-14)
    assert I.names == [f"I{k}" for k in range(1, 9)]
    assert I[1] == I["I1"]


def test_burgers_constant_orthogonal():
    h, tau, v0 = 0.2, 0.05, 0.6
    I = burgers_invariants(_uniform(h, tau, np.full((2, 3), v0)))
    expect = [1, 1, h * h / tau, 0, 0, -h * v0, -h * v0, h * h / tau, -h * h / tau]
    np.testing.assert_allclose(I.as_array(), expect, rtol=1e-14, atol=1e-16)


def test_kdv_constant_orthogonal():
    h, tau, u0 = 0.3, 0.01, -0.4
    I = kdv_invariants(_uniform(h, tau, np.full((2, 5), u0), width=10))
    expect = [1] * 7 + [h ** 3 / tau, tau * u0 / h] + [0] * 9
    np.testing.assert_allclose(I.as_array(), expect, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("tag", ["heat", "burgers", "potential_burgers", "kdv"])
def test_x_translation(tag):
    s = random_stencils(5, STENCIL_WIDTH[tag], 4)
    shifted = StencilView(s.x + 3.7, s.t, s.u)
    np.testing.assert_allclose(invariants(tag, shifted).as_array(), invariants(tag, s).as_array(),
                               rtol=1e-12, atol=1e-13)


def test_burgers_galilei_boost():
    s = random_stencils(5, 6, 1)
    e = 0.37
    boosted = StencilView(s.x + e * s.t, s.t, s.u + e)
    np.testing.assert_allclose(burgers_invariants(boosted).as_array(), burgers_invariants(s).as_array(),
                               rtol=1e-12, atol=1e-13)


def test_kdv_galilei_keeps_i9():
    s = random_stencils(5, 10, 1)
    e = 0.37
    boosted = StencilView(s.x + e * s.t, s.t, s.u - e)
    np.testing.assert_allclose(kdv_invariants(boosted)[9], kdv_invariants(s)[9], rtol=1e-12)


def test_potential_matches_heat_under_log_map():
    s = random_stencils(10, 6, 2, u_range=(0.5, 2.0))
    w = StencilView(s.x, s.t, -2 * np.log(s.u))
    np.testing.assert_allclose(potential_invariants(w).as_array(), heat_invariants(s).as_array(), rtol=1e-12)
    shifted = StencilView(w.x, w.t, w.u + 0.8)
    np.testing.assert_allclose(potential_invariants(shifted).as_array(), potential_invariants(w).as_array(),
                               rtol=1e-12)


def test_domain_errors():
    s = _stencil(*HEAT_STENCIL)
    with pytest.raises(DomainError):
        heat_invariants(s.replace(("u", 0, 0), 0.0))
    with pytest.raises(DomainError):
        heat_invariants(s.replace(("x", 0, 1), 0.0))
    with pytest.raises(DomainError):
        burgers_invariants(StencilView(s.x, s.t[::-1], s.u))
    with pytest.raises(DomainError):
        kdv_invariants(s)
    with pytest.raises(ConfigError):
        invariants("maxwell", s)
    with pytest.raises(ConfigError):
        invariant_functions("maxwell")


def test_complex_values_pass_through():
    s = _stencil(*HEAT_STENCIL)
    c = s.replace(("u", 1, 0), 1.05 + 1e-20j)
    I = heat_invariants(c)
    assert np.iscomplexobj(I[4])
    assert np.real(I[4]) == pytest.approx(HEAT_REF[3], rel=1e-14)


# --- annihilation and finite invariance --------------------------------------------


@pytest.mark.parametrize("tag", ["heat", "burgers", "potential_burgers", "kdv"])
def test_annihilation_by_every_generator(tag):
    u_range = (-0.3, 0.3) if tag == "potential_burgers" else (0.5, 2.0)
    s = random_stencils(30, STENCIL_WIDTH[tag], 11, u_range=u_range)
    for v in builtin_algebra(tag):
        for k, F in enumerate(invariant_functions(tag), start=1):
            d = invariance_defect(v, F, s)
            assert np.all(np.abs(d) <= 1e-7 * (1 + np.abs(F(s)))), (v.label, k)


@settings(max_examples=25, deadline=None)
@given(tag=st.sampled_from(["heat", "burgers", "potential_burgers", "kdv"]), gen=st.integers(1, 6),
       eps=st.floats(-0.1, 0.1), seed=st.integers(0, 10 ** 6))
def test_finite_action_invariance(tag, gen, eps, seed):
    alg = builtin_algebra(tag)
    gen = 1 + (gen - 1) % alg.dim
    u_range = (-0.3, 0.3) if tag == "potential_burgers" else (0.5, 2.0)
    s = random_stencils(6, STENCIL_WIDTH[tag], seed, u_range=u_range)
    before = invariants(tag, s).as_array()
    after = invariants(tag, apply_to_stencil(one_parameter(tag, gen, eps), s)).as_array()
    np.testing.assert_allclose(after, before, rtol=1e-9, atol=1e-9 * np.max(np.abs(before)))


def _jacobian(tag, s):
    """Complex-step Jacobian of the invariants over the flat-layer coordinates."""
    slots = flat_layer_slots(s.levels, s.reach)
    base = s.coords().astype(complex)
    cols = []
    for f, lv, k in slots:
        c = base.copy()
        fi, li = "xtu".index(f), s.levels.index(lv)
        if f == "t":
            c[fi, li, :] += 1e-20j  # the whole layer moves together
        else:
            c[fi, li, s.reach + k] += 1e-20j
        cols.append(invariants(tag, StencilView.from_coords(c, s.levels)).as_array().imag / 1e-20)
    return np.array(cols).T


@pytest.mark.parametrize("tag", ["heat", "burgers", "potential_burgers", "kdv"])
def test_functional_independence(tag):
    u_range = (-0.3, 0.3) if tag == "potential_burgers" else (0.5, 2.0)
    s = random_stencils(1, STENCIL_WIDTH[tag], 5, u_range=u_range)[0]
    J = _jacobian(tag, s)
    mu = INVARIANT_COUNTS[tag]
    assert J.shape == (mu, len(flat_layer_slots(s.levels, s.reach)))
    sv = np.linalg.svd(J, compute_uv=False)
    assert np.sum(sv > max(J.shape) * np.finfo(float).eps * sv[0]) == mu


# --- audit of alternative typeset forms ----------------------------------------------


def _i8_with_other_step(s):
    hm, Hp, Hm = s.h_minus, s.hh_plus, s.hh_minus
    return s.U(1, -1) / s.U(1, 0) * np.exp(-Hm * (2 * s.sigma - Hp) / (4 * s.tau))


def test_i8_needs_matching_step_in_exponent():
    s = random_stencils(30, 6, 3)
    v6 = builtin_algebra("heat")["V6"]
    d_used = invariance_defect(v6, lambda s: heat_invariants(s)[8], s)
    d_alt = invariance_defect(v6, _i8_with_other_step, s)
    assert np.max(np.abs(d_used) / (1 + np.abs(heat_invariants(s)[8]))) <= 1e-7
    assert np.max(np.abs(d_alt) / (1 + np.abs(_i8_with_other_step(s)))) > 1e-3
    # the two agree whenever the upper steps are equal
    eq = StencilView(s.x, s.t, s.u)
    eq.x[..., 1, 2] = 2 * eq.x[..., 1, 1] - eq.x[..., 1, 0]
    np.testing.assert_allclose(_i8_with_other_step(eq), heat_invariants(eq)[8], rtol=1e-13)


def test_potential_i4_sign():
    s = random_stencils(30, 6, 3, u_range=(-0.3, 0.3))
    v6 = builtin_algebra("potential_burgers")["V6"]
    v5 = builtin_algebra("potential_burgers")["V5"]

    def flipped(s):
        return np.sqrt(s.tau) / s.h_plus * np.exp(-(s.U(1, 0) - s.U(0, 0)) / 2 - s.sigma ** 2 / (4 * s.tau))

    for v in (v5, v6):
        d = invariance_defect(v, lambda s: potential_invariants(s)[4], s)
        assert np.max(np.abs(d) / (1 + np.abs(potential_invariants(s)[4]))) <= 1e-7
    assert np.max(np.abs(invariance_defect(v5, flipped, s))) > 1e-3
