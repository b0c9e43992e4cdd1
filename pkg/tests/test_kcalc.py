"""K-functional curves, Holmstedt reiteration, Lorentz and L log L norms.

Every closed-form integrator here is cross-checked against adaptive
quadrature (scipy.integrate.quad) on the same integrand, with breakpoints
passed as quadrature nodes. The frozen oracles are hand-derived: the K-curve
of step 2,1, the straight Holmstedt line of a constant weight, the Luxemburg
root of the constant-1 weight, and the Lorentz norms of indicators.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import random_grids
from rhlab.grid import DyadicCube, integrate, level_cubes, make_grid
from rhlab.kcalc import (
    ConcaveCurve,
    CurveFamily,
    HolmstedtCurve,
    StepProductCurve,
    extrapolation_norm,
    grid_power,
    holmstedt_curve,
    k_l1_linf,
    k_lorentz_linf,
    k_lp_linf,
    k_weighted,
    llogl_integral_forms,
    llogl_norm,
    lorentz_norm,
    packing_average,
    packing_family,
    power_piece_integral,
)
from rhlab.rearrange import double_star, rearrangement


# ---------------------------------------------------------------------------
# ConcaveCurve


def test_concave_curve_validation():
    with pytest.raises(ValueError):
        ConcaveCurve([0.5, 1.0], [0.0, 1.0])  # must start at 0
    with pytest.raises(ValueError):
        ConcaveCurve([0.0, 0.5], [0.1, 1.0])  # nonzero start value
    with pytest.raises(ValueError):
        ConcaveCurve([0.0, 0.5, 0.5], [0.0, 1.0, 2.0])  # repeated abscissa
    with pytest.raises(ValueError):
        ConcaveCurve([0.0, 0.5, 1.0], [0.0, 1.0, 0.5])  # decreasing
    with pytest.raises(ValueError):
        ConcaveCurve([0.0, 0.5, 1.0], [0.0, 0.2, 1.0])  # convex kink


def test_k_l1_linf_step_exact():
    w = make_grid(1, 3, "step:2,1")
    K = k_l1_linf(w, w.base)
    assert list(K.t) == [0.0, 0.5, 1.0]
    assert list(K.v) == [0.0, 1.0, 1.5]
    assert K.value(0.25) == 0.5
    assert K.value(0.75) == 1.25
    assert K.value(3.0) == 1.5  # constant past the domain
    assert K.mass == 1.5
    A, B, s0, s1 = K.pieces()
    assert list(B) == [2.0, 1.0]
    assert list(A) == [0.0, 0.5]


@given(random_grids())
def test_k_curve_is_concave_with_exact_mass(w):
    K = k_l1_linf(w, w.base)
    assert np.all(np.diff(K.slopes) <= 0)
    assert np.all(K.slopes > 0)
    assert math.isclose(K.mass, integrate(w, w.base), rel_tol=1e-12)
    # K(t) = t * w**(t) on the domain
    r = rearrangement(w, w.base)
    for t in r.breaks:
        assert math.isclose(K.value(t), t * double_star(r, t), rel_tol=1e-12)


def test_k_lp_linf_step():
    w = make_grid(1, 2, "step:2,1")
    G = k_lp_linf(w, w.base, 2.0)
    # integral of (w*)^2 over (0, 1) is 4/2 + 1/2
    assert math.isclose(G.value(1.0), math.sqrt(2.5), rel_tol=1e-14)
    assert math.isclose(G.value(0.5), math.sqrt(2.0), rel_tol=1e-14)


@given(random_grids(max_level_1d=5, max_level_2d=3))
def test_k_lp_matches_quad(w):
    p = 1.7
    G = k_lp_linf(w, w.base, p)
    r = rearrangement(w, w.base)
    t = 0.7 * r.total_measure
    ref, err = quad(lambda s: float(r.star(s)) ** p, 0.0, t, points=r.breaks[r.breaks < t], limit=200)
    assert math.isclose(G.value(t), ref ** (1.0 / p), rel_tol=1e-9)


# ---------------------------------------------------------------------------
# power_piece_integral


@pytest.mark.parametrize(
    "A,B,s0,s1,q,E",
    [
        (0.5, 2.0, 0.25, 1.0, 2.0, -1.5),
        (1.0, 0.0, 0.5, 2.0, 3.0, 0.5),
        (0.0, 3.0, 0.0, 1.0, 2.0, -1.5),  # origin piece, integrable power
        (2.0, 1.0, 1.0, 4.0, 1.0, -1.0),
        (0.3, 0.7, 0.1, 0.2, 2.5, -2.2),
    ],
)
def test_power_piece_integral_vs_quad(A, B, s0, s1, q, E):
    got = power_piece_integral(np.array([A]), np.array([B]), np.array([s0]), np.array([s1]), q, E)[0]
    lo = s0 if s0 > 0 else s1 * 1e-12
    ref, err = quad(lambda s: (A + B * s) ** q * s**E, lo, s1, limit=300)
    assert math.isclose(got, ref, rel_tol=1e-8)


def test_power_piece_integral_log_branch():
    # A = 0 and q + E = -1 integrates B^q / s, a pure logarithm
    got = power_piece_integral(np.array([0.0]), np.array([2.0]), np.array([0.25]), np.array([1.0]), 3.0, -4.0)[0]
    assert math.isclose(got, 8.0 * math.log(4.0), rel_tol=1e-14)


@settings(max_examples=60)
@given(
    st.floats(0.0, 3.0),
    st.floats(0.1, 3.0),
    st.floats(0.05, 1.0),
    st.floats(1.1, 4.0),
    st.floats(1.0, 3.5),
    st.floats(-2.5, 1.5),
)
def test_power_piece_integral_fuzz(A, B, s0f, ratio, q, E):
    s0 = s0f
    s1 = s0 * ratio
    got = power_piece_integral(np.array([A]), np.array([B]), np.array([s0]), np.array([s1]), q, E)[0]
    ref, err = quad(lambda s: (A + B * s) ** q * s**E, s0, s1, limit=300)
    assert math.isclose(got, ref, rel_tol=1e-7, abs_tol=1e-12)


# ---------------------------------------------------------------------------
# Holmstedt


def test_holmstedt_const_is_straight_line():
    w = make_grid(1, 3, "const:1")
    H = holmstedt_curve(k_l1_linf(w, w.base), 0.5, 2.0)
    for t in (0.1, 0.35, 0.9):
        assert math.isclose(H.value(t), t, rel_tol=1e-12)


def test_holmstedt_parameter_validation():
    K = k_l1_linf(make_grid(1, 2, "const:1"), DyadicCube(0, (0,)))
    with pytest.raises(ValueError):
        HolmstedtCurve(K, 0.0, 2.0)
    with pytest.raises(ValueError):
        HolmstedtCurve(K, 1.0, 2.0)
    with pytest.raises(ValueError):
        HolmstedtCurve(K, 0.5, 0.5)


@given(random_grids(max_level_1d=5, max_level_2d=3))
def test_holmstedt_matches_quad(w):
    theta, q = 0.4, 2.5
    K = k_l1_linf(w, w.base)
    H = holmstedt_curve(K, theta, q)
    t = 0.6 * K.domain_end ** (1.0 - theta)
    T = t ** (1.0 / (1.0 - theta))
    pts = K.t[(K.t > 0) & (K.t < T)]
    ref, err = quad(
        lambda s: K.value(s) ** q * s ** (-theta * q - 1.0),
        0.0,
        T,
        points=pts,
        limit=300,
    )
    assert math.isclose(H.value(t), ref ** (1.0 / q), rel_tol=1e-7)


def test_holmstedt_past_domain_uses_constant_tail():
    w = make_grid(1, 2, "step:2,1")
    K = k_l1_linf(w, w.base)
    theta, q = 0.5, 2.0
    H = holmstedt_curve(K, theta, q)
    T = 4.0  # inner upper limit beyond K's domain
    t = T ** (1.0 - theta)
    ref, err = quad(
        lambda s: min(K.value(s), K.mass) ** q * s ** (-theta * q - 1.0),
        0.0,
        T,
        points=list(K.t[1:]) + [K.domain_end],
        limit=300,
    )
    assert math.isclose(H.value(t), ref ** (1.0 / q), rel_tol=1e-7)


# ---------------------------------------------------------------------------
# Lorentz


def test_lorentz_norm_const_frozen():
    w = make_grid(1, 4, "const:1")
    # f** = 1 on (0,1], 1/t beyond: the (2,2) integral is 1 + 1, the
    # (2,1) integral is 2 + 2
    assert math.isclose(lorentz_norm(w, w.base, 2.0, 2.0), math.sqrt(2.0), rel_tol=1e-12)
    assert math.isclose(lorentz_norm(w, w.base, 2.0, 1.0), 4.0, rel_tol=1e-12)


def test_lorentz_norm_scaling():
    w = make_grid(1, 4, "rand:13:lognormal:1")
    w3 = grid_power(w, 1.0)
    w3 = type(w)(w.d, w.L, w.cells * 3.0, label="scaled")
    a = lorentz_norm(w, w.base, 2.0, 3.0)
    b = lorentz_norm(w3, w3.base, 2.0, 3.0)
    assert math.isclose(b, 3.0 * a, rel_tol=1e-12)


@given(random_grids(max_level_1d=5, max_level_2d=3))
def test_lorentz_norm_matches_quad(w):
    p, q = 2.0, 2.5
    r = rearrangement(w, w.base)
    T = r.total_measure
    head, err = quad(
        lambda t: double_star(r, t) ** q * t ** (q / p - 1.0),
        0.0,
        T,
        points=r.breaks[:-1],
        limit=300,
    )
    # beyond T the maximal average is mass/t, integrable in closed form
    tail = r.mass**q * T ** (q / p - q) / (q - q / p)
    ref = (head + tail) ** (1.0 / q)
    assert math.isclose(lorentz_norm(w, w.base, p, q), ref, rel_tol=1e-7)


def test_k_lorentz_const_frozen():
    w = make_grid(1, 3, "const:1")
    for t in (0.125, 0.25, 0.5):
        assert math.isclose(k_lorentz_linf(w, w.base, 2.0, 2.0, t), t, rel_tol=1e-12)
        assert math.isclose(k_lorentz_linf(w, w.base, 2.0, 1.0, t), 2.0 * t, rel_tol=1e-12)


@given(random_grids(max_level_1d=5, max_level_2d=3))
def test_k_lorentz_matches_quad(w):
    p, q = 1.5, 2.0
    r = rearrangement(w, w.base)
    t = 0.8 * r.total_measure ** (1.0 / p)
    up = t**p
    ref, err = quad(
        lambda s: (float(r.star(s)) * s ** (1.0 / p)) ** q / s,
        0.0,
        up,
        points=r.breaks[r.breaks < up],
        limit=300,
    )
    assert math.isclose(k_lorentz_linf(w, w.base, p, q, t), ref ** (1.0 / q), rel_tol=1e-7)


def test_lorentz_parameter_validation():
    w = make_grid(1, 2, "const:1")
    with pytest.raises(ValueError):
        lorentz_norm(w, w.base, 1.0, 2.0)
    with pytest.raises(ValueError):
        lorentz_norm(w, w.base, 2.0, 0.5)
    with pytest.raises(ValueError):
        k_lorentz_linf(w, w.base, 2.0, 2.0, 0.0)


# ---------------------------------------------------------------------------
# L log L


def test_llogl_const_frozen():
    w = make_grid(1, 4, "const:1")
    lam = llogl_norm(w, w.base)
    assert math.isclose(lam, 1.2567506185377673, rel_tol=1e-10)
    # the root satisfies the defining integral with residual at machine scale
    u = 1.0 / lam
    assert abs(u * math.log(math.e + u) - 1.0) <= 1e-9


def test_llogl_integral_forms_const():
    w = make_grid(1, 4, "const:1")
    A, B = llogl_integral_forms(w, w.base)
    assert math.isclose(A, math.log(math.e + 1.0), rel_tol=1e-12)
    # B integrates log(e + 1/s) exactly: s log(e + 1/s) + (1/e) log(e s + 1)
    refB, err = quad(lambda s: math.log(math.e + 1.0 / s), 0.0, 1.0, limit=300)
    assert math.isclose(B, refB, rel_tol=1e-9)


@given(random_grids(max_level_1d=6, max_level_2d=3))
def test_llogl_norm_properties(w):
    lam = llogl_norm(w, w.base)
    cells = w.cube_cells(w.base)
    mean = float(cells.mean())
    assert lam >= mean * (1 - 1e-13)  # u log(e+u) >= u forces the root above the mean
    u = cells / lam
    assert abs(float(np.mean(u * np.log(np.e + u))) - 1.0) <= 1e-9
    # positive homogeneity of the Luxemburg functional
    w5 = type(w)(w.d, w.L, w.cells * 5.0, label="scaled")
    assert math.isclose(llogl_norm(w5, w5.base), 5.0 * lam, rel_tol=1e-9)


# ---------------------------------------------------------------------------
# extrapolation norm


def test_extrapolation_norm_const():
    w = make_grid(1, 3, "const:3")
    assert math.isclose(extrapolation_norm(w, w.base), 3.0, rel_tol=1e-12)


@given(random_grids(max_level_1d=5, max_level_2d=3))
def test_extrapolation_norm_matches_quad(w):
    K = k_l1_linf(w, w.base)
    ref, err = quad(lambda r: K.value(r) / r, 0.0, K.domain_end, points=K.t[1:-1], limit=300)
    assert math.isclose(extrapolation_norm(w, w.base), ref, rel_tol=1e-8)


# ---------------------------------------------------------------------------
# packings and the weighted K-functional


def test_packing_average_explicit():
    f = make_grid(1, 1, "step:2,1")
    ones = make_grid(1, 1, "const:1")
    pi = level_cubes(f, 1)
    S = packing_average(f, ones, pi)
    assert list(S.values) == [2.0, 1.0]
    assert list(S.w_measures) == [0.5, 0.5]
    vals, cum = S.rearrange_w()
    assert list(vals) == [2.0, 1.0]
    assert list(cum) == [0.5, 1.0]


def test_packing_average_rejects_overlap_and_empty():
    f = make_grid(1, 2, "const:1")
    ones = make_grid(1, 2, "const:1")
    with pytest.raises(ValueError):
        packing_average(f, ones, [f.base, DyadicCube(1, (0,))])
    with pytest.raises(ValueError):
        packing_average(f, ones, [])


def test_packing_family_structure():
    f = make_grid(1, 4, "rand:19:lognormal:1")
    Pi = packing_family(f, p=2.0)
    assert len(Pi.packings) >= f.L + 1
    # the first L+1 packings are the single-level tilings
    for lev in range(f.L + 1):
        assert [Q.level for Q in Pi.packings[lev]] == [lev] * (1 << lev)
    # every packing is disjoint
    for pi in Pi.packings:
        ranges = sorted(f.zrange(Q) for Q in pi)
        for (a0, b0), (a1, b1) in zip(ranges, ranges[1:]):
            assert a1 >= b0
    # deterministic
    Pi2 = packing_family(f, p=2.0)
    assert [[Q.addr() for Q in pi] for pi in Pi.packings] == [
        [Q.addr() for Q in pi] for pi in Pi2.packings
    ]


def test_k_weighted_reproduces_unweighted_k():
    # cells already sorted along the Morton order, so cube averages of the
    # level packings reproduce the plain rearrangement averages
    f = make_grid(1, 3, "step:2,1")
    ones = make_grid(1, 3, "const:1")
    Pi = packing_family(f, ones, p=1.0)
    K = k_l1_linf(f, f.base)
    # exact reproduction at the measures of the origin-chain cubes
    for t in (0.125, 0.25, 0.5):
        est = k_weighted(f, ones, 1.0, t, Pi)
        assert math.isclose(est.value, K.value(t), rel_tol=1e-12)
    # elsewhere the finite family still gives a certified lower bound
    est = k_weighted(f, ones, 1.0, 0.875, Pi)
    assert est.value <= K.value(0.875) * (1 + 1e-12)
    with pytest.raises(ValueError):
        k_weighted(f, ones, 1.0, 1.0, Pi)  # t must lie inside (0, w(Q))


def test_k_weighted_monotone_in_family():
    f = make_grid(1, 3, "rand:29:lognormal:1")
    ones = make_grid(1, 3, "const:1")
    Pi = packing_family(f, ones, p=1.0)
    small = type(Pi)(Pi.packings[:2], policy="explicit")
    for t in (0.25, 0.5):
        lo = k_weighted(f, ones, 1.0, t, small).value
        hi = k_weighted(f, ones, 1.0, t, Pi).value
        assert hi >= lo * (1 - 1e-15)


def test_step_product_two_sided():
    w = make_grid(1, 2, "step:2,1")
    phi = StepProductCurve(rearrangement(w, w.base))
    assert phi.domain_end == 1.0
    s, val = phi.two_sided(1.0)
    assert list(s) == [0.5, 0.5, 1.0]
    assert list(val) == [1.0, 0.5, 1.0]  # left value 0.5*2, right value 0.5*1, end 1*1
    assert phi.value(0.25) == 0.5


def test_curve_family_kinds():
    w = make_grid(1, 3, "step:2,1")
    F = CurveFamily(w)
    assert F.kind == "k"
    Fa = CurveFamily(w, kind="acks")
    assert Fa.kind == "acks"
