"""Almost-increase constants and index estimators.

The analytic oracles: a power curve s^delta has index exactly delta; the
constant-weight K-curve has family index 1 with constant 1; s(2-s) on (0,1)
with a half window has almost-increase constant 4/3 at delta 1; the reverse
Hardy residual of s^(1/2) is 2. Estimator metadata is pinned down too: the
bracketing certificate around the cap threshold, the exact beta/q shift
identity, witness determinism, and scaling invariance.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_grids
from rhlab.grid import WeightGrid, make_grid
from rhlab.indices import (
    acks_index,
    ai_constant,
    family_index,
    hardy_residual,
    samko_alpha,
    single_index,
)
from rhlab.kcalc import ConcaveCurve, CurveFamily, k_l1_linf
from rhlab.weights import standard_corpus


# ---------------------------------------------------------------------------
# ai_constant


def test_ai_const_weight_curve():
    w = make_grid(1, 4, "const:1")
    K = k_l1_linf(w, w.base)
    for gamma in (1.0, 0.5, 0.125):
        c = ai_constant(K, 1.0, gamma)
        assert math.isclose(c.value, 1.0, rel_tol=1e-12)
    # delta = 0 asks for plain monotonicity, true of any K-curve
    assert math.isclose(ai_constant(K, 0.0).value, 1.0, rel_tol=1e-12)


def test_ai_quadratic_callable():
    c = ai_constant(lambda s: s * (2.0 - s), delta=1.0, gamma=0.5, domain_end=1.0)
    # ratio (2-s)/(2-t), maximized as s -> 0 with t at the window end
    assert math.isclose(c.value, 4.0 / 3.0, rel_tol=1e-6)
    assert c.t == 0.5


def test_ai_unbounded_past_delta_one():
    w = make_grid(1, 4, "const:1")
    K = k_l1_linf(w, w.base)
    assert ai_constant(K, 1.2).value == math.inf


def test_ai_parameter_validation():
    w = make_grid(1, 3, "const:1")
    K = k_l1_linf(w, w.base)
    with pytest.raises(ValueError):
        ai_constant(K, -0.1)
    with pytest.raises(ValueError):
        ai_constant(K, 0.5, gamma=1.5)
    with pytest.raises(ValueError):
        ai_constant(lambda s: s, 0.5)  # callable needs domain_end


@given(random_grids(max_level_1d=6, max_level_2d=3), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ai_monotone_in_delta(w, d1, d2):
    lo, hi = sorted((d1, d2))
    K = k_l1_linf(w, w.base)
    assert ai_constant(K, lo).value <= ai_constant(K, hi).value * (1 + 1e-12)


@given(random_grids(max_level_1d=6, max_level_2d=3), st.sampled_from([0.25, 0.5, 1.0]))
def test_ai_monotone_in_gamma(w, g):
    K = k_l1_linf(w, w.base)
    smaller = ai_constant(K, 0.6, g / 2).value
    larger = ai_constant(K, 0.6, g).value
    assert smaller <= larger * (1 + 1e-12)


def test_ai_qpower_identity():
    # C(phi^q, delta) = C(phi, delta/q)^q, exact on a shared sample grid
    w = make_grid(1, 5, "rand:41:lognormal:1")
    K = k_l1_linf(w, w.base)
    q, delta = 2.5, 0.8
    a = ai_constant(lambda s: K.value(s) ** q, delta, domain_end=K.domain_end).value
    b = ai_constant(lambda s: K.value(s), delta / q, domain_end=K.domain_end).value
    assert math.isclose(a, b**q, rel_tol=1e-12)


# ---------------------------------------------------------------------------
# single_index and samko_alpha


def test_single_index_powers():
    t = np.geomspace(1e-6, 1.0, 20001)
    assert abs(single_index((t, np.sqrt(t))).delta_hat - 0.5) <= 1e-3
    assert abs(single_index((t, t)).delta_hat - 1.0) <= 1e-3


def test_single_index_oscillating_log():
    t = np.geomspace(1e-6, 1.0, 20001)
    phi = t * (1.0 + np.abs(np.sin(np.log(t))))
    est = single_index((t, phi), C_cap=2.0)
    assert 0.99 <= est.delta_hat <= 1.0


def test_single_index_flat_curve_is_zero():
    # a constant has no positive index: the binding ratio needs the whole
    # window, which the knee rule rejects
    t = np.geomspace(1e-6, 1.0, 4097)
    est = single_index((t, np.ones_like(t)))
    assert est.delta_hat == 0.0


def test_single_index_validation():
    t = np.geomspace(1e-3, 1.0, 100)
    with pytest.raises(ValueError):
        single_index((t, t), C_cap=1.0)
    with pytest.raises(ValueError):
        single_index((t, t), gamma=0.0)


def test_samko_alpha_powers():
    t = np.geomspace(1e-8, 1.0, 50001)
    for delta in (0.3, 0.7, 1.0):
        assert abs(samko_alpha((t, t**delta)) - delta) <= 0.01
    assert samko_alpha((t, np.ones_like(t))) == 0.0


def test_samko_agrees_with_single_index_classification():
    # positive index and positive alpha go together on a mixed corpus
    curves = []
    for i in range(15):
        w = make_grid(1, 6, f"rand:{500 + i}:lognormal:1")
        K = k_l1_linf(w, w.base)
        ts = np.geomspace(K.t[1], K.domain_end, 4001)
        curves.append((ts, K.value(ts)))
    flat = np.geomspace(1e-6, 1.0, 4001)
    for c in (1.0, 3.0):
        curves.append((flat, np.full_like(flat, c)))
    for ts, vs in curves:
        ind = single_index((ts, vs)).delta_hat
        alpha = samko_alpha((ts, vs))
        assert (ind > 0.02) == (alpha > 0.02)


# ---------------------------------------------------------------------------
# family_index


def test_family_index_const():
    w = make_grid(1, 6, "const:1")
    est = family_index(CurveFamily(w))
    assert abs(est.delta_hat - 1.0) <= 1e-4
    assert est.cap == 16.0
    assert est.monotone
    # the constant family is almost increasing with constant exactly 1
    assert est.cap_value_at <= 1.0 + 1e-12


def test_family_index_pow_half():
    w = make_grid(1, 10, "pow:-0.5")
    est = family_index(CurveFamily(w))
    assert abs(est.delta_hat - 0.5) <= 0.05


def test_family_index_certificate():
    for spec in ("step:2,1", "rand:61:lognormal:1"):
        w = make_grid(1, 7, spec)
        est = family_index(CurveFamily(w))
        assert est.cap_value_at <= est.cap + 1e-12
        if math.isfinite(est.cap_value_beyond):
            assert est.cap_value_beyond > est.cap
        assert est.delta_cap >= est.delta_hat - 1e-12


def test_family_index_shift_identity():
    w = make_grid(1, 8, "rand:71:lognormal:1")
    base = family_index(CurveFamily(w), beta=0.0, q=2.0)
    shifted = family_index(CurveFamily(w), beta=0.25, q=2.0)
    assert abs(shifted.delta_hat - (base.delta_hat - 0.5)) <= 2e-4


def test_family_index_scaling_invariance():
    w = make_grid(1, 7, "rand:83:lognormal:1")
    ref = family_index(CurveFamily(w))
    for c in (1e-3, 7.0, 1e4):
        ws = WeightGrid(w.d, w.L, w.cells * c, label="scaled")
        est = family_index(CurveFamily(ws))
        assert est.delta_hat == ref.delta_hat
        assert est.witness == ref.witness


def test_family_index_witness_deterministic():
    w = make_grid(2, 4, "rand:97:lognormal:1")
    a = family_index(CurveFamily(w))
    b = family_index(CurveFamily(w))
    assert a.witness == b.witness
    assert a.delta_hat == b.delta_hat
    # witness names a cube of the grid
    addr, s, t = a.witness
    assert ":" in addr and 0 < s <= t


def test_family_index_validation():
    w = make_grid(1, 4, "const:1")
    with pytest.raises(ValueError):
        family_index(CurveFamily(w), C_cap=0.5)
    with pytest.raises(ValueError):
        family_index(CurveFamily(w), beta=1.0)
    with pytest.raises(ValueError):
        family_index(CurveFamily(w), q=0.5)
    with pytest.raises(ValueError):
        family_index(CurveFamily(w), gamma_grid=())


@given(st.integers(0, 10**6))
@settings(max_examples=15)
def test_family_index_in_range(seed):
    w = make_grid(1, 6, f"rand:{seed}:lognormal:1")
    est = family_index(CurveFamily(w))
    assert 0.0 <= est.delta_hat <= 1.0
    assert est.monotone


# ---------------------------------------------------------------------------
# acks_index


def test_acks_index_const():
    w = make_grid(1, 6, "const:1")
    est = acks_index(w)
    assert est.lambda_hat is not None
    assert abs(est.lambda_hat) <= 1e-4


def test_acks_index_pow_half():
    w = make_grid(1, 10, "pow:-0.5")
    est = acks_index(w)
    assert abs(est.lambda_hat - 0.5) <= 0.05


def test_acks_lambda_is_one_minus_delta():
    w = make_grid(1, 6, "rand:101:lognormal:1")
    est = acks_index(w)
    assert math.isclose(est.lambda_hat, 1.0 - est.delta_hat, rel_tol=0, abs_tol=1e-15)


# ---------------------------------------------------------------------------
# hardy_residual


def test_hardy_residual_identity_curve():
    w = make_grid(1, 4, "const:1")
    K = k_l1_linf(w, w.base)  # K(s) = s exactly
    assert math.isclose(hardy_residual(K), 1.0, rel_tol=1e-12)


def test_hardy_residual_sqrt():
    ts = np.linspace(0.0, 1.0, 4097)
    phi = ConcaveCurve(ts, np.sqrt(ts))
    assert abs(hardy_residual(phi) - 2.0) <= 0.05


def test_hardy_residual_step_frozen():
    w = make_grid(1, 3, "step:2,1")
    K = k_l1_linf(w, w.base)
    # sup sits at t = 1: (1 + integral_{1/2}^1 (0.5 + s)/s ds) / 1.5
    expected = (1.5 + 0.5 * math.log(2.0)) / 1.5
    assert math.isclose(hardy_residual(K), expected, rel_tol=1e-12)


def test_hardy_residual_tracks_singularity_strength():
    # K of pow:a behaves like t^(1+a) near 0, whose residual is 1/(1+a)
    got = {}
    for a in (-0.25, -0.5, -0.75):
        w = make_grid(1, 12, f"pow:{a}")
        got[a] = hardy_residual(k_l1_linf(w, w.base))
        assert math.isclose(got[a], 1.0 / (1.0 + a), rel_tol=0.1)
    assert got[-0.75] > got[-0.5] > got[-0.25]


def test_hardy_residual_positive_on_corpus():
    for w in standard_corpus(1, seed=5, n_random=3):
        r = hardy_residual(k_l1_linf(w, w.base))
        assert 1.0 <= r < math.inf
