import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from phasered.trigpoly import (DeltaSeries, FreqVector, TrigPoly,
                               resolvent_solve)

rng = np.random.default_rng(20250811)


def random_poly(n_osc: int, n_terms: int = 4, max_freq: int = 3,
                seed=None) -> TrigPoly:
    r = np.random.default_rng(seed) if seed is not None else rng
    p = TrigPoly.constant(n_osc, float(r.normal()))
    for _ in range(n_terms):
        freqs = {int(i): int(r.integers(-max_freq, max_freq + 1))
                 for i in r.choice(n_osc, size=min(2, n_osc), replace=False)}
        build = TrigPoly.cosine if r.random() < 0.5 else TrigPoly.sine
        p = p + build(n_osc, freqs, shift=float(r.uniform(-3, 3)),
                      amp=float(r.normal()))
    return p


# ---- basics ----

def test_cosine_sine_pointwise():
    phi = rng.uniform(-np.pi, np.pi, size=(50, 3))
    p = TrigPoly.cosine(3, {0: 1, 2: -2}, shift=0.3)
    assert_allclose(p.eval(phi), np.cos(phi[:, 0] - 2 * phi[:, 2] + 0.3),
                    atol=1e-14)
    q = TrigPoly.sine(3, {1: 1}, shift=-0.7, amp=2.5)
    assert_allclose(q.eval(phi), 2.5 * np.sin(phi[:, 1] - 0.7), atol=1e-14)


def test_constant_fold():
    # zero frequency vector collapses to a constant
    p = TrigPoly.cosine(2, {0: 0}, shift=0.4)
    assert p.terms == TrigPoly.constant(2, np.cos(0.4)).terms


def test_immutable():
    p = TrigPoly.constant(2, 1.0)
    with pytest.raises(AttributeError):
        p.n_osc = 3
    s = DeltaSeries.of(p, 2)
    with pytest.raises(AttributeError):
        s.orders = ()


def test_prune():
    p = TrigPoly.cosine(2, {0: 1}, amp=1e-15)
    assert p.is_zero
    q = random_poly(2, seed=1)
    assert (q - q).is_zero


def test_product_oracle():
    # coefficient-level convolution must agree with pointwise products
    phi = rng.uniform(-np.pi, np.pi, size=(200, 3))
    for seed in range(5):
        a = random_poly(3, seed=2 * seed)
        b = random_poly(3, seed=2 * seed + 1)
        assert_allclose((a * b).eval(phi), a.eval(phi) * b.eval(phi),
                        rtol=0, atol=1e-11)


def test_scalar_and_linear():
    phi = rng.uniform(-np.pi, np.pi, size=(40, 2))
    a, b = random_poly(2, seed=10), random_poly(2, seed=11)
    assert_allclose((2.5 * a - b).eval(phi), 2.5 * a.eval(phi) - b.eval(phi),
                    atol=1e-12)
    with pytest.raises(TypeError):
        a * (1 + 2j)


def test_partial_matches_finite_difference():
    p = random_poly(3, seed=3)
    phi = rng.uniform(-np.pi, np.pi, size=(20, 3))
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (p.eval(phi + e) - p.eval(phi - e)) / (2 * h)
        assert_allclose(p.partial(j).eval(phi), fd, rtol=0, atol=1e-8)


def test_directional_derivative_is_sum_of_partials():
    p = random_poly(4, seed=4)
    phi = rng.uniform(-np.pi, np.pi, size=(30, 4))
    total = sum(p.partial(j).eval(phi) for j in range(4))
    assert_allclose(p.directional_derivative().eval(phi), total, atol=1e-12)


# ---- resolvent ----

def test_resolvent_hand_checked_mode():
    # m*R + rhs - omega*R' = 0 with rhs = e^{i phi}: R_1 = 1/(i*omega - m)
    rhs = TrigPoly.cosine(1, {0: 1})  # coefficient 1/2 at mode +1
    sol = resolvent_solve(rhs, m=-1.0, omega=1.0)
    assert_allclose(sol.coefficient({0: 1}) / rhs.coefficient({0: 1}),
                    0.5 - 0.5j, atol=1e-15)


def test_resolvent_pde_residual():
    m, omega = -0.7, 1.3
    for seed in range(4):
        rhs = random_poly(3, seed=100 + seed)
        sol = resolvent_solve(rhs, m=m, omega=omega)
        resid = m * sol + rhs - omega * sol.directional_derivative()
        phi = rng.uniform(-np.pi, np.pi, size=(50, 3))
        assert np.max(np.abs(resid.eval(phi))) < 1e-10


def test_resolvent_requires_nonzero_m():
    with pytest.raises(ValueError):
        resolvent_solve(TrigPoly.constant(1, 1.0), m=0.0, omega=1.0)


# ---- Hermitian closure (property) ----

prim = st.tuples(st.integers(0, 2), st.integers(-3, 3),
                 st.floats(-2, 2, allow_nan=False),
                 st.floats(-3, 3, allow_nan=False),
                 st.booleans())


@settings(max_examples=60, deadline=None)
@given(st.lists(prim, min_size=1, max_size=5), st.lists(prim, min_size=1, max_size=5))
def test_hermitian_closed_under_ops(terms_a, terms_b):
    def build(terms):
        p = TrigPoly.zero(3)
        for idx, freq, amp, shift, use_cos in terms:
            fn = TrigPoly.cosine if use_cos else TrigPoly.sine
            p = p + fn(3, {idx: freq}, shift=shift, amp=amp)
        return p

    a, b = build(terms_a), build(terms_b)
    # every constructor/operation re-checks the conjugate-pair constraint,
    # so surviving without ValueError is the property under test
    for p in (a + b, a * b, -2.0 * a, a.partial(0), a.directional_derivative(),
              resolvent_solve(a, m=-1.0, omega=1.0)):
        for fv, c in p.terms.items():
            assert p.terms[-fv] == c.conjugate()
        p.eval(np.zeros(3))  # real-evaluation assertion built in


def test_hermitian_violation_rejected():
    fv = FreqVector.make({0: 1})
    with pytest.raises(ValueError):
        TrigPoly(1, {fv: 1.0 + 0j, -fv: 0.5 + 0j})


# ---- serialization / printing ----

def test_json_round_trip():
    p = random_poly(3, seed=7)
    q = TrigPoly.from_json(p.to_json())
    assert q == p
    phi = rng.uniform(-np.pi, np.pi, size=(10, 3))
    assert_allclose(q.eval(phi), p.eval(phi), atol=0)


def test_str_sorted_by_degree():
    p = (TrigPoly.constant(2, 1.0) + TrigPoly.cosine(2, {0: 2})
         + TrigPoly.sine(2, {1: 1}))
    lines = str(p).splitlines()
    assert "e^(i(0))" in lines[0]
    assert "phi1" in lines[1] and "phi1" in lines[2]  # degree 1 pair next


# ---- DeltaSeries ----

def test_series_product_matches_poly_convolution():
    phi = rng.uniform(-np.pi, np.pi, size=(1, 3))
    a = DeltaSeries([random_poly(3, seed=20 + j) for j in range(3)])
    b = DeltaSeries([random_poly(3, seed=30 + j) for j in range(3)])
    prod = a * b
    ca = [p.eval(phi)[0] for p in a.orders]
    cb = [p.eval(phi)[0] for p in b.orders]
    expect = np.polymul(ca[::-1], cb[::-1])[::-1][:3]
    got = [p.eval(phi)[0] for p in prod.orders]
    assert_allclose(got, expect, atol=1e-11)


def test_series_inverse_of_one_plus_delta_g():
    # (1 + d*g) * (1 - d*g + d^2*g^2) = 1 + O(d^3)
    g = TrigPoly.sine(2, {0: 1})
    one = TrigPoly.constant(2, 1.0)
    u = DeltaSeries([one, g, TrigPoly.zero(2)])
    inv = DeltaSeries([one, -1.0 * g, g * g])
    prod = u * inv
    assert prod.term(0) == one
    assert prod.term(1).is_zero and prod.term(2).is_zero


def test_series_shift():
    g = TrigPoly.sine(2, {0: 1})
    s = DeltaSeries([g, g, g]).shift(2)
    assert s.term(0).is_zero and s.term(1).is_zero
    assert s.term(2) == g
    assert DeltaSeries([g, g]).shift(3).term(1).is_zero


def test_series_eval_horner_equivalent():
    orders = [random_poly(2, seed=40 + j) for j in range(3)]
    s = DeltaSeries(orders)
    phi = rng.uniform(-np.pi, np.pi, size=(5, 2))
    d = 0.17
    manual = orders[0].eval(phi) + d * orders[1].eval(phi) + d**2 * orders[2].eval(phi)
    assert_allclose(s.eval(phi, d), manual, atol=1e-13)
