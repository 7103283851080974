"""Property checks with randomly generated measures, kernels and potentials."""

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fkjump.measures import apply_kernel, boltzmann_gibbs, dobrushin, doeblin_ratio, min_row_overlap, \
    tv_distance, tv_sup
from fkjump.models import DiscreteModel
from fkjump.oracle import fk_transform, semigroup
from fkjump.selection import SelectionCase, build_selection_kernel, case3_rates, jump_generator

SIZES = st.integers(2, 6)
POSITIVE = st.floats(0.05, 1.0)


@st.composite
def probability(draw, n):
    w = draw(arrays(float, n, elements=st.floats(0.0, 1.0)))
    w = w + 1e-3
    return w / w.sum()


@st.composite
def kernel(draw, n, floor=0.0):
    rows = draw(arrays(float, (n, n), elements=POSITIVE))
    rows = rows + floor
    return rows / rows.sum(axis=1, keepdims=True)


@st.composite
def potential(draw, n, case):
    v = draw(arrays(float, n, elements=st.floats(-3.0, 3.0)))
    if case in (SelectionCase.CASE1, SelectionCase.UNIFORM):
        return v - v.max()
    if case is SelectionCase.CASE2:
        return v - v.min()
    return v


@st.composite
def measure_pair(draw):
    n = draw(SIZES)
    return draw(probability(n)), draw(probability(n)), draw(probability(n))


@given(measure_pair())
def test_tv_is_a_metric(triple):
    mu, nu, xi = triple
    d = tv_distance(mu, nu)
    assert 0.0 <= d <= 1.0
    assert d == tv_distance(nu, mu)
    assert tv_distance(mu, mu) == 0.0
    assert d <= tv_distance(mu, xi) + tv_distance(xi, nu) + 1e-12
    assert abs(d - tv_sup(mu, nu)) < 1e-12


@given(SIZES.flatmap(lambda n: st.tuples(probability(n), arrays(float, n, elements=POSITIVE))),
       st.floats(1e-3, 1e3))
def test_boltzmann_gibbs_scale_invariant(pair, c):
    mu, g = pair
    np.testing.assert_allclose(boltzmann_gibbs(mu, c * g), boltzmann_gibbs(mu, g), atol=1e-13)


@given(SIZES.flatmap(lambda n: st.tuples(probability(n), kernel(n))))
def test_kernel_preserves_probabilities(pair):
    mu, k = pair
    out = apply_kernel(mu, k)
    assert np.all(out >= 0.0)
    assert abs(out.sum() - 1.0) < 1e-12


CASES = st.sampled_from([SelectionCase.CASE1, SelectionCase.CASE2, SelectionCase.CASE3])


@st.composite
def selection_input(draw, cases=CASES):
    case = draw(cases)
    n = draw(SIZES)
    return case, draw(potential(n, case)), draw(st.integers(1, 64)), draw(probability(n))


@given(selection_input())
def test_selection_kernel_transports(inp):
    case, v, m, mu = inp
    sk = build_selection_kernel(case, v, m, mu)
    assert np.all(sk.kernel >= -1e-15)
    np.testing.assert_allclose(sk.kernel.sum(axis=1), 1.0, atol=1e-12)
    assert sk.transport_residual(v) < 1e-12


@given(selection_input(st.sampled_from(list(SelectionCase))))
def test_weak_correlation_identity(inp):
    case, v, _, mu = inp
    if case is SelectionCase.PLUS_MINUS:
        v = v - 1.0
    f = np.linspace(-1.0, 2.0, v.size)
    gen = jump_generator(case, v, mu)
    np.testing.assert_allclose(gen.sum(axis=1), 0.0, atol=1e-12)
    lhs = mu @ gen @ f
    rhs = mu @ (v * f) - (mu @ v) * (mu @ f)
    assert abs(lhs - rhs) < 1e-11


@given(selection_input(st.just(SelectionCase.CASE3)))
def test_case3_rejection_is_probability(inp):
    _, v, m, mu = inp
    a, w = case3_rates(v, m, mu)
    assert np.all(a >= 0.0) and np.all(a <= 1.0 + 1e-15)
    assert np.all(w >= 0.0)


@given(SIZES.flatmap(lambda n: st.tuples(kernel(n), kernel(n), probability(n), probability(n))))
def test_dobrushin_contraction(quad):
    k1, k2, mu, nu = quad
    b1, b2 = dobrushin(k1), dobrushin(k2)
    assert 0.0 <= b1 <= 1.0
    assert abs(b1 + min_row_overlap(k1) - 1.0) < 1e-12
    assert tv_distance(mu @ k1, nu @ k1) <= b1 * tv_distance(mu, nu) + 1e-12
    assert dobrushin(k1 @ k2) <= b1 * b2 + 1e-12
    # a Doeblin ratio rho gives a provable bound beta <= 1 - rho
    assert b1 <= 1.0 - doeblin_ratio(k1) + 1e-12


@settings(max_examples=50)
@given(SIZES.flatmap(lambda n: st.tuples(
    probability(n), probability(n), probability(n),
    st.lists(kernel(n), min_size=3, max_size=3),
    st.lists(arrays(float, n, elements=st.floats(0.2, 5.0)), min_size=3, max_size=3))))
def test_feynman_kac_contraction(data):
    eta0, mu, nu, kernels, pots = data
    model = DiscreteModel(eta0, kernels, pots)
    for k in range(3):
        for n in range(k + 1, 4):
            sg = semigroup(model, k, n)
            d = tv_distance(fk_transform(model, k, n, mu), fk_transform(model, k, n, nu))
            assert d <= sg.g * sg.beta * tv_distance(mu, nu) + 1e-12
            # P_{k-1,n} = R P_{k,n} for a Markov R, so an earlier start never mixes worse
            if k > 0:
                assert semigroup(model, k - 1, n).beta <= sg.beta + 1e-12
