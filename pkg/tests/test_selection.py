import numpy as np
import pytest

from fkjump.errors import SignViolation
from fkjump.measures import boltzmann_gibbs, tv_distance
from fkjump.selection import (
    SelectionCase,
    build_selection_kernel,
    case3_rates,
    expansion_remainder,
    jump_generator,
    plus_minus_generator,
    recycler_gap,
)

CASES = ("case1", "case2", "case3")


def random_potential(rng, case, k):
    if case == "case1":
        return -rng.uniform(0, 2, k)
    if case == "case2":
        return rng.uniform(0, 2, k)
    return rng.uniform(-2, 2, k)


def loop_kernel(case, v, m, mu):
    """Entry-by-entry assembly straight from the row formulas."""
    n = len(v)
    g = [np.exp(v[x] / m) for x in range(n)]
    s = np.zeros((n, n))
    mug = sum(mu[x] * g[x] for x in range(n))
    for x in range(n):
        if case == "case1":
            for y in range(n):
                s[x, y] = g[x] * (x == y) + (1 - g[x]) * mu[y] * g[y] / mug
        elif case == "case2":
            w = [mu[y] * (g[y] - 1) for y in range(n)]
            for y in range(n):
                s[x, y] = (x == y) / mug + (1 - 1 / mug) * w[y] / sum(w)
        else:
            w = [mu[y] * max(g[y] - g[x], 0.0) for y in range(n)]
            a = sum(w) / mug
            for y in range(n):
                s[x, y] = (1 - a) * (x == y) + (a * w[y] / sum(w) if sum(w) > 0 else 0.0)
    return s


def loop_generator(case, v, mu):
    n = len(v)
    gen = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            if case == "case1":
                gen[x, y] = -v[x] * mu[y]
            elif case == "case2":
                gen[x, y] = v[y] * mu[y]
            else:
                gen[x, y] = max(v[y] - v[x], 0.0) * mu[y]
        gen[x, x] = -gen[x].sum()
    return gen


class TestBuildSelectionKernel:
    def test_case1_zero_potential_is_identity(self):
        s = build_selection_kernel("case1", np.zeros(3), 4, [0.2, 0.3, 0.5]).kernel
        np.testing.assert_array_equal(s, np.eye(3))

    def test_case1_hand_example(self):
        sk = build_selection_kernel("case1", [0.0, -np.log(2.0)], 1, [0.5, 0.5])
        np.testing.assert_allclose(sk.kernel, [[1, 0], [1 / 3, 2 / 3]], atol=1e-15)
        np.testing.assert_allclose(sk.mu @ sk.kernel, [2 / 3, 1 / 3], atol=1e-15)

    def test_case3_constant_potential_is_identity(self):
        s = build_selection_kernel("case3", np.full(3, 0.7), 5, [0.2, 0.3, 0.5]).kernel
        np.testing.assert_array_equal(s, np.eye(3))

    def test_case2_zero_potential_is_identity(self):
        s = build_selection_kernel("case2", np.zeros(3), 5, [0.2, 0.3, 0.5]).kernel
        np.testing.assert_array_equal(s, np.eye(3))

    @pytest.mark.parametrize("case", CASES)
    def test_matches_loop_assembly(self, case):
        rng = np.random.default_rng(11)
        for _ in range(30):
            k = int(rng.integers(2, 6))
            v = random_potential(rng, case, k)
            mu = rng.dirichlet(np.ones(k))
            m = int(rng.integers(1, 50))
            np.testing.assert_allclose(build_selection_kernel(case, v, m, mu).kernel,
                                       loop_kernel(case, v, m, mu), atol=1e-13)

    @pytest.mark.parametrize("case", CASES + ("uniform",))
    def test_stochastic_and_transport(self, case):
        rng = np.random.default_rng(12)
        for _ in range(200):
            k = int(rng.integers(2, 8))
            v = random_potential(rng, "case1" if case == "uniform" else case, k)
            mu = rng.dirichlet(np.ones(k))
            sk = build_selection_kernel(case, v, int(rng.integers(1, 257)), mu)
            assert np.all(sk.kernel >= 0)
            np.testing.assert_allclose(sk.kernel.sum(axis=1), 1.0, atol=1e-12)
            if case != "uniform":
                assert sk.transport_residual(v) < 1e-12

    def test_sign_violations(self):
        with pytest.raises(SignViolation):
            build_selection_kernel("case1", [0.1, -0.2], 2, [0.5, 0.5])
        with pytest.raises(SignViolation):
            build_selection_kernel("case2", [0.1, -0.2], 2, [0.5, 0.5])
        with pytest.raises(SignViolation):
            build_selection_kernel("uniform", [0.1, 0.0], 2, [0.5, 0.5])

    def test_plus_minus_has_no_kernel(self):
        with pytest.raises(ValueError):
            build_selection_kernel("plusminus", [0.1, 0.2], 2, [0.5, 0.5])

    def test_case_parse(self):
        assert SelectionCase.parse("Case-1") is SelectionCase.CASE1
        assert SelectionCase.parse("plus_minus") is SelectionCase.PLUS_MINUS
        with pytest.raises(ValueError, match="unknown selection case"):
            SelectionCase.parse("case4")


class TestCase3Rates:
    def test_rejection_in_unit_interval(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            k = int(rng.integers(2, 8))
            a, w = case3_rates(rng.uniform(-5, 5, k), int(rng.integers(1, 10)), rng.dirichlet(np.ones(k)))
            assert np.all((a >= 0) & (a <= 1))
            assert np.all(w >= 0)


class TestJumpGenerator:
    def test_zero_cases(self):
        mu = [0.2, 0.3, 0.5]
        np.testing.assert_array_equal(jump_generator("case1", np.zeros(3), mu), np.zeros((3, 3)))
        np.testing.assert_array_equal(jump_generator("case3", np.full(3, 2.0), mu), np.zeros((3, 3)))

    def test_case1_hand_example(self):
        gen = jump_generator("case1", [0.0, -1.0], [0.5, 0.5])
        np.testing.assert_allclose(gen, [[0, 0], [0.5, -0.5]])

    @pytest.mark.parametrize("case", CASES)
    def test_matches_loop_assembly(self, case):
        rng = np.random.default_rng(14)
        v = random_potential(rng, case, 5)
        mu = rng.dirichlet(np.ones(5))
        np.testing.assert_allclose(jump_generator(case, v, mu), loop_generator(case, v, mu), atol=1e-14)

    @pytest.mark.parametrize("case", CASES + ("plusminus",))
    def test_weak_correlation_identity(self, case):
        rng = np.random.default_rng(15)
        for _ in range(100):
            k = int(rng.integers(2, 7))
            v = random_potential(rng, "case3" if case == "plusminus" else case, k)
            mu = rng.dirichlet(np.ones(k))
            f = rng.normal(size=k)
            gen = jump_generator(case, v, mu)
            np.testing.assert_allclose(gen.sum(axis=1), 0.0, atol=1e-12)
            assert mu @ gen @ f == pytest.approx(mu @ (v * f) - (mu @ v) * (mu @ f), abs=1e-12)

    def test_sign_violation(self):
        with pytest.raises(SignViolation):
            jump_generator("case1", [0.5, 0.0], [0.5, 0.5])


class TestPlusMinus:
    def test_constant_potential(self):
        lp, lm = plus_minus_generator(np.full(3, 1.2), [0.2, 0.3, 0.5])
        np.testing.assert_allclose(lp, 0.0, atol=1e-15)
        np.testing.assert_allclose(lm, 0.0, atol=1e-15)

    def test_sign_split(self):
        lp, lm = plus_minus_generator([0.0, 1.0], [0.5, 0.5])
        # [V - 0.5]_- = (0.5, 0): L-(0, .) = 0.5 (mu - delta_0)
        np.testing.assert_allclose(lm, [[-0.25, 0.25], [0.0, 0.0]])
        # [V - 0.5]_+ = (0, 0.5): L+(x, 1) = 0.5 * 0.5 off the diagonal
        np.testing.assert_allclose(lp, [[-0.25, 0.25], [0.0, 0.0]])

    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(16)
        lp, lm = plus_minus_generator(rng.normal(size=6), rng.dirichlet(np.ones(6)))
        for g in (lp, lm):
            np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-14)
            off = g - np.diag(np.diag(g))
            assert np.all(off >= 0)


class TestExpansionRemainder:
    def test_zero_potential(self):
        assert expansion_remainder("case1", np.zeros(3), 7, [0.2, 0.3, 0.5]) == 0.0

    def test_case2_brute_force(self):
        v, mu, m = np.array([0.1, 0.2]), np.array([0.5, 0.5]), 16
        r = m * m * (loop_kernel("case2", v, m, mu) - np.eye(2) - loop_generator("case2", v, mu) / m)
        assert expansion_remainder("case2", v, m, mu) == pytest.approx(np.abs(r).sum(axis=1).max(), rel=1e-9)

    def test_case1_bounded_in_m(self):
        v, mu = np.array([0.0, -0.5, -1.5]), np.array([0.3, 0.3, 0.4])
        rem = [expansion_remainder("case1", v, m, mu) for m in (1, 2, 4, 8, 16, 32, 64, 128, 256)]
        assert max(rem) / min(rem) < 10


class TestProximity:
    def test_recycler_and_kernel_bounds(self):
        rng = np.random.default_rng(17)
        for m in range(1, 65):
            k = int(rng.integers(2, 7))
            u = rng.uniform(0, 3, k)
            mu = rng.dirichlet(np.ones(k))
            s = build_selection_kernel("case1", -u, m, mu).kernel
            st = build_selection_kernel("uniform", -u, m, mu).kernel
            norm = np.abs(u).max()
            assert max(tv_distance(a, b) for a, b in zip(s, st)) <= norm ** 2 / m ** 2
            assert recycler_gap(-u, m, mu) <= norm / m
            assert recycler_gap(-u, m, mu) == pytest.approx(
                tv_distance(boltzmann_gibbs(mu, np.exp(-u / m)), mu))
