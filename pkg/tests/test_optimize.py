import itertools
import math

import numpy as np
import pytest

from distsketch import optimize as opt
from distsketch import valuation as val
from distsketch.evaluation import set_function
from distsketch.exceptions import CapacityError

from conftest import random_discrete


def modular(weights):
    return lambda S: float(sum(weights[i - 1] for i in S))


class TestGreedy:
    def test_modular(self):
        res = opt.greedy_select(modular([5, 3, 1]), [1, 2, 3], 2)
        assert res.chosen == (1, 2) and res.objective == 8.0

    def test_k_zero(self):
        res = opt.greedy_select(modular([5, 3, 1]), [1, 2, 3], 0)
        assert res.chosen == () and res.objective == 0.0 and res.oracle_calls == 0

    def test_rejects_large_k(self):
        with pytest.raises(ValueError):
            opt.greedy_select(modular([1, 2]), [1, 2], 3)

    @pytest.mark.parametrize("n,k", [(8, 3), (5, 5), (10, 1)])
    def test_call_count(self, n, k):
        res = opt.greedy_select(modular(list(range(n))), range(1, n + 1), k)
        assert res.oracle_calls == sum(n - t + 1 for t in range(1, k + 1))

    def test_tie_goes_to_lowest_id(self):
        res = opt.greedy_select(modular([1, 1, 1]), [3, 1, 2], 1)
        assert res.chosen == (1,)

    def test_trace(self):
        res = opt.greedy_select(modular([5, 3, 1]), [1, 2, 3], 3)
        assert res.trace == ((1, 5.0), (2, 3.0), (3, 1.0))

    @pytest.mark.parametrize("seed", range(20))
    def test_lazy_matches_plain(self, seed):
        rng = np.random.default_rng(seed)
        laws = {i: random_discrete(rng, 5) for i in range(1, 9)}
        oracle = set_function(val.ConcaveOfSum(val.Sqrt()), laws)
        plain = opt.greedy_select(oracle, range(1, 9), 4)
        lazy = opt.greedy_select(oracle, range(1, 9), 4, lazy=True)
        assert plain.chosen == lazy.chosen
        assert lazy.oracle_calls <= plain.oracle_calls + 8

    def test_deterministic(self, rng):
        laws = {i: random_discrete(rng, 4) for i in range(1, 7)}
        oracle = set_function(val.Max(), laws)
        assert opt.greedy_select(oracle, range(1, 7), 3) == opt.greedy_select(oracle, range(1, 7), 3)


class TestBruteForce:
    def test_modular(self):
        res = opt.brute_force_best(modular([5, 3, 1]), [1, 2, 3], 2)
        assert res.chosen == (1, 2) and res.objective == 8.0

    def test_k_equals_n(self):
        assert opt.brute_force_best(modular([1, 2, 3]), [1, 2, 3], 3).chosen == (1, 2, 3)

    def test_cap(self):
        with pytest.raises(CapacityError):
            opt.brute_force_best(modular([1] * 30), range(1, 31), 10, cap=1000)

    @pytest.mark.parametrize("seed", range(30))
    def test_greedy_guarantee(self, seed):
        rng = np.random.default_rng(seed)
        laws = {i: random_discrete(rng, 4) for i in range(1, 9)}
        oracle = set_function(val.Max(), laws)
        g = opt.greedy_select(oracle, range(1, 9), 3)
        b = opt.brute_force_best(oracle, range(1, 9), 3)
        assert b.objective >= g.objective - 1e-12
        assert g.objective >= (1 - 1 / math.e) * b.objective - 1e-12


class TestWelfare:
    def test_single_part_equals_greedy(self, rng):
        laws = {i: random_discrete(rng, 4) for i in range(1, 7)}
        oracle = set_function(val.CES(2.0), laws)
        w = opt.greedy_welfare([oracle], range(1, 7), [3])
        g = opt.greedy_select(oracle, range(1, 7), 3)
        assert w.parts == (g.chosen,) and w.welfare == pytest.approx(g.objective)

    def test_modular_disjoint_tops(self):
        o1 = modular([10, 9, 0, 0])
        o2 = modular([9, 0, 10, 8])
        w = opt.greedy_welfare([o1, o2], [1, 2, 3, 4], [2, 2])
        b = opt.brute_force_welfare([o1, o2], [1, 2, 3, 4], [2, 2])
        assert w.parts == ((1, 2), (3, 4)) and w.welfare == b.welfare == 37.0

    def test_infeasible(self):
        with pytest.raises(ValueError):
            opt.greedy_welfare([modular([1, 1])] * 2, [1, 2], [2, 1])
        with pytest.raises(ValueError):
            opt.greedy_welfare([modular([1, 1])], [1, 2], [1, 1])

    def test_parts_disjoint_and_sized(self, rng):
        laws = {i: random_discrete(rng, 3) for i in range(1, 8)}
        oracles = [set_function(val.Max(), laws), set_function(val.ConcaveOfSum(val.Sqrt()), laws)]
        w = opt.greedy_welfare(oracles, range(1, 8), [3, 2])
        assert [len(p) for p in w.parts] == [3, 2]
        assert not set(w.parts[0]) & set(w.parts[1])

    def test_brute_force_is_optimal(self):
        o = modular([1, 2, 3, 4])
        b = opt.brute_force_welfare([o, o], [1, 2, 3, 4], [1, 1])
        assert b.welfare == 7.0
        best = max(o((i,)) + o((j,)) for i, j in itertools.permutations([1, 2, 3, 4], 2))
        assert best == b.welfare

    def test_json(self):
        w = opt.greedy_welfare([modular([1, 2])], [1, 2], [1])
        assert w.to_json()["parts"] == [[2]]
