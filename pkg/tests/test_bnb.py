"""Branch-and-bound engine semantics, exercised through tiny adapters."""

import itertools
import math
import time

import numpy as np
import pytest

from cardopt import bnb
from cardopt.core import Solution


class _IntegralRoot:
    """Root relaxation already feasible: engine must stop after 1 node."""

    def root(self):
        return ()

    def lower_bound(self, state):
        return 5.0

    def branch(self, state):
        return []

    def incumbent_check(self, state):
        return Solution.from_x([1.0], objective=5.0)


class _MinCover:
    """Pick the fewest items whose weights reach a target.

    The bound adds the optimistic number of further items assuming every
    remaining pick has the largest remaining weight -- valid for every
    completion of the state.
    """

    objective_is_integral = True

    def __init__(self, weights, target):
        self.w = list(weights)
        self.target = target

    def root(self):
        return (0, (), 0.0)

    def lower_bound(self, state):
        idx, chosen, weight = state
        if weight >= self.target:
            return float(len(chosen))
        rest = self.w[idx:]
        if not rest:
            return math.inf
        need = (self.target - weight) / max(rest)
        return len(chosen) + need

    def branch(self, state):
        idx, chosen, weight = state
        if weight >= self.target or idx == len(self.w):
            return []
        take = (idx + 1, chosen + (idx,), weight + self.w[idx])
        skip = (idx + 1, chosen, weight)
        return [take, skip]

    def incumbent_check(self, state):
        idx, chosen, weight = state
        if weight < self.target:
            return None
        x = np.zeros(len(self.w))
        for j in chosen:
            x[j] = 1.0
        return Solution.from_x(x, objective=float(len(chosen)))


def _cover_optimum(weights, target):
    best = math.inf
    for r in range(len(weights) + 1):
        for sub in itertools.combinations(range(len(weights)), r):
            if sum(weights[j] for j in sub) >= target:
                best = min(best, r)
    return best


def test_integral_root_one_node():
    report = bnb.run(_IntegralRoot())
    assert report.status == "optimal"
    assert report.nodes_processed == 1
    assert report.solution.objective == 5.0
    assert report.gap == 0.0


def test_relative_gap_formula():
    assert bnb.relative_gap(10.0, 8.0) == pytest.approx(0.2)
    assert bnb.relative_gap(10.0, math.inf) == math.inf
    assert bnb.relative_gap(0.0, 0.0) == 0.0


def test_node_limit_zero_gives_valid_vacuous_bound():
    report = bnb.run(_MinCover([5, 4, 3, 2, 1], 9), bnb.BnbConfig(max_nodes=0))
    assert report.status == "node_limit"
    assert report.solution is None
    assert report.lower_bound == -math.inf
    assert report.gap > 0


def test_cover_matches_brute_force():
    for weights, target in [([5, 4, 3, 2, 1], 9), ([7, 1, 1, 1], 8), ([3, 3, 3], 7)]:
        report = bnb.run(_MinCover(weights, target))
        assert report.status == "optimal"
        assert report.solution.objective == _cover_optimum(weights, target)
        assert report.lower_bound == report.solution.objective
        assert report.gap == 0.0


def test_depth_first_same_optimum():
    best = bnb.run(_MinCover([5, 4, 3, 2, 1], 9))
    dive = bnb.run(_MinCover([5, 4, 3, 2, 1], 9), bnb.BnbConfig(node_order="depth_first"))
    assert dive.status == "optimal"
    assert dive.solution.objective == best.solution.objective


def test_determinism():
    a = bnb.run(_MinCover([5, 4, 3, 2, 1], 9))
    b = bnb.run(_MinCover([5, 4, 3, 2, 1], 9))
    assert a.nodes_processed == b.nodes_processed
    assert a.solution.objective == b.solution.objective
    assert np.array_equal(a.solution.x, b.solution.x)


def test_integral_bound_is_ceiled():
    class Fractional(_IntegralRoot):
        objective_is_integral = True

        def lower_bound(self, state):
            return 4.2  # must be read as 5 under the integrality flag

    report = bnb.run(Fractional())
    assert report.status == "optimal"
    assert report.nodes_processed == 1
    assert report.lower_bound == 5.0


def test_child_bound_drift_aborts():
    class Drifting(_MinCover):
        def lower_bound(self, state):
            # child pretends to be much better than its parent claimed
            return 0.0 if state[0] > 0 else 3.0

        def incumbent_check(self, state):
            return None

    with pytest.raises(RuntimeError):
        bnb.run(Drifting([1, 1, 1, 1], 4))


def test_gap_tolerance_stop():
    class RootGap:
        def root(self):
            return ()

        def lower_bound(self, state):
            return 8.0

        def branch(self, state):
            return [(), ()]

        def incumbent_check(self, state):
            return Solution.from_x([0.0], objective=10.0)

    report = bnb.run(RootGap(), bnb.BnbConfig(gap_tol=0.5))
    assert report.status == "gap_limit"
    assert report.solution.objective == 10.0
    assert report.lower_bound == pytest.approx(8.0)
    assert report.gap == pytest.approx(0.2)


def test_time_limit_stop():
    class Slow(_MinCover):
        def lower_bound(self, state):
            time.sleep(0.002)
            return super().lower_bound(state)

    report = bnb.run(Slow([1] * 12, 12), bnb.BnbConfig(time_limit=0.0))
    assert report.status == "time_limit"
    assert report.lower_bound <= 12.0


def test_cut_rounds_capped_at_twenty():
    class EndlessCuts(_IntegralRoot):
        def separate(self, state):
            return ("cut",)  # never satisfied

    report = bnb.run(EndlessCuts())
    assert report.status == "optimal"
    assert report.cuts_added == 20


def test_infeasible_when_no_incumbent():
    class Barren:
        def root(self):
            return ()

        def lower_bound(self, state):
            return math.inf

        def branch(self, state):
            return []

        def incumbent_check(self, state):
            return None

    report = bnb.run(Barren())
    assert report.status == "infeasible"
    assert report.solution is None
    assert report.lower_bound == math.inf


def test_config_validation():
    with pytest.raises(ValueError):
        bnb.BnbConfig(max_nodes=-1)
    with pytest.raises(ValueError):
        bnb.BnbConfig(gap_tol=-0.1)
    with pytest.raises(ValueError):
        bnb.BnbConfig(node_order="random")
