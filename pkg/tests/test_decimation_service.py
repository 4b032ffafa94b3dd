import random

import pytest

from models.pbo import Literal, PBConstraint, PBOInstance, Term
from services.decimation_service import (
    CONSTRAINT_CONFLICT,
    UNASSIGNED,
    VARIABLE_CONFLICT,
    DecimationService,
    DecimationState,
    DecimationStatistics,
)
from services.generator_service import GeneratorService
from services.verifier_service import ForcedStatus, VerifierService
from tests.helpers import make_instance

EXAMPLE_1 = [([(5, 1), (1, 2), (1, 3), (1, 4)], ">=", 6)]
EXAMPLE_1_SECOND = [([(2, 1), (1, 2), (1, 3), (1, 4)], ">=", 5)]


def state_for(num_vars, constraints, objective=None, seed=0):
    return DecimationState(make_instance(num_vars, constraints, objective), random.Random(seed))


def test_one_of_all_forces_largest_coefficient():
    state = state_for(4, EXAMPLE_1)
    assert state.detect_1ofall(0) == (1, 1)


def test_one_of_all_unit_clause():
    state = state_for(1, [([(1, 1)], ">=", 1)])
    assert state.detect_1ofall(0) == (1, 1)


def test_one_of_all_negated_literal_forces_zero():
    state = state_for(2, [([(3, 1, True), (1, 2)], ">=", 3)])
    assert state.detect_1ofall(0) == (1, 0)


def test_one_of_all_requires_strict_shortfall():
    # 3x1 + 2x2 >= 2 holds with x1 = 0 and with x1 = 1
    state = state_for(2, [([(3, 1), (2, 2)], ">=", 2)])
    assert state.detect_1ofall(0) is None


def test_one_of_all_ties_go_to_lowest_variable():
    state = state_for(3, [([(2, 3), (2, 1), (1, 2)], ">=", 4)])
    assert state.detect_1ofall(0) == (1, 1)


def test_all_of_all_forces_every_literal():
    state = state_for(4, EXAMPLE_1_SECOND)
    assert sorted(state.detect_all_of_all(0)) == [(1, 1), (2, 1), (3, 1), (4, 1)]


def test_all_of_all_pair():
    state = state_for(2, [([(1, 1), (1, 2)], ">=", 2)])
    assert sorted(state.detect_all_of_all(0)) == [(1, 1), (2, 1)]


def test_all_of_all_below_bound_flags_falsified():
    # built directly: normalization would reject x1 + x2 >= 3 outright
    c = PBConstraint(id=0, terms=(Term(1, Literal(1)), Term(1, Literal(2))), bound=3)
    state = DecimationState(PBOInstance(num_vars=2, hard_constraints=[c]), random.Random(0))
    assert state.detect_all_of_all(0) == []
    assert state.falsified[0]
    assert [x.kind for x in state.contradictions] == [CONSTRAINT_CONFLICT]


def test_propagation_updates_residuals_without_new_forcing():
    state = state_for(4, EXAMPLE_1)
    state.propagate_literal(1, 1, origin=0)
    assert state.res_bound[0] == 1
    assert state.res_sum[0] == 3
    assert state._pending_vars == []
    assert not state.retired[0]


def test_propagation_retires_satisfied_constraint():
    state = state_for(2, [([(1, 1), (1, 2)], ">=", 1)])
    state.propagate_literal(2, 1)
    assert state.retired[0]


def test_propagation_flags_dead_constraint():
    state = state_for(2, [([(2, 1), (1, 2)], ">=", 3)])
    state.propagate_literal(1, 0)
    assert state.res_sum[0] == 1
    assert state.res_bound[0] == 3
    assert state.falsified[0]


def test_propagating_assigned_variable_is_an_error():
    state = state_for(1, [])
    state.propagate_literal(1, 0)
    with pytest.raises(ValueError):
        state.propagate_literal(1, 1)


def test_opposite_forcings_are_logged_and_randomized():
    state = state_for(1, [([(1, 1)], ">=", 1), ([(1, 1, True)], ">=", 1)])
    assignment = state.run()
    assert len(assignment) == 1
    assert assignment.values[0] in (0, 1)
    assert any(x.kind == VARIABLE_CONFLICT and x.var == 1 for x in state.contradictions)
    assert state.stats.conflict_assignments == 1
    assert state.stats.hard_forcings == 0


@pytest.mark.parametrize("seed", range(10))
def test_decimation_chain_reaches_unique_solution(seed):
    instance = make_instance(
        4,
        [([(5, 1), (1, 2), (1, 3), (1, 4)], ">=", 6), ([(2, 2), (1, 3), (1, 4)], ">=", 4)],
        objective=[(1, 3)],
    )
    state = DecimationState(instance, random.Random(seed))
    assert state.run().values == [1, 1, 1, 1]
    assert state.stats.hard_forcings == 4
    assert state.contradictions == []
    assert sorted(state.initial_forcings) == [(1, 1), (2, 1), (3, 1), (4, 1)]


def test_no_constraints_no_objective_is_random():
    instance = make_instance(6, [])
    first = DecimationService.igup_decimation(instance, random.Random(3))
    second = DecimationService.igup_decimation(instance, random.Random(3))
    assert first == second
    assert len(first) == 6
    state = DecimationState(instance, random.Random(3))
    state.run()
    assert state.stats.random_assignments == 6



def test_igup_decimation_fills_statistics():
    instance = make_instance(4, EXAMPLE_1)
    stats = DecimationStatistics()
    assignment = DecimationService.igup_decimation(instance, random.Random(5), stats)
    assert assignment.value(1) == 1
    assert stats.hard_forcings >= 1
    assert stats.hard_forcings + stats.random_assignments == 4
    assert stats.contradictions == 0

    state = DecimationState(instance, random.Random(5))
    assert state.run() == assignment
    assert state.stats == stats

@pytest.mark.parametrize("seed", range(5))
def test_decision_unit_is_forced(seed):
    assignment = DecimationService.igup_decimation(make_instance(3, [([(1, 1)], ">=", 1)]), random.Random(seed))
    assert assignment.value(1) == 1


def test_soft_units_make_objective_literals_false():
    instance = make_instance(3, [], objective=[(2, 1), (1, 2, True), (4, 3)])
    state = DecimationState(instance, random.Random(0))
    assert state.run().values == [0, 1, 0]
    assert state.stats.soft_assignments == 3


def test_soft_units_prefer_heavy_objective_terms():
    instance = make_instance(2, [], objective=[(1, 1), (1000, 2)])
    heavy_first = sum(
        1 for seed in range(200) if DecimationState(instance, random.Random(seed))._soft[0][0] == 2
    )
    assert heavy_first >= 190


@pytest.mark.parametrize("seed", range(20))
def test_residuals_match_recomputation(seed):
    instance, _ = GeneratorService.generate_random_instance(12, 20, (1, 6), (1, 9), 0.5, seed)
    rng = random.Random(seed)
    state = DecimationState(instance, rng)
    for var in rng.sample(range(1, 13), 12):
        if state.values[var] != UNASSIGNED:
            continue
        state.propagate_literal(var, rng.randint(0, 1))
        assert state.recompute_residuals() == (state.res_bound, state.res_sum)
        for c in range(len(instance.hard_constraints)):
            if state.res_bound[c] <= 0:
                assert state.retired[c]


@pytest.mark.parametrize("seed", range(20))
def test_run_terminates_with_one_round_per_variable(seed):
    instance, _ = GeneratorService.generate_random_instance(30, 60, (1, 5), (1, 5), 0.4, seed)
    state = DecimationState(instance, random.Random(seed))
    assignment = state.run()
    assert len(assignment) == 30
    assert set(assignment.values) <= {0, 1}
    assert state.stats.rounds == 30
    assert state.recompute_residuals() == (state.res_bound, state.res_sum)


def _check_all_of_all_implies_one_of_all(seed: int, draws: int) -> None:
    rng = random.Random(seed)
    fired = 0
    for _ in range(draws):
        num_vars = rng.randint(1, 6)
        size = rng.randint(1, num_vars)
        terms = [(rng.randint(1, 8), var, rng.random() < 0.5) for var in rng.sample(range(1, num_vars + 1), size)]
        bound = rng.randint(1, sum(t[0] for t in terms))
        state = state_for(num_vars, [(terms, ">=", bound)], seed=rng.randint(0, 1000))
        for var in range(1, num_vars + 1):
            if rng.random() < 0.3 and state.values[var] == UNASSIGNED:
                state.propagate_literal(var, rng.randint(0, 1))
        if state.retired[0] or state.falsified[0] or state.res_bound[0] < 1:
            continue
        forced = state.detect_all_of_all(0)
        if forced:
            fired += 1
            single = state.detect_1ofall(0)
            assert single is not None
            assert single in forced
    assert fired > 0


def test_all_of_all_implies_one_of_all():
    _check_all_of_all_implies_one_of_all(2024, 10_000)


@pytest.mark.slow
def test_all_of_all_implies_one_of_all_sweep():
    _check_all_of_all_implies_one_of_all(7, 100_000)


def _check_forcings_sound(seed: int) -> None:
    rng = random.Random(seed)
    num_vars = rng.randint(3, 12)
    instance, _ = GeneratorService.generate_random_instance(
        num_vars, rng.randint(1, 15), (1, 4), (1, 6), 0.5, seed, planted=rng.random() < 0.5
    )
    oracle = VerifierService.forced_literal_oracle(instance)
    if oracle[1] == ForcedStatus.INFEASIBLE:
        return
    state = DecimationState(instance, random.Random(seed))
    state.run()
    for var, value in state.implied_forcings:
        expected = ForcedStatus.FORCED_1 if value else ForcedStatus.FORCED_0
        assert oracle[var] == expected, f"x{var}={value} forced but oracle says {oracle[var]}"
    assert set(state.initial_forcings) <= set(state.implied_forcings)


@pytest.mark.parametrize("seed", range(60))
def test_initial_forcings_agree_with_oracle(seed):
    _check_forcings_sound(seed)


@pytest.mark.slow
def test_initial_forcings_agree_with_oracle_sweep():
    for seed in range(1000, 1500):
        _check_forcings_sound(seed)
