import logging
import math

import numpy as np
import pytest

from ficopt.assignment import AssignmentInstance, AssignmentMatrix, expected_eval_time
from ficopt.controller import ControllerState, DirectEvaluator, FidelityController, controlled_evaluate
from ficopt.core import INF, FidelityLadder
import tests.problem_test_utils as problem_util

LADDER = FidelityLadder((0.0, 0.25, 0.5, 1.0))


def table(values):
    '''
    blackbox answering values[fidelity] = (f, c) with time equal to the fidelity plus 0.01
    '''
    def fn(x, fidelity):
        f, c = values[fidelity]
        return f, c, fidelity + 0.01
    return fn


def test_interrupts_at_first_violated_assigned_constraint():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (1.0, -1.0)), 0.5: (4.0, (-1.0, -1.0)),
                                           1.0: (3.0, (-1.0, -1.0))}), 1, 2)
    B = AssignmentMatrix.from_levels([1, 3], 4)
    controller = FidelityController(bb, B, LADDER)
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.25]
    assert evaluation.trace.interrupted_at == (0.25, 0)
    assert evaluation.f == 5.0
    assert not evaluation.feasible
    assert controller.clock.elapsed == pytest.approx(0.26)
    assert controller.f_star == INF


def test_skips_rows_without_assigned_constraints():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (-1.0, 1.0)), 1.0: (3.0, (-1.0, -1.0))}), 1, 2)
    B = AssignmentMatrix.from_levels([1, 3], 4)
    controller = FidelityController(bb, B, LADDER)
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.25, 1.0]
    assert not evaluation.trace.interrupted
    assert evaluation.confirmed
    assert evaluation.f == 3.0
    assert controller.f_star == 3.0
    assert controller.clock.elapsed == pytest.approx(0.26 + 1.01)


def test_later_rows_recheck_lower_assigned_constraints():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (-1.0, -1.0)), 1.0: (3.0, (2.0, -1.0))}), 1, 2)
    controller = FidelityController(bb, AssignmentMatrix.from_levels([1, 3], 4), LADDER)
    evaluation = controller.evaluate([0.5])
    assert evaluation.trace.interrupted_at == (1.0, 0)


def test_safeguard_runs_when_improving():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (-1.0,)), 1.0: (4.5, (-1.0,))}), 1, 1)
    controller = FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER)
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.25, 1.0]
    assert evaluation.trace.safeguard_ran
    assert evaluation.confirmed
    assert evaluation.f == 4.5
    assert controller.f_star == 4.5


def test_safeguard_skipped_when_not_improving():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (-1.0,)), 1.0: (4.5, (-1.0,))}), 1, 1)
    controller = FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER)
    controller.state.f_star = 1.0
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.25]
    assert not evaluation.trace.safeguard_ran
    assert not evaluation.confirmed
    assert controller.f_star == 1.0


def test_unconfirmed_feasible_point_never_moves_f_star():
    bb = problem_util.TableBlackbox(table({0.25: (0.0, (-1.0,)), 1.0: (4.5, (1.0,))}), 1, 1)
    controller = FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER)
    evaluation = controller.evaluate([0.5])
    assert evaluation.trace.safeguard_ran
    assert not evaluation.feasible
    assert controller.f_star == INF


def test_apriori_screening_at_fidelity_zero():
    bb = problem_util.TableBlackbox(table({0.0: (math.nan, (1.0, math.nan)), 1.0: (3.0, (-1.0, -1.0))}), 1, 2,
                                    a_priori={0})
    B = AssignmentMatrix.from_levels([None, 3], 4)
    controller = FidelityController(bb, B, LADDER)
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.0]
    assert evaluation.trace.interrupted_at == (0.0, 0)
    assert controller.clock.elapsed == pytest.approx(0.01)


def test_apriori_passes_then_top():
    bb = problem_util.TableBlackbox(table({0.0: (math.nan, (-1.0, math.nan)), 1.0: (3.0, (-1.0, -1.0))}), 1, 2,
                                    a_priori={0})
    controller = FidelityController(bb, AssignmentMatrix.from_levels([None, 3], 4), LADDER)
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.0, 1.0]
    assert evaluation.feasible
    assert controller.f_star == 3.0


def test_no_assignment_goes_straight_to_safeguard():
    bb = problem_util.TableBlackbox(table({1.0: (2.0, ())}), 1, 0)
    controller = FidelityController(bb, AssignmentMatrix(np.zeros((4, 0))), LADDER)
    evaluation = controller.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [1.0]
    assert evaluation.trace.safeguard_ran
    assert controller.f_star == 2.0


def test_force_top_visits_top_without_safeguard():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (-1.0,)), 1.0: (4.0, (-1.0,))}), 1, 1)
    B = AssignmentMatrix.from_levels([1], 4, force_top=True)
    evaluation = FidelityController(bb, B, LADDER).evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [0.25, 1.0]
    assert not evaluation.trace.safeguard_ran
    assert evaluation.confirmed


def test_failure_interrupts():
    def fn(x, fidelity):
        return INF, (INF,), 0.3
    bb = problem_util.TableBlackbox(fn, 1, 1)
    evaluation = FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER).evaluate([0.5])
    assert evaluation.h == INF
    assert not evaluation.feasible


def test_shape_mismatch():
    bb = problem_util.TableBlackbox(table({}), 1, 2)
    with pytest.raises(ValueError):
        FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER)


def test_direct_evaluator():
    bb = problem_util.TableBlackbox(table({1.0: (2.0, (-1.0,))}), 1, 1)
    evaluator = DirectEvaluator(bb)
    evaluation = evaluator.evaluate([0.5])
    assert [fid for _, fid in bb.calls] == [1.0]
    assert evaluation.confirmed
    assert evaluator.f_star == 2.0
    assert evaluator.clock.elapsed == pytest.approx(1.01)


def test_trace_log(caplog):
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (1.0,))}), 1, 1)
    controller = FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER)
    with caplog.at_level(logging.DEBUG, logger='ficopt.trace'):
        controller.evaluate([0.5])
    assert '"interrupted_at": [0.25, 0]' in caplog.text


def test_evaluation_dict():
    bb = problem_util.TableBlackbox(table({0.25: (5.0, (1.0,))}), 1, 1)
    evaluation = FidelityController(bb, AssignmentMatrix.from_levels([1], 4), LADDER).evaluate([0.5])
    dct = evaluation.to_dict()
    assert dct['fidelities'] == [0.25]
    assert dct['interrupted_at'] == [0.25, 0]
    assert dct['x'] == [0.5]
    assert not dct['safeguard_ran']
    assert dct['time'] == pytest.approx(0.26)


def walk_times(inst, B, walks, rng):
    '''
    vectorized sample of the time of the controller walk with Bernoulli violations
    '''
    alive = np.ones(walks, dtype=bool)
    total = np.zeros(walks)
    for i in B.active_rows:
        total += np.where(alive, inst.t[i], 0.0)
        for j in range(inst.m):
            if B.B[i, j]:
                alive &= rng.uniform(size=walks) >= inst.p[i, j]
    return total


def test_expected_time_matches_sampled_walks():
    '''
    every instance within 4 standard errors and at least 49 of 50 within 3; a strict 3 standard
    error bound on all 50 fails by chance in about one suite out of seven
    '''
    rng = np.random.default_rng(99)
    walks = 10 ** 5
    within_three = 0
    for _ in range(50):
        inst = problem_util.random_instance(rng, L=int(rng.integers(2, 6)))
        B = problem_util.random_feasible_assignment(rng, inst)
        times = walk_times(inst, B, walks, rng)
        error = abs(times.mean() - expected_eval_time(B, inst))
        se = max(times.std(ddof=1) / math.sqrt(walks), 1e-12)
        assert error <= 4 * se
        within_three += error <= 3 * se
    assert within_three >= 49


def test_expected_time_matches_controller():
    ladder = FidelityLadder((0.25, 0.5, 1.0))
    p = [[0.6, 0.3], [0.5, 0.2], [0.4, 0.1]]
    t = [0.1, 0.3, 1.0]
    inst = AssignmentInstance([[1.0, 1.0]] * 3, p, t)
    B = AssignmentMatrix.from_levels([0, 1], 3)
    bb = problem_util.BernoulliBlackbox(ladder, p, t, seed=4)
    state = ControllerState(B, ladder)
    state.f_star = -INF
    walks = 20000
    times = []
    for k in range(walks):
        before = state.clock.elapsed
        controlled_evaluate([k / walks], state, bb)
        times.append(state.clock.elapsed - before)
    times = np.array(times)
    se = times.std(ddof=1) / math.sqrt(walks)
    assert abs(times.mean() - expected_eval_time(B, inst)) <= 4 * se
