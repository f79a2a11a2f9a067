import json

import ficopt.assignment as assignment
import numpy as np
import pytest

from ficopt.assignment import (AssignmentInstance, AssignmentMatrix, assignment_summary, brute_force_q1,
                               check_assumptions, expected_eval_time, is_feasible_assignment, lower_row,
                               min_assignable_index, reduce_instance, row_breakdown, solve_assignment,
                               write_assignment)
from ficopt.errors import AssignmentTooLargeError, InvalidInputError
import tests.problem_test_utils as problem_util


def two_level_instance(**kwargs):
    # constraint 0 representative from row 0, constraint 1 only at the top
    r = [[1.0, 0.5], [1.0, 1.0]]
    p = [[0.9, 0.4], [0.9, 0.4]]
    t = [0.1, 1.0]
    return AssignmentInstance(r, p, t, 0.05, **kwargs)


def test_matrix_from_levels():
    B = AssignmentMatrix.from_levels([0, None, 2], 3)
    assert B.B.tolist() == [[1, 0, 0], [0, 0, 0], [0, 0, 1]]
    assert B.levels == (0, None, 2)
    assert B.y.tolist() == [1, 0, 1]
    assert B.active_rows == (0, 2)
    assert B.constraints_up_to(1) == (0,)
    assert B.top_assigned


def test_matrix_force_top():
    B = AssignmentMatrix.from_levels([0], 3, force_top=True)
    assert B.y.tolist() == [1, 0, 1]
    assert not B.top_assigned


def test_matrix_rejects_double_assignment():
    with pytest.raises(InvalidInputError):
        AssignmentMatrix([[1], [1]])
    with pytest.raises(InvalidInputError):
        AssignmentMatrix([[2], [0]])


def test_matrix_dict():
    B = AssignmentMatrix.from_levels([1, 0], 2, force_top=True)
    assert AssignmentMatrix.from_dict(B.to_dict()) == B


def test_expected_time_by_hand():
    inst = two_level_instance()
    B = AssignmentMatrix.from_levels([0, 1], 2)
    assert expected_eval_time(B, inst) == pytest.approx(0.1 + 1.0 * 0.1)
    rows = row_breakdown(B, inst)
    assert rows[1]['reach'] == pytest.approx(0.1)
    assert rows[1]['time'] == pytest.approx(0.1)


def test_expected_time_empty_rows_cost_nothing():
    inst = two_level_instance()
    B = AssignmentMatrix.from_levels([1, 1], 2)
    assert expected_eval_time(B, inst) == pytest.approx(1.0)


def test_single_constraint_closed_form():
    r = [[1.0], [1.0], [1.0]]
    p = [[0.7], [0.7], [0.7]]
    t = [0.2, 0.5, 1.0]
    inst = AssignmentInstance(r, p, t)
    for level in range(3):
        assert expected_eval_time(AssignmentMatrix.from_levels([level], 3), inst) == pytest.approx(t[level])


def test_min_assignable_index():
    assert min_assignable_index([0.2, 0.96, 1.0], 0.05) == 1
    assert min_assignable_index([0.2, 0.94, 1.0], 0.05) == 2
    assert min_assignable_index([1.0, 1.0], 0.0) == 0
    with pytest.raises(InvalidInputError):
        min_assignable_index([0.2, 0.5], 0.05)


def test_reduce_instance():
    r = [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]]
    inst = AssignmentInstance(r, np.full((4, 3), 0.5), [0.1, 0.2, 0.3, 1.0], a_priori={2})
    rows, constraints = reduce_instance(inst)
    assert rows == (1, 3)
    assert constraints == (0, 1)


def test_solve_assigns_gating_constraint_low():
    inst = two_level_instance()
    B = solve_assignment(inst)
    assert B.levels == (0, 1)
    assert B.B.shape == (2, 2)


def test_solve_apriori_columns_stay_empty():
    inst = two_level_instance(a_priori={0})
    B = solve_assignment(inst)
    assert B.levels == (None, 1)
    assert is_feasible_assignment(B, inst)


def test_solve_only_apriori():
    inst = two_level_instance(a_priori={0, 1})
    B = solve_assignment(inst)
    assert not B.B.any()
    assert expected_eval_time(B, inst) == 0.0


def test_solve_ties_lexicographic():
    r = [[1.0, 1.0], [1.0, 1.0]]
    p = [[0.0, 0.0], [0.0, 0.0]]
    inst = AssignmentInstance(r, p, [1.0, 1.0])
    B = solve_assignment(inst)
    assert B.levels == (0, 0)


def test_solve_epsilon_zero_forces_top():
    r = [[0.99, 0.98], [0.99, 0.999], [1.0, 1.0]]
    p = [[0.5, 0.5]] * 3
    inst = AssignmentInstance(r, p, [0.01, 0.1, 1.0], epsilon=0.0)
    assert solve_assignment(inst).levels == (2, 2)


def staircase_instance():
    # constraint j becomes representative at row j
    r = np.array([[1.0 if i >= j else 0.0 for j in range(5)] for i in range(6)])
    return AssignmentInstance(r, np.full((6, 5), 0.3), np.linspace(0.1, 1.0, 6))


def test_solve_cap():
    inst = staircase_instance()
    assert reduce_instance(inst)[0] == (0, 1, 2, 3, 4)
    with pytest.raises(AssignmentTooLargeError) as e:
        solve_assignment(inst, cap=10)
    assert e.value.candidates == 120


def test_solve_chunks_and_workers_agree(monkeypatch):
    rng = np.random.default_rng(3)
    instances = [staircase_instance()] + [problem_util.random_instance(rng, L=6, m=5) for _ in range(10)]
    expected = [solve_assignment(inst) for inst in instances]
    monkeypatch.setattr(assignment, 'CHUNK', 7)
    for inst, B in zip(instances, expected):
        assert solve_assignment(inst, workers=4) == B


def test_force_top_charges_the_top_row():
    inst = two_level_instance(force_top=True)
    B = AssignmentMatrix.from_levels([0, 0], 2, force_top=True)
    assert expected_eval_time(B, inst) == pytest.approx(0.1 + 1.0 * 0.1 * 0.6)
    assert solve_assignment(inst).y.tolist() == [1, 1]


def test_instance_rejects_unrepresentative_top():
    with pytest.raises(InvalidInputError):
        AssignmentInstance([[0.5], [0.5]], [[0.1], [0.1]], [0.1, 1.0])


def test_instance_rejects_bad_shapes():
    with pytest.raises(InvalidInputError):
        AssignmentInstance([[1.0], [1.0]], [[0.1]], [0.1, 1.0])
    with pytest.raises(InvalidInputError):
        AssignmentInstance([[1.0]], [[0.1]], [-1.0])


def test_row_filtering_is_optimal():
    rng = np.random.default_rng(2023)
    for _ in range(100):
        inst = problem_util.random_instance(rng)
        best, _ = brute_force_q1(inst)
        assert expected_eval_time(solve_assignment(inst), inst) == pytest.approx(best, abs=1e-12)


def test_force_top_can_pick_the_top_row():
    inst = AssignmentInstance([[1.0], [1.0]], [[0.01], [0.01]], [0.1, 1.0], 0.05, force_top=True)
    B = solve_assignment(inst)
    assert B.levels == (1,)
    assert expected_eval_time(B, inst) == pytest.approx(1.0)


def test_row_filtering_is_optimal_with_force_top():
    rng = np.random.default_rng(7)
    for _ in range(100):
        inst = problem_util.random_instance(rng, force_top=True)
        best, _ = brute_force_q1(inst)
        assert expected_eval_time(solve_assignment(inst), inst) == pytest.approx(best, abs=1e-12)


def test_lowering_a_row_outside_filtered_rows_never_hurts():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 500:
        inst = problem_util.random_instance(rng)
        B = problem_util.random_feasible_assignment(rng, inst)
        rows, _ = reduce_instance(inst)
        outside = [i for i in B.active_rows if i not in rows and i > 0]
        if not outside:
            continue
        lowered = lower_row(B, outside[-1])
        assert is_feasible_assignment(lowered, inst)
        assert expected_eval_time(lowered, inst) <= expected_eval_time(B, inst) + 1e-12
        checked += 1


def test_lower_row_first_row():
    with pytest.raises(InvalidInputError):
        lower_row(AssignmentMatrix.from_levels([0], 2), 0)


def test_is_feasible_assignment():
    inst = two_level_instance()
    assert is_feasible_assignment(AssignmentMatrix.from_levels([0, 1], 2), inst)
    assert not is_feasible_assignment(AssignmentMatrix.from_levels([0, 0], 2), inst)
    assert not is_feasible_assignment(AssignmentMatrix.from_levels([0, None], 2), inst)


def test_check_assumptions():
    r = [[1.0], [1.0], [1.0]]
    p = [[0.2], [0.5], [0.5]]
    t = [0.5, 0.1, 1.0]
    report = check_assumptions(AssignmentInstance(r, p, t))
    assert report
    assert report.p_violations == [(0, 0, 1), (0, 0, 2)]
    assert report.t_violations == [(0, 1)]


def test_check_assumptions_clean():
    rng = np.random.default_rng(5)
    assert not check_assumptions(problem_util.random_instance(rng))


def test_write_assignment(tmp_path):
    inst = two_level_instance()
    B = solve_assignment(inst)
    path = str(tmp_path / "assignment.json")
    write_assignment(path, B, inst, ladder=(0.5, 1.0))
    with open(path) as stream:
        dct = json.load(stream)
    assert dct['assignment']['levels'] == [0, 1]
    assert dct['ladder'] == [0.5, 1.0]
    assert dct['expected_time'] == pytest.approx(0.2)
    assert AssignmentInstance.from_dict(dct['instance']).r.tolist() == inst.r.tolist()
    assert dct == json.loads(json.dumps(assignment_summary(B, inst, (0.5, 1.0))))
