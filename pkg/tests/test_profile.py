import csv
import math

import pytest

from ficopt.errors import InvalidInputError
from ficopt.harness import RunRecord
from ficopt.profile import DataProfileSpec, data_profile


def record(problem, mode, history, f0=10.0):
    best = history[-1][1] if history else math.inf
    return RunRecord(problem, mode, {}, 0.0, [0.0], [0.0] if history else None, best, history=history, f0=f0)


def test_tau_range():
    for tau in (0.0, 1.0, -0.5):
        with pytest.raises(InvalidInputError):
            DataProfileSpec(tau)


def test_profile_curves():
    records = [record('a', 'base', [[1.0, 10.0], [5.0, 2.0]]),
               record('a', 'inter_pb', [[1.0, 10.0], [2.0, 0.0]]),
               record('b', 'base', [[3.0, 4.0]], f0=4.0),
               record('b', 'inter_pb', [[1.0, 4.0], [4.0, 3.0]], f0=4.0)]
    profile = data_profile(records, DataProfileSpec(0.1))
    # a: f_L=0, f0=10, target 1.0; b: f_L=3, f0=4, target 3.1
    assert profile.f_ref == {'a': 0.0, 'b': 3.0}
    assert profile.curves['inter_pb'] == [(0.0, 0.0), (2.0, 0.5), (4.0, 1.0)]
    assert profile.curves['base'] == [(0.0, 0.0)]
    assert profile.fraction('inter_pb', 3.0) == 0.5
    assert profile.fraction('inter_pb', 10.0) == 1.0
    assert profile.fraction('base', 100.0) == 0.0


def test_profile_is_nondecreasing_and_bounded():
    records = [record('a', 'base', [[t, 10.0 - t] for t in range(1, 10)]),
               record('a', 'inter_eb', [[0.5 * t, 10.0 - t] for t in range(1, 10)])]
    profile = data_profile(records, DataProfileSpec(0.3))
    for curve in profile.curves.values():
        fractions = [fraction for _, fraction in curve]
        assert fractions == sorted(fractions)
        assert 0.0 <= fractions[-1] <= 1.0


def test_problem_without_feasible_run_is_excluded():
    records = [record('a', 'base', [[1.0, 1.0]]), record('z', 'base', []), record('z', 'inter_pb', [])]
    profile = data_profile(records, DataProfileSpec(0.05))
    assert profile.excluded == ['z']
    assert profile.curves['base'][-1] == (1.0, 1.0)
    assert 'inter_pb' not in profile.curves


def test_reference_overrides():
    records = [record('a', 'base', [[1.0, 5.0]])]
    profile = data_profile(records, DataProfileSpec(0.1, f_ref={'a': 0.0}, f_start={'a': 10.0}))
    assert profile.curves['base'] == [(0.0, 0.0)]


def test_write_csv(tmp_path):
    records = [record('a', 'base', [[1.0, 10.0], [5.0, 2.0]]), record('a', 'inter_pb', [[2.0, 0.0]])]
    path = str(tmp_path / "profile.csv")
    data_profile(records, DataProfileSpec(0.1)).write_csv(path)
    with open(path) as stream:
        rows = list(csv.reader(stream))
    assert rows[0] == ['time_seconds', 'fraction_solved', 'mode']
    assert ['2.0', '1.0', 'inter_pb'] in rows
    assert ['0.0', '0.0', 'base'] in rows
