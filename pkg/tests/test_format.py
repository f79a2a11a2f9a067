import json

import yaml

from ficopt.assignment import AssignmentInstance, assignment_summary, solve_assignment
from ficopt.format import PrintFormat, assignment_table, print_assignment
import tests.io_test_util as output_util


def summary():
    inst = AssignmentInstance([[1.0, 0.5], [1.0, 1.0]], [[0.9, 0.4], [0.9, 0.4]], [0.1, 1.0])
    return assignment_summary(solve_assignment(inst), inst, (0.5, 1.0))


def test_format_parse():
    assert PrintFormat.JSON == PrintFormat.argparse("JSON")


def test_format_string():
    assert "json" == PrintFormat.__str__(PrintFormat.JSON)


def test_format_invalid():
    assert "invalid_value" == PrintFormat.argparse("invalid_value")


def test_table():
    lines = assignment_table(summary()).splitlines()
    assert lines[0].split() == ['row', 'fidelity', 'y', 'reach', 'time', 'constraints']
    assert lines[1].split() == ['0', '0.5', '1', '1.0000', '0.1', '0']
    assert lines[2].split() == ['1', '1', '1', '0.1000', '0.1', '1']
    assert lines[-1] == "expected time per evaluation: 0.2"


def test_print_json():
    with output_util.captured_output() as (out, err):
        print_assignment(summary(), PrintFormat.JSON)
    assert json.loads(out.getvalue())['assignment']['levels'] == [0, 1]


def test_print_yaml():
    with output_util.captured_output() as (out, err):
        print_assignment(summary(), PrintFormat.YAML)
    assert yaml.safe_load(out.getvalue())['ladder'] == [0.5, 1.0]
