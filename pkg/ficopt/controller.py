import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .blackbox import VirtualClock
from .core import INF, is_computed, is_feasible, trial_point, violation_h

log = logging.getLogger(__name__)
trace_log = logging.getLogger('ficopt.trace')


@dataclass
class ControllerState:
    assignment: object
    ladder: object
    clock: VirtualClock = field(default_factory=VirtualClock)
    f_star: float = INF
    x_star: np.ndarray = None


@dataclass
class EvalTrace:
    fidelities: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    interrupted_at: tuple = None
    safeguard_ran: bool = False

    def add(self, output):
        self.fidelities.append(output.fidelity)
        self.outputs.append(output)

    @property
    def total_time(self):
        return math.fsum(out.time for out in self.outputs)

    @property
    def interrupted(self):
        return self.interrupted_at is not None

    @property
    def confirmed(self):
        return bool(self.fidelities) and self.fidelities[-1] == 1.0

    def to_dict(self):
        return {'fidelities': list(self.fidelities),
                'interrupted_at': list(self.interrupted_at) if self.interrupted_at else None,
                'safeguard_ran': self.safeguard_ran, 'time': self.total_time}


@dataclass
class Evaluation:
    x: np.ndarray
    f: float
    c: tuple
    trace: EvalTrace

    @property
    def feasible(self):
        return is_feasible(self.c)

    @property
    def confirmed(self):
        return self.trace.confirmed

    @property
    def h(self):
        return violation_h(self.c)

    def to_dict(self):
        dct = self.trace.to_dict()
        dct.update({'x': self.x.tolist(), 'f': self.f, 'feasible': self.feasible, 'confirmed': self.confirmed})
        return dct


def _visited_rows(state, meta):
    rows = set(state.assignment.active_rows)
    if state.ladder.has_zero and meta.a_priori:
        rows.add(0)
    return sorted(rows)


def _sub_evaluate(x, fidelity, state, blackbox, trace):
    output = blackbox.evaluate(x, fidelity)
    state.clock.charge(output)
    trace.add(output)
    return output


def _violated_apriori(output, meta):
    return next((j for j in sorted(meta.a_priori) if not output.c[j] <= 0), None)


def controlled_evaluate(x, state, blackbox):
    '''
    sub-evaluates x at the fidelities with assigned constraints in increasing order, returns the
    outputs of the last fidelity used; a point ending below the top fidelity that would improve
    f* gets one extra sub-evaluation at fidelity 1
    '''
    meta = blackbox.descriptor.constraints
    assignment = state.assignment
    x = trial_point(x)
    trace = EvalTrace()
    output = None
    for i in _visited_rows(state, meta):
        fidelity = state.ladder[i]
        output = _sub_evaluate(x, fidelity, state, blackbox, trace)
        if output.failed:
            trace.interrupted_at = (fidelity, None)
            break
        if output.apriori_violated:
            trace.interrupted_at = (fidelity, _violated_apriori(output, meta))
            break
        violated = next((j for j in assignment.constraints_up_to(i) if output.c[j] > 0), None)
        if violated is not None:
            trace.interrupted_at = (fidelity, violated)
            break
    if not trace.interrupted and not assignment.top_assigned and not trace.confirmed:
        f_bar = output.f if output is not None else math.nan
        if not is_computed(f_bar) or f_bar < state.f_star:
            output = _sub_evaluate(x, 1.0, state, blackbox, trace)
            trace.safeguard_ran = True
    evaluation = Evaluation(x, output.f, output.c, trace)
    if trace_log.isEnabledFor(logging.DEBUG):
        trace_log.debug(json.dumps(evaluation.to_dict()))
    return evaluation


def update_f_star(state, evaluation):
    '''
    f* only moves on outputs produced at fidelity 1 that are feasible
    '''
    if evaluation.confirmed and evaluation.feasible and evaluation.f < state.f_star:
        log.debug("New incumbent f*=[%s] at %s", evaluation.f, evaluation.x.tolist())
        state.f_star = evaluation.f
        state.x_star = evaluation.x


class FidelityController:
    '''
    evaluator wrapping a multi-fidelity blackbox with a biadjacency matrix
    '''

    def __init__(self, blackbox, assignment, ladder, clock=None):
        if assignment.L != ladder.size or assignment.m != blackbox.descriptor.m:
            raise ValueError(f"Assignment of shape [{assignment.L}x{assignment.m}] does not match "
                             f"[{ladder.size}] fidelities and [{blackbox.descriptor.m}] constraints")
        self.blackbox = blackbox
        self.state = ControllerState(assignment, ladder, clock or VirtualClock())

    @property
    def clock(self):
        return self.state.clock

    @property
    def f_star(self):
        return self.state.f_star

    def evaluate(self, x):
        evaluation = controlled_evaluate(x, self.state, self.blackbox)
        update_f_star(self.state, evaluation)
        return evaluation


class DirectEvaluator:
    '''
    base case evaluator: every point at fidelity 1
    '''

    def __init__(self, blackbox, clock=None):
        self.blackbox = blackbox
        self.state = ControllerState(None, None, clock or VirtualClock())

    @property
    def clock(self):
        return self.state.clock

    @property
    def f_star(self):
        return self.state.f_star

    def evaluate(self, x):
        x = trial_point(x)
        trace = EvalTrace()
        output = _sub_evaluate(x, 1.0, self.state, self.blackbox, trace)
        if output.failed:
            trace.interrupted_at = (1.0, None)
        elif output.apriori_violated:
            trace.interrupted_at = (1.0, _violated_apriori(output, self.blackbox.descriptor.constraints))
        evaluation = Evaluation(x, output.f, output.c, trace)
        update_f_star(self.state, evaluation)
        return evaluation
