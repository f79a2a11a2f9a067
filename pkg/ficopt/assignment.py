import concurrent.futures
import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssignmentTooLargeError, InvalidInputError

log = logging.getLogger(__name__)

DEFAULT_CAP = 10 ** 7
BRUTE_FORCE_CAP = 10 ** 6
CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class AssignmentInstance:
    r: np.ndarray
    p: np.ndarray
    t: np.ndarray
    epsilon: float = 0.05
    a_priori: frozenset = field(default_factory=frozenset)
    force_top: bool = False

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        p = np.array(self.p, dtype=float)
        t = np.array(self.t, dtype=float).reshape(-1)
        if r.ndim != 2 or r.shape != p.shape or r.shape[0] != t.shape[0]:
            raise InvalidInputError(f"Inconsistent shapes r={r.shape} p={p.shape} t={t.shape}")
        if np.any((r < 0) | (r > 1)) or np.any((p < 0) | (p > 1)):
            raise InvalidInputError("Entries of r and p must lie in [0, 1]")
        if np.any(t < 0):
            raise InvalidInputError("Expected times must be nonnegative")
        if not 0 <= self.epsilon <= 1:
            raise InvalidInputError(f"Epsilon must lie in [0, 1], got [{self.epsilon}]")
        a_priori = frozenset(int(j) for j in self.a_priori)
        object.__setattr__(self, 'r', r)
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 't', t)
        object.__setattr__(self, 'a_priori', a_priori)
        for j in self.filtered_constraints:
            if r[-1, j] < 1 - self.epsilon:
                raise InvalidInputError(f"Constraint [{j}] is not representative at the top fidelity (r={r[-1, j]})")

    @property
    def L(self):
        return self.r.shape[0]

    @property
    def m(self):
        return self.r.shape[1]

    @property
    def filtered_constraints(self):
        return tuple(j for j in range(self.r.shape[1]) if j not in self.a_priori)

    @staticmethod
    def from_stats(stats, epsilon, a_priori=None, force_top=False):
        if a_priori is None:
            a_priori = stats.meta.a_priori if stats.meta else frozenset()
        return AssignmentInstance(stats.r, stats.p, stats.t, epsilon, a_priori, force_top)

    def to_dict(self):
        return {'r': self.r.tolist(), 'p': self.p.tolist(), 't': self.t.tolist(), 'epsilon': self.epsilon,
                'a_priori': sorted(self.a_priori), 'force_top': self.force_top}

    @staticmethod
    def from_dict(dct):
        return AssignmentInstance(dct['r'], dct['p'], dct['t'], dct.get('epsilon', 0.05),
                                  frozenset(dct.get('a_priori', [])), dct.get('force_top', False))


@dataclass(frozen=True, eq=False)
class AssignmentMatrix:
    B: np.ndarray
    force_top: bool = False

    def __post_init__(self):
        B = np.array(self.B, dtype=np.int8)
        if B.ndim != 2 or np.any((B != 0) & (B != 1)):
            raise InvalidInputError("The biadjacency matrix must be a binary L x m matrix")
        if np.any(B.sum(axis=0) > 1):
            raise InvalidInputError("A constraint is assigned to more than one fidelity")
        B.setflags(write=False)
        object.__setattr__(self, 'B', B)

    @property
    def L(self):
        return self.B.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def y(self):
        y = (self.B.sum(axis=1) > 0).astype(np.int8)
        if self.force_top and self.L:
            y[-1] = 1
        return y

    @property
    def active_rows(self):
        return tuple(int(i) for i in np.flatnonzero(self.y))

    def level(self, j):
        '''
        assigned fidelity index of constraint j, None for unassigned (a priori) columns
        '''
        rows = np.flatnonzero(self.B[:, j])
        return int(rows[0]) if rows.size else None

    @property
    def levels(self):
        return tuple(self.level(j) for j in range(self.m))

    def constraints_up_to(self, i):
        return tuple(j for j, level in enumerate(self.levels) if level is not None and level <= i)

    @property
    def top_assigned(self):
        return bool(self.B[-1].any())

    def __eq__(self, other):
        if not isinstance(other, AssignmentMatrix):
            return NotImplemented
        return np.array_equal(self.B, other.B) and self.force_top == other.force_top

    @staticmethod
    def from_levels(levels, L, force_top=False):
        B = np.zeros((L, len(levels)), dtype=np.int8)
        for j, level in enumerate(levels):
            if level is not None:
                B[level, j] = 1
        return AssignmentMatrix(B, force_top)

    @staticmethod
    def all_top(L, m, a_priori=frozenset(), force_top=False):
        return AssignmentMatrix.from_levels([None if j in a_priori else L - 1 for j in range(m)], L, force_top)

    def to_dict(self):
        return {'B': self.B.tolist(), 'y': self.y.tolist(), 'force_top': self.force_top,
                'levels': list(self.levels)}

    @staticmethod
    def from_dict(dct):
        return AssignmentMatrix(dct['B'], dct.get('force_top', False))


def no_interrupt_prob(B, p, k):
    B = B.B if isinstance(B, AssignmentMatrix) else np.asarray(B)
    return float(np.prod(1.0 - np.asarray(p)[k] * B[k]))


def row_breakdown(B, inst):
    '''
    per fidelity row: activity y_i, probability of reaching the row and its share t_i y_i prod P_k
    '''
    if not isinstance(B, AssignmentMatrix):
        B = AssignmentMatrix(B, inst.force_top)
    y = B.y
    rows = []
    reach = 1.0
    for i in range(inst.L):
        share = float(inst.t[i] * y[i] * reach) if y[i] else 0.0
        rows.append({'row': i, 'y': int(y[i]), 'reach': reach, 'time': share})
        reach *= no_interrupt_prob(B, inst.p, i)
    return rows


def expected_eval_time(B, inst):
    return math.fsum(row['time'] for row in row_breakdown(B, inst))


def min_assignable_index(r_column, epsilon):
    eligible = np.flatnonzero(np.asarray(r_column) >= 1 - epsilon)
    if not eligible.size:
        raise InvalidInputError(f"No fidelity reaches representativity [{1 - epsilon}]")
    return int(eligible[0])


def reduce_instance(inst):
    '''
    (I_F, J_F): rows reachable as the lowest assignable fidelity of some constraint and the
    constraints that are not a priori
    '''
    constraints = inst.filtered_constraints
    rows = sorted({min_assignable_index(inst.r[:, j], inst.epsilon) for j in constraints})
    return tuple(rows), constraints


def candidate_rows(inst, rows, constraints):
    return [[i for i in rows if i >= min_assignable_index(inst.r[:, j], inst.epsilon)] for j in constraints]


def _chunk_values(inst, rows, constraints, candidates, start, stop):
    '''
    objective of every assignment with linear index in [start, stop), the first column being
    the most significant digit so that index order is the lexicographic order
    '''
    index = np.arange(start, stop, dtype=np.int64)
    radices = [len(c) for c in candidates]
    digits = np.empty((index.shape[0], len(constraints)), dtype=np.int64)
    remainder = index.copy()
    for pos in range(len(constraints) - 1, -1, -1):
        digits[:, pos] = remainder % radices[pos]
        remainder //= radices[pos]
    assigned = np.empty_like(digits)
    for pos, options in enumerate(candidates):
        assigned[:, pos] = np.asarray(options)[digits[:, pos]]
    reach = np.ones(index.shape[0])
    total = np.zeros(index.shape[0])
    top = inst.L - 1
    for i in rows:
        hit = assigned == i
        occupied = hit.any(axis=1)
        total += np.where(occupied | (inst.force_top and i == top), inst.t[i] * reach, 0.0)
        survive = np.ones(index.shape[0])
        for pos, j in enumerate(constraints):
            survive *= np.where(hit[:, pos], 1.0 - inst.p[i, j], 1.0)
        reach = reach * survive
    if inst.force_top and top not in rows:
        total += inst.t[top] * reach
    return total


def _search(inst, rows, constraints, cap, workers, label):
    L, m = inst.L, inst.m
    if not constraints:
        return AssignmentMatrix(np.zeros((L, m), dtype=np.int8), inst.force_top)
    candidates = candidate_rows(inst, rows, constraints)
    size = math.prod(len(c) for c in candidates)
    if size > cap:
        raise AssignmentTooLargeError(size, cap)
    log.debug("Searching [%d] candidate assignments over rows %s (%s)", size, list(rows), label)
    bounds = [(start, min(start + CHUNK, size)) for start in range(0, size, CHUNK)]

    def best_of(bound):
        values = _chunk_values(inst, rows, constraints, candidates, *bound)
        k = int(np.argmin(values))
        return values[k], bound[0] + k

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(best_of, bounds))
    best_value, best_index = min(results, key=lambda item: (item[0], item[1]))
    levels = [None] * m
    remainder = best_index
    for pos in range(len(constraints) - 1, -1, -1):
        levels[constraints[pos]] = candidates[pos][remainder % len(candidates[pos])]
        remainder //= len(candidates[pos])
    return AssignmentMatrix.from_levels(levels, L, inst.force_top)


def solve_assignment(inst, cap=DEFAULT_CAP, workers=1):
    '''
    exhaustive search of the reduced problem: rows restricted to I_F (and the top row under
    force_top), columns to J_F, ties going to the lexicographically lowest assignment; the
    result has the full L x m shape
    '''
    rows, constraints = reduce_instance(inst)
    if inst.force_top and constraints and inst.L - 1 not in rows:
        # y_L is forced on, so the top row is always a candidate
        rows = rows + (inst.L - 1,)
    B = _search(inst, rows, constraints, cap, workers, 'reduced')
    log.debug("Optimal assignment levels %s, expected time [%s]", list(B.levels), expected_eval_time(B, inst))
    return B


def brute_force_q1(inst, cap=BRUTE_FORCE_CAP):
    '''
    optimum over every row of the ladder, used to check the row filtering
    '''
    constraints = inst.filtered_constraints
    size = math.prod(inst.L - min_assignable_index(inst.r[:, j], inst.epsilon) for j in constraints)
    if size > cap:
        raise AssignmentTooLargeError(size, cap)
    best, witness = math.inf, None
    ranges = [range(min_assignable_index(inst.r[:, j], inst.epsilon), inst.L) for j in constraints]
    for choice in itertools.product(*ranges):
        levels = [None] * inst.m
        for j, level in zip(constraints, choice):
            levels[j] = level
        B = AssignmentMatrix.from_levels(levels, inst.L, inst.force_top)
        value = expected_eval_time(B, inst)
        if value < best:
            best, witness = value, B
    return best, witness


def lower_row(B, row):
    '''
    moves every assignment of row to row - 1
    '''
    if row < 1:
        raise InvalidInputError("The first row cannot be lowered")
    shifted = np.array(B.B, dtype=np.int8)
    shifted[row - 1] |= shifted[row]
    shifted[row] = 0
    return AssignmentMatrix(shifted, B.force_top)


def is_feasible_assignment(B, inst):
    for j in range(inst.m):
        column = B.B[:, j]
        if j in inst.a_priori:
            if column.any():
                return False
            continue
        if column.sum() != 1:
            return False
        if B.level(j) < min_assignable_index(inst.r[:, j], inst.epsilon):
            return False
    return True


@dataclass
class AssumptionReport:
    p_violations: list = field(default_factory=list)
    t_violations: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.p_violations or self.t_violations)

    def to_dict(self):
        return {'p_violations': [list(v) for v in self.p_violations],
                't_violations': [list(v) for v in self.t_violations]}


def check_assumptions(inst):
    '''
    flags (j, a, b) where p increases with the fidelity above i(j) and (a, b) where t decreases
    '''
    report = AssumptionReport()
    for j in inst.filtered_constraints:
        start = min_assignable_index(inst.r[:, j], inst.epsilon)
        for a in range(start, inst.L):
            for b in range(a + 1, inst.L):
                if inst.p[a, j] < inst.p[b, j]:
                    report.p_violations.append((j, a, b))
    for a in range(inst.L):
        for b in range(a + 1, inst.L):
            if inst.t[a] > inst.t[b]:
                report.t_violations.append((a, b))
    return report


def assignment_summary(B, inst, ladder=None):
    dct = {'assignment': B.to_dict(), 'instance': inst.to_dict(),
           'expected_time': expected_eval_time(B, inst), 'rows': row_breakdown(B, inst),
           'assumptions': check_assumptions(inst).to_dict()}
    if ladder is not None:
        dct['ladder'] = list(ladder)
    return dct


def write_assignment(path, B, inst, ladder=None):
    dct = assignment_summary(B, inst, ladder)
    with open(path, 'w') as stream:
        json.dump(dct, stream, indent=2, sort_keys=True)
    return dct
