"""
Shared domain types and the constraint violation function.

Extended reals are plain floats: ``math.inf`` is the +inf marker and
NaN marks a value the blackbox did not compute (constraints skipped by a
phi=0 sub-evaluation or suppressed by an a priori short-circuit).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

INF = math.inf
NOT_COMPUTED = math.nan

DEFAULT_LADDER = (0.0, 1e-10) + tuple(2.0 ** -k for k in range(10, 3, -1)) + \
    tuple(round(0.1 * k, 1) for k in range(1, 10)) + (1.0,)


def ext_real(value):
    '''
    coerces a blackbox value to an extended real: None and +/-inf overflow map to +inf,
    NaN is kept as the not-computed marker
    '''
    if value is None:
        return INF
    value = float(value)
    if value == INF or value == -INF:
        return INF if value > 0 else value
    return value


def is_computed(value):
    return not math.isnan(value)


def violation_h(c, in_x=True):
    '''
    sum of squared positive constraint parts, +inf outside X or on any +inf constraint;
    not-computed entries contribute nothing
    '''
    if not in_x:
        return INF
    h = 0.0
    for value in c:
        if not is_computed(value):
            continue
        if value == INF:
            return INF
        if value > 0:
            h += value * value
    return h


def is_feasible(c):
    return all(value <= 0 for value in c)


def trial_point(x, n=None):
    point = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and point.shape[0] != n:
        raise InvalidInputError(f"Trial point has dimension [{point.shape[0]}], expected [{n}]")
    return point


@dataclass(frozen=True, eq=False)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise InvalidInputError(f"Bounds lengths differ: [{lower.shape[0]}] lower vs [{upper.shape[0]}] upper")
        if np.any(lower > upper):
            raise InvalidInputError(f"Lower bounds exceed upper bounds at indexes {np.flatnonzero(lower > upper).tolist()}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def dimension(self):
        return self.lower.shape[0]

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, x):
        x = trial_point(x, self.dimension)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def clip(self, x):
        return np.clip(trial_point(x, self.dimension), self.lower, self.upper)

    def __eq__(self, other):
        if not isinstance(other, BoxBounds):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __repr__(self):
        return f"BoxBounds(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def to_dict(self):
        return {'lower': self.lower.tolist(), 'upper': self.upper.tolist()}

    @staticmethod
    def from_dict(dct):
        return BoxBounds(dct['lower'], dct['upper'])


@dataclass(frozen=True)
class FidelityLadder:
    values: tuple = DEFAULT_LADDER

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidInputError("The fidelity ladder is empty")
        if any(v < 0 or v > 1 for v in values):
            raise InvalidInputError(f"Fidelities must lie in [0, 1], got {list(values)}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidInputError(f"Fidelities must be strictly increasing, got {list(values)}")
        if values[-1] != 1.0:
            raise InvalidInputError(f"The fidelity ladder must end at 1, got [{values[-1]}]")
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, index):
        return self.values[index]

    @property
    def size(self):
        return len(self.values)

    @property
    def top(self):
        return self.size - 1

    @property
    def has_zero(self):
        return self.values[0] == 0.0

    def index_of(self, fidelity):
        return self.values.index(float(fidelity))


@dataclass(frozen=True)
class ConstraintMeta:
    count: int
    a_priori: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        a_priori = frozenset(int(j) for j in self.a_priori)
        if self.count < 0:
            raise InvalidInputError(f"Constraint count must be nonnegative, got [{self.count}]")
        if any(j < 0 or j >= self.count for j in a_priori):
            raise InvalidInputError(f"A priori indexes {sorted(a_priori)} fall outside [0, {self.count})")
        object.__setattr__(self, 'a_priori', a_priori)

    @property
    def filtered(self):
        return tuple(j for j in range(self.count) if j not in self.a_priori)


@dataclass(frozen=True)
class EvalOutput:
    f: float
    c: tuple
    fidelity: float
    time: float
    apriori_violated: bool = False
    failed: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'c', tuple(ext_real(v) for v in self.c))
        object.__setattr__(self, 'f', ext_real(self.f))
        if not self.time >= 0:
            raise InvalidInputError(f"Evaluation time must be nonnegative, got [{self.time}]")

    @property
    def feasible(self):
        return not self.failed and not self.apriori_violated and is_feasible(self.c)

    def h(self, in_x=True):
        return violation_h(self.c, in_x)

    @staticmethod
    def failure(m, fidelity, time):
        return EvalOutput(INF, (INF,) * m, fidelity, time, failed=True)

    def to_dict(self):
        return {'f': self.f, 'c': list(self.c), 'fidelity': self.fidelity, 'time': self.time,
                'apriori_violated': self.apriori_violated, 'failed': self.failed}
