"""Synthetic benchmark problems with their run defaults."""
import logging
from dataclasses import dataclass

import numpy as np

from .blackbox import ConstraintModel, CostModel, SyntheticSpec, constant_bias, decaying_bias, make_synthetic
from .core import BoxBounds
from .errors import InvalidInputError

log = logging.getLogger(__name__)

SOLAR_THRESHOLDS = (2.0 ** -7, 0.1, 0.3, 0.7, 1.0, 0.5)


@dataclass(frozen=True)
class Problem:
    name: str
    spec: SyntheticSpec
    rho: float = 1.0
    x0: tuple = None
    ladder: tuple = None
    force_top: bool = False
    budget: float = None
    description: str = ""

    @property
    def descriptor(self):
        return self.spec.descriptor

    def blackbox(self):
        return make_synthetic(self.spec)


def _unit_box(n):
    return BoxBounds(np.zeros(n), np.ones(n))


def _linear(w, q):
    w = np.asarray(w, dtype=float)
    return lambda X: X @ w - q


def _ball(center, radius2, scale=1.0):
    center = np.asarray(center, dtype=float)
    return lambda X: scale * np.sum((X - center) ** 2, axis=1) - radius2


def _wave(frequency, amplitude):
    return lambda X: amplitude * np.sin(frequency * np.sum(X, axis=1))


def quadratic(n=3):
    target = np.linspace(-2.0, 2.0, n) if n > 1 else np.array([1.0])
    spec = SyntheticSpec('quadratic', BoxBounds(np.full(n, -5.0), np.full(n, 5.0)),
                         objective=lambda X: np.sum((X - target) ** 2, axis=1))
    return Problem('quadratic', spec, x0=tuple([0.0] * n), budget=2000.0,
                   description=f"unconstrained convex quadratic on [-5, 5]^{n}, minimum 0 at {target.tolist()}")


def gating():
    '''
    disk of radius 0.12 around (0.3, 0.3): about 4.5% of the unit square is feasible and the
    disk constraint is exact from fidelity 0.1 upward
    '''
    center = np.array([0.3, 0.3])
    spec = SyntheticSpec(
        'gating', _unit_box(2),
        objective=lambda X: np.sum((X - 0.9) ** 2, axis=1),
        constraints=(ConstraintModel(_ball(center, 0.12 ** 2), threshold=0.1,
                                     shift=lambda X: -np.ones(X.shape[0])),),
        cost=CostModel(t_min=0.01, t_max=1.0, alpha=2.0))
    return Problem('gating', spec, rho=0.25, x0=(0.3, 0.3), ladder=(0.1, 1.0), budget=60.0,
                   description="small feasible disk, gating constraint representative at the first fidelity")


def emulation():
    '''
    every fidelity below 1 reports the opposite feasibility of the truth, so only the top
    fidelity can be trusted
    '''
    truths = (_linear([1.0, 1.0, 0.0], 0.5), _ball([0.0, 0.0, 0.0], 0.64))
    constraints = tuple(ConstraintModel(truth, threshold=1.0, shift=lambda X, t=truth: -2.0 * t(X), bias=constant_bias)
                        for truth in truths)
    spec = SyntheticSpec('emulation', BoxBounds(np.full(3, -1.0), np.ones(3)),
                         objective=lambda X: np.sum(X ** 2, axis=1) + X[:, 0],
                         constraints=constraints, cost=CostModel(t_min=0.05, t_max=1.0))
    return Problem('emulation', spec, rho=0.25, x0=(0.0, 0.0, 0.0), ladder=(0.25, 0.5, 1.0), force_top=True,
                   budget=40.0, description="no representative low fidelity, the top fidelity must be used")


def solar_shaped(name, n, m, a_priori, multi_fidelity, rho, objective_varies=False, force_top=False, seed=0):
    '''
    box [0, 1]^n with linear a priori constraints, multi-fidelity ball constraints whose low
    fidelities are perturbed by a decaying wave, and fidelity-independent constraints filling up to m;
    the box center is feasible by construction
    '''
    if a_priori + multi_fidelity > m:
        raise InvalidInputError(f"[{a_priori}] a priori and [{multi_fidelity}] multi-fidelity constraints exceed m=[{m}]")
    rng = np.random.default_rng(seed)
    center = np.full(n, 0.5)
    constraints = []
    for _ in range(a_priori):
        w = rng.uniform(0.0, 1.0, n)
        q = w.sum() / 2.0 + np.sqrt(np.sum(w ** 2) / 12.0)
        constraints.append(ConstraintModel(_linear(w, q), a_priori=True))
    for k in range(multi_fidelity):
        a = rng.uniform(0.3, 0.7, n)
        radius2 = np.mean((center - a) ** 2) + 0.02
        constraints.append(ConstraintModel(_ball(a, radius2, 1.0 / n),
                                           threshold=SOLAR_THRESHOLDS[k % len(SOLAR_THRESHOLDS)],
                                           shift=_wave(7.0 + k, 0.05), bias=decaying_bias))
    for k in range(m - a_priori - multi_fidelity):
        axis = k % n
        constraints.append(ConstraintModel(lambda X, i=axis: np.abs(X[:, i] - 0.5) - 0.45))
    weights = rng.uniform(0.5, 2.0, n)
    target = rng.uniform(0.0, 1.0, n)
    objective_shift = (lambda X, phi: (1.0 - phi) * 0.2 * np.cos(5.0 * np.mean(X, axis=1))) if objective_varies else None
    spec = SyntheticSpec(name, _unit_box(n),
                         objective=lambda X: (X - target) ** 2 @ weights,
                         constraints=tuple(constraints), objective_shift=objective_shift,
                         cost=CostModel(t_min=0.01, t_max=1.0, alpha=1.0,
                                        scale=lambda X: 1.0 + 0.5 * X[:, 0]),
                         seed=seed)
    return Problem(name, spec, rho=rho, x0=tuple(center), force_top=force_top, budget=300.0,
                   description=f"n={n} m={m} with {a_priori} a priori and {multi_fidelity} multi-fidelity constraints")


def random_spec(seed, n=2, m=3, a_priori=1):
    '''
    randomized problem on the unit box: linear a priori constraints, ball constraints with random
    representativity thresholds and linear low-fidelity bias
    '''
    rng = np.random.default_rng(seed)
    constraints = []
    for j in range(m):
        if j < a_priori:
            w = rng.uniform(0.2, 1.0, n)
            constraints.append(ConstraintModel(_linear(w, 0.8 * w.sum()), a_priori=True))
            continue
        a = rng.uniform(0.2, 0.8, n)
        radius2 = rng.uniform(0.02, 0.15)
        w = rng.uniform(-0.3, 0.3, n)
        constraints.append(ConstraintModel(_ball(a, radius2), threshold=float(rng.choice([0.1, 0.3, 0.6, 1.0])),
                                           shift=lambda X, w=w: X @ w + 0.05))
    target = rng.uniform(0.0, 1.0, n)
    return SyntheticSpec(f'random-{seed}', _unit_box(n),
                         objective=lambda X: np.sum((X - target) ** 2, axis=1),
                         constraints=tuple(constraints),
                         cost=CostModel(t_min=0.01, t_max=1.0, alpha=float(rng.uniform(1.0, 3.0))), seed=seed)


PROBLEMS = {
    'quadratic': quadratic,
    'gating': gating,
    'emulation': emulation,
    'solar2': lambda: solar_shaped('solar2', 14, 13, 5, 4, rho=0.25),
    'solar3': lambda: solar_shaped('solar3', 20, 13, 5, 5, rho=0.1, seed=3),
    'solar4': lambda: solar_shaped('solar4', 29, 16, 7, 6, rho=0.05, seed=4),
    'solar7': lambda: solar_shaped('solar7', 7, 6, 2, 2, rho=0.25, objective_varies=True, force_top=True, seed=7),
}


def problem_names():
    return sorted(PROBLEMS)


def get_problem(name):
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise InvalidInputError(f"Unknown problem [{name}], known problems: {', '.join(problem_names())}") from None
    problem = factory()
    log.debug("Loaded problem [%s]: %s", name, problem.description)
    return problem
