"""
Mesh-based coordinate direct search with extreme and progressive barrier constraint handling.

The solver only talks to an evaluator exposing ``evaluate(x) -> Evaluation`` and ``clock``,
so the fidelity controller and the plain fidelity-1 evaluator are interchangeable.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .barrier import BarrierMode
from .core import INF, is_feasible, trial_point
from .errors import BudgetError, InvalidInputError

log = logging.getLogger(__name__)

NO_FEASIBLE_POINT = "no feasible point confirmed at fidelity 1"


@dataclass(frozen=True)
class SolverConfig:
    barrier: BarrierMode = BarrierMode.EB
    max_time: float = None
    max_evaluations: int = None
    initial_mesh: float = 0.1
    mesh_expand: float = 2.0
    mesh_shrink: float = 0.5
    max_mesh: float = 1.0
    min_mesh: float = 1e-6
    seed: int = 0
    opportunistic: bool = True

    def __post_init__(self):
        if self.max_time is None and self.max_evaluations is None:
            raise BudgetError("A time budget or an evaluation budget is required")
        if self.max_time is not None and not self.max_time > 0:
            raise BudgetError(f"The time budget must be positive, got [{self.max_time}]")
        if self.max_evaluations is not None and self.max_evaluations < 1:
            raise BudgetError(f"The evaluation budget must be positive, got [{self.max_evaluations}]")
        if not 0 < self.mesh_shrink < 1:
            raise InvalidInputError(f"The mesh shrink factor must lie in (0, 1), got [{self.mesh_shrink}]")
        if self.mesh_expand < 1:
            raise InvalidInputError(f"The mesh expand factor must be at least 1, got [{self.mesh_expand}]")
        if not 0 < self.min_mesh <= self.initial_mesh <= self.max_mesh:
            raise InvalidInputError(f"Mesh sizes must satisfy 0 < min [{self.min_mesh}] <= initial "
                                    f"[{self.initial_mesh}] <= max [{self.max_mesh}]")


@dataclass(frozen=True)
class BarrierState:
    x_feas: np.ndarray = None
    f_feas: float = INF
    x_inf: np.ndarray = None
    f_inf: float = INF
    h_inf: float = INF
    h_max: float = INF

    @property
    def primary(self):
        return self.x_feas if self.x_feas is not None else self.x_inf

    @property
    def secondary(self):
        return self.x_inf if self.x_feas is not None else None

    def same_incumbents(self, other):
        return _same(self.x_feas, other.x_feas) and _same(self.x_inf, other.x_inf)


def _same(a, b):
    if a is None or b is None:
        return a is b
    return np.array_equal(a, b)


def eb_filter(f, c):
    '''
    f when the outputs are feasible, +inf otherwise
    '''
    return f if is_feasible(c) else INF


def pb_step(candidates, state):
    '''
    applies one iteration of (x, f, h) candidates to the progressive barrier; h_max only
    moves down to h of the infeasible incumbent after an infeasible improvement
    '''
    x_feas, f_feas = state.x_feas, state.f_feas
    x_inf, f_inf, h_inf = state.x_inf, state.f_inf, state.h_inf
    improved = False
    for x, f, h in candidates:
        if h == INF or h > state.h_max or math.isnan(f):
            continue
        if h == 0:
            if f < f_feas or x_feas is None:
                x_feas, f_feas = x, f
        elif f < f_inf or (f == f_inf and h < h_inf) or x_inf is None:
            x_inf, f_inf, h_inf = x, f, h
            improved = True
    h_max = h_inf if improved else state.h_max
    return BarrierState(x_feas, f_feas, x_inf, f_inf, h_inf, h_max)


class _BudgetExhausted(Exception):
    def __init__(self, reason):
        self.reason = reason


@dataclass
class SolverResult:
    x: np.ndarray
    f: float
    evaluations: list = field(default_factory=list)
    history: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    stop_reason: str = ""
    diagnostic: str = None
    elapsed: float = 0.0

    @property
    def found(self):
        return self.x is not None


class _Run:
    def __init__(self, evaluator, bounds, cfg):
        self.evaluator = evaluator
        self.bounds = bounds
        self.cfg = cfg
        self.start = evaluator.clock.elapsed
        self.cache = {}
        self.evaluations = []
        self.history = []
        self.x_best = None
        self.f_best = INF

    @property
    def time(self):
        return self.evaluator.clock.elapsed - self.start

    def submit(self, x):
        key = tuple(x.tolist())
        if key in self.cache:
            return self.cache[key]
        cfg = self.cfg
        if cfg.max_evaluations is not None and len(self.evaluations) >= cfg.max_evaluations:
            raise _BudgetExhausted('evaluations')
        evaluation = self.evaluator.evaluate(x)
        if cfg.max_time is not None and self.time > cfg.max_time:
            log.debug("Evaluation ending at [%s] exceeds the time budget [%s]", self.time, cfg.max_time)
            raise _BudgetExhausted('time')
        self.cache[key] = evaluation
        self.evaluations.append(evaluation)
        if evaluation.confirmed and evaluation.feasible and evaluation.f < self.f_best:
            self.x_best, self.f_best = evaluation.x, evaluation.f
            self.history.append((self.time, evaluation.f))
        return evaluation


class _ExtremeBarrier:
    '''
    feasibility phase ranking by h until a feasible point shows up, then f_omega
    '''

    def __init__(self):
        self.x, self.f, self.h = None, INF, INF
        self.feasible = False

    def offer(self, evaluation):
        f_omega = eb_filter(evaluation.f, evaluation.c)
        if self.feasible:
            better = f_omega < self.f
        elif evaluation.feasible and not math.isnan(evaluation.f):
            better = True
        else:
            better = evaluation.h < self.h or self.x is None
        if better:
            self.x, self.f, self.h = evaluation.x, f_omega, evaluation.h
            self.feasible = self.feasible or evaluation.feasible
        return better

    def centers(self):
        return [self.x]

    def incumbent(self):
        return self.f, (0.0 if self.feasible else self.h), INF


class _ProgressiveBarrier:

    def __init__(self):
        self.state = BarrierState()
        self.start = self.state
        self.candidates = []
        self.fallback = None

    @staticmethod
    def _candidate(evaluation):
        h = evaluation.h
        return evaluation.x, evaluation.f, 0.0 if evaluation.feasible else (h if h > 0 else INF)

    def begin(self):
        self.start = self.state
        self.candidates = []

    def offer(self, evaluation):
        if self.fallback is None:
            self.fallback = evaluation.x
        self.candidates.append(self._candidate(evaluation))
        tentative = pb_step(self.candidates, self.start)
        return not tentative.same_incumbents(self.start)

    def end(self):
        self.state = pb_step(self.candidates, self.start)

    def centers(self):
        centers = [self.state.primary if self.state.primary is not None else self.fallback]
        if self.state.secondary is not None:
            centers.append(self.state.secondary)
        return centers

    def incumbent(self):
        s = self.state
        if s.x_feas is not None:
            return s.f_feas, 0.0, s.h_max
        return s.f_inf, s.h_inf, s.h_max


def _directions(n, rng):
    return [(int(d) // 2, 1.0 if d % 2 == 0 else -1.0) for d in rng.permutation(2 * n)]


def minimize(evaluator, x0, bounds, cfg):
    '''
    coordinate poll around the incumbent(s) along +/- e_i scaled by mesh * (u_i - l_i), snapped
    into the bounds; stops on the time budget, the evaluation budget or the minimum mesh size
    '''
    x0 = trial_point(x0, bounds.dimension)
    if not bounds.contains(x0):
        raise InvalidInputError(f"Starting point {x0.tolist()} lies outside the bounds")
    rng = np.random.default_rng(cfg.seed)
    run = _Run(evaluator, bounds, cfg)
    barrier = _ProgressiveBarrier() if cfg.barrier == BarrierMode.PB else _ExtremeBarrier()
    mesh = cfg.initial_mesh
    iterations = []
    stop_reason = 'mesh'
    try:
        if isinstance(barrier, _ProgressiveBarrier):
            barrier.begin()
            barrier.offer(run.submit(x0))
            barrier.end()
        else:
            barrier.offer(run.submit(x0))
        iteration = 0
        while mesh >= cfg.min_mesh:
            iteration += 1
            success = _poll(run, barrier, mesh, rng)
            mesh = min(mesh * cfg.mesh_expand, cfg.max_mesh) if success else mesh * cfg.mesh_shrink
            f, h, h_max = barrier.incumbent()
            iterations.append({'iteration': iteration, 'mesh': mesh, 'f': f, 'h': h, 'h_max': h_max,
                               'time': run.time})
            log.debug("Iteration [%d] %s, mesh [%s] f [%s] h [%s]",
                      iteration, 'success' if success else 'failure', mesh, f, h)
    except _BudgetExhausted as e:
        stop_reason = e.reason
    diagnostic = None if run.x_best is not None else NO_FEASIBLE_POINT
    if diagnostic:
        log.warning("Solver stopped on [%s] with %s", stop_reason, diagnostic)
    else:
        log.debug("Solver stopped on [%s] with f=[%s] after [%d] evaluations",
                  stop_reason, run.f_best, len(run.evaluations))
    return SolverResult(run.x_best, run.f_best, run.evaluations, run.history, iterations,
                        stop_reason, diagnostic, run.time)


def _poll(run, barrier, mesh, rng):
    width = run.bounds.width
    progressive = isinstance(barrier, _ProgressiveBarrier)
    if progressive:
        barrier.begin()
    directions = _directions(run.bounds.dimension, rng)
    success = False
    try:
        for center in barrier.centers():
            for axis, sign in directions:
                if width[axis] == 0:
                    continue
                candidate = center.copy()
                candidate[axis] += sign * mesh * width[axis]
                candidate = run.bounds.clip(candidate)
                if np.array_equal(candidate, center):
                    continue
                if barrier.offer(run.submit(candidate)):
                    success = True
                    if run.cfg.opportunistic:
                        return success
    finally:
        if progressive:
            barrier.end()
    return success
