import concurrent.futures
import csv
import dataclasses
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .assignment import AssignmentInstance, check_assumptions, expected_eval_time, solve_assignment
from .blackbox import BlackboxDescriptor
from .controller import DirectEvaluator, FidelityController
from .core import BoxBounds, ConstraintMeta, FidelityLadder, trial_point
from .external import ExternalBlackbox
from .mode import RunMode
from .problems import get_problem
from .progress import ProgressBar
from .sampling import (LHConfig, best_point, centered_bounds, estimate_stats, evaluate_samples,
                       latin_hypercube, lh_time_offset)
from .solver import SolverConfig, minimize

log = logging.getLogger(__name__)


@dataclass
class RunSetup:
    name: str
    blackbox: object
    bounds: BoxBounds
    ladder: FidelityLadder
    rho: float
    x0: np.ndarray
    budget: float
    force_top: bool


def setup_run(cfg):
    if cfg.command is not None:
        descriptor = BlackboxDescriptor(cfg.dimension, BoxBounds(cfg.lower, cfg.upper),
                                        ConstraintMeta(cfg.constraints, frozenset(cfg.a_priori)), name=cfg.command)
        blackbox = ExternalBlackbox(cfg.command, descriptor, cfg.protocol, cfg.timeout)
        defaults = dict(rho=1.0, x0=None, ladder=None, budget=None, force_top=False)
    else:
        problem = get_problem(cfg.problem)
        blackbox = problem.blackbox()
        defaults = dict(rho=problem.rho, x0=problem.x0, ladder=problem.ladder, budget=problem.budget,
                        force_top=problem.force_top)
    x0 = None if cfg.lh_start else (cfg.x0 if cfg.x0 is not None else defaults['x0'])
    ladder = cfg.ladder or defaults['ladder']
    if cfg.budget is not None:
        budget = cfg.budget
    else:
        budget = defaults['budget'] if cfg.max_evaluations is None else None
    return RunSetup(name=cfg.name, blackbox=blackbox, bounds=blackbox.descriptor.bounds,
                    ladder=FidelityLadder(ladder) if ladder else FidelityLadder(),
                    rho=cfg.rho if cfg.rho is not None else defaults['rho'],
                    x0=trial_point(x0, blackbox.descriptor.dimension) if x0 is not None else None,
                    budget=budget,
                    force_top=cfg.force_top if cfg.force_top is not None else defaults['force_top'])


def solver_config(cfg, setup, barrier):
    return SolverConfig(barrier=barrier, max_time=setup.budget, max_evaluations=cfg.max_evaluations,
                        initial_mesh=cfg.initial_mesh, mesh_expand=cfg.mesh_expand,
                        mesh_shrink=cfg.mesh_shrink, min_mesh=min(cfg.min_mesh, cfg.initial_mesh),
                        seed=cfg.solver_seed)


def lh_config(cfg, setup):
    return LHConfig(n_samples=cfg.n_samples, rho=setup.rho, seed=cfg.seed, workers=cfg.workers)


@dataclass
class SampleStep:
    samples: object
    stats: object
    offset: float
    x0: np.ndarray
    region: BoxBounds


def sample_step(cfg, setup, ladder=None, disable_progress=True):
    '''
    Latin hypercube over the centered bounds when x0 is known, over the whole box otherwise;
    x0 falls back to the best sampled point
    '''
    ladder = ladder or setup.ladder
    lh = lh_config(cfg, setup)
    region = centered_bounds(setup.x0, setup.bounds, lh.rho) if setup.x0 is not None else setup.bounds
    log.debug("Sampling [%d] points in %s at [%d] fidelities", lh.n_samples, region, ladder.size)
    points = latin_hypercube(region, lh.n_samples, lh.seed)
    samples = evaluate_samples(setup.blackbox, points, ladder, lh.workers, disable_progress)
    offset = lh_time_offset(samples, lh.workers)
    x0 = setup.x0 if setup.x0 is not None else samples.points[best_point(samples)]
    stats = estimate_stats(samples) if ladder.size == setup.ladder.size else None
    return SampleStep(samples, stats, offset, x0, region)


@dataclass
class RunRecord:
    problem: str
    mode: str
    config: dict
    offset: float
    x0: list
    best_x: list
    best_f: float
    history: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    stop_reason: str = ""
    diagnostic: str = None
    elapsed: float = 0.0
    f0: float = None
    assignment: dict = None
    expected_time: float = None
    stats: dict = None
    assumptions: dict = None

    @property
    def found(self):
        return self.best_x is not None

    @property
    def end_time(self):
        return self.offset + self.elapsed

    def to_dict(self):
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(dct):
        return RunRecord(**dct)

    def write_json(self, path):
        with open(path, 'w') as stream:
            json.dump(self.to_dict(), stream, indent=2, sort_keys=True)

    @staticmethod
    def read_json(path):
        with open(path, 'r') as stream:
            return RunRecord.from_dict(json.load(stream))

    def write_iterations_csv(self, path):
        with open(path, 'w', newline='') as stream:
            writer = csv.DictWriter(stream, fieldnames=['iteration', 'mesh', 'f', 'h', 'h_max', 'time'])
            writer.writeheader()
            for row in self.iterations:
                writer.writerow({key: repr(value) if isinstance(value, float) else value for key, value in row.items()})

    def write_evaluations_csv(self, path):
        with open(path, 'w', newline='') as stream:
            writer = csv.writer(stream)
            writer.writerow(['evaluation', 'x', 'f', 'feasible', 'confirmed', 'fidelities',
                             'interrupted_fidelity', 'interrupted_constraint', 'safeguard', 'time'])
            for k, ev in enumerate(self.evaluations):
                fidelity, constraint = ev['interrupted_at'] if ev['interrupted_at'] else ('', '')
                writer.writerow([k, ' '.join(repr(v) for v in ev['x']), repr(ev['f']), int(ev['feasible']),
                                 int(ev['confirmed']), ' '.join(repr(v) for v in ev['fidelities']),
                                 '' if fidelity == '' else repr(fidelity), '' if constraint is None else constraint,
                                 int(ev['safeguard_ran']), repr(ev['time'])])


def write_record(record, path):
    '''
    record JSON at path, iteration and evaluation logs as CSV next to it
    '''
    record.write_json(path)
    stem = os.path.splitext(path)[0]
    record.write_iterations_csv(stem + '.iterations.csv')
    record.write_evaluations_csv(stem + '.evaluations.csv')


def _start_value(result, x0):
    first = result.evaluations[0] if result.evaluations else None
    if first is not None and np.array_equal(first.x, x0) and first.confirmed and first.feasible:
        return first.f
    return result.history[0][1] if result.history else None


def _record(cfg, setup, mode, result, x0, offset, **extra):
    return RunRecord(problem=setup.name, mode=str(mode), config=cfg.to_dict(), offset=offset,
                     x0=x0.tolist(), best_x=result.x.tolist() if result.found else None, best_f=result.f,
                     history=[[offset + t, f] for t, f in result.history],
                     evaluations=[ev.to_dict() for ev in result.evaluations],
                     iterations=[dict(row, time=offset + row['time']) for row in result.iterations],
                     stop_reason=result.stop_reason, diagnostic=result.diagnostic, elapsed=result.elapsed,
                     f0=_start_value(result, x0), **extra)


def run_fico(cfg, disable_progress=True):
    '''
    sample, assign and optimize through the fidelity controller
    '''
    if not cfg.mode.controlled:
        raise ValueError(f"run_fico needs an interrupted mode, got [{cfg.mode}]")
    setup = setup_run(cfg)
    solver_cfg = solver_config(cfg, setup, cfg.mode.barrier)
    step = sample_step(cfg, setup, disable_progress=disable_progress)
    inst = AssignmentInstance.from_stats(step.stats, cfg.epsilon, force_top=setup.force_top)
    assumptions = check_assumptions(inst)
    if assumptions:
        log.warning("Sampled tables break the monotonicity assumptions: [%d] p and [%d] t violations",
                    len(assumptions.p_violations), len(assumptions.t_violations))
    B = solve_assignment(inst, cfg.cap, cfg.workers)
    expected = expected_eval_time(B, inst)
    log.info("Assignment levels %s, expected time per evaluation [%.6g], sampling offset [%.6g]",
             list(B.levels), expected, step.offset)
    controller = FidelityController(setup.blackbox, B, setup.ladder)
    result = minimize(controller, step.x0, setup.bounds, solver_cfg)
    return _record(cfg, setup, cfg.mode, result, step.x0, step.offset, assignment=B.to_dict(),
                   expected_time=expected, stats=step.stats.to_dict(), assumptions=assumptions.to_dict())


def run_base(cfg, disable_progress=True):
    '''
    solver on fidelity 1 evaluations; samples at fidelity 1 only when no x0 is known
    '''
    setup = setup_run(cfg)
    solver_cfg = solver_config(cfg, setup, cfg.barrier or RunMode.BASE.barrier)
    if setup.x0 is not None:
        x0, offset = setup.x0, 0.0
    else:
        step = sample_step(cfg, setup, ladder=FidelityLadder((1.0,)), disable_progress=disable_progress)
        x0, offset = step.x0, step.offset
    result = minimize(DirectEvaluator(setup.blackbox), x0, setup.bounds, solver_cfg)
    return _record(cfg, setup, RunMode.BASE, result, x0, offset)


def run(cfg, disable_progress=True):
    log.debug("Running [%s] in mode [%s]", cfg.name, cfg.mode)
    if cfg.mode.controlled:
        return run_fico(cfg, disable_progress)
    return run_base(cfg, disable_progress)


def time_to_reach(record, target):
    '''
    first record time at which the best confirmed feasible value is at most target, inf if never
    '''
    return next((t for t, f in record.history if f <= target), math.inf)


def bench_configs(cfg, seeds, modes=None, problems=None, vary='both'):
    '''
    one config per (problem, mode, seed); vary selects which seed axis moves: the solver poll
    order, the Latin hypercube (and so the starting point when none is given) or both
    '''
    if vary not in ('solver', 'lh', 'both'):
        raise ValueError(f"Unknown seed axis [{vary}]")
    modes = modes or list(RunMode)
    problems = problems or [cfg.problem]
    configs = []
    for problem in problems:
        for mode in modes:
            for seed in seeds:
                changes = {'mode': mode}
                if cfg.command is None:
                    changes['problem'] = problem
                if vary in ('solver', 'both'):
                    changes['solver_seed'] = seed
                if vary in ('lh', 'both'):
                    changes['seed'] = seed
                configs.append(dataclasses.replace(cfg, **changes))
    return configs


def bench(configs, workers=1, disable_progress=True):
    '''
    runs concurrently, each with its own clock; records keep the order of configs
    '''
    progress = ProgressBar('* bench', disable_progress, unit='runs')
    progress.init_progress(len(configs))

    def execute(cfg):
        record = run(cfg)
        progress.show_progress(f"{cfg.name}/{cfg.mode}", 'run')
        return record

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        records = list(executor.map(execute, configs))
    elapsed = progress.finish_progress()
    log.info("Finished [%d] runs in [%s]", len(records), elapsed)
    return records


def record_name(record):
    cfg = record.config
    name = re.sub(r"[^\w.-]+", "_", record.problem)
    return f"{name}-{record.mode}-lh{cfg['seed']}-s{cfg['solver_seed']}.json"


def reevaluate_best(record, blackbox):
    '''
    fidelity 1 outputs at the best point of the record, None when the run found nothing
    '''
    if record.best_x is None:
        return None
    return blackbox.evaluate(np.asarray(record.best_x), 1.0)
