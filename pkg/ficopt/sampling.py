import concurrent.futures
import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .core import BoxBounds, ConstraintMeta, EvalOutput, FidelityLadder, is_computed, trial_point, violation_h
from .errors import EmptySampleError, InvalidInputError
from .progress import ProgressBar

log = logging.getLogger(__name__)

DEFAULT_SAMPLES = 10 ** 4


@dataclass(frozen=True)
class LHConfig:
    n_samples: int = DEFAULT_SAMPLES
    rho: float = 1.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError(f"The sample size must be positive, got [{self.n_samples}]")
        if not 0 <= self.rho <= 1:
            raise InvalidInputError(f"The sizing factor rho must lie in [0, 1], got [{self.rho}]")
        if self.workers < 1:
            raise InvalidInputError(f"Workers must be positive, got [{self.workers}]")


@dataclass(frozen=True, eq=False)
class FeasibilityStats:
    r: np.ndarray
    p: np.ndarray
    t: np.ndarray
    ladder: FidelityLadder
    sample_count: int = 0
    apriori_pass_count: int = 0
    meta: ConstraintMeta = None

    @property
    def shape(self):
        return self.r.shape

    def to_dict(self):
        return {'ladder': list(self.ladder.values),
                'r': self.r.tolist(), 'p': self.p.tolist(), 't': self.t.tolist(),
                'sample_count': self.sample_count, 'apriori_pass_count': self.apriori_pass_count,
                'constraints': self.r.shape[1],
                'a_priori': sorted(self.meta.a_priori) if self.meta else []}

    @staticmethod
    def from_dict(dct):
        ladder = FidelityLadder(tuple(dct['ladder']))
        m = dct.get('constraints', len(dct['r'][0]) if dct['r'] else 0)
        shape = (ladder.size, m)
        return FeasibilityStats(np.array(dct['r'], dtype=float).reshape(shape),
                                np.array(dct['p'], dtype=float).reshape(shape),
                                np.array(dct['t'], dtype=float), ladder,
                                dct.get('sample_count', 0), dct.get('apriori_pass_count', 0),
                                ConstraintMeta(m, frozenset(dct.get('a_priori', []))))

    def write_json(self, path):
        with open(path, 'w') as stream:
            json.dump(self.to_dict(), stream, indent=2, sort_keys=True)

    @staticmethod
    def read_json(path):
        with open(path, 'r') as stream:
            return FeasibilityStats.from_dict(json.load(stream))


@dataclass
class SampleSet:
    '''
    outputs[k] holds one EvalOutput per fidelity of the ladder, or a single output when the
    point violated an a priori constraint at its first sub-evaluation
    '''
    points: np.ndarray
    outputs: list
    ladder: FidelityLadder
    m: int = 0
    meta: ConstraintMeta = None

    @property
    def mask(self):
        return np.array([len(outs) == self.ladder.size and not any(o.apriori_violated for o in outs)
                         for outs in self.outputs], dtype=bool)

    def __len__(self):
        return len(self.outputs)

    def to_csv(self, path):
        n = self.points.shape[1]
        with open(path, 'w', newline='') as stream:
            writer = csv.writer(stream)
            writer.writerow(['point'] + [f'x{i}' for i in range(n)] + ['fidelity', 'f'] +
                            [f'c{j}' for j in range(self.m)] + ['time', 'apriori_violated', 'failed'])
            for k, outs in enumerate(self.outputs):
                for out in outs:
                    writer.writerow([k] + [repr(float(v)) for v in self.points[k]] + [repr(out.fidelity), repr(out.f)] +
                                    [repr(v) for v in out.c] + [repr(out.time), int(out.apriori_violated), int(out.failed)])

    @staticmethod
    def from_csv(path, ladder, meta=None):
        points, outputs = {}, {}
        with open(path, 'r', newline='') as stream:
            reader = csv.DictReader(stream)
            xs = [name for name in reader.fieldnames if name.startswith('x')]
            cs = [name for name in reader.fieldnames if name.startswith('c')]
            for row in reader:
                k = int(row['point'])
                points[k] = [float(row[name]) for name in xs]
                outputs.setdefault(k, []).append(EvalOutput(
                    float(row['f']), tuple(float(row[name]) for name in cs), float(row['fidelity']),
                    float(row['time']), bool(int(row['apriori_violated'])), bool(int(row['failed']))))
        order = sorted(points)
        return SampleSet(np.array([points[k] for k in order], dtype=float), [outputs[k] for k in order],
                         ladder, len(cs), meta)


def centered_bounds(x0, bounds, rho):
    '''
    LH bounds of half-width rho * (u - l) around x0, intersected with the box
    '''
    if not 0 <= rho <= 1:
        raise InvalidInputError(f"The sizing factor rho must lie in [0, 1], got [{rho}]")
    x0 = trial_point(x0, bounds.dimension)
    if not bounds.contains(x0):
        raise InvalidInputError(f"Starting point {x0.tolist()} lies outside the bounds")
    radius = rho * bounds.width
    return BoxBounds(np.maximum(bounds.lower, x0 - radius), np.minimum(bounds.upper, x0 + radius))


def latin_hypercube(bounds, n_samples, seed):
    if n_samples < 1:
        raise InvalidInputError(f"The sample size must be positive, got [{n_samples}]")
    engine = qmc.LatinHypercube(d=bounds.dimension, scramble=True, seed=np.random.default_rng(seed))
    unit = engine.random(n_samples)
    return bounds.lower + unit * bounds.width


def evaluate_point(blackbox, x, ladder):
    outputs = []
    for fidelity in ladder:
        output = blackbox.evaluate(x, fidelity)
        outputs.append(output)
        if output.apriori_violated:
            break
    return outputs


def evaluate_samples(blackbox, points, ladder, workers=1, disable_progress=True):
    '''
    evaluates every point at every fidelity of the ladder, points run concurrently and
    results keep the order of the points
    '''
    progress = ProgressBar('* sampling', disable_progress, unit='points')
    progress.init_progress(len(points))

    def run(x):
        outputs = evaluate_point(blackbox, x, ladder)
        progress.show_progress(len(outputs), 'fidelities')
        return outputs

    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        outputs = list(executor.map(run, points))
    elapsed = progress.finish_progress()
    log.debug("Evaluating [%d] points at [%d] fidelities took [%s]", len(points), ladder.size, elapsed)
    descriptor = blackbox.descriptor
    return SampleSet(np.asarray(points, dtype=float), outputs, ladder, descriptor.m, descriptor.constraints)


def estimate_tables(C, T):
    '''
    r, p and t tables from constraint values C of shape (points, L, m) and times T of shape (points, L)
    '''
    computed = ~np.isnan(C)
    violated = C > 0
    agrees = (violated == violated[:, -1:, :]) & computed
    representative = np.flip(np.logical_and.accumulate(np.flip(agrees, axis=1), axis=1), axis=1)
    count = C.shape[0]
    r = representative.sum(axis=0) / count
    p = violated.sum(axis=0) / count
    t = np.array([math.fsum(T[:, i]) for i in range(T.shape[1])]) / count
    return r, p, t


def estimate_stats(samples, ladder=None, meta=None):
    ladder = ladder or samples.ladder
    meta = meta or samples.meta
    mask = samples.mask
    if not np.any(mask):
        raise EmptySampleError(len(samples))
    kept = [outs for outs, keep in zip(samples.outputs, mask) if keep]
    C = np.array([[out.c for out in outs] for outs in kept], dtype=float).reshape(len(kept), ladder.size, samples.m)
    T = np.array([[out.time for out in outs] for outs in kept], dtype=float)
    r, p, t = estimate_tables(C, T)
    log.debug("Estimated feasibility tables from [%d] of [%d] points", len(kept), len(samples))
    return FeasibilityStats(r, p, t, ladder, len(samples), len(kept), meta)


def lh_time_offset(samples, workers=1):
    if workers < 1:
        raise InvalidInputError(f"Workers must be positive, got [{workers}]")
    return math.fsum(out.time for outs in samples.outputs for out in outs) / workers


def best_point(samples):
    '''
    index of the best sampled point: feasible first, then lowest h, then lowest f, at the top
    fidelity evaluated; points rejected by an a priori constraint come last
    '''
    def rank(k):
        last = samples.outputs[k][-1]
        if last.apriori_violated or len(samples.outputs[k]) < samples.ladder.size:
            return (2, violation_h(last.c), math.inf, k)
        f = last.f if is_computed(last.f) else math.inf
        return (0 if last.feasible else 1, violation_h(last.c), f, k)
    return min(range(len(samples)), key=rank)
