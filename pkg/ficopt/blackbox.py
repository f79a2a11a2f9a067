import hashlib
import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .core import INF, NOT_COMPUTED, BoxBounds, ConstraintMeta, EvalOutput, FidelityLadder, trial_point
from .errors import EmptySampleError, InvalidInputError, NonMonotoneCostError
from .sampling import FeasibilityStats, estimate_tables

log = logging.getLogger(__name__)

MAX_GRID_POINTS = 10 ** 6


@dataclass(frozen=True)
class BlackboxDescriptor:
    dimension: int
    bounds: BoxBounds
    constraints: ConstraintMeta
    objective_varies_with_fidelity: bool = False
    name: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise InvalidInputError(f"Dimension must be at least 1, got [{self.dimension}]")
        if self.bounds.dimension != self.dimension:
            raise InvalidInputError(f"Bounds have dimension [{self.bounds.dimension}], expected [{self.dimension}]")

    @property
    def m(self):
        return self.constraints.count


class MultiFidelityBlackbox(ABC):
    '''
    evaluate(x, fidelity) returns an EvalOutput; at fidelity 0 only the a priori constraints are
    computed and any a priori violation short-circuits the remaining outputs
    '''

    @property
    @abstractmethod
    def descriptor(self):
        pass

    @abstractmethod
    def evaluate(self, x, fidelity):
        pass


class VirtualClock:
    '''
    model time of blackbox evaluations charged to a single run
    '''

    def __init__(self, elapsed=0.0):
        self._elapsed = float(elapsed)
        self._lock = threading.Lock()

    @property
    def elapsed(self):
        return self._elapsed

    def charge(self, output):
        with self._lock:
            self._elapsed += output.time
            return self._elapsed


def decaying_bias(fidelity):
    return 1.0 - fidelity


def constant_bias(fidelity):
    return 1.0


@dataclass(frozen=True)
class CostModel:
    '''
    t(x, phi) = (t_min + (t_max - t_min) * phi**alpha) * scale(x)
    '''
    t_min: float = 0.01
    t_max: float = 1.0
    alpha: float = 1.0
    scale: object = None
    curve: object = None

    def base_time(self, fidelity):
        if self.curve is not None:
            return float(self.curve(fidelity))
        return self.t_min + (self.t_max - self.t_min) * fidelity ** self.alpha

    def times(self, X, fidelity):
        base = np.full(X.shape[0], self.base_time(fidelity))
        if self.scale is not None:
            base = base * np.asarray(self.scale(X), dtype=float)
        return base


@dataclass(frozen=True)
class ConstraintModel:
    '''
    c_j(x, phi) = truth(x) + bias(phi) * shift(x) whenever phi < threshold, truth(x) otherwise
    '''
    truth: object
    threshold: float = 0.0
    shift: object = None
    bias: object = decaying_bias
    a_priori: bool = False

    def values(self, X, fidelity):
        values = np.asarray(self.truth(X), dtype=float)
        if self.shift is not None and fidelity < self.threshold:
            values = values + self.bias(fidelity) * np.asarray(self.shift(X), dtype=float)
        return values


@dataclass(frozen=True)
class SyntheticSpec:
    name: str
    bounds: BoxBounds
    objective: object
    constraints: tuple = ()
    cost: CostModel = field(default_factory=CostModel)
    objective_shift: object = None
    noise: float = 0.0
    seed: int = 0

    @property
    def dimension(self):
        return self.bounds.dimension

    @property
    def meta(self):
        return ConstraintMeta(len(self.constraints),
                              frozenset(j for j, cm in enumerate(self.constraints) if cm.a_priori))

    @property
    def descriptor(self):
        return BlackboxDescriptor(self.dimension, self.bounds, self.meta,
                                  objective_varies_with_fidelity=self.objective_shift is not None or self.noise > 0,
                                  name=self.name)


class SyntheticBlackbox(MultiFidelityBlackbox):

    def __init__(self, spec):
        self.spec = spec
        self._descriptor = spec.descriptor
        self._a_priori = sorted(self._descriptor.constraints.a_priori)

    @property
    def descriptor(self):
        return self._descriptor

    def evaluate(self, x, fidelity):
        x = trial_point(x, self.spec.dimension)
        f, c, t, violated = self.evaluate_rows(x[np.newaxis, :], fidelity)
        return EvalOutput(float(f[0]), tuple(float(v) for v in c[0]), float(fidelity), float(t[0]),
                          apriori_violated=bool(violated[0]))

    def evaluate_rows(self, X, fidelity):
        '''
        vectorized evaluation of the rows of X at one fidelity: (f, C, times, apriori_violated)
        '''
        spec = self.spec
        fidelity = float(fidelity)
        count, m = X.shape[0], len(spec.constraints)
        C = np.full((count, m), NOT_COMPUTED)
        for j in self._a_priori:
            C[:, j] = spec.constraints[j].values(X, fidelity)
        violated = np.zeros(count, dtype=bool)
        if self._a_priori:
            apriori = C[:, self._a_priori]
            violated = np.any((apriori > 0) | ~np.isfinite(apriori), axis=1)
        times = spec.cost.times(X, fidelity)
        screening = spec.cost.times(X, 0.0)
        f = np.full(count, NOT_COMPUTED)
        if fidelity > 0:
            for j, cm in enumerate(spec.constraints):
                if not cm.a_priori:
                    C[:, j] = cm.values(X, fidelity)
            f = np.asarray(spec.objective(X), dtype=float) * np.ones(count)
            if spec.objective_shift is not None and fidelity < 1.0:
                f = f + np.asarray(spec.objective_shift(X, fidelity), dtype=float)
            if spec.noise > 0 and fidelity < 1.0:
                self._add_noise(X, fidelity, f, C)
        passed = ~violated
        if np.any(violated):
            f = np.where(violated, INF, f)
            others = [j for j in range(m) if j not in self._a_priori]
            C[np.ix_(violated, others)] = NOT_COMPUTED
            times = np.where(violated, screening, times)
        if fidelity == 0:
            f = np.where(passed, NOT_COMPUTED, f)
        return f, C, times, violated

    def _add_noise(self, X, fidelity, f, C):
        spec = self.spec
        for row in range(X.shape[0]):
            digest = hashlib.blake2b(X[row].tobytes() + np.float64(fidelity).tobytes(), digest_size=8).digest()
            rng = np.random.default_rng([spec.seed, int.from_bytes(digest, 'little')])
            draws = rng.standard_normal(len(spec.constraints) + 1) * spec.noise * (1.0 - fidelity)
            f[row] += draws[0]
            for j, cm in enumerate(spec.constraints):
                if not cm.a_priori and fidelity < cm.threshold:
                    C[row, j] += draws[j + 1]


def make_synthetic(spec, probes=101):
    cost = spec.cost
    if cost.curve is None and (cost.t_min < 0 or cost.t_max < cost.t_min or cost.alpha <= 0):
        raise NonMonotoneCostError(
            f"Cost model t_min=[{cost.t_min}] t_max=[{cost.t_max}] alpha=[{cost.alpha}] is not monotone increasing")
    curve = [cost.base_time(phi) for phi in np.linspace(0.0, 1.0, probes)]
    if any(b < a for a, b in zip(curve, curve[1:])) or curve[0] < 0:
        raise NonMonotoneCostError(f"Cost model of [{spec.name}] decreases with the fidelity")
    if cost.scale is not None:
        center = ((spec.bounds.lower + spec.bounds.upper) / 2.0)[np.newaxis, :]
        if not np.all(np.asarray(cost.scale(center)) > 0):
            raise NonMonotoneCostError(f"Cost scale of [{spec.name}] must be positive")
    log.debug("Built synthetic problem [%s] with n=[%d] m=[%d]", spec.name, spec.dimension, len(spec.constraints))
    return SyntheticBlackbox(spec)


def grid_points(region, grid_density, max_points=MAX_GRID_POINTS):
    '''
    cell-centered grid over the region, or a Halton sequence of max_points when the grid is too large
    '''
    if grid_density < 2:
        raise InvalidInputError(f"Grid density must be at least 2 per axis, got [{grid_density}]")
    n = region.dimension
    if grid_density ** n <= max_points:
        axes = [region.lower[i] + (np.arange(grid_density) + 0.5) / grid_density * region.width[i] for i in range(n)]
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([axis.reshape(-1) for axis in mesh], axis=1)
    log.debug("Grid of [%d]^[%d] points too large, using [%d] Halton points", grid_density, n, max_points)
    unit = qmc.Halton(d=n, scramble=False).random(max_points)
    return qmc.scale(unit, region.lower, region.upper) if np.all(region.width > 0) else \
        region.lower + unit * region.width


def true_stats(spec, region, grid_density, ladder=None, max_points=MAX_GRID_POINTS):
    '''
    dense-grid estimate of r, p and t over region restricted to the a priori feasible set
    '''
    ladder = ladder or FidelityLadder()
    bb = SyntheticBlackbox(spec)
    X = grid_points(region, grid_density, max_points)
    C = np.empty((X.shape[0], ladder.size, len(spec.constraints)))
    T = np.empty((X.shape[0], ladder.size))
    passed = np.ones(X.shape[0], dtype=bool)
    for i, fidelity in enumerate(ladder):
        _, C[:, i, :], T[:, i], violated = bb.evaluate_rows(X, fidelity)
        passed &= ~violated
    if not np.any(passed):
        raise EmptySampleError(X.shape[0])
    r, p, t = estimate_tables(C[passed], T[passed])
    return FeasibilityStats(r, p, t, ladder, sample_count=X.shape[0], apriori_pass_count=int(passed.sum()))
