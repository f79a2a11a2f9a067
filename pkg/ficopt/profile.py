"""
Data profiles over virtual blackbox time.

A run solves its problem at time T when a fidelity-1 confirmed feasible value
f <= f_L + tau * (f0 - f_L) is in its incumbent history by T, with f_L the best value any run
found on the problem and f0 the starting value.
"""
import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .harness import time_to_reach

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataProfileSpec:
    tau: float
    f_ref: dict = field(default_factory=dict)
    f_start: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise InvalidInputError(f"Tau must lie in (0, 1), got [{self.tau}]")


@dataclass
class DataProfile:
    tau: float
    curves: dict
    f_ref: dict
    f_start: dict
    excluded: list = field(default_factory=list)

    def fraction(self, mode, T):
        curve = self.curves[mode]
        times = [t for t, _ in curve]
        k = np.searchsorted(times, T, side='right') - 1
        return curve[k][1] if k >= 0 else 0.0

    def write_csv(self, path):
        with open(path, 'w', newline='') as stream:
            writer = csv.writer(stream)
            writer.writerow(['time_seconds', 'fraction_solved', 'mode'])
            for mode in sorted(self.curves):
                for t, fraction in self.curves[mode]:
                    writer.writerow([repr(float(t)), repr(float(fraction)), mode])


def _reference_values(records, spec):
    by_problem = defaultdict(list)
    for record in records:
        by_problem[record.problem].append(record)
    f_ref, f_start, excluded = {}, {}, []
    for problem, group in sorted(by_problem.items()):
        finals = [r.best_f for r in group if r.found and math.isfinite(r.best_f)]
        if not finals and problem not in spec.f_ref:
            excluded.append(problem)
            continue
        f_ref[problem] = spec.f_ref.get(problem, min(finals) if finals else None)
        starts = [r.f0 for r in group if r.f0 is not None and math.isfinite(r.f0)]
        f_start[problem] = spec.f_start.get(problem, max(starts) if starts else f_ref[problem])
    return by_problem, f_ref, f_start, excluded


def data_profile(records, spec):
    '''
    one step curve per mode: (time, fraction of (problem, run) pairs of that mode solved by time)
    '''
    by_problem, f_ref, f_start, excluded = _reference_values(records, spec)
    for problem in excluded:
        log.warning("Problem [%s] has no feasible point in any run, excluded from the profile", problem)
    solved = defaultdict(list)
    for problem, group in by_problem.items():
        if problem in excluded:
            continue
        target = f_ref[problem] + spec.tau * (f_start[problem] - f_ref[problem])
        for record in group:
            solved[record.mode].append(time_to_reach(record, target))
    curves = {}
    for mode, times in solved.items():
        count = len(times)
        finite = np.sort(np.array([t for t in times if math.isfinite(t)], dtype=float))
        curve = [(0.0, 0.0)]
        for t in np.unique(finite):
            curve.append((float(t), float(np.count_nonzero(finite <= t)) / count))
        curves[mode] = curve
        log.debug("Mode [%s] solves [%d] of [%d] runs", mode, finite.size, count)
    return DataProfile(spec.tau, curves, f_ref, f_start, excluded)
