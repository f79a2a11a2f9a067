"""
Adapter running an external executable as a multi-fidelity blackbox.

The point is written to a file, one decimal value per line. The fidelity goes either as the
last command-line argument or as a trailing line of that file. The program prints one line
``f c_0 ... c_(m-1) [cost]``; without the cost token the wall-clock time of the child
process is charged.
"""
import logging
import os
import shlex
import subprocess
import tempfile
import time

from .blackbox import MultiFidelityBlackbox
from .core import INF, NOT_COMPUTED, EvalOutput, is_computed, trial_point
from .protocol import FidelityProtocol

log = logging.getLogger(__name__)


def format_value(value):
    return format(float(value), '.17g')


def write_point(path, x, fidelity=None):
    with open(path, 'w') as stream:
        for value in x:
            stream.write(format_value(value) + '\n')
        if fidelity is not None:
            stream.write(format_value(fidelity) + '\n')


def parse_output(text, m):
    '''
    (f, c, cost) from the last non-empty line, cost is None when the program reported none
    '''
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("blackbox printed nothing")
    tokens = lines[-1].split()
    if len(tokens) not in (m + 1, m + 2):
        raise ValueError(f"expected [{m + 1}] values, got [{len(tokens)}]")
    values = [float(token) for token in tokens]
    cost = values[m + 1] if len(values) == m + 2 else None
    if cost is not None and not cost >= 0:
        raise ValueError(f"negative cost [{cost}]")
    return values[0], tuple(values[1:m + 1]), cost


def exec_blackbox(command, protocol, x, fidelity, m, a_priori=frozenset(), timeout=None, cwd=None):
    x = trial_point(x)
    fd, path = tempfile.mkstemp(prefix='ficopt-', suffix='.txt', dir=cwd)
    os.close(fd)
    try:
        args = shlex.split(command) + [path]
        if protocol == FidelityProtocol.LINE:
            write_point(path, x, fidelity)
        else:
            write_point(path, x)
            args.append(format_value(fidelity))
        start = time.perf_counter()
        try:
            process = subprocess.run(args, capture_output=True, text=True, timeout=timeout, cwd=cwd)
        except subprocess.TimeoutExpired:
            log.error("Blackbox [%s] timed out after [%s]s at %s", command, timeout, x.tolist())
            return EvalOutput.failure(m, fidelity, time.perf_counter() - start)
        except OSError as e:
            log.error("Blackbox [%s] could not start: %s", command, e)
            return EvalOutput.failure(m, fidelity, time.perf_counter() - start)
        elapsed = time.perf_counter() - start
    finally:
        os.remove(path)
    if process.returncode != 0:
        log.debug("Blackbox [%s] exited with [%d] at %s: %s", command, process.returncode, x.tolist(),
                  process.stderr.strip())
        return EvalOutput.failure(m, fidelity, elapsed)
    try:
        f, c, cost = parse_output(process.stdout, m)
    except ValueError as e:
        log.debug("Unparseable output of [%s] at %s: %s", command, x.tolist(), e)
        return EvalOutput.failure(m, fidelity, elapsed)
    charged = elapsed if cost is None else cost
    violated = [j for j in sorted(a_priori) if not c[j] <= 0 and is_computed(c[j])]
    if violated or fidelity == 0:
        # fidelity 0 screens the a priori constraints only
        c = tuple(value if j in a_priori else NOT_COMPUTED for j, value in enumerate(c))
    if violated:
        return EvalOutput(INF, c, fidelity, charged, apriori_violated=True)
    if fidelity == 0:
        return EvalOutput(NOT_COMPUTED, c, fidelity, charged)
    return EvalOutput(f, c, fidelity, charged)


class ExternalBlackbox(MultiFidelityBlackbox):

    def __init__(self, command, descriptor, protocol=FidelityProtocol.ARGUMENT, timeout=None, cwd=None):
        self.command = command
        self._descriptor = descriptor
        self.protocol = protocol
        self.timeout = timeout
        self.cwd = cwd

    @property
    def descriptor(self):
        return self._descriptor

    def evaluate(self, x, fidelity):
        x = trial_point(x, self._descriptor.dimension)
        return exec_blackbox(self.command, self.protocol, x, float(fidelity), self._descriptor.m,
                             self._descriptor.constraints.a_priori, self.timeout, self.cwd)
