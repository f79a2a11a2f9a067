import dataclasses
import logging
from dataclasses import dataclass

import yaml

from .assignment import DEFAULT_CAP
from .barrier import BarrierMode
from .errors import InvalidInputError
from .mode import RunMode
from .protocol import FidelityProtocol
from .sampling import DEFAULT_SAMPLES

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.05

ENV_VARS = {
    'problem': 'FICOPT_PROBLEM',
    'epsilon': 'FICOPT_EPSILON',
    'workers': 'FICOPT_WORKERS',
    'seed': 'FICOPT_SEED',
    'mode': 'FICOPT_MODE',
}


@dataclass(frozen=True)
class RunConfig:
    problem: str = None
    command: str = None
    mode: RunMode = RunMode.INTER_PB
    ladder: tuple = None
    epsilon: float = DEFAULT_EPSILON
    rho: float = None
    n_samples: int = DEFAULT_SAMPLES
    workers: int = 1
    seed: int = 0
    x0: tuple = None
    lh_start: bool = False
    budget: float = None
    max_evaluations: int = None
    force_top: bool = None
    barrier: BarrierMode = None
    cap: int = DEFAULT_CAP
    initial_mesh: float = 0.1
    mesh_expand: float = 2.0
    mesh_shrink: float = 0.5
    min_mesh: float = 1e-6
    solver_seed: int = 0
    dimension: int = None
    lower: tuple = None
    upper: tuple = None
    constraints: int = 0
    a_priori: tuple = ()
    protocol: FidelityProtocol = FidelityProtocol.ARGUMENT
    timeout: float = None

    def __post_init__(self):
        if (self.problem is None) == (self.command is None):
            raise InvalidInputError("Specify exactly one of a problem name or an external blackbox command")
        for name, enum_type in (('mode', RunMode), ('barrier', BarrierMode), ('protocol', FidelityProtocol)):
            value = getattr(self, name)
            if isinstance(value, str):
                converted = enum_type.argparse(value.replace('-', '_'))
                if isinstance(converted, str):
                    raise InvalidInputError(f"Invalid {name} [{value}], expected one of "
                                            f"{', '.join(str(e) for e in enum_type)}")
                object.__setattr__(self, name, converted)
        for name in ('ladder', 'x0', 'lower', 'upper'):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(v) for v in value))
        object.__setattr__(self, 'a_priori', tuple(sorted(int(j) for j in self.a_priori)))
        if not 0 <= self.epsilon <= 1:
            raise InvalidInputError(f"Epsilon must lie in [0, 1], got [{self.epsilon}]")
        if self.rho is not None and not 0 <= self.rho <= 1:
            raise InvalidInputError(f"The sizing factor rho must lie in [0, 1], got [{self.rho}]")
        if self.n_samples < 1 or self.workers < 1:
            raise InvalidInputError(f"Sample size [{self.n_samples}] and workers [{self.workers}] must be positive")
        if self.command is not None and (self.dimension is None or self.lower is None or self.upper is None):
            raise InvalidInputError("An external blackbox needs its dimension and lower/upper bounds")

    @property
    def name(self):
        return self.problem if self.problem is not None else self.command

    def to_dict(self):
        dct = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, (RunMode, BarrierMode, FidelityProtocol)):
                value = str(value)
            elif isinstance(value, tuple):
                value = list(value)
            dct[f.name] = value
        return dct

    @staticmethod
    def from_dict(dct):
        unknown = set(dct) - config_keys()
        if unknown:
            raise InvalidInputError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")
        return RunConfig(**dct)


def config_keys():
    return {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path):
    '''
    flat YAML mapping whose keys are RunConfig fields
    '''
    if path is None:
        return {}
    try:
        with open(path, 'r') as stream:
            dct = yaml.safe_load(stream) or {}
    except OSError as e:
        raise InvalidInputError(f"Cannot read config file [{path}]: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise InvalidInputError(f"Config file [{path}] is not valid YAML: {e}") from e
    if not isinstance(dct, dict):
        raise InvalidInputError(f"Config file [{path}] must hold a key-value mapping")
    unknown = set(dct) - config_keys()
    if unknown:
        raise InvalidInputError(f"Unknown keys in config file [{path}]: {', '.join(sorted(unknown))}")
    log.debug("Loaded config file [%s] with keys %s", path, sorted(dct))
    return dct


def build_run_config(file_values=None, overrides=None, **changes):
    '''
    layers overrides (flags, already defaulting to the environment) on top of the file values,
    None meaning "not given"
    '''
    values = dict(file_values or {})
    values.update({key: value for key, value in (overrides or {}).items() if value is not None and key in config_keys()})
    values.update(changes)
    return RunConfig.from_dict(values)
