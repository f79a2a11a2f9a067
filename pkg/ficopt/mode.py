import enum

from .barrier import BarrierMode


class RunMode(enum.Enum):
    INTER_PB = (1, BarrierMode.PB)
    INTER_EB = (2, BarrierMode.EB)
    BASE = (3, BarrierMode.EB)

    def __init__(self, int_value, barrier):
        self.int_value = int_value
        self.barrier = barrier

    @property
    def controlled(self):
        return self is not RunMode.BASE

    def __str__(self):
        return self.name.lower()

    def __repr__(self):
        return str(self)

    @staticmethod
    def argparse(s):
        try:
            return RunMode[s.upper().replace('-', '_')]
        except KeyError:
            return s
