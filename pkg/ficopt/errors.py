class FicoptError(Exception):
    """Base class for every error raised by ficopt."""


class InvalidInputError(FicoptError, ValueError):
    pass


class EmptySampleError(FicoptError):
    def __init__(self, sample_count):
        self.sample_count = sample_count
        super().__init__(
            f"None of the [{sample_count}] Latin hypercube points satisfies the a priori constraints, "
            "increase the sizing factor (rho) or the sample size (n_H)")


class AssignmentTooLargeError(FicoptError):
    def __init__(self, candidates, cap):
        self.candidates = candidates
        self.cap = cap
        super().__init__(
            f"The reduced assignment space holds [{candidates}] candidates, above the cap of [{cap}], "
            "use a larger epsilon or a coarser fidelity ladder")


class BudgetError(FicoptError, ValueError):
    pass


class NonMonotoneCostError(FicoptError, ValueError):
    pass
