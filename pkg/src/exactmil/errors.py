"""Exception types raised across the package."""


class MilError(Exception):
    """Base class for every error raised by exactmil."""


class InvalidTensor(MilError, ValueError):
    pass


class NegativeEntry(InvalidTensor):
    def __init__(self, label, m, n):
        self.label, self.m, self.n = label, m, n
        super().__init__(f"negative probability at (label={label}, m={m}, n={n})")


class UnnormalizedLocation(InvalidTensor):
    def __init__(self, m, n, total):
        self.m, self.n, self.total = m, n, total
        super().__init__(f"probabilities at (m={m}, n={n}) sum to {total!r}, not 1")


class NonFiniteInput(InvalidTensor):
    pass


class ShapeMismatch(MilError, ValueError):
    pass


class LabelOutOfRange(MilError, ValueError):
    pass


class EmptySubset(MilError, ValueError):
    pass


class SubsetOrderExceeded(MilError):
    def __init__(self, order, limit):
        self.order, self.limit = order, limit
        super().__init__(f"subset order {order} exceeds limit {limit}")


class EnumerationTooLarge(MilError):
    pass


class ZeroProbability(MilError, ArithmeticError):
    """The label set has probability zero, so its log-likelihood is -inf."""


class NumericalError(MilError, ArithmeticError):
    pass


class EmptyLabelSet(MilError, ValueError):
    pass


class MaxIsZero(MilError, ArithmeticError):
    pass


class ShapeNotSingleton(MilError, ValueError):
    pass


class GlyphTooLargeForCanvas(MilError, ValueError):
    pass


class InputTooSmall(MilError, ValueError):
    pass


class ZeroProbabilitySample(MilError, ArithmeticError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"sample {index} has zero probability under the model")


class DivergedObjective(MilError, ArithmeticError):
    pass
