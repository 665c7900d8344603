"""
Exception hierarchy for the bridge solvers.
The CLI maps these to exit codes (see middleware/error_handlers.py).
"""


class BridgeError(Exception):
    """Base class for every error raised by the model package"""


class InvalidInputError(BridgeError, ValueError):
    """Malformed graph, prior, marginal or moment input"""


class SpecIOError(BridgeError):
    """An input document could not be read or parsed"""


class InfeasibleError(BridgeError):
    """The constraint set admits no distribution with finite relative entropy"""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(BridgeError):
    """An iterative solver stopped before reaching its tolerance"""

    def __init__(self, message, iterations=0, final_gap=float('inf')):
        super().__init__(message)
        self.iterations = iterations
        self.final_gap = final_gap


class InstanceTooLargeError(BridgeError):
    """Exhaustive enumeration requested beyond its cap"""


class InconsistentSolutionError(BridgeError):
    """A solution does not match the prior it is applied to"""
