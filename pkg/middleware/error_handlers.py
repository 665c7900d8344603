"""
Error-to-exit-code mapping for the command modules
"""
import logging
from functools import wraps

from model.errors import (
    BridgeError, ConvergenceError, InconsistentSolutionError, InfeasibleError,
    InstanceTooLargeError, InvalidInputError, SpecIOError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONVERGENCE = 2
EXIT_INFEASIBLE = 3

EXIT_CODES = {
    SpecIOError: EXIT_INPUT,
    InvalidInputError: EXIT_INPUT,
    InstanceTooLargeError: EXIT_INPUT,
    InconsistentSolutionError: EXIT_INPUT,
    ConvergenceError: EXIT_CONVERGENCE,
    InfeasibleError: EXIT_INFEASIBLE,
}


def exit_code(err):
    """Exit status for a model error"""
    for cls in type(err).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return EXIT_INPUT


def describe(err):
    """One-line diagnostic, with solver details when the error carries them"""
    message = f"{type(err).__name__}: {err}"
    if isinstance(err, ConvergenceError):
        message += f" [iterations={err.iterations}, final_gap={err.final_gap:.3e}]"
    if isinstance(err, InfeasibleError) and err.residual is not None:
        message += f" [residual={err.residual:.3e}]"
    return message


def exit_on_error(f):
    """Decorator: report BridgeError on stderr and exit with its status code"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except BridgeError as err:
            logger.error(describe(err))
            raise SystemExit(exit_code(err))
    return decorated_function
