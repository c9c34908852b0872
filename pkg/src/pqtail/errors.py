"""
Custom exceptions for the pqtail package.

Every exception carries the exit code the CLI terminates with when it escapes a run. Exit code 1 is
reserved for runs that completed but had a failing agreement verdict.
"""


from __future__ import annotations


class PqtailError(Exception):
    """
    Base class for all errors raised by pqtail.
    """
    exit_code: int = 1

    def __init__(self, message: str = '') -> None:
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f'{type(self).__name__}(message="{self.message}", exit_code={self.exit_code})'


class ConfigError(PqtailError):
    """
    Raised when a configuration file does not parse, does not validate, or describes an unstable model.
    """
    exit_code = 2


class NoConvergence(PqtailError):
    """
    Raised when an iterative solver hits its iteration limit before reaching the requested tolerance.
    """
    exit_code = 3

    def __init__(self, message: str = '', iterations: int = 0, residual: float = float('nan')) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual

    def __str__(self) -> str:
        return f'NoConvergence(message="{self.message}", iterations={self.iterations}, residual={self.residual:.3e})'


class NoLundbergRoot(PqtailError):
    """
    Raised when E exp{γ(A - S)} = 1 has no positive root, e.g. for heavy-tailed arrivals.
    """
    exit_code = 4


class NoCramerRoot(PqtailError):
    """
    Raised when the two-dimensional Cramér system has no usable root.
    """
    exit_code = 4

    REASONS = ('domain-exhausted', 'no-convergence', 'trivial-root-only')

    def __init__(self, message: str = '', reason: str = 'no-convergence') -> None:
        if reason not in self.REASONS:
            raise ValueError(f'Unknown NoCramerRoot reason: {reason}')
        super().__init__(message)
        self.reason = reason

    def __str__(self) -> str:
        return f'NoCramerRoot(message="{self.message}", reason="{self.reason}")'


class PreconditionFailed(PqtailError):
    """
    Raised when an estimator or series is asked to run outside the regime it is valid for.
    """
    exit_code = 5


class DomainError(PqtailError):
    """
    Raised when a moment generating function is evaluated outside its convergence domain.
    """
    exit_code = 6

    def __init__(self, message: str = '', theta: float = float('nan')) -> None:
        super().__init__(message)
        self.theta = theta


class DegenerateFit(PqtailError):
    """
    Raised when a least-squares design matrix is rank-deficient.
    """
    exit_code = 7


class WalkOverflowError(PqtailError):
    """
    Raised when a simulated random walk leaves the range where int64 first-passage checks are exact.
    """
    exit_code = 8
