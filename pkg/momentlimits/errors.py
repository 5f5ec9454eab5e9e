__all__ = (
    'MomentLimitsError', 'OrderError', 'SupportError', 'ShapeError', 'PrecisionError',
    'ConvergenceError', 'DominationError', 'EvaluationError', 'ConfigError', 'CheckFailure',
)


class MomentLimitsError(Exception):
    """
    Base class of every error raised by the numerical layer.
    """
    exit_code = 3

    def __init__(self, message='', *args, **kwargs):
        Exception.__init__(self, message, *args, **kwargs)


class OrderError(MomentLimitsError, ValueError):
    """
    A moment or matrix order exceeds the configured cap.

    :param cap: The cap which was exceeded.
    """
    def __init__(self, message='', cap=None):
        MomentLimitsError.__init__(self, message)
        self.cap = cap


class SupportError(MomentLimitsError, ValueError):
    """
    The support of a measure does not fit the operation, or an integrand is
    not finite at a quadrature node.

    :param node: The offending node, if any.
    """
    def __init__(self, message='', node=None):
        MomentLimitsError.__init__(self, message)
        self.node = node


class ShapeError(MomentLimitsError, ValueError):
    """
    Matrices handed to one operation disagree in shape.
    """


class PrecisionError(MomentLimitsError, ArithmeticError):
    """
    A Cholesky pivot is not positive at the working precision.

    :param pivot: Index of the failing leading minor.
    :param precision: Mantissa bits in use when it failed.
    """
    def __init__(self, message='', pivot=None, precision=None):
        MomentLimitsError.__init__(self, message)
        self.pivot = pivot
        self.precision = precision


class ConvergenceError(MomentLimitsError, ArithmeticError):
    """
    A truncated series or an eigensolve did not converge.

    :param partial: Whatever was computed before giving up.
    """
    def __init__(self, message='', partial=None):
        MomentLimitsError.__init__(self, message)
        self.partial = partial


class DominationError(MomentLimitsError):
    """
    A point-spread function failed the envelope conditions needed for the
    direct-imaging bound.
    """
    def __init__(self, message='', report=None):
        MomentLimitsError.__init__(self, message)
        self.report = report


class EvaluationError(MomentLimitsError):
    """
    An evaluator failed at one grid point of a sweep.
    """
    def __init__(self, message='', delta=None):
        MomentLimitsError.__init__(self, message)
        self.delta = delta


class ConfigError(MomentLimitsError, ValueError):
    """
    A run configuration did not validate.

    :param errors: Mapping of field name to list of messages, as ``form.errors``.
    """
    exit_code = 2

    def __init__(self, message='', errors=None):
        MomentLimitsError.__init__(self, message)
        self.errors = dict(errors or {})

    def messages(self):
        for name in sorted(self.errors):
            for message in self.errors[name]:
                yield '%s: %s' % (name, message)


class CheckFailure(MomentLimitsError):
    """
    A requested acceptance comparison failed.
    """
    exit_code = 4

    def __init__(self, message='', failures=()):
        MomentLimitsError.__init__(self, message)
        self.failures = list(failures)
