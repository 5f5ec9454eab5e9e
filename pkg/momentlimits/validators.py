"""
Validators for run-configuration fields.

A validator is a callable ``validator(form, field)`` which raises
``ValidationError`` to reject the field and ``StopValidation`` to end the
chain.
"""
import math

__all__ = (
    'InputRequired', 'input_required', 'Optional', 'optional', 'NumberRange', 'number_range',
    'PhotonBudget', 'photon_budget', 'PrecisionBits', 'precision_bits',
    'ValidationError', 'StopValidation',
)


class ValidationError(ValueError):
    """
    Raised when a validator fails to validate its input.
    """
    def __init__(self, message='', *args, **kwargs):
        ValueError.__init__(self, message, *args, **kwargs)


class StopValidation(Exception):
    """
    Causes the validation chain to stop.

    If StopValidation is raised, no more validators in the validation chain are
    called. If raised with a message, the message will be added to the errors
    list.
    """
    def __init__(self, message='', *args, **kwargs):
        Exception.__init__(self, message, *args, **kwargs)


class NumberRange(object):
    """
    Validates that a number is of a minimum and/or maximum value, inclusive.

    :param min:
        The minimum required value of the number. If not provided, minimum
        value will not be checked.
    :param max:
        The maximum value of the number. If not provided, maximum value
        will not be checked.
    :param exclusive_min:
        Reject ``min`` itself, for quantities which must be strictly positive.
    :param message:
        Error message to raise in case of a validation error. Can be
        interpolated using `%(min)s` and `%(max)s` if desired.
    """
    def __init__(self, min=None, max=None, exclusive_min=False, message=None):
        self.min = min
        self.max = max
        self.exclusive_min = exclusive_min
        self.message = message

    def __call__(self, form, field):
        data = field.data
        too_small = False
        if data is not None and self.min is not None:
            too_small = data <= self.min if self.exclusive_min else data < self.min
        if data is None or too_small or (self.max is not None and data > self.max):
            message = self.message
            if message is None:
                # %(min)s interpolation supports floats, None, and Decimals alike
                if self.max is None:
                    if self.exclusive_min:
                        message = field.gettext('Number must be greater than %(min)s.')
                    else:
                        message = field.gettext('Number must be at least %(min)s.')
                elif self.min is None:
                    message = field.gettext('Number must be at most %(max)s.')
                else:
                    message = field.gettext('Number must be between %(min)s and %(max)s.')

            raise ValidationError(message % dict(min=self.min, max=self.max))


class Optional(object):
    """
    Allows empty input and stops the validation chain from continuing.

    If input is empty, also removes prior errors (such as processing errors)
    from the field.
    """
    field_flags = ('optional', )

    def __call__(self, form, field):
        if not field.raw_data or isinstance(field.raw_data[0], str) and not field.raw_data[0].strip():
            field.errors[:] = []
            raise StopValidation()


class InputRequired(object):
    """
    Validates that input was provided for this field.
    """
    field_flags = ('required', )

    def __init__(self, message=None):
        self.message = message

    def __call__(self, form, field):
        if not field.raw_data or not field.raw_data[0]:
            if self.message is None:
                message = field.gettext('This field is required.')
            else:
                message = self.message

            field.errors[:] = []
            raise StopValidation(message)


class PhotonBudget(object):
    """
    Ties the expected photon number to ``M * epsilon``.

    When the field is empty it is derived from the two other fields; when
    all three were given as input they must agree within ``rel``. Defaults
    of ``M`` and ``epsilon`` never override an explicit photon number.

    :param m_field: Name of the temporal-mode count field.
    :param epsilon_field: Name of the per-mode photon probability field.
    """
    def __init__(self, m_field='m', epsilon_field='eps', rel=1e-12, message=None):
        self.m_field = m_field
        self.epsilon_field = epsilon_field
        self.rel = rel
        self.message = message

    def __call__(self, form, field):
        m = form[self.m_field] if self.m_field in form else None
        eps = form[self.epsilon_field] if self.epsilon_field in form else None
        M = m.data if m is not None else None
        epsilon = eps.data if eps is not None else None
        if field.data is None:
            if M is None or epsilon is None:
                raise StopValidation(field.gettext('Give N or both M and epsilon.'))
            field.data = M * epsilon
            return
        if M is None or epsilon is None or not (m.raw_data and eps.raw_data):
            return
        if not math.isclose(field.data, M * epsilon, rel_tol=self.rel):
            message = self.message
            if message is None:
                message = field.gettext('N must equal M * epsilon = %(product)s.')
            raise ValidationError(message % dict(product=M * epsilon))


class PrecisionBits(object):
    """
    Validates a mantissa precision in bits.

    :param min:
        Smallest accepted precision.
    """
    def __init__(self, min=64, message=None):
        self.min = min
        self.message = message

    def __call__(self, form, field):
        if field.data is None:
            return
        if field.data < self.min:
            message = self.message
            if message is None:
                message = field.ngettext('Precision must be at least %(min)d bit.',
                                         'Precision must be at least %(min)d bits.', self.min)
            raise ValidationError(message % dict(min=self.min))


optional = Optional
input_required = InputRequired
number_range = NumberRange
photon_budget = PhotonBudget
precision_bits = PrecisionBits
