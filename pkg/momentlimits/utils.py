import os
from contextlib import contextmanager
from functools import update_wrapper

import mpmath
from attr import NOTHING

from momentlimits.errors import ConfigError

unset_value = NOTHING

PRECISION_ENV = 'MOMENTLIMITS_PRECISION'
DEFAULT_PRECISION = 256
MIN_PRECISION = 64
IMAG_GUARD_BITS = 8


def default_precision():
    """
    Mantissa bits used when nothing else is configured.

    Reads ``MOMENTLIMITS_PRECISION`` and falls back to 256.
    """
    value = os.environ.get(PRECISION_ENV)
    if not value:
        return DEFAULT_PRECISION
    try:
        bits = int(value)
    except ValueError:
        raise ConfigError('%s must be an integer' % PRECISION_ENV, {'precision': ['Not a valid integer value']})
    if bits < MIN_PRECISION:
        raise ConfigError('%s must be at least %d' % (PRECISION_ENV, MIN_PRECISION),
                          {'precision': ['Number must be at least %d.' % MIN_PRECISION]})
    return bits


@contextmanager
def precision(bits=None):
    """
    Run a block with ``bits`` of mpmath mantissa precision.

    mpmath keeps its precision in process-global state, so every worker
    process enters this context itself.
    """
    if bits is None:
        bits = default_precision()
    with mpmath.mp.workprec(int(bits)):
        yield bits


def to_float(value):
    """
    Convert an mpf/mpc (or anything numeric) for reports.

    Complex values whose imaginary part is within ``2**(8 - prec)`` of the
    real part, relative to ``max(1, |real|)``, collapse to float.
    """
    if value is None:
        return None
    if isinstance(value, mpmath.mpc):
        if abs(value.imag) <= mpmath.ldexp(max(1, abs(value.real)), IMAG_GUARD_BITS - mpmath.mp.prec):
            return float(value.real)
        return complex(value)
    return float(value)


def flatten_mapping(mapping, prefix=''):
    """
    Flatten nested tables to ``table-key`` names, matching the prefix
    convention forms use for their fields.
    """
    flat = {}
    for key, value in mapping.items():
        name = '%s%s' % (prefix, str(key).replace('_', '-'))
        if isinstance(value, dict):
            flat.update(flatten_mapping(value, name + '-'))
        else:
            flat[name] = value
    return flat


class InputWrapper(object):
    """
    Wrap a plain mapping for use as ``formdata``.

    Configuration mappings hold scalars (TOML values, argparse results), while
    fields read a list of strings per name through ``getlist``. Lists are passed
    through, every other value becomes a one element list of its text form.
    """

    def __init__(self, mapping):
        update_wrapper(self, mapping, assigned=(), updated=())
        self.__wrapped__ = mapping

    def __iter__(self):
        return iter(self.__wrapped__)

    def __len__(self):
        return len(self.__wrapped__)

    def __contains__(self, name):
        return name in self.__wrapped__ and self.__wrapped__[name] is not None

    def getlist(self, name):
        value = self.__wrapped__.get(name)
        if value is None:
            return []
        if isinstance(value, (list, tuple)):
            return [v if isinstance(v, str) else _text(v) for v in value]
        return [value if isinstance(value, str) else _text(value)]


def _text(value):
    if isinstance(value, bool):
        return 'true' if value else ''
    return str(value)
