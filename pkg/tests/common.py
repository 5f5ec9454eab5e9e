import os
import shutil
import tempfile
from contextlib import contextmanager

import mpmath

from momentlimits.validators import ValidationError, StopValidation


class DummyTranslations(object):
    def gettext(self, string):
        return string

    def ngettext(self, singular, plural, n):
        if n == 1:
            return singular

        return plural


class DummyField(object):
    _translations = DummyTranslations()

    def __init__(self, data, errors=(), raw_data=None):
        self.data = data
        self.errors = list(errors)
        self.raw_data = raw_data

    def gettext(self, string):
        return self._translations.gettext(string)

    def ngettext(self, singular, plural, n):
        return self._translations.ngettext(singular, plural, n)


def grab_error_message(callable, form, field):
    try:
        callable(form, field)
    except ValidationError as e:
        return e.args[0]


def grab_stop_message(callable, form, field):
    try:
        callable(form, field)
    except StopValidation as e:
        return e.args[0]


def contains_validator(field, v_type):
    for v in field.validators:
        if isinstance(v, v_type):
            return True
    return False


class DummyPostData(dict):
    def getlist(self, key):
        v = self[key]
        if not isinstance(v, (list, tuple)):
            v = [v]
        return v


@contextmanager
def assert_raises_text(e_type, text):
    import re
    try:
        yield
    except e_type as e:
        if not re.match(text, e.args[0]):
            raise AssertionError('Exception raised: %r but text %r did not match pattern %r' % (e, e.args[0], text))
    else:
        raise AssertionError('Expected Exception %r, did not get it' % (e_type, ))


def assert_close(testcase, got, expected, rel=1e-12, abs_tol=0):
    """Compare two numbers (mpf or float) within a relative tolerance."""
    got = mpmath.mpf(got)
    expected = mpmath.mpf(expected)
    if abs(got - expected) > max(rel * abs(expected), abs_tol):
        testcase.fail('%s != %s within rel=%g' % (mpmath.nstr(got, 20), mpmath.nstr(expected, 20), rel))


class TempDirMixin(object):
    """Gives each test a scratch directory in ``self.tmp``."""

    def setUp(self):
        super(TempDirMixin, self).setUp()
        self.tmp = tempfile.mkdtemp(prefix='momentlimits-test-')

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
        super(TempDirMixin, self).tearDown()

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write(self, name, text):
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        return path


class PrecisionMixin(object):
    """Runs each test at ``bits`` of mpmath precision."""
    bits = 256

    def setUp(self):
        super(PrecisionMixin, self).setUp()
        self._saved_prec = mpmath.mp.prec
        mpmath.mp.prec = self.bits

    def tearDown(self):
        mpmath.mp.prec = self._saved_prec
        super(PrecisionMixin, self).tearDown()
