import itertools
from copy import copy

import attr as _attr

from momentlimits.i18n import DummyTranslations
from momentlimits.utils import unset_value
from momentlimits.validators import StopValidation

__all__ = (
    'BooleanField', 'FloatField', 'IntegerField', 'SelectField', 'StringField',
)


@_attr.s(slots=True, repr=False)
class BaseField(object):
    """
    State every setting carries: the validators it runs, its default (a
    value or a callable) and the errors collected while reading it.
    """

    errors = tuple()
    process_errors = _attr.ib(default=_attr.Factory(list))
    raw_data = None
    data = None
    validators = _attr.ib(default=_attr.Factory(list))
    label = _attr.ib(default=None, init=False)
    default = _attr.ib(default=None)
    type = _attr.ib(default="", init=False)
    short_name = _attr.ib(default="", init=False)


class Field(BaseField):
    """
    One configuration setting.

    Declared on a form class without ``_form`` and ``_name`` it stays an
    :class:`UnboundField`; the form binds it on construction and passes the
    private keywords itself.

    The configuration key is the prefixed name with underscores turned into
    dashes, so ``n_max`` reads ``n-max`` from the merged configuration.
    """

    meta = None
    name = None
    _translations = DummyTranslations()

    _formfield = True

    def __new__(cls, **kwargs):
        if '_form' in kwargs and '_name' in kwargs:
            return super(Field, cls).__new__(cls)
        else:
            return UnboundField(cls, **kwargs)

    def __init__(self, *, label=None, _form=None, _name=None, _prefix='',
                 _translations=None, _meta=None, **kwargs):
        super().__init__(**kwargs)
        if _translations is not None:
            self._translations = _translations

        if _meta is not None:
            self.meta = _meta
        elif _form is not None:
            self.meta = _form.meta
        else:
            raise TypeError("Must provide one of _form or _meta")

        self.name = _prefix + _name.replace('_', '-')
        self.short_name = _name
        self.type = type(self).__name__
        self.label = self.name if label is None else label

    def __repr__(self):
        return '<%s %s=%r>' % (self.type, self.name, self.data)

    def gettext(self, string):
        """Translate a message with the form's catalog."""
        return self._translations.gettext(string)

    def ngettext(self, singular, plural, n):
        """Translate a message whose wording depends on the count ``n``."""
        return self._translations.ngettext(singular, plural, n)

    def validate(self, form, extra_validators=tuple()):
        """
        Run ``pre_validate``, then the field's validators and
        ``extra_validators`` in order, collecting messages in ``errors``.
        Conversion errors from :meth:`process` come first.

        :return: True when no error was collected.
        """
        self.errors = list(self.process_errors)
        stopped = False
        try:
            self.pre_validate(form)
        except StopValidation as e:
            if e.args and e.args[0]:
                self.errors.append(e.args[0])
            stopped = True
        except ValueError as e:
            self.errors.append(e.args[0])

        if not stopped:
            self._run_validation_chain(form, itertools.chain(self.validators, extra_validators))

        return len(self.errors) == 0

    def _run_validation_chain(self, form, validators):
        """
        Call each validator; a ``StopValidation`` ends the chain.

        :return: True if the chain was stopped.
        """
        for validator in validators:
            try:
                validator(form, self)
            except StopValidation as e:
                if e.args and e.args[0]:
                    self.errors.append(e.args[0])
                return True
            except ValueError as e:
                self.errors.append(e.args[0])

        return False

    def pre_validate(self, form):
        """Checks every value of this field type needs, before the validators."""
        pass

    def process(self, formdata, data=unset_value):
        """
        Take the default (or ``data``) first, then let a configured value
        replace it. Conversion errors are kept for :meth:`validate`.

        :param formdata: Merged configuration with a ``getlist`` method, or None.
        """
        self.process_errors = []
        if data is unset_value:
            try:
                data = self.default()
            except TypeError:
                data = self.default

        try:
            self.process_data(data)
        except ValueError as e:
            self.process_errors.append(e.args[0])

        if formdata is None:
            return
        self.raw_data = formdata.getlist(self.name) if self.name in formdata else []
        try:
            self.process_formdata(self.raw_data)
        except ValueError as e:
            self.process_errors.append(e.args[0])

    def process_data(self, value):
        """Store a Python value, the default or a keyword argument."""
        self.data = value

    def process_formdata(self, valuelist):
        """
        Convert configuration text. An empty ``valuelist`` keeps the default.
        """
        if valuelist:
            self.data = valuelist[0]


class UnboundField(object):
    _formfield = True
    creation_counter = 0

    def __init__(self, field_class, **kwargs):
        UnboundField.creation_counter += 1
        self.field_class = field_class
        self.kwargs = kwargs
        self.creation_counter = UnboundField.creation_counter

    def bind(self, form, name, prefix='', translations=None, **kwargs):
        kw = dict(
            self.kwargs,
            _form=form,
            _prefix=prefix,
            _name=name,
            _translations=translations,
            **kwargs
        )
        return self.field_class(**kw)

    def __repr__(self):
        return '<UnboundField(%s, %r)>' % (self.field_class.__name__, self.kwargs)


class SelectField(Field):
    """
    A value restricted to ``choices``, a sequence of ``(value, label)``
    pairs.
    """

    def __init__(self, *, coerce=str, choices=tuple(), **kwargs):
        super(SelectField, self).__init__(**kwargs)
        self.coerce = coerce
        self.choices = copy(choices)

    def process_data(self, value):
        try:
            self.data = self.coerce(value)
        except (ValueError, TypeError):
            self.data = None

    def process_formdata(self, valuelist):
        if valuelist:
            try:
                self.data = self.coerce(valuelist[0])
            except ValueError:
                raise ValueError(self.gettext('Invalid Choice: could not coerce'))

    def pre_validate(self, form):
        if not any(self.data == value for value, _ in self.choices):
            raise ValueError(self.gettext('Not a valid choice'))


class StringField(Field):
    """
    Plain text. An empty value clears the default.
    """

    def process_formdata(self, valuelist):
        if valuelist:
            self.data = valuelist[0]


class IntegerField(Field):
    """
    Text coerced to an integer. Unparsable text leaves ``data`` empty.
    """

    def process_formdata(self, valuelist):
        if valuelist:
            try:
                self.data = int(valuelist[0])
            except (ValueError, TypeError):
                self.data = None
                raise ValueError(self.gettext('Not a valid integer value'))


class FloatField(Field):
    """
    Text coerced to a float, ``1e7`` included. Unparsable text leaves
    ``data`` empty.
    """

    def process_formdata(self, valuelist):
        if valuelist:
            try:
                self.data = float(valuelist[0])
            except (ValueError, TypeError):
                self.data = None
                raise ValueError(self.gettext('Not a valid float value'))


class BooleanField(Field):
    """
    A flag. Any text outside ``false_values`` sets it.

    :param false_values:
        Exact strings read as false.
    """
    false_values = (False, 'false', 'False', 'no', '0', '')

    def __init__(self, *, false_values=None, **kwargs):
        super(BooleanField, self).__init__(**kwargs)
        if false_values is not None:
            self.false_values = false_values

    def process_data(self, value):
        self.data = bool(value)

    def process_formdata(self, valuelist):
        if valuelist:
            self.data = valuelist[0] not in self.false_values
