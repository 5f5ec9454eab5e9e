from collections import OrderedDict

from momentlimits.errors import ConfigError
from momentlimits.meta import DefaultMeta

__all__ = (
    'BaseForm',
    'Form',
)


class BaseForm(object):
    """
    A set of bound fields with their collected data and errors. Built from
    a mapping of unbound fields, without a declaring class.

    :param fields: A mapping or a sequence of ``(name, unbound field)`` pairs.
    :param prefix: Prepended to every configuration key; nested tables use
        ``table-``.
    :param meta: The meta instance holding translation options.
    """

    def __init__(self, fields, prefix='', meta=DefaultMeta()):
        if prefix and prefix[-1] not in '-_;:/.':
            prefix += '-'

        self.meta = meta
        self._errors = None
        self._fields = OrderedDict()

        if hasattr(fields, 'items'):
            fields = fields.items()

        translations = meta.get_translations(self)
        for name, unbound_field in fields:
            options = dict(name=name, prefix=prefix, translations=translations)
            self._fields[name] = meta.bind_field(self, unbound_field, options)

    def __iter__(self):
        return iter(self._fields.values())

    def __contains__(self, name):
        return name in self._fields

    def __getitem__(self, name):
        return self._fields[name]

    def process(self, formdata=None, **kwargs):
        """
        Hand the merged configuration to every field. A keyword argument
        named after a field replaces that field's default.
        """
        formdata = self.meta.wrap_formdata(self, formdata)
        for name, field in self._fields.items():
            if name in kwargs:
                field.process(formdata, kwargs[name])
            else:
                field.process(formdata)

    def validate(self, extra_validators=None):
        """
        Validate every field, the whole chain even after a failure.

        :param extra_validators: Field name to a sequence of further
            validators for that field.
        :return: True when no field collected an error.
        """
        self._errors = None
        extra_validators = extra_validators or {}
        results = [field.validate(self, extra_validators.get(name, ())) for name, field in self._fields.items()]
        return all(results)

    def require_valid(self):
        """
        Validate and return the form data, raising ``ConfigError`` with the
        field errors on failure.
        """
        if not self.validate():
            raise ConfigError('invalid configuration', self.errors)
        return self.data

    @property
    def data(self):
        return dict((name, f.data) for name, f in self._fields.items())

    @property
    def errors(self):
        if self._errors is None:
            self._errors = dict((name, f.errors) for name, f in self._fields.items() if f.errors)
        return self._errors


class FormMeta(type):
    """
    Collects the unbound fields of a form class, in declaration order, and
    a ``Meta`` class combining every ``Meta`` found along the MRO. Both are
    built on the first instantiation and cached; configuration forms are
    declared once and never patched.
    """
    def __init__(cls, name, bases, attrs):
        type.__init__(cls, name, bases, attrs)
        cls._unbound_fields = None
        cls._form_meta = None

    def __call__(cls, *args, **kwargs):
        if cls._unbound_fields is None:
            fields = [(name, getattr(cls, name)) for name in dir(cls)
                      if not name.startswith('_') and hasattr(getattr(cls, name), '_formfield')]
            # name breaks ties so the sort is stable
            fields.sort(key=lambda x: (x[1].creation_counter, x[0]))
            cls._unbound_fields = fields

        if cls._form_meta is None:
            bases = tuple(klass.Meta for klass in cls.__mro__ if 'Meta' in klass.__dict__)
            cls._form_meta = type('Meta', bases, {})
        return type.__call__(cls, *args, **kwargs)


class Form(BaseForm, metaclass=FormMeta):
    """
    A configuration declared as class attributes. The merged configuration
    is processed on construction, and a ``validate_<name>`` method runs
    after the validators of field ``name``.

    :param formdata: The merged configuration mapping.
    :param prefix: Prepended to every configuration key.
    :param meta: A dict overriding attributes of this form's meta instance.
    :param kwargs: Values by field name, replacing the defaults.
    """
    Meta = DefaultMeta

    def __init__(self, formdata=None, prefix='', meta=None, **kwargs):
        meta_obj = self._form_meta()
        if isinstance(meta, dict):
            meta_obj.update_values(meta)
        super(Form, self).__init__(self._unbound_fields, meta=meta_obj, prefix=prefix)

        for name, field in self._fields.items():
            # instance attributes obscure the class attributes of the same name
            setattr(self, name, field)
        self.process(formdata, **kwargs)

    def validate(self):
        extra = {}
        for name in self._fields:
            inline = getattr(self.__class__, 'validate_%s' % name, None)
            if inline is not None:
                extra[name] = [inline]
        return super(Form, self).validate(extra)
