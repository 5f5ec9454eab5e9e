from momentlimits import i18n
from momentlimits.utils import InputWrapper


class DefaultMeta(object):
    """
    Per-form options. A ``class Meta`` on a form overrides these, and the
    ``meta`` mapping given to a form overrides them for one instance.
    """

    def bind_field(self, form, unbound_field, options):
        """Bind one declared field to ``form`` with ``options`` as keywords."""
        return unbound_field.bind(form=form, **options)

    def wrap_formdata(self, form, formdata):
        """
        Give merged configuration mappings (TOML tables and command-line
        flags) the ``getlist`` interface fields read through.
        """
        if formdata is None or hasattr(formdata, 'getlist'):
            return formdata
        if hasattr(formdata, 'get'):
            return InputWrapper(formdata)
        raise TypeError('formdata must be a mapping or provide getlist, got %s' % type(formdata).__name__)

    # messages; False keeps them untranslated
    locales = False
    cache_translations = True
    translations_cache = {}

    def get_translations(self, form):
        """
        The message catalog for ``locales``, shared between forms asking
        for the same locales while ``cache_translations`` is set.
        """
        if self.locales is False:
            return None
        if not self.cache_translations:
            return i18n.get_translations(self.locales)

        key = tuple(self.locales) if self.locales else None
        if key not in self.translations_cache:
            self.translations_cache[key] = i18n.get_translations(key)
        return self.translations_cache[key]

    def update_values(self, values):
        """Set each ``values`` item as an attribute of this meta instance."""
        for key, value in values.items():
            setattr(self, key, value)
