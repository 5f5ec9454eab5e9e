import gettext
import io
import os

from babel.messages import mofile, pofile
from babel.support import Translations

DOMAIN = 'momentlimits'


def messages_path():
    """
    Determine the path to the 'messages' directory as best possible.
    """
    module_path = os.path.abspath(__file__)
    locale_path = os.path.join(os.path.dirname(module_path), 'locale')
    if not os.path.exists(locale_path):
        locale_path = '/usr/share/locale'
    return locale_path


def catalog_path(language):
    """
    The ``.po`` catalog for ``language``, trying ``de_DE`` before ``de``.
    Returns None when neither exists.
    """
    language = str(language).replace('-', '_')
    for candidate in (language, language.split('_')[0]):
        path = os.path.join(messages_path(), candidate, 'LC_MESSAGES', DOMAIN + '.po')
        if os.path.exists(path):
            return path
    return None


def load_catalog(path):
    """Read a ``.po`` catalog with babel and compile it in memory."""
    with open(path, 'rb') as f:
        catalog = pofile.read_po(f, domain=DOMAIN)
    buf = io.BytesIO()
    mofile.write_mo(buf, catalog)
    buf.seek(0)
    return Translations(fp=buf, domain=DOMAIN)


def get_builtin_gnu_translations(languages=None):
    """
    Get a translations object for the first of ``languages`` that has a
    shipped catalog. Compiled catalogs under the messages path are used
    next, and languages without either fall back to the untranslated
    messages.

    :param languages:
        A list of languages to try, in order. If omitted or None, then
        gettext will try to use locale information from the environment.
    """
    for language in languages or ():
        path = catalog_path(language)
        if path is not None:
            return load_catalog(path)
    return gettext.translation(DOMAIN, messages_path(), languages, fallback=True)


def get_translations(languages=None, getter=get_builtin_gnu_translations):
    """
    Get a translations object for configuration messages.

    :param languages:
        A sequence of languages to try, in order.
    :param getter:
        A single-argument callable which returns a low-level translations object.
    """
    return getter(languages)


class DummyTranslations(object):
    """
    A translations object which simply returns unmodified strings.

    This is used when translations are disabled.
    """
    def gettext(self, string):
        return string

    def ngettext(self, singular, plural, n):
        if n == 1:
            return singular

        return plural
