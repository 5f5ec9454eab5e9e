"""
Run configurations, one form per subcommand.

Values are merged from defaults, ``MOMENTLIMITS_PRECISION``, a TOML file and
command-line flags, then validated by the form's field chains.
"""
import os

from babel import Locale, UnknownLocaleError

from momentlimits import direct, scaling
from momentlimits.fields import (BooleanField, CountField, FloatField, GridField, IntegerField, MeasureField,
                                 ModeField, OrdersField, PathField, SelectField, StringField)
from momentlimits.form import Form
from momentlimits.hankel import MAX_ORDER
from momentlimits.submodel import DEFAULT_ORDER_CAP, DEFAULT_TOLERANCE
from momentlimits.utils import DEFAULT_PRECISION, PRECISION_ENV, flatten_mapping
from momentlimits.validators import (InputRequired, NumberRange, Optional, PhotonBudget, PrecisionBits,
                                     ValidationError)

__all__ = (
    'RunConfig', 'BoundConfig', 'SpadeConfig', 'DirectConfig', 'DemoConfig', 'SweepConfig',
    'COMMANDS', 'load_config', 'merge_sources', 'environment_defaults', 'build_psf',
)

try:
    import tomllib
except ImportError:  # pragma: no cover
    import tomli as tomllib


def _positive(**kwargs):
    return NumberRange(min=0, exclusive_min=True, **kwargs)


PSF_CHOICES = [(name, name) for name in sorted(direct.PSF_FAMILIES)]
FUNCTIONAL_CHOICES = [('monomial', 'monomial'), ('spade', 'spade')]


class RunConfig(Form):
    """Settings shared by every subcommand."""
    precision = IntegerField(default=DEFAULT_PRECISION, validators=[PrecisionBits()])
    out = PathField(default='momentlimits-out')
    json = BooleanField(default=False)
    check = BooleanField(default=False)
    locale = StringField(default=None, validators=[Optional()])
    workers = IntegerField(default=1, validators=[NumberRange(min=1)])

    class Meta:
        locales = False

    def validate_locale(form, field):
        if field.data:
            try:
                Locale.parse(field.data)
            except (ValueError, UnknownLocaleError):
                raise ValidationError(field.gettext('Unknown locale %(locale)s') % dict(locale=field.data))


class _ObjectMixin(Form):
    p0 = MeasureField(role='object', default='uniform')
    delta = FloatField(default=0.05, validators=[_positive()])
    mu = IntegerField(default=2, validators=[NumberRange(min=1)])


class _SweepMixin(Form):
    sweep = GridField(default=None, validators=[Optional()])
    expect = FloatField(default=None, validators=[Optional()])
    expect_tol = FloatField(default=0.2, validators=[_positive()])


class BoundConfig(_SweepMixin, _ObjectMixin, RunConfig):
    """``bound``: the quantum lower bound on a generalized moment."""
    q = MeasureField(role='frequency', default='gaussian')
    n = FloatField(default=None, validators=[PhotonBudget(), _positive()])
    functional = SelectField(default='monomial', choices=FUNCTIONAL_CHOICES)
    j = IntegerField(default=None, validators=[Optional(), NumberRange(min=0)])
    tol = FloatField(default=DEFAULT_TOLERANCE, validators=[_positive()])
    j_cap = IntegerField(default=DEFAULT_ORDER_CAP, validators=[NumberRange(min=1, max=MAX_ORDER)])
    dump_hankel = BooleanField(default=False)

    def validate_j_cap(form, field):
        if form.mu.data is not None and field.data is not None and field.data < form.mu.data:
            raise ValidationError(field.gettext('The order cap must be at least mu'))


class SpadeConfig(RunConfig):
    """``spade``: Monte Carlo of the spatial-mode measurement."""
    q = MeasureField(role='frequency', default='gaussian')
    p0 = MeasureField(role='object', default='uniform')
    delta = FloatField(default=0.2, validators=[_positive()])
    mode = ModeField(default='even:1')
    m = CountField(default=10 ** 7, validators=[NumberRange(min=1)])
    eps = FloatField(default=0.01, validators=[NumberRange(min=0, max=1, exclusive_min=True)])
    n = FloatField(default=None, validators=[PhotonBudget(), _positive()])
    replicates = IntegerField(default=1000, validators=[NumberRange(min=2)])
    seed = IntegerField(default=None, validators=[InputRequired(), NumberRange(min=0)])
    poisson = BooleanField(default=False)


class DirectConfig(_SweepMixin, _ObjectMixin, RunConfig):
    """``direct``: Fisher information and Cramer-Rao bound of direct imaging."""
    psf = SelectField(default='gaussian', choices=PSF_CHOICES)
    psf_width = FloatField(default=None, validators=[Optional(), _positive()])
    psf_power = IntegerField(default=None, validators=[Optional(), NumberRange(min=1)])
    n = FloatField(default=None, validators=[PhotonBudget(), _positive()])
    delta0 = FloatField(default=None, validators=[Optional(), _positive()])
    experimental = BooleanField(default=False)

    def validate_delta0(form, field):
        if field.data is not None and form.delta.data is not None and field.data < form.delta.data:
            raise ValidationError(field.gettext('delta0 must be at least delta'))


class DemoConfig(RunConfig):
    """``demo``: exponents of all three limits across orders."""
    p0 = MeasureField(role='object', default='uniform')
    q = MeasureField(role='frequency', default='gaussian')
    psf = SelectField(default='gaussian', choices=PSF_CHOICES)
    psf_width = FloatField(default=None, validators=[Optional(), _positive()])
    psf_power = IntegerField(default=None, validators=[Optional(), NumberRange(min=1)])
    mus = OrdersField(default=(1, 2, 3, 4))
    grid = GridField(default=scaling.geometric_grid)
    m = CountField(default=10 ** 7, validators=[NumberRange(min=1)])
    eps = FloatField(default=0.01, validators=[NumberRange(min=0, max=1, exclusive_min=True)])
    n = FloatField(default=None, validators=[PhotonBudget(), _positive()])


class SweepConfig(_ObjectMixin, RunConfig):
    """``sweep``: any evaluator over a grid of object sizes."""
    evaluator = SelectField(default='bound', choices=[(name, name) for name in sorted(scaling.EVALUATORS)])
    grid = GridField(default=scaling.geometric_grid)
    q = MeasureField(role='frequency', default='gaussian')
    psf = SelectField(default='gaussian', choices=PSF_CHOICES)
    psf_width = FloatField(default=None, validators=[Optional(), _positive()])
    psf_power = IntegerField(default=None, validators=[Optional(), NumberRange(min=1)])
    m = CountField(default=10 ** 7, validators=[NumberRange(min=1)])
    eps = FloatField(default=0.01, validators=[NumberRange(min=0, max=1, exclusive_min=True)])
    n = FloatField(default=None, validators=[PhotonBudget(), _positive()])
    j = IntegerField(default=None, validators=[Optional(), NumberRange(min=0)])
    tol = FloatField(default=DEFAULT_TOLERANCE, validators=[_positive()])
    experimental = BooleanField(default=False)
    expect = FloatField(default=None, validators=[Optional()])
    expect_tol = FloatField(default=0.2, validators=[_positive()])

    def evaluator_instance(self):
        """The picklable evaluator the sweep runs at each grid point."""
        name = self.evaluator.data
        mu = self.mu.data
        if name == 'constant':
            return scaling.make_evaluator(name)
        if name == 'moment':
            return scaling.make_evaluator(name, order=mu)
        if name == 'bound':
            return scaling.make_evaluator(name, mu=mu, Q=self.q.build(), N=self.n.data, j=self.j.data,
                                          tol=self.tol.data)
        if name == 'gram':
            return scaling.make_evaluator(name, mu=mu, Q=self.q.build(), j=self.j.data, tol=self.tol.data)
        if name == 'spade-variance':
            return scaling.make_evaluator(name, order=mu, Q=self.q.build(), N=self.n.data, epsilon=self.eps.data)
        psf = build_psf(self.psf.data, self.psf_width.data, self.psf_power.data)
        if name == 'fisher':
            return scaling.make_evaluator(name, mu=mu, psf=psf, experimental=self.experimental.data)
        return scaling.make_evaluator(name, mu=mu, psf=psf, N=self.n.data, experimental=self.experimental.data)


COMMANDS = {
    'bound': BoundConfig,
    'spade': SpadeConfig,
    'direct': DirectConfig,
    'demo': DemoConfig,
    'sweep': SweepConfig,
}

_PSF_WIDTH = {'gaussian': 'sigma', 'super-gaussian': 'd2', 'lorentzian': 'd2', 'sinc2': 'w'}


def build_psf(family, width=None, power=None):
    """Construct a PSF of ``family`` with its width and power parameters."""
    params = {}
    if width is not None:
        params[_PSF_WIDTH[family]] = width
    if power is not None and family in ('super-gaussian', 'lorentzian'):
        params['p'] = power
    return direct.make_psf(family, **params)


def load_config(path, command):
    """
    Read a TOML configuration file. Keys of the ``[<command>]`` table take
    precedence over top-level keys; nested tables become ``table-key``.
    """
    with open(path, 'rb') as f:
        data = tomllib.load(f)
    shared = dict((key, value) for key, value in data.items()
                  if not (isinstance(value, dict) and key in COMMANDS))
    merged = flatten_mapping(shared)
    merged.update(flatten_mapping(data.get(command, {})))
    return merged


def merge_sources(*sources):
    """
    Merge configuration mappings in increasing priority; ``None`` values
    do not override.
    """
    merged = {}
    for source in sources:
        for key, value in flatten_mapping(source).items():
            if value is not None:
                merged[key] = value
    return merged


def environment_defaults(environ=None):
    environ = os.environ if environ is None else environ
    value = environ.get(PRECISION_ENV)
    return {'precision': value} if value else {}
