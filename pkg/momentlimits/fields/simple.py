import math
import os

from momentlimits import measure
from momentlimits.scaling import parse_grid
from momentlimits.spade import ModeSelection

from .core import Field, FloatField, SelectField, StringField

__all__ = (
    'CountField', 'GridField', 'MeasureField', 'ModeField', 'OrdersField', 'PathField',
)

OBJECT_MEASURES = ('uniform', 'two-point', 'truncated-quadratic', 'truncated-gaussian')
FREQUENCY_MEASURES = ('gaussian', 'hard-pupil')


class CountField(FloatField):
    """
    A whole number which may be written in scientific notation, such as a
    temporal-mode count ``1e7``.
    """

    def process_formdata(self, valuelist):
        super(CountField, self).process_formdata(valuelist)
        if valuelist and self.data is not None:
            if not math.isfinite(self.data) or self.data != int(self.data):
                self.data = None
                raise ValueError(self.gettext('Not a whole number'))
            self.data = int(self.data)

    def process_data(self, value):
        self.data = int(value) if value is not None else None


class GridField(Field):
    """
    Object sizes of a sweep: ``lo:hi:count`` for a geometric grid, a comma
    separated list, or a list of numbers from a configuration file.
    """

    def process_data(self, value):
        self.data = tuple(value) if value is not None else None

    def process_formdata(self, valuelist):
        if not valuelist:
            return
        try:
            if len(valuelist) == 1:
                self.data = parse_grid(valuelist[0])
            else:
                self.data = tuple(float(v) for v in valuelist)
        except ValueError:
            self.data = None
            raise ValueError(self.gettext('Not a valid grid, use lo:hi:count or a list of sizes'))

    def pre_validate(self, form):
        if self.data is None:
            return
        if any(not d > 0 for d in self.data):
            raise ValueError(self.gettext('Grid points must be positive'))
        if any(b <= a for a, b in zip(self.data, self.data[1:])):
            raise ValueError(self.gettext('Grid points must increase'))


class ModeField(Field):
    """
    Which SPADE modes to count, ``even:0,1`` or ``odd:0``.
    """

    def process_data(self, value):
        if isinstance(value, str):
            value = ModeSelection.parse(value)
        self.data = value

    def process_formdata(self, valuelist):
        if valuelist:
            try:
                self.data = ModeSelection.parse(valuelist[0])
            except ValueError:
                self.data = None
                raise ValueError(self.gettext('Not a valid mode selection, use even:<n,...> or odd:<n>'))


class PathField(StringField):
    """
    A filesystem path.

    :param must_exist: Reject paths which do not exist.
    """

    def __init__(self, *, must_exist=False, **kwargs):
        super(PathField, self).__init__(**kwargs)
        self.must_exist = must_exist

    def pre_validate(self, form):
        if self.data and self.must_exist and not os.path.exists(self.data):
            raise ValueError(self.gettext('No such file: %(path)s') % dict(path=self.data))


class MeasureField(SelectField):
    """
    A measure by built-in name, or for object distributions also a
    two-column CSV file of atoms.

    :param role: ``object`` for P0 or ``frequency`` for Q.
    """

    def __init__(self, *, role='object', **kwargs):
        names = OBJECT_MEASURES if role == 'object' else FREQUENCY_MEASURES
        kwargs.setdefault('choices', [(name, name) for name in names])
        super(MeasureField, self).__init__(**kwargs)
        self.role = role

    def pre_validate(self, form):
        if self.role == 'object' and isinstance(self.data, str) and self.data.endswith('.csv'):
            if not os.path.exists(self.data):
                raise ValueError(self.gettext('No such file: %(path)s') % dict(path=self.data))
            return
        super(MeasureField, self).pre_validate(form)

    def build(self, half_width=None):
        """
        Construct the measure; object measures are scaled to ``half_width``.
        """
        name = self.data
        if self.role == 'object' and name.endswith('.csv'):
            atoms = measure.load_atoms(name)
            return atoms if half_width is None else atoms.standardize().at(half_width)
        if name == 'gaussian':
            return measure.gaussian_frequency()
        if half_width is None:
            return measure.make_measure(name)
        return measure.make_measure(name, half_width=half_width)


class OrdersField(Field):
    """
    A comma separated list of moment orders, such as ``1,2,3,4``.
    """

    def process_data(self, value):
        self.data = tuple(value) if value is not None else None

    def process_formdata(self, valuelist):
        if not valuelist:
            return
        try:
            if len(valuelist) == 1:
                self.data = tuple(int(v) for v in valuelist[0].split(',') if v.strip())
            else:
                self.data = tuple(int(v) for v in valuelist)
        except ValueError:
            self.data = None
            raise ValueError(self.gettext('Not a valid list of orders'))

    def pre_validate(self, form):
        if not self.data:
            raise ValueError(self.gettext('Give at least one order'))
        if any(order < 1 for order in self.data):
            raise ValueError(self.gettext('Orders must be at least 1'))
