from momentlimits.fields.core import *
from momentlimits.fields.core import Field, UnboundField
from momentlimits.fields.simple import *
