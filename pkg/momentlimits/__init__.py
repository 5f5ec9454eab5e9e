"""
momentlimits
============

Quantum and classical precision limits for estimating generalized moments
of subdiffraction incoherent objects, with a simulator of the spatial-mode
measurement that reaches the quantum scaling.

:license: BSD, see LICENSE.txt for details.
"""
from momentlimits import validators
from momentlimits.errors import *
from momentlimits.fields import *
from momentlimits.form import Form
from momentlimits.validators import ValidationError

from momentlimits.measure import MeasureSpec, make_measure, moment, standardize, integrate
from momentlimits.hankel import build_hankel, cholesky, invert_lower, lambda_min_profile, cholesky_derivative
from momentlimits.submodel import MomentFunctional, TiltedSubmodel, purified_score_norm, quantum_bound
from momentlimits.spade import build_spade, mode_probabilities, simulate_counts, estimate
from momentlimits.direct import make_psf, submodel_fisher, check_domination
from momentlimits.scaling import sweep, fit_loglog

__version__ = '0.1.0'
