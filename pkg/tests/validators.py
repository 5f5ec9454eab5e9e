from unittest import TestCase

from momentlimits.validators import (
    StopValidation, ValidationError, optional, input_required, NumberRange, PhotonBudget, PrecisionBits,
    photon_budget, precision_bits, number_range
)
from tests.common import DummyField, grab_error_message, grab_stop_message


class DummyForm(dict):
    pass


class ValidatorsTest(TestCase):
    def setUp(self):
        self.form = DummyForm()

    def test_input_required(self):
        self.assertEqual(input_required()(self.form, DummyField('foobar', raw_data=['foobar'])), None)
        self.assertRaises(StopValidation, input_required(), self.form, DummyField('', raw_data=['']))
        self.assertRaises(StopValidation, input_required(), self.form, DummyField(None, raw_data=[]))
        self.assertEqual(input_required().field_flags, ('required', ))

        grab = lambda **k: grab_stop_message(input_required(**k), self.form, DummyField('', raw_data=['']))
        self.assertEqual(grab(), 'This field is required.')
        self.assertEqual(grab(message='foo'), 'foo')

    def test_optional(self):
        self.assertEqual(optional()(self.form, DummyField('foobar', raw_data=['foobar'])), None)
        self.assertRaises(StopValidation, optional(), self.form, DummyField('', raw_data=['']))
        self.assertEqual(optional().field_flags, ('optional', ))
        f = DummyField('', ['Not a valid integer value'], raw_data=[''])
        self.assertEqual(len(f.errors), 1)
        self.assertRaises(StopValidation, optional(), self.form, f)
        self.assertEqual(len(f.errors), 0)

        whitespace_field = DummyField(' ', raw_data=[' '])
        self.assertRaises(StopValidation, optional(), self.form, whitespace_field)

    def test_number_range(self):
        v = NumberRange(min=5, max=10)
        self.assertEqual(v(self.form, DummyField(7)), None)
        self.assertRaises(ValidationError, v, self.form, DummyField(None))
        self.assertRaises(ValidationError, v, self.form, DummyField(0))
        self.assertRaises(ValidationError, v, self.form, DummyField(12))
        self.assertRaises(ValidationError, v, self.form, DummyField(-5))
        self.assertEqual(grab_error_message(v, self.form, DummyField(12)), 'Number must be between 5 and 10.')

        onlymin = NumberRange(min=5)
        self.assertEqual(onlymin(self.form, DummyField(500)), None)
        self.assertEqual(onlymin(self.form, DummyField(5)), None)
        self.assertRaises(ValidationError, onlymin, self.form, DummyField(4))
        self.assertEqual(grab_error_message(onlymin, self.form, DummyField(4)), 'Number must be at least 5.')

        onlymax = number_range(max=50)
        self.assertEqual(onlymax(self.form, DummyField(30)), None)
        self.assertRaises(ValidationError, onlymax, self.form, DummyField(75))
        self.assertEqual(grab_error_message(onlymax, self.form, DummyField(75)), 'Number must be at most 50.')

    def test_number_range_exclusive(self):
        positive = NumberRange(min=0, exclusive_min=True)
        self.assertEqual(positive(self.form, DummyField(1e-9)), None)
        self.assertRaises(ValidationError, positive, self.form, DummyField(0))
        self.assertEqual(grab_error_message(positive, self.form, DummyField(0)), 'Number must be greater than 0.')

        bounded = NumberRange(min=0, max=1, exclusive_min=True, message='eps %(min)s..%(max)s')
        self.assertEqual(grab_error_message(bounded, self.form, DummyField(0)), 'eps 0..1')

    def test_photon_budget_derives(self):
        self.form['m'] = DummyField(10 ** 6)
        self.form['eps'] = DummyField(0.01)
        field = DummyField(None)
        self.assertEqual(photon_budget()(self.form, field), None)
        self.assertAlmostEqual(field.data, 10 ** 4)

    def test_photon_budget_agrees(self):
        self.form['m'] = DummyField(1000, raw_data=['1000'])
        self.form['eps'] = DummyField(0.5, raw_data=['0.5'])
        self.assertEqual(photon_budget()(self.form, DummyField(500.0)), None)
        self.assertRaises(ValidationError, photon_budget(), self.form, DummyField(400.0))
        self.assertEqual(grab_error_message(photon_budget(), self.form, DummyField(400.0)),
                         'N must equal M * epsilon = 500.0.')

    def test_photon_budget_defaults_yield(self):
        self.form['m'] = DummyField(1000, raw_data=[])
        self.form['eps'] = DummyField(0.5, raw_data=['0.5'])
        field = DummyField(400.0)
        self.assertEqual(photon_budget()(self.form, field), None)
        self.assertEqual(field.data, 400.0)

    def test_photon_budget_missing(self):
        self.assertEqual(photon_budget()(self.form, DummyField(10.0)), None)
        self.assertEqual(grab_stop_message(photon_budget(), self.form, DummyField(None)),
                         'Give N or both M and epsilon.')
        self.form['m'] = DummyField(1000)
        self.form['eps'] = DummyField(None)
        self.assertRaises(StopValidation, photon_budget(), self.form, DummyField(None))

    def test_photon_budget_fields(self):
        self.form['modes'] = DummyField(100)
        self.form['p'] = DummyField(0.1)
        field = DummyField(None)
        PhotonBudget(m_field='modes', epsilon_field='p')(self.form, field)
        self.assertAlmostEqual(field.data, 10)

    def test_precision_bits(self):
        self.assertEqual(precision_bits()(self.form, DummyField(256)), None)
        self.assertEqual(precision_bits()(self.form, DummyField(None)), None)
        self.assertRaises(ValidationError, precision_bits(), self.form, DummyField(32))
        self.assertEqual(grab_error_message(precision_bits(), self.form, DummyField(32)),
                         'Precision must be at least 64 bits.')
        self.assertEqual(grab_error_message(PrecisionBits(min=1), self.form, DummyField(0)),
                         'Precision must be at least 1 bit.')
        self.assertEqual(grab_error_message(PrecisionBits(message='low'), self.form, DummyField(8)), 'low')

    def test_lazy_proxy(self):
        """Validators accept messages which are only rendered when they fail."""

        class ReallyLazyProxy(object):
            def __str__(self):
                raise Exception('Translator function called during form declaration.')

        message = ReallyLazyProxy()
        self.assertRaises(Exception, str, message)
        self.assertTrue(NumberRange(1, 5, message=message))
        self.assertTrue(input_required(message=message))
        self.assertTrue(PhotonBudget(message=message))
        self.assertTrue(PrecisionBits(message=message))
