from unittest import TestCase

import mpmath
import numpy

from momentlimits.errors import OrderError, SupportError
from momentlimits.measure import gaussian_frequency, hard_pupil, point_mass, two_point, uniform
from momentlimits.spade import (CountRecord, ModeProbabilities, ModeSelection, analytic_variance, build_spade,
                                estimate, generalized_moments, make_generator, mode_probabilities, replicate,
                                simulate_counts)
from momentlimits.submodel import MomentFunctional
from tests.common import PrecisionMixin, assert_close


class GaussianTablesTest(PrecisionMixin, TestCase):
    def setUp(self):
        super(GaussianTablesTest, self).setUp()
        self.model = build_spade(gaussian_frequency(), 3)

    def test_constants(self):
        model = build_spade(gaussian_frequency(), 5)
        for n in range(6):
            assert_close(self, model.r[n], 1 / (mpmath.mpf(4) ** n * mpmath.factorial(n)), rel=1e-60)
            assert_close(self, model.tildeL[n, n], mpmath.sqrt(mpmath.factorial(n)) / 2 ** n, rel=1e-60)
            expected_s = 1 / (mpmath.mpf(4) ** n * mpmath.sqrt(mpmath.factorial(n) * mpmath.factorial(n + 1)))
            assert_close(self, model.s[n], expected_s, rel=1e-60)
        assert_close(self, model.s[0], 1, rel=1e-60)
        self.assertTrue(model.closed_form_gaussian)

    def test_amplitude(self):
        assert_close(self, self.model.amplitude(0, mpmath.mpf(1)), mpmath.exp(-mpmath.mpf(1) / 8), rel=1e-60)

    def test_point_mass_probabilities(self):
        probabilities = mode_probabilities(self.model, point_mass(1))
        for n in range(4):
            expected = mpmath.exp(-mpmath.mpf(1) / 4) / (mpmath.mpf(4) ** n * mpmath.factorial(n))
            assert_close(self, probabilities.pad[n], expected, rel=1e-50)
        assert_close(self, probabilities.pad[0], mpmath.mpf('0.778800783'), rel=1e-9)
        for n in range(3):
            assert_close(self, probabilities.plus[n] + probabilities.minus[n],
                         probabilities.pad[n] + probabilities.pad[n + 1], rel=1e-50)

    def test_generalized_moments(self):
        x = mpmath.mpf('0.7')
        moments = generalized_moments(self.model, point_mass(x))
        self.assertEqual(sorted(moments), list(range(8)))
        for k in range(8):
            assert_close(self, moments[k], x ** k * mpmath.exp(-x * x / 4), rel=1e-40)

    def test_functional_matches_moments(self):
        P = uniform(1, quadrature_order=20)
        moments = generalized_moments(self.model, P)
        for order in (2, 3):
            b = MomentFunctional.from_spade(self.model, order)
            self.assertEqual(b.label, 'spade-%d' % order)
            assert_close(self, b.beta(P), moments[order], rel=1e-40)

    def test_functional_order_cap(self):
        self.model.functional(7)
        try:
            self.model.functional(8)
        except OrderError as e:
            self.assertEqual(e.cap, 7)
        else:
            self.fail('expected OrderError')


class GenericTablesTest(PrecisionMixin, TestCase):
    def test_hard_pupil(self):
        model = build_spade(hard_pupil(), 1)
        self.assertFalse(model.closed_form_gaussian)
        x = mpmath.mpf('0.5')
        probabilities = mode_probabilities(model, point_mass(x))
        assert_close(self, probabilities.pad[0], mpmath.sinc(x) ** 2, rel=1e-10)
        self.assertTrue(model.series_order >= 2)

    def test_radius(self):
        model = build_spade(hard_pupil(), 1)
        self.assertRaises(SupportError, mode_probabilities, model, uniform(2, quadrature_order=10))

    def test_rejects_atoms(self):
        self.assertRaises(SupportError, build_spade, two_point(), 1)

    def test_negative_order(self):
        self.assertRaises(ValueError, build_spade, gaussian_frequency(), -1)


class ModeSelectionTest(TestCase):
    def test_even(self):
        selection = ModeSelection.parse('even:0,1')
        self.assertEqual(selection.orders, (0, 2))
        self.assertEqual(selection.labels, ('N0', 'N1'))
        self.assertEqual(str(selection), 'even:0,1')

    def test_odd(self):
        selection = ModeSelection.parse(' odd:2 ')
        self.assertEqual(selection.orders, (5,))
        self.assertEqual(selection.labels, ('N2+', 'N2-'))

    def test_invalid(self):
        for text in ('even', 'pad:1', 'even:a', 'even:', 'odd:0,1', 'even:1,1', 'even:-1'):
            self.assertRaises(ValueError, ModeSelection.parse, text)

    def test_probabilities(self):
        probabilities = ModeProbabilities(pad=(0.5, 0.2), plus=(0.4,), minus=(0.3,))
        self.assertEqual(ModeSelection.parse('even:1').probabilities(probabilities), [0.2])
        self.assertEqual(ModeSelection.parse('odd:0').probabilities(probabilities), [0.4, 0.3])


class SimulationTest(PrecisionMixin, TestCase):
    def setUp(self):
        super(SimulationTest, self).setUp()
        self.model = build_spade(gaussian_frequency(), 2)
        self.P = uniform(1, quadrature_order=20)
        self.selection = ModeSelection.parse('even:0,1')

    def test_same_seed(self):
        first = simulate_counts(self.model, self.P, 10 ** 6, 0.5, 11, self.selection)
        second = simulate_counts(self.model, self.P, 10 ** 6, 0.5, 11, self.selection)
        self.assertEqual(first, second)
        self.assertEqual(first.N, 5 * 10 ** 5)
        self.assertEqual(first.M, 10 ** 6)

    def test_replicates_differ(self):
        first = simulate_counts(self.model, self.P, 10 ** 6, 0.5, 11, self.selection, replicate=0)
        second = simulate_counts(self.model, self.P, 10 ** 6, 0.5, 11, self.selection, replicate=1)
        self.assertNotEqual(first.counts + (first.other_count,), second.counts + (second.other_count,))

    def test_generator_streams(self):
        a = make_generator(3, 5).integers(0, 2 ** 62, size=4)
        b = make_generator(3, 5).integers(0, 2 ** 62, size=4)
        self.assertTrue(numpy.array_equal(a, b))

    def test_counts_bounded(self):
        record = simulate_counts(self.model, self.P, 1000, 0.3, 2, self.selection)
        self.assertTrue(sum(record.counts) + record.other_count <= 1000)
        self.assertTrue(all(c >= 0 for c in record.counts))
        data = record.as_dict()
        self.assertEqual(data['selection'], 'even:0,1')
        self.assertTrue('N0' in data and 'N1' in data)

    def test_poisson(self):
        record = simulate_counts(self.model, self.P, 1000, 0.3, 2, self.selection, poisson=True)
        self.assertTrue(record.poisson)
        self.assertEqual(len(record.counts), 2)

    def test_run_arguments(self):
        self.assertRaises(ValueError, simulate_counts, self.model, self.P, 0, 0.5, 1, self.selection)
        self.assertRaises(ValueError, simulate_counts, self.model, self.P, 10, 1, 1, self.selection)
        self.assertRaises(ValueError, simulate_counts, self.model, self.P, 10, -0.1, 1, self.selection)


class EstimateTest(PrecisionMixin, TestCase):
    def setUp(self):
        super(EstimateTest, self).setUp()
        self.model = build_spade(gaussian_frequency(), 1)

    def test_pad(self):
        counts = CountRecord(selection=ModeSelection.parse('even:0'), counts=(400,), other_count=100, M=1000,
                             epsilon=0.5, seed=0)
        report = estimate(counts, self.model)
        self.assertEqual(report.orders, (0,))
        self.assertAlmostEqual(report.estimates[0], 0.8)
        # empirical q = 0.8
        assert_close(self, report.analytic_variances[0], mpmath.mpf('0.8') * mpmath.mpf('0.6') / 500, rel=1e-12)
        self.assertEqual(report.variance_ratios, None)

    def test_ipad(self):
        counts = CountRecord(selection=ModeSelection.parse('odd:0'), counts=(300, 100), other_count=100,
                             M=1000, epsilon=0.5, seed=0)
        report = estimate(counts, self.model)
        self.assertEqual(report.orders, (1,))
        self.assertAlmostEqual(report.estimates[0], 200 / 500.0)

    def test_zero_photons(self):
        counts = CountRecord(selection=ModeSelection.parse('even:0'), counts=(0,), other_count=0, M=10,
                             epsilon=0, seed=0)
        self.assertRaises(ValueError, estimate, counts, self.model)

    def test_analytic_variance(self):
        probabilities = ModeProbabilities(pad=(mpmath.mpf('0.5'), mpmath.mpf('0.2')),
                                          plus=(mpmath.mpf('0.4'),), minus=(mpmath.mpf('0.1'),))
        r1 = self.model.r[1]
        even = analytic_variance(self.model, ModeSelection.parse('even:1'), probabilities, 100, 0.1)
        assert_close(self, even[0], mpmath.mpf('0.2') * (1 - mpmath.mpf('0.02')) / (r1 ** 2 * 100), rel=1e-12)
        odd = analytic_variance(self.model, ModeSelection.parse('odd:0'), probabilities, 100, 0.1)
        expected = (mpmath.mpf('0.5') - mpmath.mpf('0.1') * mpmath.mpf('0.09')) / (self.model.s[0] ** 2 * 100)
        assert_close(self, odd[0], expected, rel=1e-12)
        poisson = analytic_variance(self.model, ModeSelection.parse('odd:0'), probabilities, 100, 0.1, poisson=True)
        assert_close(self, poisson[0], mpmath.mpf('0.5') / 100, rel=1e-12)


class ReplicateTest(PrecisionMixin, TestCase):
    def setUp(self):
        super(ReplicateTest, self).setUp()
        self.model = build_spade(gaussian_frequency(), 1)
        self.P = uniform(1, quadrature_order=20)

    def check(self, run):
        for z in run.report.bias_z:
            self.assertTrue(abs(z) < 5, z)
        for ratio in run.report.variance_ratios:
            self.assertTrue(abs(ratio - 1) < 0.5, ratio)

    def test_pad_statistics(self):
        run = replicate(self.model, self.P, 10 ** 6, 0.1, 5, ModeSelection.parse('even:0,1'), 200)
        self.assertEqual(run.counts.shape, (200, 3))
        self.assertEqual(run.counts.dtype, numpy.int64)
        self.assertEqual(run.estimates.shape, (200, 2))
        self.assertEqual(run.report.replicates, 200)
        self.check(run)

    def test_ipad_statistics(self):
        run = replicate(self.model, self.P, 10 ** 6, 0.1, 6, ModeSelection.parse('odd:0'), 200)
        self.assertEqual(run.counts.shape, (200, 3))
        self.check(run)

    def test_workers(self):
        selection = ModeSelection.parse('even:0')
        serial = replicate(self.model, self.P, 10 ** 4, 0.2, 9, selection, 6)
        pooled = replicate(self.model, self.P, 10 ** 4, 0.2, 9, selection, 6, workers=2)
        self.assertTrue(numpy.array_equal(serial.counts, pooled.counts))

    def test_matches_single_runs(self):
        selection = ModeSelection.parse('even:0')
        run = replicate(self.model, self.P, 10 ** 4, 0.2, 9, selection, 3)
        single = simulate_counts(self.model, self.P, 10 ** 4, 0.2, 9, selection, replicate=2)
        self.assertEqual(list(run.counts[2]), list(single.counts) + [single.other_count])

    def test_too_few(self):
        self.assertRaises(ValueError, replicate, self.model, self.P, 100, 0.1, 1, ModeSelection.parse('even:0'), 1)
