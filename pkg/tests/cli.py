import io
import json
import os
from contextlib import redirect_stderr, redirect_stdout
from unittest import TestCase, mock

import attr

from momentlimits import cli, scaling
from momentlimits.output import MANIFEST_NAME, RunManifest
from momentlimits.submodel import purified_score_norm
from tests.common import TempDirMixin


class CliTestMixin(TempDirMixin):
    """Runs ``momentlimits`` in-process with captured output."""

    def run_cli(self, *argv, environ=None, out=None):
        argv = list(argv)
        if '--out' not in argv:
            argv += ['--out', out or self.tmp]
        stdout, stderr = io.StringIO(), io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(stderr):
            code = cli.main(argv, environ if environ is not None else {})
        self.stdout = stdout.getvalue()
        self.stderr = stderr.getvalue()
        return code

    def load(self, name, directory=None):
        with open(os.path.join(directory or self.tmp, name), encoding='utf-8') as f:
            return json.load(f)


class ConfigurationErrorTest(CliTestMixin, TestCase):
    def test_mu(self):
        self.assertEqual(self.run_cli('bound', '--mu', '0', '--n', '10'), 2)
        self.assertTrue('error: mu: Number must be at least 1.' in self.stderr)
        self.assertFalse(os.path.exists(self.path(MANIFEST_NAME)))

    def test_missing_seed(self):
        self.assertEqual(self.run_cli('spade', '--replicates', '2'), 2)
        self.assertTrue('error: seed: This field is required.' in self.stderr)

    def test_low_precision(self):
        self.assertEqual(self.run_cli('bound', '--n', '10', '--precision', '32'), 2)
        self.assertTrue('Precision must be at least 64 bits.' in self.stderr)

    def test_environment_precision(self):
        code = self.run_cli('bound', '--n', '10', environ={'MOMENTLIMITS_PRECISION': 'many'})
        self.assertEqual(code, 2)
        self.assertTrue('error: precision: Not a valid integer value' in self.stderr)

    def test_missing_config(self):
        self.assertEqual(self.run_cli('bound', '--n', '10', '--config', self.path('absent.toml')), 2)
        self.assertTrue('error: config:' in self.stderr)

    def test_photon_number(self):
        self.assertEqual(self.run_cli('direct'), 2)
        self.assertTrue('error: n: Give N or both M and epsilon.' in self.stderr)

    def test_unknown_locale(self):
        self.assertEqual(self.run_cli('bound', '--n', '10', '--locale', 'xx_XX'), 2)
        self.assertTrue('Unknown locale xx_XX' in self.stderr)

    def test_german_messages(self):
        self.assertEqual(self.run_cli('bound', '--mu', '0', '--n', '10', '--locale', 'de_DE'), 2)
        self.assertTrue('error: mu: Zahl muss mindestens 1 sein.' in self.stderr, self.stderr)


class BoundCommandTest(CliTestMixin, TestCase):
    def test_run(self):
        code = self.run_cli('bound', '--mu', '2', '--delta', '0.05', '--n', '100', '--precision', '128', '--check')
        self.assertEqual(code, 0, self.stderr)
        report = self.load('bound.json')
        self.assertTrue(report['bound_lower'] > 0)
        self.assertTrue(report['bound_best'] >= report['bound_lower'])
        manifest = self.load(MANIFEST_NAME)
        self.assertEqual(manifest['command'], 'bound')
        self.assertEqual(manifest['precision'], 128)
        self.assertEqual(manifest['config']['mu'], 2)
        self.assertEqual(manifest['checks']['failures'], [])
        self.assertTrue(manifest['checks']['requested'])
        self.assertEqual(RunManifest.verify(self.tmp), [])
        self.assertTrue(self.stdout.startswith('bound mu=2 delta=0.05\n'))
        self.assertTrue('bound_lower' in self.stdout)

    def test_dump_hankel(self):
        code = self.run_cli('bound', '--mu', '2', '--n', '100', '--precision', '128', '--dump-hankel')
        self.assertEqual(code, 0, self.stderr)
        outputs = self.load(MANIFEST_NAME)['outputs']
        for name in ('hankel_H.csv', 'hankel_L.csv', 'hankel_A.csv', 'lambda_min.csv'):
            self.assertTrue(name in outputs, name)
        with open(self.path('hankel_H.csv'), encoding='utf-8') as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], 'c0,c1,c2,c3,c4')
        self.assertEqual(len(lines), 6)
        self.assertEqual(RunManifest.verify(self.tmp), [])

    def test_config_file(self):
        path = self.write('run.toml', 'precision = 128\n\n[bound]\nmu = 1\nn = 50\n')
        self.assertEqual(self.run_cli('bound', '--config', path, '--delta', '0.02'), 0, self.stderr)
        manifest = self.load(MANIFEST_NAME)
        self.assertEqual(manifest['config']['mu'], 1)
        self.assertEqual(manifest['config']['n'], 50)
        self.assertEqual(manifest['config']['delta'], 0.02)
        self.assertEqual(manifest['precision'], 128)


class DirectCommandTest(CliTestMixin, TestCase):
    def test_run(self):
        code = self.run_cli('direct', '--mu', '1', '--delta', '0.01', '--n', '1000', '--precision', '113')
        self.assertEqual(code, 0, self.stderr)
        report = self.load('direct.json')
        self.assertAlmostEqual(report['crb'] * 1000, 1, delta=0.05)
        self.assertEqual(report['marker'], '')
        self.assertEqual(RunManifest.verify(self.tmp), [])

    def test_sinc2_refused(self):
        self.assertEqual(self.run_cli('direct', '--psf', 'sinc2', '--n', '10', '--precision', '113'), 3)
        self.assertTrue(self.stderr.startswith('error: '))
        self.assertFalse(os.path.exists(self.path('direct.json')))
        manifest = self.load(MANIFEST_NAME)
        self.assertEqual(manifest['command'], 'direct')
        self.assertEqual(manifest['config']['psf'], 'sinc2')
        self.assertEqual(manifest['checks']['exit_code'], 3)
        self.assertTrue('zeros' in manifest['checks']['error'])
        self.assertEqual(manifest['outputs'], {})


def _demo_rows(base, Q, psf, mus=(1, ), **kwargs):
    return [{'mu': mu, 'quantum_slope': 0.0, 'spade_slope': 0.0, 'direct_crb_slope': 0.0, 'quantum_theory': 0,
             'spade_theory': 0, 'direct_theory': 0, 'efficiency': 1.0, 'passed': True} for mu in mus]


class DemoCommandTest(CliTestMixin, TestCase):
    ARGS = ('demo', '--mus', '1', '--grid', '0.01,0.1', '--n', '1000', '--precision', '113', '--check')

    def setUp(self):
        super().setUp()
        patcher = mock.patch.object(scaling, 'demo_table', side_effect=_demo_rows)
        patcher.start()
        self.addCleanup(patcher.stop)

    def test_every_grid_point(self):
        self.assertEqual(self.run_cli(*self.ARGS), 0, self.stderr)
        records = self.load('demo.json')['data_processing']
        self.assertEqual([(r['mu'], r['delta']) for r in records], [(1, 0.01), (1, 0.1)])
        for record in records:
            self.assertTrue(record['passed'])
            self.assertTrue(0 < record['fisher'] <= record['four_gram'] * (1 + cli.DATA_PROCESSING_SLACK))
        self.assertEqual(RunManifest.verify(self.tmp), [])

    def test_violation_at_later_point(self):
        calls = []

        def shrink_later(sub, Q):
            report = purified_score_norm(sub, Q)
            calls.append(report)
            if len(calls) > 1:
                return attr.evolve(report, gram=report.gram / 100)
            return report

        with mock.patch.object(cli, 'purified_score_norm', side_effect=shrink_later):
            self.assertEqual(self.run_cli(*self.ARGS), 4)
        self.assertEqual(len(calls), 2)
        self.assertTrue('check failed: data processing mu=1 delta=0.1:' in self.stderr, self.stderr)
        self.assertFalse('delta=0.01' in self.stderr)
        records = self.load('demo.json')['data_processing']
        self.assertEqual([r['passed'] for r in records], [True, False])
        self.assertEqual(len(self.load(MANIFEST_NAME)['checks']['failures']), 1)


class SpadeCommandTest(CliTestMixin, TestCase):
    ARGS = ('spade', '--seed', '5', '--replicates', '3', '--m', '1e5', '--delta', '0.2', '--precision', '128')

    def test_same_seed(self):
        first, second = self.path('first'), self.path('second')
        self.assertEqual(self.run_cli(*self.ARGS, out=first), 0, self.stderr)
        self.assertEqual(self.run_cli(*self.ARGS, out=second), 0, self.stderr)
        with open(os.path.join(first, 'replicates.csv'), 'rb') as f:
            expected = f.read()
        with open(os.path.join(second, 'replicates.csv'), 'rb') as f:
            self.assertEqual(f.read(), expected)
        self.assertEqual(expected.splitlines()[0], b'replicate,N1,other,beta2')
        self.assertEqual(len(expected.splitlines()), 4)
        summary = self.load('summary.json', first)
        self.assertEqual(summary['seed'], 5)
        self.assertEqual(summary['selection'], 'even:1')
        self.assertEqual(RunManifest.verify(first), [])

    def test_other_seed(self):
        self.assertEqual(self.run_cli(*self.ARGS, out=self.path('first')), 0, self.stderr)
        args = list(self.ARGS)
        args[args.index('5')] = '6'
        self.assertEqual(self.run_cli(*args, out=self.path('second')), 0, self.stderr)
        with open(self.path('first', 'replicates.csv'), 'rb') as f:
            first = f.read()
        with open(self.path('second', 'replicates.csv'), 'rb') as f:
            self.assertNotEqual(f.read(), first)


class SweepCommandTest(CliTestMixin, TestCase):
    ARGS = ('sweep', 'moment', '--mu', '2', '--grid', '0.01:0.1:4', '--precision', '128')

    def test_check_passes(self):
        self.assertEqual(self.run_cli(*(self.ARGS + ('--check', ))), 0, self.stderr)
        fit = self.load('fit.json')
        self.assertAlmostEqual(fit['slope'], 2, places=6)
        self.assertEqual(fit['theory'], 2)
        self.assertTrue(fit['passed'])
        self.assertTrue(os.path.exists(self.path('sweep.csv')))
        self.assertEqual(RunManifest.verify(self.tmp), [])

    def test_json_only(self):
        self.assertEqual(self.run_cli(*(self.ARGS + ('--json', ))), 0, self.stderr)
        self.assertFalse(os.path.exists(self.path('sweep.csv')))
        self.assertEqual(sorted(self.load(MANIFEST_NAME)['outputs']), ['fit.json'])

    def test_expected_slope_fails(self):
        self.assertEqual(self.run_cli(*(self.ARGS + ('--expect', '3'))), 4)
        self.assertTrue('check failed: moment slope' in self.stderr)
        manifest = self.load(MANIFEST_NAME)
        self.assertEqual(len(manifest['checks']['failures']), 1)

    def test_constant(self):
        self.assertEqual(self.run_cli('sweep', 'constant', '--grid', '0.01,0.02,0.04', '--check'), 0, self.stderr)
        self.assertAlmostEqual(self.load('fit.json')['slope'], 0, places=9)


class SummaryTest(TestCase):
    def test_format_value(self):
        self.assertEqual(cli.format_value(1234.5), '1234.5')
        self.assertEqual(cli.format_value(None), 'None')
        self.assertEqual(cli.format_value(True), 'True')
        self.assertEqual(cli.format_value('unvalidated'), 'unvalidated')
        german = cli.format_value(1234.5, 'de_DE')
        self.assertTrue(german.startswith('1,2345'), german)
        self.assertTrue(german.endswith('E3'), german)

    def test_print_summary(self):
        stream = io.StringIO()
        cli.print_summary('bound mu=2', [('gram', 0.5), ('truncation_order', 12)], stream=stream)
        self.assertEqual(stream.getvalue().splitlines(), [
            'bound mu=2',
            '  gram                 0.5',
            '  truncation_order     12',
        ])


class ParserTest(TestCase):
    def test_subcommands(self):
        parser = cli.build_parser()
        args = parser.parse_args(['bound', '--mu', '3', '--j-cap', '40'])
        self.assertEqual(args.command, 'bound')
        self.assertEqual(args.mu, '3')
        self.assertEqual(args.j_cap, '40')
        self.assertEqual(args.json, None)

        args = parser.parse_args(['sweep', 'gram', '--json'])
        self.assertEqual(args.evaluator, 'gram')
        self.assertEqual(args.json, True)

    def test_command_required(self):
        parser = cli.build_parser()
        with redirect_stderr(io.StringIO()):
            self.assertRaises(SystemExit, parser.parse_args, [])
