"""
Machine-readable outputs: JSON reports, CSV curves and the run manifest.
"""
import csv
import hashlib
import json
import logging
import os
import time

import attr
import mpmath
import numpy

from momentlimits.utils import to_float

__all__ = (
    'RunManifest', 'file_digest', 'jsonable', 'write_json', 'write_csv', 'write_sweep',
    'write_replicates', 'write_demo', 'write_matrix', 'write_profile',
)

log = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


def jsonable(value):
    """Convert reports, mpmath numbers and numpy arrays for ``json``."""
    if hasattr(value, 'as_dict'):
        return jsonable(value.as_dict())
    if isinstance(value, dict):
        return dict((str(k), jsonable(v)) for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, numpy.ndarray):
        return value.tolist()
    if isinstance(value, numpy.generic):
        return value.item()
    if isinstance(value, (mpmath.mpf, mpmath.mpc)):
        return to_float(value)
    return value


def file_digest(path):
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            h.update(block)
    return h.hexdigest()


def _prepare(path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_json(path, payload):
    _prepare(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(jsonable(payload), f, indent=2, sort_keys=True, default=str)
        f.write('\n')
    log.info('wrote %s', path)
    return path


def write_csv(path, header, rows):
    _prepare(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in jsonable(list(row))])
    log.info('wrote %s', path)
    return path


def write_sweep(path, points, quantity='value'):
    """One row per grid point: ``delta``, the quantity and the seconds spent."""
    return write_csv(path, ['delta', quantity, 'seconds'],
                     ([p.delta, to_float(p.value), p.seconds] for p in points))


def write_matrix(path, matrix):
    """
    One matrix row per line, each entry in decimal with every digit of the
    working precision.
    """
    digits = mpmath.mp.dps
    rows = ([mpmath.nstr(matrix[i, j], digits) for j in range(matrix.cols)] for i in range(matrix.rows))
    return write_csv(path, ['c%d' % j for j in range(matrix.cols)], rows)


def write_profile(path, fit):
    """Smallest Hankel eigenvalue per order from an ``EigenDecayFit``."""
    digits = mpmath.mp.dps
    return write_csv(path, ['p', 'lambda_min'], ([p, mpmath.nstr(v, digits)] for p, v in zip(fit.orders, fit.values)))


def write_replicates(path, run):
    """
    Per-replicate counts and estimates of a ``ReplicateRun``. The file holds
    no timing so reruns with the same seed are byte-identical.
    """
    labels = list(run.selection.labels)
    orders = ['beta%d' % k for k in run.selection.orders]
    rows = ([k] + [int(c) for c in counts] + [float(e) for e in estimates]
            for k, (counts, estimates) in enumerate(zip(run.counts, run.estimates)))
    return write_csv(path, ['replicate'] + labels + ['other'] + orders, rows)


DEMO_COLUMNS = ('mu', 'quantum_slope', 'spade_slope', 'direct_crb_slope', 'quantum_theory', 'spade_theory',
                'direct_theory', 'efficiency', 'passed')


def write_demo(path, rows):
    return write_csv(path, DEMO_COLUMNS, ([row[c] for c in DEMO_COLUMNS] for row in rows))


@attr.s(slots=True)
class RunManifest(object):
    """
    Provenance of one command: version, resolved configuration, precision,
    timing and a sha256 per output file.
    """
    command = attr.ib()
    config = attr.ib(factory=dict)
    precision = attr.ib(default=None)
    version = attr.ib(default=None)
    outputs = attr.ib(factory=dict)
    started = attr.ib(factory=time.time)
    seconds = attr.ib(default=None)
    checks = attr.ib(factory=dict)

    def __attrs_post_init__(self):
        if self.version is None:
            from momentlimits import __version__
            self.version = __version__

    def add(self, path):
        self.outputs[os.path.basename(path)] = file_digest(path)
        return path

    def as_dict(self):
        return {
            'tool': 'momentlimits',
            'version': self.version,
            'command': self.command,
            'config': jsonable(self.config),
            'precision': self.precision,
            'outputs': dict(self.outputs),
            'checks': jsonable(self.checks),
            'started': self.started,
            'seconds': self.seconds,
        }

    def write(self, directory):
        self.seconds = time.time() - self.started
        return write_json(os.path.join(directory, MANIFEST_NAME), self)

    @classmethod
    def verify(cls, directory):
        """
        Return the names of listed outputs which are missing or whose content
        no longer matches the recorded hash.
        """
        with open(os.path.join(directory, MANIFEST_NAME), encoding='utf-8') as f:
            outputs = json.load(f)['outputs']
        bad = []
        for name, digest in sorted(outputs.items()):
            path = os.path.join(directory, name)
            if not os.path.exists(path) or file_digest(path) != digest:
                bad.append(name)
        return bad
