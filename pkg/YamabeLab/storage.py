"""
.. module:: storage
    :platform: Unix
    :synopsis: Field cache directory, report CSV files and the summary plot.

Everything here is called from a single writer thread. CSV numbers are
written with ``repr`` so identical runs give identical bodies; only the
``#`` timestamp line differs.
"""
import csv
import json
import os
from dataclasses import asdict
from datetime import datetime, timezone

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import cfg, decode, encode  # noqa: E402
from .exceptions import (DecodeError, IoError, MissingReport,  # noqa: E402
                         VersionMismatch)
from .grids import AXISYMMETRIC  # noqa: E402
from .utils import get_logger  # noqa: E402


logger = get_logger('storage')


def _normalized(obj):
    return json.loads(json.dumps(obj))


class FieldCache(object):
    """
    Per-index field records under ``<root>/fields``.

    A record is reused only when its domain descriptor and solver
    parameters match the requested solve; any other record, an old format
    version included, is a miss.
    """

    def __init__(self, root):
        self.root = root
        self.directory = os.path.join(root, cfg.FIELD_DIR)

    def path(self, index, mode):
        return os.path.join(self.directory, '{:04d}_{}.bin'.format(index, mode))

    def key(self, p):
        return {'params': asdict(p)}

    def _read(self, index, mode):
        path = self.path(index, mode)
        if not os.path.exists(path):
            return None
        try:
            with open(path, 'rb') as handle:
                return decode.field_record(handle.read())
        except VersionMismatch as error:
            logger.info('Ignoring %s: %s', path, error)
        except DecodeError as error:
            logger.warning('Ignoring unreadable record %s: %s', path, error)
        except OSError as error:
            raise IoError(str(error))
        return None

    def _matches(self, desc, dom, p):
        return (desc.get('domain') == _normalized(dom.descriptor()) and
                desc.get('key') == _normalized(self.key(p)))

    def load(self, index, dom, p):
        """``(lower, upper)`` of a cached solve, or None on a miss."""
        upper = self._read(index, 'upper')
        if upper is None or not self._matches(upper[1], dom, p):
            logger.info('Field cache miss for index %s.', index)
            return None
        lower = None
        if dom.symmetry == AXISYMMETRIC and not dom.singular_outer:
            lower = self._read(index, 'lower')
            if lower is None or not self._matches(lower[1], dom, p):
                logger.info('Field cache miss for the lower field of index %s.', index)
                return None
            lower = lower[0]
        return lower, upper[0]

    def store(self, index, lower, upper, p):
        try:
            os.makedirs(self.directory, exist_ok=True)
            for mode, fld in (('lower', lower), ('upper', upper)):
                if fld is None:
                    continue
                with open(self.path(index, mode), 'wb') as handle:
                    handle.write(encode.field_record(fld, self.key(p)))
        except OSError as error:
            raise IoError(str(error))
        logger.info('Stored the fields of index %s.', index)

    def indices(self):
        """Indices with an upper record on disk."""
        if not os.path.isdir(self.directory):
            return []
        found = set()
        for name in os.listdir(self.directory):
            match = cfg.FIELD_NAME_REGEX.match(name)
            if match and match.group(2) == 'upper':
                found.add(int(match.group(1)))
        return sorted(found)


# CSV

def cell(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def timestamp_line():
    return '# yamabe-lab {}\n'.format(datetime.now(timezone.utc).isoformat())


def write_csv(path, columns, rows, stamp=True):
    """
    Write rows of dicts keyed by ``columns``.

    raises:
        * IoError: If the file cannot be written.
    """
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, 'w', newline='') as handle:
            if stamp:
                handle.write(timestamp_line())
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([cell(row.get(c)) for c in columns])
    except OSError as error:
        raise IoError(str(error))
    logger.info('Wrote %s rows to %s.', len(rows), path)


def read_csv(path):
    """
    Rows of a report CSV as dicts of strings, comment lines skipped.

    raises:
        * MissingReport: If the file does not exist.
    """
    if not os.path.exists(path):
        raise MissingReport(path)
    try:
        with open(path, newline='') as handle:
            lines = [line for line in handle if not line.startswith('#')]
    except OSError as error:
        raise IoError(str(error))
    return list(csv.DictReader(lines))


def write_run_csv(out_dir, rows):
    path = os.path.join(out_dir, cfg.RUN_CSV)
    write_csv(path, cfg.CSV_COLUMNS, rows)
    return path


def read_run_csv(out_dir):
    return read_csv(os.path.join(out_dir, cfg.RUN_CSV))


def number(text):
    return float(text) if text not in ('', None) else float('nan')


# PLOTS

def _per_index(rows):
    seen = {}
    for row in rows:
        seen.setdefault(int(row['i']), row)
    return [seen[i] for i in sorted(seen)]


def write_plot(out_dir, rows):
    """
    ``plot.svg`` from run.csv rows: sup |Ric| against the index and ``m_i``
    against ``r_i``.
    """
    rows = _per_index(rows)
    i = np.array([int(r['i']) for r in rows])
    near = np.array([number(r['sup_ric_near']) for r in rows])
    far = np.array([number(r['sup_ric_far']) for r in rows])
    radius = np.array([number(r['r_i']) for r in rows])
    m = np.array([number(r['m_i']) for r in rows])
    matplotlib.rcParams['svg.hashsalt'] = cfg.SVG_HASH_SALT
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    left.semilogy(i, near, 'o-', label='near')
    left.semilogy(i, far, 's--', label='far')
    left.set_xlabel('i')
    left.set_ylabel('sup |Ric|')
    left.legend()
    right.loglog(radius, m, 'o-')
    right.set_xlabel('r_i')
    right.set_ylabel('m_i')
    fig.tight_layout()
    path = os.path.join(out_dir, cfg.PLOT_SVG)
    try:
        fig.savefig(path, format='svg', metadata={'Date': None})
    except OSError as error:
        raise IoError(str(error))
    finally:
        plt.close(fig)
    logger.info('Wrote %s.', path)
    return path
