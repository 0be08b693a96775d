"""
CSV and summary output for the command-line front end.

CSV files always have a header row, LF line endings and floats written
with 17 significant digits in scientific notation.
"""
import csv
import logging
import os
import sys

import numpy as np

logger = logging.getLogger(__name__)


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return 'pass' if value else 'fail'
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.16e')
    return str(value)


def write_csv(path, header, rows):
    """Write rows to path, or to stdout when path is None"""
    if path:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', newline='') as output:
            _write(output, header, rows)
        logger.info("wrote %d rows to %s", len(rows), path)
    else:
        _write(sys.stdout, header, rows)


def _write(stream, header, rows):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def summary(lines, to_file):
    """Human-readable lines; on stderr when the CSV itself goes to stdout"""
    stream = sys.stdout if to_file else sys.stderr
    for line in lines:
        print(line, file=stream)
