# -*- coding: utf-8 -*-
"""Helper functions used throughout the homlab module"""
import csv
import datetime as dt
import os
from fractions import Fraction

import numpy as np
from pytz import timezone




def parse_rational(val):
    """Parses an exact rational from a string, int, or Fraction

    Floats are accepted only if they are exact binary fractions with a small
    denominator (for example 0.25), so that "0.3" is never silently
    rounded to a nearby rational.

    Args:
        val (mixed): a value like "1/4", 3, or Fraction(1, 2)

    Returns:
        Fraction
    """
    if isinstance(val, Fraction):
        return val
    if isinstance(val, bool):
        raise ValueError('Not a rational: {!r}'.format(val))
    if isinstance(val, int):
        return Fraction(val)
    if isinstance(val, float):
        frac = Fraction(val)
        if frac.denominator > 2 ** 20:
            raise ValueError('Not an exact rational: {!r}'.format(val))
        return frac
    if isinstance(val, str):
        return Fraction(val.strip())
    raise ValueError('Not a rational: {!r}'.format(val))


def format_rational(val):
    """Formats a Fraction the way parse_rational reads it"""
    val = Fraction(val)
    if val.denominator == 1:
        return str(val.numerator)
    return '{}/{}'.format(val.numerator, val.denominator)


def localize_datetime(timestamp=None, timezone_id='UTC',
                      mask='%Y-%m-%dT%H:%M:%S%z'):
    """Localizes timestamp to specified timezone

    Args:
        timestamp (datetime.datetime): naive timestamp. If None, uses now.
        timezone_id (str): a tz database name
        mask (str): strftime mask. If None, the datetime is returned.

    Returns:
        Localized datetime as formatted according to the mask
    """
    if timestamp is None:
        timestamp = dt.datetime.now(dt.timezone.utc).replace(tzinfo=None)
    localized = timezone(timezone_id).localize(timestamp)
    if mask is not None:
        return localized.strftime(mask)
    return localized


def format_float(val):
    """Formats a float so that it round-trips exactly"""
    return repr(float(val))


def write_csv(fp, header, rows):
    """Writes a table as gnuplot-friendly CSV

    Floats are written with repr so that identical runs produce
    bitwise-identical files.

    Args:
        fp (str): path to the output file
        header (list): column names
        rows (iterable): rows of values
    """
    os.makedirs(os.path.dirname(os.path.abspath(fp)), exist_ok=True)
    with open(fp, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(val)
                             if isinstance(val, (float, np.floating))
                             else val for val in row])


def read_csv(fp):
    """Reads a CSV written by write_csv into a header and list of rows"""
    with open(fp, 'r', newline='', encoding='utf-8') as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]
