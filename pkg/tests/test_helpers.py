"""Defines tests for helper functions and configuration dictionaries"""
import os
from fractions import Fraction

import pytest

from homlab.dicts import DeepDict, LockableDict
from homlab.exceptions import ConfigError
from homlab.helpers import (
    format_rational,
    localize_datetime,
    parse_rational,
    read_csv,
    write_csv,
)




@pytest.mark.parametrize('val, expected', [
    ('1/4', Fraction(1, 4)),
    (' 3/8 ', Fraction(3, 8)),
    (2, Fraction(2)),
    (0.25, Fraction(1, 4)),
    (Fraction(5, 7), Fraction(5, 7)),
])
def test_parse_rational(val, expected):
    assert parse_rational(val) == expected


@pytest.mark.parametrize('val', [0.3, True, None, [1, 4]])
def test_parse_rational_rejects(val):
    with pytest.raises(ValueError):
        parse_rational(val)


def test_format_rational():
    assert format_rational(Fraction(1, 4)) == '1/4'
    assert format_rational(3) == '3'
    assert parse_rational(format_rational(Fraction(-7, 16))) \
           == Fraction(-7, 16)


def test_localize_datetime():
    stamp = localize_datetime()
    assert stamp.endswith('+0000')




def test_csv_floats_are_exact(tmp_path):
    fp = os.path.join(str(tmp_path), 'sub', 'table.csv')
    val = 0.1 + 0.2
    write_csv(fp, ['name', 'value'], [['a', val], ['b', 3]])
    header, rows = read_csv(fp)
    assert header == ['name', 'value']
    assert float(rows[0][1]) == val
    assert rows[1] == ['b', '3']




def test_deep_dict_paths():
    data = DeepDict({'a': {'b': {'c': 1}}})
    assert data.pull('a.b.c') == 1
    assert data('a/b/c') == 1
    assert data.get_path('a.x', 'missing') == 'missing'
    data.push(2, 'a.d.e')
    assert data.pull('a', 'd', 'e') == 2
    assert isinstance(data['a']['d'], DeepDict)


def test_deep_dict_merge():
    data = DeepDict({'a': {'b': 1, 'c': 2}, 'x': [1]})
    data.merge({'a': {'c': 3}, 'x': [2, 3]})
    assert data.to_dict() == {'a': {'b': 1, 'c': 3}, 'x': [2, 3]}


def test_lockable_dict():
    data = LockableDict({'a': LockableDict({'b': 1}, name='a')})
    data['c'] = 2
    data.lock()
    assert data.locked and data['a'].locked
    with pytest.raises(ConfigError) as err:
        data['a']['b'] = 3
    assert err.value.field == 'a.b'
    data.unlock()
    data['c'] = 4
    assert data['c'] == 4
