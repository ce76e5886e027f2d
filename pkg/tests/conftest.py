"""Shared fixtures and settings for the homlab test suite"""
import hypothesis
import numpy as np
import pytest

from homlab.mesh import build_domain, build_unit_cell

np.seterr(all='warn')

hypothesis.settings.register_profile('fast', max_examples=5, deadline=None)
hypothesis.settings.register_profile('thorough', max_examples=100,
                                     deadline=None)
hypothesis.settings.load_profile('fast')


def pytest_configure(config):
    config.addinivalue_line(
        'markers', 'slow: eps sweeps and end-to-end runs (deselect with'
                   ' -m "not slow")')


@pytest.fixture(scope='session')
def cell():
    return build_unit_cell(('1/4', '1/4', '3/4', '3/4'), 8)


@pytest.fixture(scope='session')
def coarse_cell():
    return build_unit_cell(('1/4', '1/4', '3/4', '3/4'), 4)


@pytest.fixture(scope='session')
def full_cell():
    return build_unit_cell(None, 4)


@pytest.fixture(scope='session')
def domain(cell):
    return build_domain(cell, '1/2', ['left'])


@pytest.fixture(scope='session')
def coarse_domain(coarse_cell):
    return build_domain(coarse_cell, '1/2', ['left'])
