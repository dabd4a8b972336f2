from pathlib import Path

import pytest

from gridcalc import load_workbook, parse_ref

DATA = Path(__file__).parent / 'data'


def data_path(name):
    return DATA / name


def refs(*names):
    return [parse_ref(n) for n in names]


@pytest.fixture
def fig1():
    return load_workbook((DATA / 'fig1.xml').read_bytes())
