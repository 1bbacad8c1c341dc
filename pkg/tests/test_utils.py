import logging
from functools import partial

import pytest

from numcore import ScaledComplex
from utils import (THREADS_ENV, CheckReport, format_float, format_scaled, make_rng, parallel_map,
                   resolve_threads, setup_logging)


def square_plus(x, offset=0):
    return x * x + offset


def test_parallel_map_keeps_order():
    items = list(range(20))
    expected = [x * x + 1 for x in items]
    assert parallel_map(partial(square_plus, offset=1), items, workers=1) == expected
    assert parallel_map(partial(square_plus, offset=1), items, workers=3) == expected
    assert parallel_map(square_plus, [], workers=2) == []


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV, " ")
    assert resolve_threads(2) == 2
    monkeypatch.setenv(THREADS_ENV, "5")
    assert resolve_threads(2) == 5
    monkeypatch.setenv(THREADS_ENV, "x")
    with pytest.raises(ValueError):
        resolve_threads(1)


def test_formatting():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_scaled(ScaledComplex.from_complex(0)) == ("0", "0")
    assert format_scaled(ScaledComplex.from_complex(3 - 2j)) == ("3", "-2")
    huge = ScaledComplex(1.0 + 0j, 10000)
    re, im = format_scaled(huge)
    assert "e+3010" in re


def test_check_report_line():
    assert CheckReport("degrees", True, detail="degrees=3,7").line() == "PASS degrees degrees=3,7"
    assert CheckReport("x", False, anchor="a = b").line() == "FAIL x [a = b]"


def test_make_rng_is_seeded():
    assert make_rng(4).uniform() == make_rng(4).uniform()


def test_setup_logging_is_idempotent():
    root = setup_logging(logging.INFO)
    count = len(root.handlers)
    setup_logging(logging.DEBUG)
    assert len(root.handlers) == count
    assert root.level == logging.DEBUG
