import io
import math

import numpy as np
import pandas as pd
import pytest

from analysis import classify
from data_processor import (ORBIT_COLUMNS, SWEEP_COLUMNS, VERDICTS, OrbitTable, classification_row,
                            growth_summary, histogram_frame, sweep_frame, write_csv, write_sweep)
from dynsys import Point3, orbit
from params import Params


@pytest.fixture
def fibonacci_records():
    return orbit(Params(2, 1, 0.5), Point3.from_complex(1, 0, 0), 5)


def test_orbit_table_fibonacci_column(fibonacci_records):
    table = OrbitTable()
    assert table.load_records(fibonacci_records)
    assert [p[0] for p in table.p_values] == ["1", "1", "2", "3", "5", "8"]
    frame = table.to_frame()
    assert list(frame.columns) == ORBIT_COLUMNS
    assert list(frame["n"]) == list(range(6))


def test_orbit_table_validation():
    table = OrbitTable()
    assert not table.validate()
    table.steps = np.array([0, 2])
    table.log_mags = np.array([0.0, 0.0])
    table.p_values = [("1", "0"), ("1", "0")]
    assert not table.validate()


def test_csv_format(fibonacci_records):
    table = OrbitTable()
    table.load_records(fibonacci_records)
    text = write_csv(table.to_frame())
    lines = text.split("\n")
    assert lines[0] == ",".join(ORBIT_COLUMNS)
    assert "\r" not in text
    # ratio is undefined at n = 0 because z1 = 0
    assert lines[1].split(",")[4] == ""
    assert float(lines[3].split(",")[4]) == 2.0


def test_csv_writes_to_stream():
    buffer = io.StringIO()
    write_csv(pd.DataFrame({"x": [0.1]}), buffer)
    assert buffer.getvalue() == "x\n0.10000000000000001\n"


def test_empty_sweep_is_header_only():
    frame = sweep_frame([])
    histogram = histogram_frame(frame, [0.3, 0.9])
    text = write_sweep(frame, histogram)
    assert text == ",".join(SWEEP_COLUMNS) + "\n"
    assert int(histogram.values.sum()) == 0


def test_histogram_counts():
    params = Params(2, 1, 0.9)
    rows = []
    for i, coords in enumerate([(1, 0, 0), (0, 0, 0), (10, 5, 1)]):
        result = classify(params, Point3.from_complex(*coords))
        rows.append(classification_row(params, i, coords, result.as_dict()))
    frame = sweep_frame(rows)
    histogram = histogram_frame(frame, [0.9, 0.3])
    assert list(histogram.columns) == VERDICTS
    assert list(histogram.index) == [0.9, 0.3]
    assert histogram.loc[0.9].tolist() == [1, 1, 1, 0]
    assert histogram.loc[0.3].sum() == 0
    assert math.isnan(frame.loc[1, "limit_re"])
    assert frame.loc[0, "limit_re"] == pytest.approx(0.7236067977, abs=1e-8)

    text = write_sweep(frame, histogram)
    table, hist = text.split("\n\n")
    assert len(table.splitlines()) == 4
    assert hist.splitlines()[0] == "alpha_modulus," + ",".join(VERDICTS)


def test_growth_summary(fibonacci_records):
    summary = growth_summary(fibonacci_records)
    assert summary["steps"] == 6
    assert summary["final_log_mag"] == pytest.approx(math.log(8))
    assert summary["log_ratio"] == pytest.approx(math.log(8) / math.log(5))
