import datetime as dt

import numpy as np
import pytest

from larx.design import SeriesTable, quarter_end_date


def quarterly_table(cols: dict, start=dt.date(1980, 3, 31)) -> SeriesTable:
    s = len(next(iter(cols.values())))
    dates, d = [], quarter_end_date(start)
    for _ in range(s):
        dates.append(d)
        d = quarter_end_date(d + dt.timedelta(days=1))
    return SeriesTable(tuple(dates), cols, "quarterly")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
