import math

import numpy as np
import pytest

from accsinkhorn.trace import FIELDS, SolverTrace


def make():
    t = SolverTrace()
    t.append(iter=0, wall_time=0.0, violation_l1=0.5, f_value=1.0 / 3.0)
    t.append(iter=2, wall_time=0.1, violation_l1=0.25, f_value=0.1, energy=1e-300)
    return t


def test_append_rejects_unknown_and_order():
    t = make()
    with pytest.raises(KeyError):
        t.append(iter=3, bogus=1)
    with pytest.raises(ValueError):
        t.append(iter=2)


def test_csv_round_trip_is_exact(tmp_path):
    t = make()
    path = tmp_path / "t.csv"
    t.to_csv(path)
    back = SolverTrace.from_csv(path)
    assert back.records == t.records


def test_csv_without_time():
    text = make().to_csv(include_time=False)
    header = text.splitlines()[0].split(",")
    assert "wall_time" not in header and header[0] == "iter"
    assert len(header) == len(FIELDS) - 1


def test_column_and_validate():
    t = make()
    np.testing.assert_array_equal(t.column("iter"), [0, 2])
    assert math.isnan(t.column("energy")[0])
    t.validate()
    t.append(iter=3, violation_l1=float("nan"))
    with pytest.raises(ValueError):
        t.validate()


def test_jsonl():
    lines = make().to_jsonl(include_time=False).splitlines()
    assert len(lines) == 2 and '"wall_time"' not in lines[0]
