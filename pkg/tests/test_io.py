import json
import os

import numpy as np
import pytest

from stratfront import io as sio
from stratfront.errors import ModelError
from stratfront.functionals import DiscreteSet
from stratfront.model import CrossSection, CylinderGrid


@pytest.fixture()
def grid():
    return CylinderGrid(CrossSection(1.0, 21), -2.0, 1.0, 0.1)


def test_discrete_set_round_trip(grid, tmp_path):
    rng = np.random.default_rng(4)
    occ = rng.random((21, grid.nz - 1)) < 0.4
    occ[:, -3:] = False
    ext = occ[:, 0] & (rng.random(21) < 0.5)
    s = DiscreteSet(grid, occ, ext)
    path = str(tmp_path / "set.csv")
    sio.write_discrete_set(path, s)
    back = sio.read_discrete_set(path, grid)
    assert np.array_equal(back.occupancy, s.occupancy)
    assert np.array_equal(back.extends_below, s.extends_below)


def test_discrete_set_header_check(grid, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ModelError):
        sio.read_discrete_set(str(p), grid)


def test_atomic_json_and_jsonl(tmp_path):
    path = str(tmp_path / "doc.json")
    sio.write_json(path, {"b": np.float64(1.5), "a": np.int64(2),
                          "c": np.arange(3)})
    doc = json.loads(open(path).read())
    assert doc == {"a": 2, "b": 1.5, "c": [0, 1, 2]}
    log = str(tmp_path / "log.jsonl")
    sio.append_jsonl(log, {"event": "x", "v": 1})
    sio.append_jsonl(log, {"event": "y", "v": 2})
    lines = open(log).read().splitlines()
    assert len(lines) == 2 and json.loads(lines[1])["event"] == "y"


def test_csv_float_repr_round_trip(tmp_path):
    path = str(tmp_path / "t.csv")
    vals = [0.1, 1.0 / 3.0, 6 * np.sqrt(2) * 0.1]
    sio.write_csv(path, ["v"], [(v,) for v in vals])
    lines = open(path).read().splitlines()[1:]
    assert [float(ln) for ln in lines] == vals
