import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphereot import io
from sphereot.config import ExperimentConfig, apply_overrides, from_dict, load, with_updates
from sphereot.errors import NodeSetMismatch, ValidationError
from sphereot.fields import generate_nodes
from sphereot.transport import Potentials, identity_map, map_from_potential


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    s = io.fmt(x)
    assert float(s) == x
    assert io.fmt(float(s)) == s


def test_fmt_seventeen_digits():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt(1.0) == "1"
    assert io.fmt(math.nan) == "null" and io.fmt(math.inf) == "null"


def test_dumps_is_valid_json():
    obj = {"a": np.float64(0.1), "b": [1, 2.5, np.int64(3)], "c": {"d": True, "e": None},
           "f": np.array([[1.0, 2.0], [3.0, 4.0]]), "g": [], "h": "x\"y"}
    back = json.loads(io.dumps(obj))
    assert back == {"a": 0.1, "b": [1, 2.5, 3], "c": {"d": True, "e": None},
                    "f": [[1.0, 2.0], [3.0, 4.0]], "g": [], "h": "x\"y"}
    assert "0.10000000000000001" in io.dumps(obj)
    with pytest.raises(TypeError):
        io.dumps({"x": object()})


def test_nodes_round_trip(tmp_path):
    nodes = generate_nodes(2, 300)
    io.write_json(tmp_path / "n.json", io.nodes_to_dict(nodes))
    back = io.nodes_from_dict(io.read_json(tmp_path / "n.json"))
    assert np.array_equal(back.points, nodes.points)
    assert np.array_equal(back.weights, nodes.weights)
    assert back.same_nodes(nodes) and back.h == nodes.h


def test_map_round_trip_and_mismatch(tmp_path):
    nodes = generate_nodes(2, 300)
    u = 0.05 * nodes.points[:, 2]
    T = map_from_potential(Potentials(u=u, v=u, eps=1.0), nodes)
    io.write_json(tmp_path / "m.json", io.map_to_dict(T))
    d = io.read_json(tmp_path / "m.json")
    back = io.map_from_dict(d, nodes)
    assert np.array_equal(back.images, T.images) and back.provenance == T.provenance
    with pytest.raises(NodeSetMismatch):
        io.map_from_dict(d, generate_nodes(2, 301))
    d["images"] = d["images"][:-1]
    with pytest.raises(ValidationError):
        io.map_from_dict(d)


def test_read_json_errors(tmp_path):
    with pytest.raises(ValidationError):
        io.read_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ValidationError):
        io.read_json(tmp_path / "bad.json")
    with pytest.raises(ValidationError):
        io.nodes_from_dict({"n": 2})


def test_map_csv(tmp_path):
    nodes = generate_nodes(2, 50)
    path = io.write_map_csv(tmp_path / "map.csv", identity_map(nodes))
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["node", "x1", "x2", "x3", "t1", "t2", "t3", "displacement"]
    assert len(rows) == 51
    assert float(rows[1][1]) == nodes.points[0, 0]


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def test_config_defaults_and_validation():
    cfg = ExperimentConfig()
    assert cfg.alpha_prime < cfg.alpha
    for bad in ({"eps_list": [0.1, 0.2]}, {"alpha_prime": 0.6}, {"samples": 0},
                {"rho": 1.5}, {"cut_margin": 0.1}, {"scheme": "grid"}, {"profile": "p9"},
                {"map_route": "other"}, {"nope": 1}, {"solver": {"tol_marginal": -1}},
                {"solver": {"bogus": 1}}):
        with pytest.raises(ValidationError):
            from_dict({**cfg.as_dict(), **bad})


def test_config_round_trip():
    cfg = ExperimentConfig(N=500, eps_list=(0.1, 0.01))
    assert from_dict(json.loads(json.dumps(cfg.as_dict()))) == cfg
    assert with_updates(cfg, N=600).N == 600


def test_overrides_and_flags(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"N": 700, "seed": 3, "solver": {"eps_final": 1e-2}}))
    cfg = load(path, ["rho=0.7", "solver.max_iters=123", "eps_list=[0.2, 0.1]"], seed=9, out="x")
    assert (cfg.N, cfg.rho, cfg.seed, cfg.out) == (700, 0.7, 9, "x")
    assert cfg.solver.eps_final == 1e-2 and cfg.solver.max_iters == 123
    assert cfg.eps_list == (0.2, 0.1)
    for bad in (["rho"], ["N.x=1"]):
        with pytest.raises(ValidationError):
            apply_overrides(cfg.as_dict(), bad)
    (tmp_path / "list.json").write_text("[1]")
    with pytest.raises(ValidationError):
        load(tmp_path / "list.json")
