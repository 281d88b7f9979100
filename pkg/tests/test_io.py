import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesionuot import io
from lesionuot.core import ConfigError, LesionInstance, LesionSet, MatchConfig
from lesionuot.graph import label_events
from lesionuot.metrics import evaluate
from lesionuot.prior import AsymmetryPrior
from lesionuot.uot import solve_uot
from lesionuot.volume import DeformationField, Volume3D

floats = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(floats, floats, floats, st.floats(1e-3, 1e5), st.one_of(st.none(), st.floats(0, 1))), max_size=6))
def test_lesion_table_round_trip(tmp_path_factory, rows):
    lesions = [LesionInstance(k, (x, y, z), v, trust=t) for k, (x, y, z, v, t) in enumerate(rows)]
    s = LesionSet("followup", lesions)
    path = tmp_path_factory.mktemp("t") / "f.lesions"
    io.write_lesions(path, s)
    assert io.read_lesions(path) == s


def test_lesion_table_errors(tmp_path):
    bad = tmp_path / "bad.lesions"
    bad.write_text("timepoint baseline\nlesion id=0 x=1 y=2 volume=3\n")
    with pytest.raises(io.FormatError, match="missing field 'z'"):
        io.read_lesions(bad)
    bad.write_text("lesion id=0 x=1 y=2 z=3 volume=3\n")
    with pytest.raises(io.FormatError, match="timepoint"):
        io.read_lesions(bad)
    with pytest.raises(io.FormatError, match="cannot read"):
        io.read_lesions(tmp_path / "nope.lesions")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_graph_round_trip(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    n0, n1 = rng.integers(0, 6, 2)
    edges = {(i, j) for i in range(n0) for j in range(n1) if rng.random() < 0.3}
    weights = {e: float(rng.random()) for e in edges} if rng.random() < 0.5 else None
    g = label_events(n0, n1, edges, weights)
    path = tmp_path_factory.mktemp("g") / "x.graph"
    io.write_graph(path, g)
    back = io.read_graph(path)
    assert back == g and back.weights == g.weights


def test_plan_cost_prior_report_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    C = rng.uniform(0, 2, (3, 4))
    plan = solve_uot(C, np.full(3, 1 / 3), np.full(4, 0.25), 1.0, 1.0, 0.1)
    io.write_plan(tmp_path / "plan.txt", plan)
    back = io.read_plan(tmp_path / "plan.txt")
    assert np.array_equal(back.gamma, plan.gamma)
    assert (back.iterations, back.converged, back.objective) == (plan.iterations, plan.converged, plan.objective)

    ref = label_events(3, 2, {(0, 0), (1, 0), (2, 1)})
    rep = evaluate(label_events(3, 2, {(0, 0), (2, 1)}), ref)
    io.write_report(tmp_path / "r.txt", rep)
    assert io.read_report(tmp_path / "r.txt") == rep

    io.write_prior(tmp_path / "p.txt", AsymmetryPrior(None, 1.0, 0.5))
    assert "rho=nan" in (tmp_path / "p.txt").read_text()


def test_volume_round_trip_and_layout(tmp_path):
    data = np.arange(24, dtype=np.int16).reshape(2, 3, 4)
    vol = Volume3D(data, (0.5, 1.0, 2.0), (1.0, -2.0, 3.0))
    io.write_volume(tmp_path / "v", vol)
    raw = np.frombuffer((tmp_path / "v.raw").read_bytes(), dtype="<i2")
    # x fastest
    assert raw[:3].tolist() == [data[0, 0, 0], data[1, 0, 0], data[0, 1, 0]]
    assert io.read_volume(tmp_path / "v") == vol

    field = DeformationField(np.random.default_rng(1).normal(size=(2, 3, 4, 3)))
    io.write_volume(tmp_path / "d", field)
    raw = np.frombuffer((tmp_path / "d.raw").read_bytes(), dtype="<f8")
    assert raw[:4].tolist() == [field.data[0, 0, 0, 0], field.data[0, 0, 0, 1], field.data[0, 0, 0, 2], field.data[1, 0, 0, 0]]
    back = io.read_volume(tmp_path / "d")
    assert np.array_equal(back.data, field.data)

    (tmp_path / "v.raw").write_bytes(b"\0" * 10)
    with pytest.raises(io.FormatError, match="header implies"):
        io.read_volume(tmp_path / "v")


def test_config_values():
    cfg, rest = io.parse_config_values({"epsilon": "0.2", "max_iters": "50", "other": "x"})
    assert cfg == MatchConfig(epsilon=0.2, max_iters=50) and rest == {"other": "x"}
    with pytest.raises(ConfigError):
        io.parse_config_values({"epsilon": "abc"})
    with pytest.raises(ConfigError):
        io.parse_config_values({"epsilon": "0"})


def test_case_bundle_round_trip_and_checks(tmp_path):
    mask0 = np.zeros((8, 8, 8), dtype=np.uint8)
    mask0[1:3, 1:3, 1:3] = 1
    mask0[6, 6, 6] = 1
    mask1 = np.zeros_like(mask0)
    mask1[1:3, 1:3, 2:4] = 1
    m0, m1 = Volume3D(mask0), Volume3D(mask1)
    from lesionuot.volume import extract_lesions

    s0, s1 = extract_lesions(m0, m1)
    ref = label_events(2, 1, {(0, 0)})
    io.write_case(tmp_path / "c", io.CaseBundle("c1", s0, s1, ref, mask0=m0, mask1=m1))
    back = io.read_case(tmp_path / "c")
    assert back.case_id == "c1" and back.set0 == s0 and back.reference == ref and back.mask1 == m1

    # tables alone are enough; masks alone too
    (tmp_path / "c" / "baseline.lesions").unlink()
    assert io.read_case(tmp_path / "c").set0 == s0
    io.write_lesions(tmp_path / "c" / "baseline.lesions", LesionSet("baseline", list(s0)[:1]))
    with pytest.raises(io.FormatError, match="masks hold"):
        io.read_case(tmp_path / "c")
    with pytest.raises(io.FormatError, match="not found"):
        io.read_case(tmp_path / "missing")
