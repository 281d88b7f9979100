from pathlib import Path

import pytest

from lesionuot import cli, io
from lesionuot.core import NumericalError
from lesionuot.graph import label_events

SPEC = """\
n_initial = 10
radius_range = 2 8
shift_mm = 4
base_seed = 1000
write_masks = 0
"""


@pytest.fixture(scope="module")
def suite30(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite")
    (root / "spec.txt").write_text(SPEC)
    assert cli.main(["synth", str(root / "spec.txt"), "--n-cases", "30", "--out", str(root / "cases")]) == 0
    return root


def test_synth_writes_one_directory_per_case(suite30):
    dirs = sorted(p.name for p in (suite30 / "cases").iterdir())
    assert dirs == [f"case_{k:03d}" for k in range(30)]


def test_synth_is_byte_deterministic(suite30, tmp_path):
    assert cli.main(["synth", str(suite30 / "spec.txt"), "--n-cases", "3", "--out", str(tmp_path / "a")]) == 0
    for name in ("baseline.lesions", "followup.lesions", "reference.graph", "case.info"):
        for k in range(3):
            case = f"case_{k:03d}"
            assert (tmp_path / "a" / case / name).read_bytes() == (suite30 / "cases" / case / name).read_bytes()


def test_synth_config_errors(tmp_path, capsys):
    assert cli.main(["synth", "--n-cases", "0", "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG
    (tmp_path / "bad.spec").write_text("n_initial = 10\ncolour = blue\n")
    assert cli.main(["synth", str(tmp_path / "bad.spec"), "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG
    assert "colour" in capsys.readouterr().err


def test_match_writes_outputs(suite30, tmp_path):
    case = suite30 / "cases" / "case_000"
    assert cli.main(["match", str(case), "--out", str(tmp_path / "m")]) == 0
    graph = io.read_graph(tmp_path / "m" / "predicted.graph")
    assert graph.n0 == len(io.read_lesions(case / "baseline.lesions"))
    for name in ("plan.txt", "cost.txt", "prior.txt"):
        assert (tmp_path / "m" / name).exists()
    assert cli.main(["match", str(case), "--method", "dist", "--out", str(tmp_path / "d")]) == 0
    assert not (tmp_path / "d" / "plan.txt").exists()


def test_match_error_codes(suite30, tmp_path, capsys, monkeypatch):
    missing = tmp_path / "no_such_case"
    assert cli.main(["match", str(missing), "--out", str(tmp_path / "m")]) == cli.EXIT_INPUT
    assert str(missing) in capsys.readouterr().err
    cfg = tmp_path / "eps0.cfg"
    cfg.write_text("epsilon = 0\n")
    case = str(suite30 / "cases" / "case_000")
    assert cli.main(["match", case, "--config", str(cfg), "--out", str(tmp_path / "m")]) == cli.EXIT_CONFIG
    assert cli.main(["match", case, "--set", "tau_row=2", "--out", str(tmp_path / "m")]) == cli.EXIT_CONFIG
    assert cli.main(["match", case, "--method", "hungarian", "--out", str(tmp_path / "m")]) == cli.EXIT_CONFIG

    def boom(*args, **kw):
        raise NumericalError("non-finite scaling at iteration 7")

    monkeypatch.setattr(cli, "run_method", boom)
    assert cli.main(["match", case, "--out", str(tmp_path / "m")]) == cli.EXIT_NUMERICAL


def test_eval_examples(tmp_path):
    g = label_events(2, 2, {(0, 0), (1, 1)})
    io.write_graph(tmp_path / "g.graph", g)
    assert cli.main(["eval", str(tmp_path / "g.graph"), str(tmp_path / "g.graph"), "--out", str(tmp_path / "r")]) == 0
    rep = io.read_report(tmp_path / "r")
    assert set(rep.scalars().values()) == {1.0}

    io.write_graph(tmp_path / "e.graph", label_events(0, 0, set()))
    assert cli.main(["eval", str(tmp_path / "e.graph"), str(tmp_path / "e.graph"), "--out", str(tmp_path / "r")]) == 0
    assert set(io.read_report(tmp_path / "r").scalars().values()) == {1.0}

    io.write_graph(tmp_path / "h.graph", label_events(3, 2, set()))
    assert cli.main(["eval", str(tmp_path / "g.graph"), str(tmp_path / "h.graph"), "--out", str(tmp_path / "r")]) == cli.EXIT_INPUT


def test_bench_full_suite(suite30, tmp_path):
    out = tmp_path / "b"
    assert cli.main(["bench", str(suite30 / "cases"), "--out", str(out), "--jobs", "2"]) == 0
    rows = (out / "cases.tsv").read_text().splitlines()
    assert len(rows) == 1 + 90
    summary = io.read_keyvalue(out / "summary.txt")
    assert summary["cases"] == "30"
    for other in ("dist", "normdist"):
        for metric in cli.WILCOXON_METRICS:
            p = summary[f"wilcoxon.uot_gt_{other}.{metric}.pvalue"]
            assert 0.0 <= float(p) <= 1.0
    assert "mean.dist[all].edge_f1" in summary


def test_bench_single_case_and_bad_method(suite30, tmp_path):
    one = tmp_path / "one"
    one.mkdir()
    src = suite30 / "cases" / "case_004"
    dst = one / "case_004"
    dst.mkdir()
    for f in src.iterdir():
        (dst / f.name).write_bytes(f.read_bytes())
    assert cli.main(["bench", str(one), "--out", str(tmp_path / "b")]) == 0
    summary = io.read_keyvalue(tmp_path / "b" / "summary.txt")
    assert summary["wilcoxon.uot_gt_dist.edge_f1.pvalue"] == "n/a"
    assert cli.main(["bench", str(one), "--method", "uot,magic", "--out", str(tmp_path / "b")]) == cli.EXIT_CONFIG
    assert cli.main(["bench", str(tmp_path / "empty"), "--out", str(tmp_path / "b")]) == cli.EXIT_INPUT


def test_settings_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("epsilon = 0.3\ndist_threshold_mm = 7\nbaseline_rule = all\n")
    s = cli.load_settings(str(cfg), ["epsilon=0.4"])
    assert s.match.epsilon == 0.4 and s.match.lambda_base == 1.0
    assert s.dist_threshold_mm == 7.0 and s.baseline_rule == "all"


def test_shipped_configs_load():
    root = Path(__file__).resolve().parents[1] / "configs"
    for cfg in root.glob("*.cfg"):
        cli.load_settings(str(cfg))
    for spec in root.glob("*.spec"):
        cli.load_synth_spec(str(spec))
