import json

from psc.cli import RunConfig, emit_svg, run


def out_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_coeffs(capsys):
    assert run(["coeffs"]) == 0
    data = out_json(capsys)
    assert data["cubic_fit"]["rescaled_rows"]["residual"] < 1e-12
    assert len(data["reports"]) == 7


def test_branch_outputs_and_determinism(tmp_path, capsys):
    args = ["branch", "--group", "O2m", "--ell", "1", "--lmax", "10", "--out", str(tmp_path)]
    assert run(args) == 0
    first = capsys.readouterr().out
    csv1 = (tmp_path / "branch_O2m_1.csv").read_bytes()
    svg = (tmp_path / "branch_O2m_1.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
    assert run(args) == 0
    assert capsys.readouterr().out == first
    assert (tmp_path / "branch_O2m_1.csv").read_bytes() == csv1
    fit = json.loads(first)
    assert abs(fit["lambda_second_fit"] / (-3 / (5 * 3.141592653589793)) - 1) < 0.01


def test_common_flags_before_subcommand(tmp_path, capsys):
    assert run(["--lmax", "8", "--out", str(tmp_path), "geometry", "--profile", "O2m:1:0.2"]) == 0
    data = out_json(capsys)
    assert abs(data["center_cusp_exponent"] - 4 / 3) < 1e-3
    assert data["admissible_across_center"] is False
    assert (tmp_path / "metric_O2m_1.csv").exists()


def test_config_file_and_overrides(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"l_max": 12, "ds": 0.02}))
    cfg = RunConfig.load(str(cfg_path), {"l_max": 9, "ds": None})
    assert cfg.l_max == 9 and cfg.ds == 0.02
    cfg_path.write_text(json.dumps({"bogus": 1}))
    assert run(["lattice", "--config", str(cfg_path)]) == 2


def test_config_errors():
    assert run(["verify-tables", "--lmax", "4"]) == 2
    assert run(["branch", "--group", "O2m", "--ell", "1", "--ds", "-1"]) == 2
    assert run(["geometry", "--profile", "nonsense"]) == 2
    assert run(["no-such-command"]) == 2


def test_lattice(capsys):
    assert run(["lattice"]) == 0
    assert out_json(capsys)["all_match"]


def test_simulate_original_isotropic(tmp_path, capsys):
    assert run(["simulate", "--mode", "original", "--isotropic", "--out", str(tmp_path)]) == 0
    data = out_json(capsys)
    assert abs(data["r_blowup"] - 1.0) < 1e-3
    assert (tmp_path / "simulate_original.csv").exists()


def test_simulate_rescaled(tmp_path, capsys):
    args = ["simulate", "--lambda", "1.0", "--t-end", "1.0", "--out", str(tmp_path), "--seed", "3"]
    assert run(args) == 0
    data = out_json(capsys)
    assert data["max_energy_increment"] <= 1e-8
    assert (tmp_path / "simulate_rescaled_events.jsonl").exists()


def test_svg_empty_and_labels(tmp_path):
    emit_svg([{"label": "a", "lam": [1.0, 2.0], "s": [0.0, 0.1]}], tmp_path / "x.svg", title="t")
    text = (tmp_path / "x.svg").read_text()
    assert text.rstrip().endswith("</svg>")
