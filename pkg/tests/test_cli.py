import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgdvlasov.cli import main
from pgdvlasov.config import ConfigError, build_config, format_config, parse_config
from pgdvlasov.diagnostics import read_csv

SMALL = ["--scenario", "landau1d", "--nx", "8", "--nv", "8", "--tf", "0.2", "--nt", "20"]


def run_cli(*args):
    return main(["run", *SMALL, *args])


def no_temp_files(root):
    for _, _, files in os.walk(root):
        assert not [f for f in files if f.endswith(".part") or f.startswith(".tmp")]


def test_default_config_roundtrip():
    cfg = parse_config("")
    assert parse_config(format_config(cfg)) == cfg


@settings(max_examples=40, deadline=None)
@given(
    name=st.sampled_from(["landau1d", "twostream1d", "landau2d"]),
    n_x=st.integers(4, 64),
    n_steps=st.integers(1, 10_000),
    eps=st.floats(1e-16, 1e-4),
    seed=st.integers(0, 2**31 - 1),
    conv=st.sampled_from(["physical", "boxed"]),
    stride=st.integers(0, 50),
)
def test_config_roundtrip_property(name, n_x, n_steps, eps, seed, conv, stride):
    text = (
        f"scenario.name = {name}\nscenario.n_x = {n_x}\nscenario.n_steps = {n_steps}\n"
        f"solver.epsilon = {eps!r}\nsolver.seed = {seed}\nsolver.force_convention = {conv}\n"
        f"output.snapshot_stride = {stride}\n"
    )
    cfg = parse_config(text)
    again = parse_config(format_config(cfg))
    assert again == cfg
    assert format_config(again) == format_config(cfg)


@pytest.mark.parametrize(
    "text,key,line",
    [
        ("scenario.n_x = 8\nscenario.bogus = 1\n", "scenario.bogus", 2),
        ("scenario.n_x = eight\n", "scenario.n_x", 1),
        ("scenario.n_x = 8\nscenario.n_x = 9\n", "scenario.n_x", 2),
        ("# comment\nsolver.force_convention = sideways\n", "solver.force_convention", 2),
        ("scenario.dt = 0.3\n", "scenario.dt", 1),
        ("scenario.dt = 0.01\nscenario.n_steps = 10\n", "scenario.dt", 1),
    ],
)
def test_config_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key and err.value.line == line
    assert repr(key) in str(err.value) and f"line {line}" in str(err.value)


def test_dt_resolves_to_step_count():
    cfg = parse_config("scenario.t_f = 2.0\nscenario.dt = 0.01\n")
    assert cfg.n_steps == 200 and cfg.dt == pytest.approx(0.01)


def test_flags_override_file(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("scenario.n_x = 16\nscenario.n_steps = 50\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(path), "--nx", "8", "--nv", "8", "--tf", "0.1",
                 "--dt", "0.01", "--out", str(out), "--dry-run"]) == 0
    assert not out.exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "c.txt"
    path.write_text("scenario.n_x = 8\nsolver.nonsense = 3\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "solver.nonsense" in err and "line 2" in err
    assert not (tmp_path / "o").exists()


def test_dry_run_prints_config_and_writes_nothing(tmp_path, capsys):
    out = tmp_path / "o"
    assert run_cli("--out", str(out), "--dry-run") == 0
    text = capsys.readouterr().out
    assert parse_config(text).scenario.n_x == 8
    assert not out.exists()


def test_run_outputs_and_bitwise_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("--out", str(a)) == 0
    assert run_cli("--out", str(b)) == 0
    for name in ("run_config.txt", "diagnostics.csv", "ranks.csv", "error_summary.txt",
                 "decay_fit.txt", "plot.gp"):
        assert (a / name).exists()
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()
    records = read_csv(a / "diagnostics.csv")
    assert len(records) == 21 and records[-1].t == pytest.approx(0.2)
    # the echoed configuration reproduces the run
    assert load_echo(a).scenario == load_echo(b).scenario
    no_temp_files(a)


def load_echo(path):
    return parse_config((path / "run_config.txt").read_text())


def test_step_failure_exits_3_with_partial_outputs(tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--scenario", "landau1d", "--nx", "16", "--nv", "16", "--tf", "15",
                 "--nt", "3", "--set", "solver.epsilon=1e-12", "--set", "solver.max_rank=15",
                 "--out", str(out)])
    assert code == 3
    assert (out / "run_config.txt").exists()
    assert len(read_csv(out / "diagnostics.csv")) >= 1
    assert "failed" in (out / "error_summary.txt").read_text()


def test_reference_and_eps_f(tmp_path):
    ref = tmp_path / "ref"
    assert main(["run", "--scenario", "landau1d", "--nx", "16", "--nv", "16", "--tf", "0.2",
                 "--nt", "20", "--save-reference", "--out", str(ref)]) == 0
    assert (ref / "snapshots" / "index.csv").exists()
    out = tmp_path / "coarse"
    assert run_cli("--reference", str(ref), "--out", str(out)) == 0
    text = (out / "error_summary.txt").read_text()
    assert "eps_f" in text
    line = next(l for l in text.splitlines() if l.startswith("eps_f"))
    assert float(line.split("=")[1]) > 0


def test_sweep_single_point_and_grid(tmp_path, capsys):
    one = tmp_path / "one"
    assert main(["sweep", *SMALL, "--out", str(one)]) == 0
    lines = (one / "sweep_summary.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].endswith("ok")

    two = tmp_path / "two"
    assert main(["sweep", *SMALL, "--grid", "scenario.n_x=8,10",
                 "--grid", "solver.epsilon=1e-10,1e-12", "--out", str(two)]) == 0
    lines = (two / "sweep_summary.csv").read_text().splitlines()
    assert len(lines) == 5
    assert sorted(l.split(",")[1] for l in lines[1:]) == ["10", "10", "8", "8"]
    no_temp_files(two)


def test_sweep_marks_failed_points(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--scenario", "landau1d", "--nx", "16", "--nv", "16", "--tf", "15",
                 "--set", "solver.epsilon=1e-12", "--set", "solver.max_rank=15",
                 "--grid", "scenario.n_steps=3", "--out", str(out)])
    assert code == 0
    row = (out / "sweep_summary.csv").read_text().splitlines()[1]
    assert "n.c." in row and "failed at step" in row


def test_sweep_validates_every_point_before_running(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", *SMALL, "--grid", "scenario.n_x=8,oops", "--out", str(out)])
    assert code == 2
    assert not out.exists()


def test_build_config_later_pairs_win():
    cfg = build_config([("scenario.n_x", "8", 1), ("scenario.n_x", "12", None)])
    assert cfg.scenario.n_x == 12
