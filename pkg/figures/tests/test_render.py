"""Rendering the shipped example CSVs: every figure kind produces a PNG,
re-rendering is byte-identical, inputs are never mutated, and malformed
inputs fail loudly."""

import hashlib
from pathlib import Path

import pytest

from tlafigures import cli, render

EXAMPLES = Path(__file__).resolve().parent.parent / "examples"


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_apd_trajectory_figure(tmp_path):
    spec = render.FigureSpec(
        kind="apd-trajectory",
        input_path=EXAMPLES / "apd_fig2_style.csv",
        events_path=EXAMPLES / "apd_fig2_style.events.csv",
        output_path=tmp_path / "fig2.png")
    out = render.render(spec)
    assert out.exists() and out.stat().st_size > 10_000


def test_homodyne_trajectory_figure(tmp_path):
    spec = render.FigureSpec(
        kind="homodyne-trajectory",
        input_path=EXAMPLES / "homodyne_fig4_style.csv",
        output_path=tmp_path / "fig4ab.png")
    out = render.render(spec)
    assert out.exists() and out.stat().st_size > 10_000


def test_sweep_figure(tmp_path):
    spec = render.FigureSpec(
        kind="purity-sweep",
        input_path=EXAMPLES / "sweep_fig4c_style.csv",
        output_path=tmp_path / "fig4c.png")
    out = render.render(spec)
    assert out.exists() and out.stat().st_size > 10_000


def test_rerender_idempotent_and_inputs_untouched(tmp_path):
    csv_path = EXAMPLES / "apd_fig2_style.csv"
    before = sha(csv_path)
    spec_a = render.FigureSpec(
        kind="apd-trajectory", input_path=csv_path,
        events_path=EXAMPLES / "apd_fig2_style.events.csv",
        output_path=tmp_path / "a.png")
    spec_b = render.FigureSpec(
        kind="apd-trajectory", input_path=csv_path,
        events_path=EXAMPLES / "apd_fig2_style.events.csv",
        output_path=tmp_path / "b.png")
    render.render(spec_a)
    render.render(spec_b)
    assert sha(tmp_path / "a.png") == sha(tmp_path / "b.png")
    assert sha(csv_path) == before


def test_empty_csv_is_an_error(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t,x_c,y_c,z_c,purity,count\n", encoding="utf-8")
    spec = render.FigureSpec(kind="apd-trajectory", input_path=empty,
                             output_path=tmp_path / "nope.png")
    with pytest.raises(ValueError, match="no data rows"):
        render.render(spec)
    assert not (tmp_path / "nope.png").exists()


def test_missing_column_is_an_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x_c\n0.0,0.1\n", encoding="utf-8")
    spec = render.FigureSpec(kind="homodyne-trajectory", input_path=bad,
                             output_path=tmp_path / "nope.png")
    with pytest.raises(ValueError, match="missing columns"):
        render.render(spec)


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown figure kind"):
        render.FigureSpec(kind="pie-chart", input_path=Path("x"),
                          output_path=tmp_path / "x.png")


def test_cli_round_trip(tmp_path, capsys):
    rc = cli.main(["--kind", "purity-sweep",
                   "--input", str(EXAMPLES / "sweep_fig4c_style.csv"),
                   "--output", str(tmp_path / "sweep.png")])
    assert rc == 0
    assert (tmp_path / "sweep.png").exists()
    rc = cli.main(["--kind", "apd-trajectory",
                   "--input", str(tmp_path / "does_not_exist.csv"),
                   "--output", str(tmp_path / "x.png")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
