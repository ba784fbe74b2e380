import json
import os
import shutil

import pytest

from plotkit import FigureSpec, SchemaError, render
from plotkit.cli import main

DATA = os.path.join(os.path.dirname(__file__), "data", "weak_drift")


def spec_for(kind, out, inputs=None, **kw):
    defaults = {
        "surface": ["pde_table.csv"],
        "heatmap": ["lattice_table.csv"],
        "convergence": ["bsde_z.csv"],
        "quiver": ["saddle_field.csv"],
    }
    files = inputs or [os.path.join(DATA, f) for f in defaults[kind]]
    return FigureSpec(kind=kind, inputs=files, output=out, **kw)


def test_fixture_report_is_complete():
    with open(os.path.join(DATA, "report.json")) as fh:
        doc = json.load(fh)
    assert doc["scenario"] == "weak-drift-game"
    assert doc["passed"] is True


@pytest.mark.parametrize("kind", ["surface", "heatmap", "convergence", "quiver"])
def test_render_all_kinds(tmp_path, kind):
    out = str(tmp_path / f"{kind}.png")
    assert render(spec_for(kind, out)) == out
    assert os.path.getsize(out) > 1000


@pytest.mark.parametrize("kind", ["surface", "heatmap", "convergence", "quiver"])
@pytest.mark.parametrize("ext", ["png", "svg"])
def test_rerun_byte_identical(tmp_path, kind, ext):
    a = str(tmp_path / f"a.{ext}")
    b = str(tmp_path / f"b.{ext}")
    render(spec_for(kind, a))
    render(spec_for(kind, b))
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_inputs_left_untouched(tmp_path):
    src = os.path.join(DATA, "saddle_field.csv")
    copy = tmp_path / "saddle_field.csv"
    shutil.copy(src, copy)
    before = copy.read_bytes()
    render(FigureSpec("quiver", [str(copy)], str(tmp_path / "q.png")))
    assert copy.read_bytes() == before


def test_schema_error_names_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    with open(os.path.join(DATA, "pde_table.csv")) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    drop = header.index("upper")
    stripped = [",".join(c for i, c in enumerate(row.split(",")) if i != drop)
                for row in lines]
    bad.write_text("\n".join(stripped))
    with pytest.raises(SchemaError, match="upper"):
        render(FigureSpec("surface", [str(bad)], str(tmp_path / "s.png")))


def test_unknown_kind_and_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec("piechart", [os.path.join(DATA, "bsde_z.csv")],
                   str(tmp_path / "x.png"))
    with pytest.raises(SchemaError):
        FigureSpec("surface", [str(tmp_path / "nope.csv")],
                   str(tmp_path / "x.png"))


def test_convergence_multiple_and_empty_series(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("step,time,z_rms_error\n")
    out = str(tmp_path / "conv.png")
    spec = FigureSpec("convergence",
                      [os.path.join(DATA, "bsde_z.csv"), str(empty)],
                      out, labels=("fitted", "empty"))
    assert render(spec) == out
    # a single fully empty series still renders one panel
    out2 = str(tmp_path / "conv_empty.png")
    assert render(FigureSpec("convergence", [str(empty)], out2)) == out2


def test_one_dimensional_tables(tmp_path):
    # value tables without an x2 column use the (time, x) layout
    src = tmp_path / "oned.csv"
    rows = ["time,x1,upper,lower"]
    for t in (0.0, 0.5, 1.0):
        for x in (-1.0, 0.0, 1.0):
            rows.append(f"{t},{x},{x * x + 1 - t},{x * x + 1 - t}")
    src.write_text("\n".join(rows))
    assert render(FigureSpec("surface", [str(src)], str(tmp_path / "s1.png")))
    assert render(FigureSpec("heatmap", [str(src)], str(tmp_path / "h1.png")))


def test_cli_roundtrip(tmp_path):
    out = str(tmp_path / "field.png")
    rc = main(["quiver", "--in", os.path.join(DATA, "saddle_field.csv"),
               "--out", out, "--title", "drift-game saddle actions"])
    assert rc == 0
    assert os.path.getsize(out) > 1000


def test_cli_schema_error_exit_code(tmp_path):
    rc = main(["convergence", "--in", os.path.join(DATA, "pde_table.csv"),
               "--out", str(tmp_path / "x.png")])
    assert rc == 1
