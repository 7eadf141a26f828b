"""wclab-plot command behaviour: job files, exit codes, path handling."""
import yaml
import pytest

from conftest import png_dimensions
from wclab_plots.cli import main


def write_job(path, **fields):
    path.write_text(yaml.safe_dump(fields))
    return str(path)


def test_renders_job_and_reports_output(bundle, tmp_path, capsys):
    out = tmp_path / "iso.png"
    job = write_job(tmp_path / "job.yaml", kind="isolation-heatmap",
                    input=str(bundle / "drone" / "isolation_ota_seed0.csv"),
                    output=str(out))
    assert main([job]) == 0
    assert f"wrote {out}" in capsys.readouterr().out
    assert png_dimensions(out) == (720, 600)


def test_quiet_flag_suppresses_report(bundle, tmp_path, capsys):
    job = write_job(tmp_path / "job.yaml", kind="matrix-heatmap",
                    input=str(bundle / "drone" / "c_physical.csv"),
                    output=str(tmp_path / "m.png"))
    assert main([job, "--quiet"]) == 0
    assert capsys.readouterr().out == ""


def test_relative_paths_resolve_against_job_file(bundle, capsys):
    # job file sits inside the bundle; input and nested output are relative to it
    job = write_job(bundle / "drone" / "job.yaml", kind="range-velocity",
                    input="map_ota_t1.csv", peaks="peaks_ota_t1_seed0.csv",
                    output="figs/sub/rv.png", title="flyby")
    assert main([job]) == 0
    assert png_dimensions(bundle / "drone" / "figs" / "sub" / "rv.png") == (840, 600)
    capsys.readouterr()


def test_missing_job_file(tmp_path, capsys):
    assert main([str(tmp_path / "absent.yaml")]) == 2
    assert "cannot read job file" in capsys.readouterr().err


def test_unknown_kind_lists_valid_kinds(tmp_path, capsys):
    job = write_job(tmp_path / "job.yaml", kind="scatter",
                    input="x.csv", output="x.png")
    assert main([job]) == 2
    err = capsys.readouterr().err
    assert "unknown figure kind 'scatter'" in err
    assert "pas-surface" in err


def test_unknown_field_rejected(bundle, tmp_path, capsys):
    job = write_job(tmp_path / "job.yaml", kind="matrix-heatmap",
                    input=str(bundle / "drone" / "c_physical.csv"),
                    output=str(tmp_path / "m.png"), colormap="jet")
    assert main([job]) == 2
    assert "unknown job field" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    job = write_job(tmp_path / "job.yaml", kind="matrix-heatmap",
                    input=str(tmp_path / "absent.csv"), output=str(tmp_path / "m.png"))
    assert main([job]) == 2
    assert "input: file not found" in capsys.readouterr().err


def test_corrupt_input_reported_as_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("freq,gain\n1,2\n")
    job = write_job(tmp_path / "job.yaml", kind="matrix-heatmap",
                    input=str(bad), output=str(tmp_path / "m.png"))
    assert main([job]) == 2
    assert "expected matrix header" in capsys.readouterr().err


def test_job_file_argument_is_required():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
