from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nhtopo import io
from nhtopo.cli import RunConfig, main
from nhtopo.errors import ConfigurationError
from nhtopo.scan import SweepResult
from nhtopo.surface import SheetMesh
from nhtopo.topology import BraidWord, DegeneracyContour, InvariantReport
from nhtopo.topology.exceptional import eps_from_rows

BUILTINS = {"FA": "0", "FC": "1,1", "TEST": "0.5"}
SCAN_EXTRA = {
    "FA": ["--sweep-index", "0", "--range=-0.1,0.1"],
    "FC": ["--to-builtin", "FC", "--to-params", "0,0"],
    "TEST": ["--sweep-index", "0", "--range", "0.3,0.6"],
}
COMMANDS = ("classify", "eps", "arcs", "braid", "scan", "surface")


def run(tmp_path: Path, capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv) + ["--out", str(tmp_path)])
    out = capsys.readouterr()
    return code, out.out, out.err


def command_args(command: str, name: str) -> list[str]:
    args = [command, "--builtin", name, "--params", BUILTINS[name], "--grid", "32x32",
            "--samples", "256"]
    if command == "scan":
        args += SCAN_EXTRA[name] + ["--t-count", "8"]
    return args


def snapshot(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("command", COMMANDS)
def test_repeated_runs_are_byte_identical(tmp_path, capsys, command, name):
    first, second = tmp_path / "a", tmp_path / "b"
    c1, out1, _ = run(first, capsys, *command_args(command, name))
    c2, out2, _ = run(second, capsys, *command_args(command, name))
    assert c1 == c2 == 0
    assert out1 == out2
    assert snapshot(first) == snapshot(second)
    assert snapshot(first)


def test_classify_examples(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "classify", "--builtin", "FC", "--params", "1,1")
    assert code == 0 and out.strip() == "class=(1,1) ground_state=true eps=0"
    rep = InvariantReport.from_dict(io.read_json(tmp_path / "report.json"))
    assert rep.class_label == (1, 1)
    code, out, _ = run(tmp_path, capsys, "classify", "--builtin", "TEST", "--params", "0.5")
    assert code == 0 and "ground_state=false eps=8" in out


def test_eps_csv_table(tmp_path, capsys):
    code, _, _ = run(tmp_path, capsys, "eps", "--builtin", "TEST", "--params", "0.5",
                     "--grid", "128x128", "--format", "csv")
    assert code == 0
    eps = eps_from_rows(io.read_csv(tmp_path / "eps.csv"))
    assert len(eps) == 8 and sum(e.charge for e in eps) == 0


def test_arcs_and_braid_outputs(tmp_path, capsys):
    assert run(tmp_path, capsys, "arcs", "--builtin", "FA", "--params", "0")[0] == 0
    doc = io.read_json(tmp_path / "contours.json")
    cs = [DegeneracyContour.from_dict(c) for c in doc["contours"]]
    assert len(cs) == 1 and cs[0].winding == (0, 1)
    assert run(tmp_path, capsys, "braid", "--builtin", "FC", "--params", "1,1", "--axis", "x",
               "--offset", "2.0")[0] == 0
    bw = BraidWord.from_dict(io.read_json(tmp_path / "braid.json"))
    assert len(bw) % 2 == 1


def test_surface_outputs(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "surface", "--builtin", "TEST", "--params", "0.5")
    assert code == 0 and "flagged_clusters=8" in out
    mesh = SheetMesh.from_text((tmp_path / "sheet_0.mesh").read_text())
    assert mesh.values.shape == (65, 65)
    assert len(list(tmp_path.glob("cut_*.txt"))) == 4
    pts = np.loadtxt(tmp_path / "cut_0.txt")
    assert pts.shape[1] == 2


def test_scan_outputs(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, "scan", "--builtin", "FC", "--params", "0,0",
                       "--to-builtin", "FC", "--to-params", "1,0", "--t-count", "16",
                       "--format", "csv")
    assert code == 0 and "flipped_bits=1" in out
    res = SweepResult.from_dict(io.read_json(tmp_path / "sweep.json"))
    assert res.intervals[0]["report"].class_label == (0, 0)
    assert io.read_json(tmp_path / "threading.json")["total_flipped_bits"] == 1
    assert io.read_csv(tmp_path / "sweep_events.csv")


def test_model_file_input(tmp_path, capsys):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"blocks": [{"builtin": {"name": "FC", "params": [1, 0]}},
                                          {"constant": {"re": 5.0, "im": 0.0}}]}))
    code, out, _ = run(tmp_path, capsys, "classify", "--model", str(cfg))
    assert code == 0 and "class=none ground_state=true eps=0" in out
    m = io.read_json(tmp_path / "report.json")["m"]
    assert sum(map(sum, m["y"])) == 2 and sum(map(sum, m["x"])) == 0


@pytest.mark.parametrize("argv, code", [
    (["classify", "--model", "missing.cfg"], 2),
    (["classify", "--builtin", "FC", "--params", "2,0"], 2),
    (["classify", "--builtin", "FC", "--params", "1,1", "--grid", "8x8"], 2),
    (["eps", "--builtin", "TEST", "--params", "0.5", "--tol-ep", "0"], 2),
    (["classify", "--builtin", "FC", "--params", "1,1", "--grid", "axb"], 2),
    (["braid", "--builtin", "TEST", "--params", "0.5", "--offset", "0.0"], 4),
])
def test_exit_codes(tmp_path, capsys, argv, code):
    got, _, err = run(tmp_path, capsys, *argv)
    assert got == code
    assert "error" in err


def test_run_config_rejects_unknown_keys():
    with pytest.raises(ConfigurationError, match="colour"):
        RunConfig.from_dict({"command": "eps", "builtin": "FC", "params": (1, 1), "colour": 1})
    with pytest.raises(ConfigurationError):
        RunConfig(command="eps")
    with pytest.raises(ConfigurationError):
        RunConfig(command="eps", builtin="FC", params=(1, 1), tol_ep=-1.0)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nhtopo.cli", "classify", "--builtin", "FC",
                           "--params", "0,1", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "class=(1,0) ground_state=true eps=0"
    proc = subprocess.run([sys.executable, "-m", "nhtopo.cli", "classify", "--model",
                           str(tmp_path / "missing.cfg")], capture_output=True, text=True,
                          check=False)
    assert proc.returncode == 2 and "configuration error" in proc.stderr
