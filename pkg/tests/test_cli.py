import cmath
import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from phasebundle import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


def test_show_defaults():
    code, out, _ = call("--show-defaults")
    table = json.loads(out)
    assert code == 0
    assert table["steps"] == 10000 and table["truncation"] == 40 and table["gap_floor"] == 1e-6


def test_octant_holonomy():
    code, out, _ = call("holonomy", "--config", str(SCENARIOS / "octant_holonomy.json"))
    assert code == 0
    data = json.loads(out)
    vac = next(h for h in data["holonomies"] if h["bundle"].startswith("H^(0)"))
    assert abs(complex(vac["phase_re"], vac["phase_im"]) - cmath.exp(-1j * math.pi / 4)) < 1e-3
    assert data["area"] == pytest.approx(math.pi / 2)


def test_metaplectic_off(tmp_path):
    code, out, _ = call("holonomy", "--config", str(SCENARIOS / "octant_holonomy.json"), "--metaplectic", "off",
                        "--steps", "3000")
    vac = next(h for h in json.loads(out)["holonomies"] if h["bundle"] == "H^(0)")
    assert code == 0
    assert complex(vac["phase_re"], vac["phase_im"]) == pytest.approx(1.0)


def test_fermion_spectrum():
    code, out, _ = call("spectrum", "--config", str(SCENARIOS / "fermion_spectrum.json"))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["sample_index", "level", "eigenvalue", "gap"]
    assert [float(r["eigenvalue"]) for r in rows] == pytest.approx([-1, 0, 0, 1], abs=1e-12)


def test_check_task(tmp_path):
    path = write(tmp_path, {"space": {"kind": "paraquaternionic", "half_dim": 3}})
    code, out, _ = call("check", "--config", path)
    assert code == 0 and json.loads(out)["ok"]


def test_phases_columns():
    code, out, _ = call("phases", "--config", str(SCENARIOS / "sphere_cap_phases.json"), "--steps", "2000")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["omega", "measured_phase_arg", "predicted_phase_arg", "abs_difference"]
    assert all(float(r["abs_difference"]) < 1e-3 for r in rows)


def test_curvature():
    code, out, _ = call("curvature", "--config", str(SCENARIOS / "sphere_curvature.json"))
    assert code == 0
    for row in json.loads(out)["rows"]:
        assert complex(row["curvature_re"], row["curvature_im"]) == pytest.approx(
            complex(row["predicted_re"], row["predicted_im"]), abs=1e-4)


def test_out_file(tmp_path):
    target = tmp_path / "spectrum.csv"
    code, out, _ = call("spectrum", "--config", str(SCENARIOS / "fermion_spectrum.json"), "--out", str(target))
    assert code == 0 and out == ""
    assert target.read_text().startswith("sample_index,level,eigenvalue,gap")


def test_malformed_json(tmp_path):
    code, _, err = call("check", "--config", write(tmp_path, "{not json"))
    assert code == 2 and "config" in err


def test_missing_file(tmp_path):
    code, _, err = call("check", "--config", str(tmp_path / "absent.json"))
    assert code == 2


def test_field_named(tmp_path):
    path = write(tmp_path, {"space": {"kind": "quaternionic", "half_dim": 2}, "numerics": {"steps": "many"}})
    code, _, err = call("holonomy", "--config", path)
    assert code == 2 and "numerics.steps" in err


def test_odd_quaternionic(tmp_path):
    path = write(tmp_path, {"space": {"kind": "quaternionic", "half_dim": 3}})
    code, _, err = call("check", "--config", path)
    assert code == 2 and "space.half_dim" in err


def test_missing_task():
    code, _, err = call("--config", "x.json")
    assert code == 2 and "task" in err


def test_branch_guard_exit(tmp_path):
    verts = [[math.sin(1.5) * math.cos(a), math.sin(1.5) * math.sin(a), math.cos(1.5)]
             for a in (0, math.pi / 2, math.pi, 3 * math.pi / 2)]
    path = write(tmp_path, {"space": {"kind": "quaternionic", "half_dim": 2},
                            "loop": {"kind": "sphere", "vertices": verts},
                            "numerics": {"steps": 4}})
    code, _, err = call("holonomy", "--config", path)
    assert code == 3 and "numerical failure" in err


def test_gap_floor_exit(tmp_path):
    path = write(tmp_path, {"space": {"kind": "generic", "half_dim": 2, "statistics": "fermion"},
                            "numerics": {"gap_floor": 5.0}})
    code, _, _ = call("spectrum", "--config", path)
    assert code == 3


def test_deterministic_rerun():
    first = call("spectrum", "--config", str(SCENARIOS / "fermion_spectrum.json"))
    second = call("spectrum", "--config", str(SCENARIOS / "fermion_spectrum.json"))
    assert first == second


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "phasebundle", "--show-defaults"], capture_output=True, text=True)
    assert proc.returncode == 0 and '"steps": 10000' in proc.stdout
