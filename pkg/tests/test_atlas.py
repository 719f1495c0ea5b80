import json
import math
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from stokes_atlas import atlas
from stokes_atlas.atlas import (Config, ScanRecord, cmd_find_flat,
                                cmd_phase_scan, cmd_table, main, scan_point)
from stokes_atlas.levelset import ARCTAN_HALF_HALF, build_region_map


def run_cli(*args, env=None):
    e = dict(os.environ)
    e.update(env or {})
    return subprocess.run([sys.executable, "-m", "stokes_atlas", *args],
                          capture_output=True, text=True, env=e)


real = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=200)
@given(real, real, real, st.text(max_size=30), st.integers(-1, 2), st.integers(-1, 2),
       st.booleans(), st.text(max_size=12))
def test_record_round_trip(th, x, y, sig, shorts, strips, tree, verdict):
    rec = ScanRecord(th, complex(x, y), sig, shorts, strips, tree, verdict)
    line = rec.to_json()
    again = ScanRecord.from_json(line)
    assert again.to_json() == line
    assert set(json.loads(line)) >= {"theta", "a", "signature", "shorts", "strips",
                                     "tree", "verdict"}


def test_twelve_significant_digits():
    rec = ScanRecord(math.pi, complex(1 / 3, -2 / 3), "", 0, 2, False, "region:0")
    d = json.loads(rec.to_json())
    assert d["a"] == [0.333333333333, -0.666666666667]
    assert d["theta"] == 3.14159265359


def test_table_rows():
    rows = cmd_table([0.0, ARCTAN_HALF_HALF, math.pi / 4])
    assert rows[0]["t"] == [-1.0, 0.0] and rows[0]["s"] == [-1.0, 0.0] and rows[0]["e"] == [-1.0, 0.0]
    t = complex(*rows[1]["t"])
    assert abs(t - (-0.69 + 0.25j)) <= 0.02
    assert rows[2]["e"] is None and abs(complex(*rows[2]["t"]) - 0.462j) < 0.005
    assert abs(rows[2]["s"][0]) < 1e-9


def test_phase_scan_examples():
    rows, bracket = cmd_phase_scan(0.1, 0.1, 0.01, Config())
    assert rows[0]["trees"] == 2
    rows, bracket = cmd_phase_scan(0.42, 0.42, 0.01, Config())
    assert rows[0]["trees"] == 1


def test_find_flat_examples():
    th, c = cmd_find_flat(2 + 1j, Config())
    assert th == 0.0 and c.strips == 2
    th, c = cmd_find_flat(0.462j, Config())
    assert abs(th - math.pi / 4) > 1e-6 and c.strips == 2
    th, c = cmd_find_flat(-2.0, Config())
    assert c.strips == 2


def test_scan_point_coherence_on_and_off_curves():
    cfg = Config()
    rm = build_region_map(0.3)
    cv = next(c for c in rm.curves if c.branch == "-1:l")
    on = cv.points[len(cv.points) // 10]
    rec = scan_point(on, 0.3, cfg)
    assert rec.verdict == "on-S-1" and rec.shorts == 1
    rec = scan_point(on + 0.05j, 0.3, cfg)
    assert rec.verdict.startswith("region:") and rec.shorts == 0


def test_classify_outside_fundamental_range_records_reduction():
    cfg = Config()
    r1 = scan_point(-0.5 - 0.77j, 3 * math.pi / 4, cfg)
    assert r1.reduction == "rot" and r1.strips == 2


def test_exit_codes():
    assert main(["classify", "--a", "1,0", "--theta", "0"]) == 1
    assert main(["classify", "--a", "oops", "--theta", "0"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--theta", "0"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    assert main(["table", "--theta", "2.0"]) == 1


def test_solver_failure_exit_code(monkeypatch):
    from stokes_atlas.errors import NonConvergence

    def boom(*a, **k):
        raise NonConvergence("forced")
    monkeypatch.setattr(atlas, "scan_point", boom)
    assert main(["classify", "--a", "0.5,1", "--theta", "0"]) == 2


def test_negative_values_parse(capsys):
    assert main(["classify", "--a", "-0.8,2", "--theta", "0"]) == 0
    rec = ScanRecord.from_json(capsys.readouterr().out.strip())
    assert rec.a == complex(-0.8, 2) and rec.strips == 2


def test_config_show_and_file(tmp_path, capsys):
    assert main(["config", "show"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["r_world"] == 50.0 and shown["palette"]["sigma+1"]
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"snap_tol": 0.02, "palette": {"graph": "#000000"}}))
    assert main(["--config", str(cfgfile), "config", "show"]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["snap_tol"] == 0.02 and shown["palette"]["sigma-1"] == "#d62728"
    cfgfile.write_text(json.dumps({"bogus": 1}))
    assert main(["--config", str(cfgfile), "config", "show"]) == 1


def test_atlas_output_is_deterministic_and_thread_independent(tmp_path):
    outs = []
    for n in ("1", "3"):
        out = tmp_path / f"atlas{n}.jsonl"
        r = run_cli("atlas", "--theta", "0", "--grid", "7x5", "--window", "-3,3,-2,2",
                    "--out", str(out), env={"ATLAS_THREADS": n})
        assert r.returncode == 0, r.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert len(lines) == 35 - 2          # -1 and +1 are punctured
    recs = [ScanRecord.from_json(ln) for ln in lines]
    assert not any(r.error for r in recs)
    # at theta = 0 the real axis lies on the curve set; elsewhere two strips
    for r in recs:
        assert (r.shorts > 0) == (r.verdict.startswith("on-") or r.verdict.startswith("at-"))
        if r.a.imag != 0:
            assert (r.shorts, r.strips) == (0, 2)


def test_atlas_puncture():
    pts = atlas.grid_points("3x1", "-1,1,0,0", 1e-3)
    assert pts == [0j]


@pytest.mark.parametrize("args", [
    ("sigma", "--theta", "0.3926990817"),
    ("xi", "--theta", "0.2318"),
    ("graph", "--a", "-2.5,0.7", "--theta", "0"),
])
def test_render_is_byte_identical(tmp_path, args):
    blobs = []
    for k in range(2):
        out = tmp_path / f"r{k}.svg"
        assert main(["render", *args, "--out", str(out)]) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]
    assert blobs[0].startswith(b"<?xml") and b"<svg" in blobs[0]


def test_render_colors_follow_palette(tmp_path):
    out = tmp_path / "s.svg"
    main(["render", "sigma", "--theta", "0.3", "--out", str(out)])
    svg = out.read_text()
    for col in ("#1f3fbf", "#d62728", "#2ca02c"):
        assert col in svg
