import json
import math
import subprocess
import sys

import pytest

from conftest import rect_corners
from pvroof.cli import main
from pvroof.demo import demo_path
from pvroof.geometry import LocalFrame

DEMO_AUX = demo_path("demo_aux.csv")


def write_polygons(path, n=3, degenerate=False):
    f = LocalFrame(2.0, 45.0)
    feats = []
    for i in range(n):
        ring = [list(map(float, f.to_geo(x + 30 * i, y))) for x, y in rect_corners(8.0, 4.0, 20.0 * i)]
        feats.append({"type": "Feature", "id": f"p{i}", "properties": {"n": i},
                      "geometry": {"type": "Polygon", "coordinates": [ring + [ring[0]]]}})
    if degenerate:
        feats.append({"type": "Feature", "id": "flat", "properties": {},
                      "geometry": {"type": "Polygon", "coordinates": [[[2, 45], [2.0001, 45], [2.0002, 45], [2, 45]]]}})
    path.write_text(json.dumps({"type": "FeatureCollection", "features": feats}))
    return str(path)


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_extract_no_data_csv(tmp_path, capsys):
    polys = write_polygons(tmp_path / "p.geojson")
    cfg = write_json(tmp_path / "c.json", {"preset": "no-data"})
    out = tmp_path / "o.csv"
    assert main(["extract", "--polygons", polys, "--config", cfg, "--out", str(out), "--format", "csv"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "id,lat,lon,tilt,azimuth,projected_surface,surface,kwp,status"
    assert "ok=3 degraded=0 error=0" in capsys.readouterr().err


def test_extract_geojson_echoes_features(tmp_path):
    polys = write_polygons(tmp_path / "p.geojson")
    cfg = write_json(tmp_path / "c.json", {"preset": "no-data"})
    out = tmp_path / "o.geojson"
    assert main(["extract", "--polygons", polys, "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    props = doc["features"][1]["properties"]
    assert props["n"] == 1 and props["tilt"] == 30.0
    assert props["provenance"]["azimuth"] == "bbox"


def test_extract_degenerate_polygon_exit_code(tmp_path, capsys):
    polys = write_polygons(tmp_path / "p.geojson", degenerate=True)
    cfg = write_json(tmp_path / "c.json", {"preset": "no-data"})
    out = tmp_path / "o.csv"
    code = main(["extract", "--polygons", polys, "--config", cfg, "--out", str(out), "--format", "csv"])
    assert code != 0
    assert out.read_text().splitlines()[-1].startswith("flat,")
    assert "error=1" in capsys.readouterr().err


def test_extract_missing_dsm_is_config_error(tmp_path, capsys):
    polys = write_polygons(tmp_path / "p.geojson")
    cfg = write_json(tmp_path / "c.json", {"preset": "dsm-only"})
    assert main(["extract", "--polygons", polys, "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "dsm_path" in capsys.readouterr().err


def test_extract_malformed_polygons_is_data_error(tmp_path, capsys):
    bad = tmp_path / "p.geojson"
    bad.write_text('{"type": "FeatureCollection", "features": [')
    cfg = write_json(tmp_path / "c.json", {"preset": "no-data"})
    assert main(["extract", "--polygons", str(bad), "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "byte offset" in capsys.readouterr().err


def test_extract_with_demo_resources(tmp_path):
    polys = write_polygons(tmp_path / "p.geojson")
    model = tmp_path / "m.json"
    assert main(["fit-capacity", "--aux", DEMO_AUX, "--kind", "clustered", "--out", str(model)]) == 0
    cfg = write_json(tmp_path / "c.json", {"preset": "aux-only", "lut_path": demo_path("demo_lut.json"),
                                           "capacity_model_path": str(model)})
    out = tmp_path / "o.csv"
    assert main(["extract", "--polygons", polys, "--config", cfg, "--out", str(out), "--format", "csv"]) == 0


def test_build_lut_demo(tmp_path, capsys):
    out = tmp_path / "lut.json"
    assert main(["build-lut", "--aux", DEMO_AUX, "--grid", "50x50", "--categories", "4", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert (doc["k"], doc["l"], doc["t"]) == (50, 50, 4)
    assert "observed=" in capsys.readouterr().err
    again = tmp_path / "lut2.json"
    main(["build-lut", "--aux", DEMO_AUX, "--grid", "50x50", "--categories", "4", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_build_lut_errors(tmp_path):
    out = str(tmp_path / "lut.json")
    assert main(["build-lut", "--aux", DEMO_AUX, "--bounds", "20,20,21,21", "--out", out]) == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("id,lat,lon,tilt,azimuth,surface,kwp\n")
    assert main(["build-lut", "--aux", str(empty), "--out", out]) == 2
    with pytest.raises(SystemExit) as err:
        main(["build-lut", "--aux", DEMO_AUX, "--grid", "50by50", "--out", out])
    assert err.value.code == 1


def test_fit_capacity(tmp_path):
    aux = tmp_path / "a.csv"
    aux.write_text("id,lat,lon,tilt,azimuth,surface,kwp\na,45,2,0,,10,2\nb,45,2,0,,20,4\nc,45,2,0,,30,6\n")
    out = tmp_path / "m.json"
    assert main(["fit-capacity", "--aux", str(aux), "--kind", "linear", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["gamma"] == pytest.approx(0.2, rel=1e-12)
    lin = json.loads(out.read_text())["gamma"]
    assert main(["fit-capacity", "--aux", str(aux), "--kind", "clustered", "--clusters", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["clusters"] == [{"edge": None, "gamma": lin}]


def test_fit_capacity_errors(tmp_path, capsys):
    aux = tmp_path / "a.csv"
    aux.write_text("id,lat,lon,tilt,azimuth,surface\na,45,2,0,,10\n")
    assert main(["fit-capacity", "--aux", str(aux), "--out", str(tmp_path / "m")]) == 2
    assert "'kwp'" in capsys.readouterr().err
    aux.write_text("id,lat,lon,tilt,azimuth,surface,kwp\na,45,2,0,,10,2\n")
    assert main(["fit-capacity", "--aux", str(aux), "--kind", "linear", "--out", str(tmp_path / "m")]) == 2


def test_benchmark(tmp_path, capsys):
    pred = write_values(tmp_path / "p.csv", {"a": 179.0, "b": 10.0})
    truth = write_values(tmp_path / "t.csv", {"a": -179.0, "b": 10.0})
    assert main(["benchmark", "--pred", pred, "--truth", truth, "--quantity", "azimuth", "--format", "csv"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert float(row[3]) == pytest.approx(1.0)
    assert main(["benchmark", "--pred", truth, "--truth", truth, "--quantity", "tilt", "--format", "csv"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert [float(v) for v in row[2:5]] == [0.0, 0.0, 0.0]


def test_benchmark_id_mismatch(tmp_path, capsys):
    pred = write_values(tmp_path / "p.csv", {"a": 1.0})
    truth = write_values(tmp_path / "t.csv", {k: 1.0 for k in "abcdefgh"})
    assert main(["benchmark", "--pred", pred, "--truth", truth, "--quantity", "tilt"]) == 2
    err = capsys.readouterr().err
    assert "b, c, d, e, f" in err and "g" not in err.split("ids:")[1]


def write_values(path, values):
    path.write_text("id,value\n" + "".join(f"{k},{v!r}\n" for k, v in values.items()))
    return str(path)


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["extract"])
    assert err.value.code == 1


def test_console_script(tmp_path):
    polys = write_polygons(tmp_path / "p.geojson")
    cfg = write_json(tmp_path / "c.json", {"preset": "no-data"})
    proc = subprocess.run(
        [sys.executable, "-m", "pvroof.cli", "extract", "--polygons", polys, "--config", cfg,
         "--out", "-", "--format", "csv"],
        capture_output=True, text=True, env={"PVROOF_LOG": "debug", "PATH": ""},
    )
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 4
    assert "ok=3 degraded=0 error=0" in proc.stderr
    assert not math.isnan(float(proc.stdout.splitlines()[1].split(",")[3]))
