import json
import math

import pytest

from orlat import __version__
from orlat.cli import HORIZON_DEFAULTS, build_parser, main, read_csv, resolve_config
from orlat.spectral import green_offaxis


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_phi_table(capsys):
    code, out, _ = run(["phi", "--grid", "4", "--horizon", "1024"], capsys)
    assert code == 0
    assert out.startswith(f"# orlat {__version__}\n# config: ")
    cols, rows = read_csv(out)
    assert cols == ["t", "phi_paper", "phi_excursion", "oracle_low", "oracle_high"]
    first = [float(v) for v in rows[0]]
    assert first[:3] == [0.0, 1.0, 1.0]
    assert first[3] < 1 and abs(first[4] - 1) < 1e-12
    last = [float(v) for v in rows[-1]]
    assert abs(last[0] - math.pi) < 1e-15
    assert abs(last[1] - 0.5051025722) < 1e-9 and abs(last[2] - 0.2679491924) < 1e-9
    assert len(rows) == 5


def test_green_rectangle_round_trip(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code, _, _ = run(["green", "--x", "0,1", "--rect=-1:2,0:2", "--out", str(out)], capsys)
    assert code == 0
    text = out.read_text()
    header = [ln for ln in text.splitlines() if ln.startswith("#")]
    cfg = json.loads(header[1].split(": ", 1)[1])
    assert cfg["command"] == "green" and cfg["horizon"] == HORIZON_DEFAULTS["green"]
    cols, rows = read_csv(str(out))
    assert len(rows) == 4 * 3
    for r in rows:
        y = (int(r[0]), int(r[1]))
        assert float(r[2]) == green_offaxis((0, 1), y).value


def test_green_json_and_sequence(capsys):
    code, out, _ = run(["green", "--sequence", "parabolic", "--lam", "1", "--k", "4,8",
                        "--format", "json"], capsys)
    assert code == 0
    body = json.loads(out)
    assert body["columns"] == ["y1", "y2", "value", "error", "route"]
    assert [r[:2] for r in body["rows"]] == [[16, 4], [64, 8]]
    assert body["meta"]["version"] == __version__


def test_three_routes_agree(capsys):
    vals = {}
    for route in ("spectral", "oracle", "mc"):
        code, out, _ = run(["green", "--y", "1,0", "--route", route, "--paths", "50000",
                            "--horizon", "1024"], capsys)
        assert code == 0
        _, rows = read_csv(out)
        vals[route] = (float(rows[0][2]), float(rows[0][3]))
    spec, orc, mc = vals["spectral"], vals["oracle"], vals["mc"]
    assert orc[0] <= spec[0] <= orc[0] + orc[1]
    assert abs(mc[0] - orc[0]) <= mc[1] + 1e-3


def test_martin_rows_and_determinism(tmp_path, capsys):
    argv = ["martin", "--box=-1:1,0:1", "--sequence", "horizontal", "--k", "64,128"]
    a = tmp_path / "a.csv"
    assert run(argv + ["--out", str(a)], capsys)[0] == 0
    first = a.read_bytes()
    assert run(argv + ["--out", str(a)], capsys)[0] == 0
    assert a.read_bytes() == first
    cols, rows = read_csv(str(a))
    assert cols == ["x1", "x2", "k", "y1", "y2", "K", "error"]
    assert len(rows) == 3 * 2 * 2
    for r in rows:
        if r[0] == "0" and r[1] == "0":
            assert float(r[5]) == 1.0
        assert float(r[5]) > 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 7, "paths": 123, "format": "json"}))
    p = build_parser()
    cfg = resolve_config(p.parse_args(["green", "--config", str(cfg_file), "--seed", "9"]))
    assert (cfg.seed, cfg.n_paths, cfg.format) == (9, 123, "json")
    assert cfg.horizon == HORIZON_DEFAULTS["green"]


@pytest.mark.parametrize("argv", [
    ["green", "--y", "1"],
    ["green", "--rect", "3:1,0:0"],
    ["green", "--horizon", "0"],
    ["phi", "--grid", "0"],
    ["green", "--x", "0,1", "--variant", "paper"],
    ["bogus"],
])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_bad_config_key(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"colour": "red"}))
    assert run(["green", "--config", str(f)], capsys)[0] == 2


def test_resource_failure_exit_code(capsys):
    code, _, err = run(["green", "--route", "oracle", "--horizon", "100000"], capsys)
    assert code == 3 and "max_cells" in err


def test_verify_kernel(capsys):
    code, out, _ = run(["verify", "--suite", "kernel"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["passed"] and set(report["suites"]) == {"kernel"}


def test_fault_injection_fails_spectral_suite(capsys):
    code, out, _ = run(["verify", "--suite", "spectral", "--inject-phi-shift", "1e-3",
                        "--horizon", "4096"], capsys)
    assert code == 1
    report = json.loads(out)
    failed = {c["name"] for c in report["suites"]["spectral"]["checks"] if not c["passed"]}
    assert "discounted Green matches the discounted oracle" in failed
