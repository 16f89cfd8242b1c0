import json

import pytest

from snode_lab import cli


def run(args):
    return cli.main(args)


@pytest.mark.parametrize(
    "command",
    ["verify-toeplitz", "verify-hankel", "ball", "entropy"],
)
def test_commands_pass_on_bundled_specs(tmp_path, command):
    assert run([command, "--out", str(tmp_path), "--grid", "12"]) == 0
    report = json.loads((tmp_path / f"report_{command}.json").read_text())
    assert report["passed"] is True
    assert report["seed"] == 0
    assert report["rng"] == "PCG64"
    for check in report["checks"]:
        assert {"name", "tag", "value", "tol", "passed"} <= set(check)
        assert check["tag"]


def test_verify_toeplitz_reports_contractions(tmp_path):
    assert run(["verify-toeplitz", "--out", str(tmp_path), "--grid", "8"]) == 0
    report = json.loads((tmp_path / "report_verify-toeplitz.json").read_text())
    # the bundled order-1 spec has a vanishing leading contraction
    rho0 = report["rho"][0]
    assert abs(rho0[0][0][0]) <= 1e-12 and abs(rho0[0][0][1]) <= 1e-12


def test_bad_parameters_exit_2(tmp_path):
    assert run(["ball", "--out", str(tmp_path), "--grid", "0"]) == 2
    assert run(["ball", "--out", str(tmp_path), "--seed", "-3"]) == 2


def test_khrushchev_command(tmp_path):
    assert run(["khrushchev", "--out", str(tmp_path), "--grid", "10"]) == 0
    report = json.loads((tmp_path / "report_khrushchev.json").read_text())
    tags = {c["tag"] for c in report["checks"]}
    assert "c26" in tags


def test_asymptotics_scenario_with_csv(tmp_path):
    scenario = {
        "command": "asymptotics",
        "family": "hankel",
        "density": {"name": "exp_sqrt"},
        "lambda": [0.0, 1.0],
        "max_order": 3,
        "format": "csv",
        "out": str(tmp_path),
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario))
    assert run(["--scenario", str(path)]) == 0
    csv_text = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert csv_text[0] == "k,rho_inv_re_11,rho_inv_im_11,det_rho_inv,target,gap,cond"
    assert len(csv_text) == 4
    dets = [float(line.split(",")[3]) for line in csv_text[1:]]
    assert dets == sorted(dets, reverse=True)


def test_asymptotics_toeplitz_family(tmp_path):
    spec = {
        "p": 1,
        "n": 4,
        "s": [[[[2.0, 0.0]]], [[[0.4, 0.1]]], [[[-0.1, 0.2]]], [[[0.05, 0.0]]]],
        "nu": [[[0.0, 0.0]]],
    }
    spec_path = tmp_path / "tspec.json"
    spec_path.write_text(json.dumps(spec))
    scenario = {
        "command": "asymptotics",
        "family": "toeplitz",
        "spec": str(spec_path),
        "lambda": [0.3, 1.2],
        "max_order": 4,
        "out": str(tmp_path),
    }
    sc_path = tmp_path / "sc.json"
    sc_path.write_text(json.dumps(scenario))
    assert run(["--scenario", str(sc_path)]) == 0
    report = json.loads((tmp_path / "report_asymptotics.json").read_text())
    assert report["passed"] is True
    assert report["target"] is None
    dets = [row["det_rho_inv"] for row in report["trajectory"]]
    assert dets == sorted(dets, reverse=True)


def test_demo_appendix_b(tmp_path):
    assert run(["demo-appendixB", "--out", str(tmp_path), "--seed", "1"]) == 0
    report = json.loads((tmp_path / "report_demo-appendixB.json").read_text())
    tags = {c["tag"] for c in report["checks"]}
    assert {"Ap3", "Ap21", "LaDet"} <= tags


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["ball", "--out", str(a), "--seed", "7", "--grid", "15"]) == 0
    assert run(["ball", "--out", str(b), "--seed", "7", "--grid", "15"]) == 0
    assert (a / "report_ball.json").read_bytes() == (b / "report_ball.json").read_bytes()
    assert (a / "ball.json").read_bytes() == (b / "ball.json").read_bytes()


def test_missing_spec_exits_2(tmp_path, capsys):
    assert run(["verify-toeplitz", "--spec", "/does/not/exist.json", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_invalid_spec_payload_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"p": 1}')
    assert run(["verify-toeplitz", "--spec", str(bad), "--out", str(tmp_path)]) == 2


def test_no_command_exits_2(capsys):
    assert run([]) == 2


def test_failing_check_exits_1_and_names_tags(tmp_path, monkeypatch, capsys):
    def broken(sc, rng):
        return [cli._check("forced failure", "c1", 1.0, 1e-12)], {}

    monkeypatch.setitem(cli._HANDLERS, "verify-toeplitz", broken)
    assert run(["verify-toeplitz", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "c1" in err and "forced failure" in err


def test_export_csv_empty_and_idempotent(tmp_path):
    out = tmp_path / "empty.csv"
    cli.export_csv([], out, p=1)
    assert out.read_text().splitlines() == [
        "k,rho_inv_re_11,rho_inv_im_11,det_rho_inv,target,gap,cond"
    ]
    rows = [
        {
            "k": 1,
            "rho_inv": [[[0.5, 0.0]]],
            "det_rho_inv": 0.5,
            "target": None,
            "gap": None,
            "cond": 1.0,
        }
    ]
    out2 = tmp_path / "one.csv"
    cli.export_csv(rows, out2, p=1)
    first = out2.read_bytes()
    cli.export_csv(rows, out2, p=1)
    assert out2.read_bytes() == first
    line = out2.read_text().splitlines()[1]
    assert line == "1,0.5,0,0.5,,,1"


def test_csv_17_significant_digits(tmp_path):
    rows = [
        {
            "k": 1,
            "rho_inv": [[[1 / 3, 0.0]]],
            "det_rho_inv": 1 / 3,
            "target": 2 / 3,
            "gap": -1 / 3,
            "cond": 1.0,
        }
    ]
    out = tmp_path / "digits.csv"
    cli.export_csv(rows, out, p=1)
    assert "0.33333333333333331" in out.read_text()


def test_scenario_flags_override(tmp_path):
    scenario = {"command": "ball", "seed": 3, "out": str(tmp_path / "x")}
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(scenario))
    assert run(["--scenario", str(path), "--out", str(tmp_path), "--grid", "8"]) == 0
    # the explicit --out flag wins; the scenario still supplies the seed
    report = json.loads((tmp_path / "report_ball.json").read_text())
    assert report["seed"] == 3
    assert not (tmp_path / "x").exists()
