import json

import pytest

from heavytail import cli_report
from heavytail.product_conv import ClosureReport

PARETO = {"family": "pareto", "alpha": 2.0, "xm": 1.0}
U01 = {"family": "uniform", "lo": 0.0, "hi": 1.0}


def _run(tmp_path, command, cfg, seed="7", name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = cli_report.run([command, "--config", str(path), "--seed", seed, "--out", str(out)])
    return code, out


def test_classify_pareto(tmp_path):
    code, out = _run(tmp_path, "classify", {"model": PARETO, "classes": ["D", "C", "L", "PD"]})
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert {k: v["verdict"] for k, v in report["verdicts"].items()} == dict.fromkeys(["D", "C", "L", "PD"], "holds")
    assert report["seed"] == 7 and "tolerances" in report
    assert report["matuszewska"]["beta_hat"] == pytest.approx(2.0, abs=0.05)
    assert (out / "curves.csv").read_text().startswith("curve_id,x,value,stderr\n")


def test_product_config_confirms(tmp_path):
    cfg = {"f": PARETO, "g": U01, "dependence": {"kind": "fgm", "theta": 0.5}, "classes": ["D", "PD", "Mstar", "K"]}
    code, out = _run(tmp_path, "product", cfg)
    assert code == 0
    rows = json.loads((out / "report.json").read_text())["rows"]
    assert [r["theorem_confirmed"] for r in rows] == [True] * 4


def test_malformed_family_is_config_error(tmp_path, capsys):
    code, out = _run(tmp_path, "classify", {"model": {"family": "paretto", "alpha": 2.0}})
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    assert json.loads(err[0])["error"] == "config"
    assert not (out / "report.json").exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"model": PARETO, "colour": "red"},
        {"model": PARETO, "tolerances": {"pd_margins": 0.1}},
        {"rows": [{"kind": "product", "f": PARETO, "g": U01, "class": "D", "extra": 1}]},
        ["not", "an", "object"],
    ],
)
def test_unknown_keys_rejected(tmp_path, cfg):
    command = "matrix" if isinstance(cfg, dict) and "rows" in cfg else "classify"
    assert _run(tmp_path, command, cfg)[0] == 1


def test_invalid_json_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli_report.run(["classify", "--config", str(bad), "--seed", "1", "--out", str(tmp_path)]) == 1
    assert cli_report.run(["classify", "--config", str(tmp_path / "nope.json"), "--seed", "1"]) == 1
    lines = capsys.readouterr().err.strip().splitlines()
    assert [json.loads(x)["error"] for x in lines] == ["config", "io"]


def test_seed_is_mandatory_and_unsigned(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": PARETO}))
    assert cli_report.run(["classify", "--config", str(path)]) == 1
    assert cli_report.run(["classify", "--config", str(path), "--seed", "-3"]) == 1
    assert cli_report.run(["classify", "--config", str(path), "--seed", str(2**64)]) == 1
    assert cli_report._parse_seed("0xff") == 255


def test_empty_matrix(tmp_path):
    code, out = _run(tmp_path, "matrix", {"rows": []})
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["rows"] == [] and report["summary"]["rows"] == 0


def test_weibull_under_D_is_not_applicable(tmp_path):
    row = {"kind": "product", "f": {"family": "weibull", "tau": 0.5, "lambda": 1.0}, "g": U01, "class": "D"}
    code, out = _run(tmp_path, "matrix", {"rows": [row]})
    assert code == 0
    entry = json.loads((out / "report.json").read_text())["rows"][0]
    assert entry["theorem_confirmed"] == "not-applicable"
    assert entry["spec"] == row


def test_confirmed_false_exits_two(tmp_path, monkeypatch):
    def refuted(*args, **kwargs):
        return ClosureReport("stub", {"p": {"pass": True}}, None, False)

    monkeypatch.setattr(cli_report, "verify_product_closure", refuted)
    code, out = _run(tmp_path, "product", {"f": PARETO, "g": U01, "classes": ["D"]})
    assert code == 2
    assert (out / "report.json").exists()


def test_mixture_command(tmp_path):
    cfg = {"f1": PARETO, "f2": {"family": "exponential", "rate": 1.0}, "p": 0.5, "classes": ["T"]}
    code, out = _run(tmp_path, "mixture", cfg)
    assert code == 0
    assert json.loads((out / "report.json").read_text())["rows"][0]["theorem_confirmed"] is True


def test_mvec_command(tmp_path):
    cf = {"dim": 2, "joint": {"kind": "common_factor", "R": PARETO, "weights": [1.0, 1.0]}}
    cfg = {"model": cf, "checks": ["Dn", "PDn"], "scalar_product": {"y": U01}}
    code, out = _run(tmp_path, "mvec", cfg)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["checks"]["Dn"]["verdict"] == "holds"
    assert report["rows"][0]["theorem_confirmed"] is True
    assert _run(tmp_path, "mvec", {"model": cf, "checks": ["Cn"]}, name="bad")[0] == 1


def test_risk_outputs_are_deterministic(tmp_path):
    model = {"n": 2, "f": PARETO, "g": {"family": "uniform", "lo": 0.3, "hi": 0.9}, "dependence": {"kind": "fgm", "theta": 0.5}}
    cfg = {"model": model, "n_samples": 1_000_000, "x_grid": [2.0, 5.0, 20.0]}
    code_a, a = _run(tmp_path, "risk", cfg, name="a")
    code_b, b = _run(tmp_path, "risk", cfg, name="b")
    assert code_a == code_b == 0
    for name in ("report.json", "curves.csv", "risk.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    _, c = _run(tmp_path, "risk", cfg, seed="8", name="c")
    assert (a / "risk.csv").read_bytes() != (c / "risk.csv").read_bytes()


def test_risk_rejects_bad_mode(tmp_path):
    model = {"n": 2, "f": PARETO, "g": U01}
    assert _run(tmp_path, "risk", {"model": model, "simulate": "ruins"})[0] == 1
