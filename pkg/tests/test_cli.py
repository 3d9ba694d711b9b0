import json
import subprocess
import sys

import pytest

from ybx.catalog import default_catalog
from ybx.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_catalog_list(capsys):
    code, out, _ = run(capsys, "catalog", "list", "--kind", "spectral")
    assert code == 0 and "families: 15" in out
    code, out, _ = run(capsys, "catalog", "list", "--kind", "constant", "--rank", "1")
    ids = [line.split()[0] for line in out.splitlines() if line.startswith("const.")]
    assert ids == ["const.RS", "const.RT"]
    code, out, _ = run(capsys, "catalog", "list")
    assert "const.P" in out


def test_catalog_show_and_dump(capsys, tmp_path):
    code, out, _ = run(capsys, "catalog", "show", "spec.RG")
    assert code == 0 and "spec.RG" in out
    path = tmp_path / "rg.json"
    code, _, _ = run(capsys, "catalog", "dump", "spec.RG", "--json", str(path))
    assert json.loads(path.read_text())["id"] == "spec.RG"


def test_verify_exit_codes(capsys):
    assert run(capsys, "verify", "ybe", "spec.RE")[0] == 0
    code, out, _ = run(capsys, "verify", "braiding", "spec.RG", "--samples", "5")
    assert code == 1 and "fail" in out
    assert run(capsys, "verify", "constant-ybe", "const.P", "--backend", "exact")[0] == 0
    code, _, err = run(capsys, "verify", "ybe", "spec.RZ")
    assert code == 2 and "error" in err
    assert run(capsys, "verify", "nonsense", "spec.RG")[0] == 2


def test_verify_json_stdout(capsys):
    code, out, _ = run(capsys, "verify", "regularity", "tilde.RG", "--bind", "f1=1+u*v",
                       "--bind", "g1=1+u*v", "--samples", "4", "--json", "-")
    d = json.loads(out)
    assert code == 0 and d["verdict"] == "pass" and d["config"]["samples"] == 4
    assert "timestamp" not in out


def test_bind_errors(capsys):
    code, _, err = run(capsys, "verify", "ybe", "spec.RG", "--bind", "zz=1")
    assert code == 2 and "zz" in err
    assert run(capsys, "verify", "ybe", "spec.RG", "--bind", "f1")[0] == 2
    assert run(capsys, "verify", "constant-ybe", "const.RD", "--bind", "p=)")[0] == 2


def test_bound_parameters_are_used(capsys):
    code, out, _ = run(capsys, "verify", "constant-ybe", "const.RC", "--bind", "p=2", "--bind", "q=3",
                       "--bind", "k=1", "--samples", "2", "--json", "-")
    assert code == 0
    code, _, err = run(capsys, "verify", "constant-ybe", "const.RC", "--bind", "p=2", "--bind", "q=3",
                       "--bind", "k=5", "--samples", "2")
    assert code == 2


def test_lift_examples(capsys):
    code, out, _ = run(capsys, "lift", "const.RH", "--order", "3")
    assert code == 0 and "spec.RG" in out and "[1, 1, 1]" in out
    code, out, _ = run(capsys, "lift", "const.RA", "--branch", "p=1,q=1,s=-1", "--order", "1")
    assert code == 0 and "3 leaf" in out
    assert run(capsys, "lift", "spec.RG")[0] == 2
    assert run(capsys, "lift", "const.RA", "--branch", "p=1")[0] == 2


def test_rll_example(capsys):
    code, out, _ = run(capsys, "rll", "spec.RG", "--samples", "2", "--json", "-")
    d = json.loads(out)
    assert code == 0 and d["dims"] == [2, 2]
    assert {"spec.RG", "rhat(spec.RG)"} <= set(d["template_members"])


def test_charges_examples(capsys):
    assert run(capsys, "charges", "spec.RD", "--sites", "3", "--order", "3")[0] == 0
    code, out, _ = run(capsys, "charges", "const.P", "--sites", "3", "--orders", "3", "--json", "-")
    assert code == 0 and json.loads(out)["regular"]
    code, out, _ = run(capsys, "charges", "tilde.RG", "--bind", "f1=1", "--bind", "g1=1", "--sites", "4")
    assert code == 0
    assert run(capsys, "charges", "spec.RG", "--sites", "12")[0] == 2


@pytest.mark.parametrize("argv", [
    ["verify", "ybe", "spec.RC", "--samples", "6"],
    ["rll", "spec.RC", "--samples", "2"],
    ["charges", "spec.RH", "--sites", "3", "--order", "3"],
    ["lift", "const.RH", "--order", "2"],
])
def test_reports_are_byte_identical(capsys, tmp_path, argv):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, *argv, "--seed", "5", "--json", str(a))
    run(capsys, *argv, "--seed", "5", "--json", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_seed_changes_samples(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "verify", "ybe", "spec.RC", "--samples", "3", "--seed", "1", "--json", str(a))
    run(capsys, "verify", "ybe", "spec.RC", "--samples", "3", "--seed", "2", "--json", str(b))
    assert a.read_bytes() != b.read_bytes()


def test_catalog_override_env(tmp_path, monkeypatch, capsys):
    data = [d for d in json.loads(default_catalog().path.read_text()) if d["id"] == "spec.RG"]
    p = tmp_path / "one.json"
    p.write_text(json.dumps(data))
    monkeypatch.setenv("YBX_CATALOG", str(p))
    code, out, _ = run(capsys, "catalog", "list", "--kind", "spectral")
    assert code == 0 and "spec.RG" in out and "spec.RE" not in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ybx", "verify", "ybe", "const.P", "--samples", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "pass" in res.stdout
