import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from nschow.cli import main
from nschow.schemas import document_schema

QUICK = ["--samples-per-radius", "60", "--threads", "1"]


def run(capsys, argv):
    code = main(argv + ["--json"])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def validated(doc, command):
    jsonschema.validate(doc, document_schema(command))
    assert doc["manifest"]["command"] == command
    return doc["result"]


def test_analyze(capsys):
    code, doc = run(capsys, ["bracket", "analyze", "[[X3,X4],[X5,X6]]"])
    assert code == 0
    assert validated(doc, "bracket analyze")["diff_degree"] == 2
    code, doc = run(capsys, ["bracket", "analyze", "X1"])
    res = validated(doc, "bracket analyze")
    assert res["length"] == 1 and res["n_of_b"] == 1


def test_analyze_class_query(capsys):
    code, doc = run(capsys, ["bracket", "analyze", "[[X3,X4],[[X5,X6],X7]]", "--class-k", "3"])
    reg = doc["result"]["class_query"]["regularity"]
    assert reg == {"3": "C^{4,1}", "4": "C^{4,1}", "5": "C^{5,1}", "6": "C^{5,1}", "7": "C^{4,1}"}


@pytest.mark.parametrize("text", ["[X1,", "[[X3,[X4,X5]],[X5,X6]]"])
def test_analyze_bad(capsys, text):
    assert main(["bracket", "analyze", text]) == 2
    assert "error" in capsys.readouterr().err


def test_bracket_set(capsys):
    code, doc = run(capsys, ["bracket", "set", "--system", "example-r4", "--bracket", "[X1,[X2,X3]]", "--bind", "1=1,2=1,3=2", "--point", "0,0,0,0"] + QUICK)
    res = validated(doc, "bracket set")
    v = np.array(res["vertices"])
    assert code == 0 and np.allclose(sorted(v[:, 2]), [2, 6], atol=0.05)


def test_bracket_set_smooth_singleton(capsys):
    code, doc = run(capsys, ["bracket", "set", "--system", "heisenberg", "--bracket", "[X1,X2]", "--point", "0.5,0.5"] + QUICK)
    assert np.allclose(doc["result"]["vertices"], [[0, 1]], atol=1e-4)


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["bracket", "set", "--system", "example-r4", "--bracket", "[X1,X2]", "--samples-per-radius", "0"])
    assert e.value.code == 2
    assert main(["bracket", "set", "--system", "example-r4", "--bracket", "[X1,X2]", "--point", "0,0"]) == 2
    assert main(["bracket", "set", "--system", "mars", "--bracket", "[X1,X2]"]) == 2
    assert main(["bracket", "set", "--system", "heisenberg", "--bracket", "[X1,X7]"]) == 2
    assert main(["bracket", "set", "--system", "heisenberg", "--bracket", "[X1,X2]", "--radii", "1e-3,1e-2"]) == 2


def test_certify(capsys):
    code, doc = run(capsys, ["certify", "--system", "example-r4", "--family", "default5", "--point", "0,0,0,0"] + QUICK)
    assert code == 0 and validated(doc, "certify")["status"] == "Certified"
    code, doc = run(capsys, ["certify", "--system", "example-r4", "--family", "truncated4"] + QUICK)
    assert code == 4 and doc["result"]["status"] == "Failed"


def test_steer(capsys):
    code, doc = run(capsys, ["steer", "--system", "translations-r2", "--target", "0.3,-0.2"] + QUICK)
    res = validated(doc, "steer")
    assert code == 0 and abs(res["tau"] - 0.5) < 1e-12


def test_steer_custom_brackets(capsys):
    code, doc = run(capsys, ["steer", "--system", "heisenberg", "--brackets", "X1;[X1,X2]", "--target=-0.001,0.002"] + QUICK)
    assert code == 0 and doc["result"]["error_norm"] <= 1e-5


def test_holder(capsys):
    code, doc = run(capsys, ["holder", "--system", "translations-r2", "--samples", "8", "--seed", "7"] + QUICK)
    res = validated(doc, "holder")
    assert code == 0 and 0.95 <= res["slope"] <= 1.05


def test_reach_csv(capsys, tmp_path):
    out = tmp_path / "cloud.csv"
    code, doc = run(capsys, ["reach", "--system", "translations-r2", "--budget", "0.5", "--words", "30", "--out", str(out)])
    validated(doc, "reach")
    rows = np.loadtxt(out, delimiter=",")
    assert rows.shape == (30, 2)
    assert (tmp_path / "cloud.manifest.json").exists()


def test_verify_asymptotic(capsys, tmp_path):
    out = tmp_path / "asym.csv"
    code, doc = run(capsys, ["verify-asymptotic", "--system", "heisenberg", "--bracket", "[X1,X2]", "--out", str(out)] + QUICK)
    res = validated(doc, "verify-asymptotic")
    assert max(r["e"] for r in res["rows"]) <= 1e-6
    assert out.read_text().startswith("t,e\n")


def test_verify_gdq(capsys):
    code, doc = run(capsys, ["verify-gdq", "--system", "heisenberg", "--bracket", "[X1,X2]", "--scales", "1e-1,1e-2"] + QUICK)
    assert max(r["max_residual"] for r in validated(doc, "verify-gdq")["rows"]) <= 1e-6


def test_field_file(capsys, tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("1; 0\n---\n0; x1\n")
    code, doc = run(capsys, ["bracket", "set", "--field-file", str(p), "--bracket", "[X1,X2]"] + QUICK)
    assert np.allclose(doc["result"]["vertices"], [[0, 1]])


def test_seed_reproducible(capsys):
    argv = ["bracket", "set", "--system", "example-r4", "--bracket", "[X1,X2]", "--seed", "11"] + QUICK
    _, a = run(capsys, argv)
    _, b = run(capsys, argv)
    assert a["result"] == b["result"]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nschow", "bracket", "analyze", "[X1,[X2,X3]]"], capture_output=True, text=True)
    assert r.returncode == 0 and "n(B) 10" in r.stdout
