import io
import json
import subprocess
import sys

import pytest

from racefree.cli import main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


def p(data, name):
    return str(data / name)


def test_verify_success(data):
    code, out = run("verify", "--protocol", p(data, "simple_guarded.gp"),
                    "--program", p(data, "guarded.go"))
    assert code == 0
    assert out.endswith("residue: emp\nverified\n")


def test_verify_failure_json(data):
    code, out = run("verify", "--protocol", p(data, "simple_guarded.gp"),
                    "--program", p(data, "guarded_failed.go"), "--format", "json", "--trace")
    assert code == 1
    doc = json.loads(out)
    assert doc["success"] is False
    assert [x["outcome"] for x in doc["parties"]] == ["fail_precondition", "fail_unconsumed",
                                                      "success"]
    assert doc["parties"][0]["trace"][0]["step"] == "entry"


def test_verify_binding(data):
    code, _ = run("verify", "--protocol", p(data, "simple_guarded.gp"),
                  "--program", p(data, "guarded.go"), "--bind", "~g1=e", "--bind", "~g2=d")
    assert code == 1
    code, _ = run("verify", "--protocol", p(data, "simple_guarded.gp"),
                  "--program", p(data, "guarded.go"), "--bind", "oops")
    assert code == 2


def test_transform(data, capsys):
    code, out = run("transform", "--protocol", p(data, "simple.gp"))
    assert (code, out) == (0, "A -c-> B ; [A.1 < B.2] ; [B.1 < C.2] ; B -c-> C\n")
    code, _ = run("transform", "--protocol", p(data, "guarded_deadlock.gp"))
    assert code == 1
    assert "cycle" in capsys.readouterr().err


def test_transform_warning_goes_to_stderr(tmp_path, capsys):
    f = tmp_path / "par.gp"
    f.write_text("A -c-> B || C -c-> D\n")
    code, out = run("transform", "--protocol", str(f))
    assert code == 0 and out == "A -c-> B || C -c-> D\n"
    assert "unordered-same-channel" in capsys.readouterr().err


def test_project(data):
    assert run("project", "--protocol", p(data, "simple_guarded.gp"), "--party", "A") == (
        0, "c!A.1 ; guard(~g1, A.1) ; ~g1!A.1.1\n")
    assert run("project", "--protocol", p(data, "simple_guarded.gp"), "--party", "A",
               "--endpoint", "~g1") == (0, "guard(A.1) ; A.1.1!\n")
    assert run("project", "--protocol", p(data, "simple.gp"), "--party", "Z")[0] == 2


def test_simulate(data):
    code, out = run("simulate", "--protocol", p(data, "simple.gp"))
    assert code == 1 and out.endswith("2 executions, 1 with races\n")
    code, out = run("simulate", "--protocol", p(data, "simple_guarded.gp"), "--format", "json")
    assert code == 0 and json.loads(out)["racy"] == 0
    code, _ = run("simulate", "--protocol", p(data, "simple.gp"),
                  "--program", p(data, "simple.go"))
    assert code == 1
    assert run("simulate", "--protocol", p(data, "simple.gp"), "--bound", "2")[0] == 2


def test_count():
    code, out = run("count", "--n", "3", "--brute-force")
    assert code == 0
    assert out.splitlines()[-1] == "3 → 87  (4, 32, 38, 12, 1)  brute-force 87"


def test_render(data, tmp_path):
    code, out = run("render", "--protocol", p(data, "simple.gp"), "--format", "dot")
    assert code == 0 and out.startswith("digraph")
    t = tmp_path / "t.txt"
    t.write_text("A.1.S@c\nC.2.R@c\nC.2 <- A.1\nblocked: B.1.R@c\nblocked: B.2.S@c\n")
    code, out = run("render", "--trace", str(t), "--format", "mermaid")
    assert code == 0 and "A_1 -->|c| C_2" in out
    o = tmp_path / "o.txt"
    o.write_text(run("orders", "--protocol", p(data, "simple.gp"))[1])
    assert run("render", "--orders", str(o))[0] == 0


def test_orders(data):
    code, out = run("orders", "--protocol", p(data, "simple.gp"), "--propagate", "hb-cb")
    assert code == 0
    assert out.splitlines()[0] == "# unsound-derivation"
    assert "B.1.R.c -> C.2.R.s [derived]" in out
    code, out = run("orders", "--protocol", p(data, "simple.gp"), "--channel-rules")
    assert "A.1.S.s -> B.1.R.c [channel(c)]" in out


def test_validate(data):
    assert run("validate", "--protocol", p(data, "simple.gp")) == (0, "ok\n")
    assert run("validate", "--protocol", p(data, "not_well_formed.gp"))[0] == 1
    assert run("validate", "--protocol", p(data, "guarded_deadlock.gp"))[0] == 1


def test_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.gp"
    bad.write_text("A -c-> A\n")
    assert run("validate", "--protocol", str(bad))[0] == 2
    assert "bad.gp:1:1:" in capsys.readouterr().err
    assert run("validate", "--protocol", str(tmp_path / "missing.gp"))[0] == 2
    assert run("frobnicate")[0] == 2


def test_module_entry_point(data):
    r = subprocess.run([sys.executable, "-m", "racefree", "count", "--n", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[-1] == "2 → 7  (2, 4, 1)"
