import json
import subprocess
import sys
from pathlib import Path

from qelect.harness.cli import main
from qelect.harness.io import read_csv, read_jsonl

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_run_passing_scenario_writes_outputs(tmp_path, capsys):
    csv_out, trace_out = tmp_path / "m.csv", tmp_path / "t.jsonl"
    code = main(["run", str(CONFIGS / "quantum_n8.json"), "--csv-out", str(csv_out),
                 "--trace-out", str(trace_out)])
    assert code == 0
    out = capsys.readouterr().out
    assert "PASS messages" in out
    rows = read_csv(csv_out)
    assert rows and rows[0]["messages"] == "21"
    types = {r["type"] for r in read_jsonl(trace_out)}
    assert {"run", "bootstrap", "envelope", "row"} <= types


def test_run_failing_expectation_exits_one(tmp_path):
    cfg = write(tmp_path, "c.json", {"protocol": "bully", "topology": {"kind": "clique", "n": 5},
                                     "expect": {"leader": 0}})
    assert main(["run", cfg]) == 1


def test_config_error_exits_two(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"protocol": "quantum", "topology": {"kind": "clique", "n": 4}, "f": 4})
    assert main(["run", cfg]) == 2
    assert "config-error at /f:" in capsys.readouterr().err


def test_bad_json_and_missing_file_exit_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_seed_and_limit_flags(tmp_path):
    cfg = str(CONFIGS / "flp_stall_trigger.json")
    out = tmp_path / "m.csv"
    assert main(["run", cfg, "--limit", "2000", "--seed", "4", "--csv-out", str(out)]) == 0
    (row,) = read_csv(out)
    assert row["seed"] == "4" and row["terminated"] == "false" and int(row["events"]) >= 2000


def test_run_is_byte_stable(tmp_path):
    outs = []
    for i in range(2):
        csv_out, trace_out = tmp_path / f"m{i}.csv", tmp_path / f"t{i}.jsonl"
        main(["run", str(CONFIGS / "chang_roberts_worst.json"), "--csv-out", str(csv_out),
              "--trace-out", str(trace_out)])
        outs.append((csv_out.read_bytes(), trace_out.read_bytes()))
    assert outs[0] == outs[1]


def test_sweep_command(tmp_path, capsys):
    cfg = write(tmp_path, "s.json", {"protocols": ["chang-roberts", "bully"], "n_list": [4, 8, 16],
                                     "seeds": [0], "expect": {"chang-roberts": {"center": 2.0, "tolerance": 0.3}}})
    out = tmp_path / "s.csv"
    assert main(["sweep", cfg, "--csv-out", str(out)]) == 0
    assert "slope chang-roberts" in capsys.readouterr().out
    assert len(read_csv(out)) == 6


def test_verify_claims_file(tmp_path, capsys):
    cfg = write(tmp_path, "v.json", {"claims": [{"claim": "quantum-tally", "params": {"n_list": [4, 8]}}]})
    csv_out = tmp_path / "v.csv"
    assert main(["verify", cfg, "--csv-out", str(csv_out)]) == 0
    out = capsys.readouterr().out
    assert "[quantum-tally] PASS" in out
    assert all(r["passed"] == "true" for r in read_csv(csv_out))


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qelect.harness", "run", str(CONFIGS / "bully_clique5.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "PASS leader" in proc.stdout
