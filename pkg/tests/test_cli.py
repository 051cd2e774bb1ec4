import subprocess
import sys

import pytest

from kcuckoo.cli import dispatch
from kcuckoo.table import loads

GOLDEN_ESTIMATE = (
    "n,k,b,ell,s,algo,trials,failures,rate,ci_lo,ci_hi,master_seed\n"
    "1024,4,2048,1,0,lsa,100000,0,0,0,6.63446e-05,7\n"
)


def run(args, capsys):
    code = dispatch(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_estimate_golden_fixture(tmp_path):
    out = tmp_path / "f.csv"
    args = ["estimate", "--n", "1024", "--k", "4", "--b", "2048", "--ell", "1", "--s", "0",
            "--algo", "lsa", "--trials", "100000", "--seed", "7", "--out", str(out)]
    assert dispatch(args) == 0
    assert out.read_bytes() == GOLDEN_ESTIMATE.encode()


def test_construct_crafted_failure(capsys):
    code, out, _ = run(["construct", "--n", "3", "--k", "2", "--b", "4", "--ell", "1", "--s", "0", "--seed", "4"], capsys)
    assert code == 1
    assert "result: failure" in out


def test_construct_success_writes_table(tmp_path, capsys):
    path = tmp_path / "t.bin"
    code, out, _ = run(["construct", "--n", "20", "--k", "3", "--b", "30", "--s", "1", "--out", str(path)], capsys)
    assert code == 0 and "result: success" in out
    table = loads(path.read_bytes())
    assert len(table) == 20 and table.value_len == 8


@pytest.mark.parametrize("args", [
    ["estimate", "--n", "-1"],
    ["estimate", "--bogus"],
    ["estimate", "--k", "3", "--b", "10"],
    ["estimate", "--trials", "0"],
    ["estimate", "--algo", "lsa", "--ell", "2"],
    ["frobnicate"],
    [],
    ["pbc-bench", "--q", "500"],
    ["grid", "--config", "/nonexistent/grid.txt"],
    ["construct", "--value-len", "0"],
])
def test_usage_errors_exit_2(args, capsys):
    code, _, err = run(args, capsys)
    assert code == 2 and err


def test_help_lists_defaults(capsys):
    for sub in ["construct", "estimate", "grid", "attack", "pbc-bench", "pir-bench", "calibrate"]:
        code, out, _ = run([sub, "--help"], capsys)
        assert code == 0
        assert "default" in out


def test_grid_config_and_bad_row(tmp_path, capsys):
    cfg = tmp_path / "grid.txt"
    cfg.write_text("n = 16\nk = 2,3\ns = 0,1\ntrials = 50\nseed = 2\n")
    code, out, _ = run(["grid", "--config", str(cfg)], capsys)
    lines = out.splitlines()
    assert code == 0 and len(lines) == 5
    assert [l.split(",")[1] + l.split(",")[4] for l in lines[1:]] == ["20", "21", "30", "31"]
    code, resumed, _ = run(["grid", "--config", str(cfg), "--start", "2", "--no-header"], capsys)
    assert resumed.splitlines() == lines[3:]
    cfg.write_text("n = 16\nk = 2,0\n")
    code, _, err = run(["grid", "--config", str(cfg)], capsys)
    assert code == 2 and "grid row 2" in err


def test_attack_and_benches(tmp_path, capsys):
    code, out, _ = run(["attack", "--runs", "10"], capsys)
    assert code == 0 and out.splitlines()[1].startswith("16,2,32,1,0,100000,10,10,10,1,")
    dump = tmp_path / "buckets.txt"
    code, out, _ = run(["pbc-bench", "--trials", "100", "--dump-buckets", str(dump)], capsys)
    assert code == 0 and out.splitlines()[1].startswith("256,16,20,standard,cuckoo,4,32,1024,100,0,")
    assert len(dump.read_text().splitlines()) == 32
    code, out, _ = run(["pir-bench", "--trials", "20"], capsys)
    header, row = out.splitlines()
    assert header == "n,q,lambda,mode,trials,schedule_failures,upload_bits,download_bits,entry_touches,max_bucket"
    fields = row.split(",")
    assert fields[5] == "0" and int(fields[6]) == 20 * 2 * 1024 and int(fields[7]) == 20 * 2 * 256 * 32
    code, out, _ = run(["pir-bench", "--n", "1024", "--k", "2", "--trials", "5", "--attack-budget", "100000"], capsys)
    assert code == 1 and out.splitlines()[1].split(",")[5] == "5"


def test_calibrate_small(tmp_path, capsys):
    cal = tmp_path / "cal.txt"
    code, out, _ = run(["calibrate", "--n-list", "64", "--eps-exp", "4", "--load-keys", "3",
                        "--out", str(cal)], capsys)
    assert code == 0
    assert cal.read_text() == out
    assert "k_for_failure = 1\n" in out and "k_robust = 1\n" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kcuckoo", "estimate", "--n", "8", "--k", "2",
                           "--b", "16", "--trials", "20"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.count("\n") == 2
