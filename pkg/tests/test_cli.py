import json
import subprocess
import sys

from qdp.cli import main


def run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "qdp.cli", *args], capture_output=True, text=True
    )
    return proc.returncode, proc.stdout, proc.stderr


def test_no_arguments_is_usage_error():
    code, _, err = run_cli([])
    assert code == 2
    assert "usage" in err.lower()


def test_unknown_flag_is_usage_error():
    code, _, _ = run_cli(["count-exact", "--d", "2", "--p", "1", "--wat", "3"])
    assert code == 2


def test_count_exact_example():
    code, out, _ = run_cli(["count-exact", "--d", "2", "--p", "1", "--seed", "0"])
    assert code == 0
    assert json.loads(out)["count"] == "7"


def test_count_exact_method_and_size_error():
    code, out, _ = run_cli(["count-exact", "--d", "3", "--p", "0.5", "--seed", "4", "--method", "brute"])
    assert code == 0
    brute = json.loads(out)["count"]
    code, out, _ = run_cli(["count-exact", "--d", "3", "--p", "0.5", "--seed", "4", "--method", "evensum"])
    assert json.loads(out)["count"] == brute
    code, _, err = run_cli(["count-exact", "--d", "7", "--p", "0.5", "--seed", "0"])
    assert code == 2 and "error" in err


def test_estimate_emits_report_and_constants():
    code, out, _ = run_cli(["estimate", "--d", "5", "--p", "0.7", "--seed", "1"])
    assert code == 0
    body = json.loads(out)
    assert "psi_even" in body["report"]
    assert "mu2_enum" in body["constants"]


def test_thresholds_json_lines():
    code, out, err = run_cli(["thresholds"])
    assert code == 0
    lines = out.strip().split("\n")
    assert len(lines) == 10
    names = {json.loads(line)["name"] for line in lines}
    assert "worst_case_adjacency" in names and "singleton_dimer_decoupling" in names
    assert "10 constants" in err


def test_sample_emit_sets_lines():
    code, out, _ = run_cli(
        ["sample", "--d", "4", "--p", "0.9", "--seed", "2", "--trials", "8", "--emit-sets"]
    )
    assert code == 0
    lines = out.strip().split("\n")
    rows = [json.loads(x) for x in lines[:-1]]
    assert len(rows) == 8
    for row in rows:
        if row["success"]:
            assert row["set"] == sorted(row["set"])


def test_clt_refusal_exit_code_1(tmp_path):
    code, _, err = run_cli(["clt", "--d", "12", "--p", "1.0", "--seed", "0", "--trials", "1000"])
    assert code == 1
    assert "zero-variance" in err


def test_spec_file_and_out_and_rerun_bytes(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"d": 3, "p": 0.0, "seed": 1}))
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    code, stdout1, _ = run_cli(
        ["--out", str(out1), "count-exact", "--d", "9", "--p", "0.9", "--spec", str(spec)]
    )
    assert code == 0
    assert json.loads(stdout1)["count"] == str(2 ** (2**3))  # spec file overrides flags
    code, stdout2, _ = run_cli(
        ["--out", str(out2), "count-exact", "--d", "9", "--p", "0.9", "--spec", str(spec)]
    )
    assert stdout1 == stdout2
    assert out1.read_bytes() == out2.read_bytes()


def test_csv_format():
    code, out, _ = run_cli(
        ["--format", "csv", "sample", "--d", "4", "--p", "0.8", "--seed", "3", "--trials", "5", "--emit-sets"]
    )
    assert code == 0
    header = out.strip().split("\n")[0]
    assert "trial" in header.split(",")


def test_main_callable_in_process(capsys):
    rc = main(["count-exact", "--d", "2", "--p", "1", "--seed", "0"])
    captured = capsys.readouterr()
    assert rc == 0
    assert json.loads(captured.out)["count"] == "7"


def test_verify_moments_pass_exit_zero():
    code, out, err = run_cli(
        ["verify-moments", "--d", "8", "--p", "0.6", "--seed", "3", "--trials", "400", "--threads", "2"]
    )
    assert code == 0
    last = json.loads(out.strip().split("\n")[-1])
    assert last["pass"] is True


def test_server_mode_end_to_end():
    # the same CLI against a live HTTP service must give identical bytes
    import socket
    import threading
    import time as _time

    import uvicorn

    from qdp.service.app import create_app

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        for _ in range(100):
            if server.started:
                break
            _time.sleep(0.05)
        assert server.started
        code, out, _ = run_cli(
            ["--server", f"http://127.0.0.1:{port}", "count-exact", "--d", "2", "--p", "1", "--seed", "0"]
        )
        assert code == 0
        assert json.loads(out)["count"] == "7"
        _, local, _ = run_cli(["count-exact", "--d", "2", "--p", "1", "--seed", "0"])
        assert out == local
        code, out, _ = run_cli(
            ["--server", f"http://127.0.0.1:{port}", "thresholds"]
        )
        assert code == 0 and len(out.strip().split("\n")) == 10
    finally:
        server.should_exit = True
        thread.join(timeout=5)
