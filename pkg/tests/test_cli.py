import json
import socket
import threading

import pytest

from qtri.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestLatLon:
    def test_north_pole(self, capsys):
        code, out, _ = run_cli(capsys, "latlon", "--x", "0", "--y", "0", "--z", "1")
        assert code == 0
        assert out.strip() == "lat 90.0 lon 0.0"

    def test_normalizes_input(self, capsys):
        code, out, _ = run_cli(capsys, "latlon", "--x", "0", "--y", "0", "--z", "3")
        assert code == 0
        assert out.strip() == "lat 90.0 lon 0.0"

    def test_zero_vector_is_argument_error(self, capsys):
        code, _, err = run_cli(capsys, "latlon", "--x", "0", "--y", "0", "--z", "0")
        assert code == 2
        assert err.strip()


class TestSimulate:
    def test_outputs_transcript_and_latlon(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--n", "24", "--seed", "7", "--strategy", "frame"
        )
        assert code == 0
        transcript_line, latlon_line = out.strip().split("\n")
        doc = json.loads(transcript_line)
        assert doc["config"] == {"n": 24, "seed": 7, "hemisphere": None}
        assert len(doc["outcomes"]) == 24
        assert doc["estimate"]["strategy"] == "frame"
        assert latlon_line.startswith("lat ")

    def test_seed_reproducible(self, capsys):
        a = run_cli(capsys, "simulate", "--n", "30", "--seed", "5", "--grid", "400")
        b = run_cli(capsys, "simulate", "--n", "30", "--seed", "5", "--grid", "400")
        assert a == b

    def test_env_seed_default_and_flag_override(self, capsys, monkeypatch):
        monkeypatch.setenv("QTRI_SEED", "99")
        _, out_env, _ = run_cli(capsys, "simulate", "--n", "4", "--strategy", "frame")
        assert json.loads(out_env.splitlines()[0])["config"]["seed"] == 99
        _, out_flag, _ = run_cli(
            capsys, "simulate", "--n", "4", "--strategy", "frame", "--seed", "3"
        )
        assert json.loads(out_flag.splitlines()[0])["config"]["seed"] == 3

    def test_bad_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("QTRI_SEED", "not-a-number")
        code, _, err = run_cli(capsys, "simulate", "--n", "4", "--strategy", "frame")
        assert code == 2
        assert "QTRI_SEED" in err


class TestOptimize:
    def test_single_pattern_smoke(self, capsys):
        code, out, _ = run_cli(
            capsys, "optimize", "--pattern", "u", "--grid", "400",
            "--outcomes", "8", "--seed", "1",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["pattern"] == "u"
        assert doc["converged"] is True
        assert abs(doc["fidelity"] - 2.0 / 3.0) < 5e-3
        assert len(doc["outcomes"]) == 8

    def test_compare_reports_both(self, capsys):
        code, out, _ = run_cli(
            capsys, "optimize", "--pattern", "ud", "--compare", "uu",
            "--grid", "500", "--outcomes", "12", "--seed", "1",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["primary"]["pattern"] == "ud"
        assert doc["compare"]["pattern"] == "uu"
        assert doc["fidelity_gap"] == pytest.approx(
            doc["primary"]["fidelity"] - doc["compare"]["fidelity"]
        )

    def test_non_convergence_exit_code(self, capsys):
        code, out, _ = run_cli(
            capsys, "optimize", "--pattern", "ud", "--grid", "400",
            "--outcomes", "8", "--seed", "2", "--max-iter", "1", "--tol", "1e-15",
        )
        assert code == 4
        assert json.loads(out)["converged"] is False

    def test_bad_pattern(self, capsys):
        code, _, err = run_cli(capsys, "optimize", "--pattern", "uq")
        assert code == 2
        assert err

    def test_oversized_pattern(self, capsys):
        code, _, _ = run_cli(capsys, "optimize", "--pattern", "u" * 9)
        assert code == 2


class TestBench:
    def test_small_run_writes_csv(self, capsys, tmp_path):
        out_path = tmp_path / "bench.csv"
        code, out, _ = run_cli(
            capsys, "bench", "--strategy", "frame", "--n", "4,8", "--trials", "5",
            "--seed", "3", "--threads", "1", "--out", str(out_path),
        )
        assert code == 0
        doc = json.loads(out)
        assert {s["n"] for s in doc["summaries"]} == {4, 8}
        assert out_path.exists()
        assert (tmp_path / "bench.summary.csv").exists()

    def test_json_out(self, capsys, tmp_path):
        out_path = tmp_path / "bench.json"
        code, _, _ = run_cli(
            capsys, "bench", "--strategy", "frame", "--n", "4", "--trials", "3",
            "--seed", "3", "--threads", "1", "--out", str(out_path),
        )
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert len(doc["results"]) == 3

    def test_collective_size_guard_exit_2(self, capsys):
        code, _, err = run_cli(
            capsys, "bench", "--strategy", "collective", "--n", "16", "--trials", "1",
        )
        assert code == 2
        assert "8" in err

    def test_bad_n_list(self, capsys):
        code, _, _ = run_cli(capsys, "bench", "--strategy", "frame", "--n", "4;8")
        assert code == 2


class TestParsing:
    def test_help_exits_zero(self, capsys):
        for sub in ("simulate", "optimize", "bench", "alice", "bob", "latlon"):
            with pytest.raises(SystemExit) as info:
                main([sub, "--help"])
            assert info.value.code == 0
            capsys.readouterr()

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--warp-speed", "9"])
        assert info.value.code == 2
        capsys.readouterr()

    def test_missing_subcommand(self, capsys):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == 2
        capsys.readouterr()


class TestNetworkedCli:
    def test_alice_bob_pair(self, capsys):
        # find a free port first
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()

        results = {}

        def bob():
            results["bob"] = main(
                ["bob", "--listen", f"127.0.0.1:{port}", "--strategy", "frame", "--seed", "21"]
            )

        thread = threading.Thread(target=bob)
        thread.start()
        import time

        alice_code = None
        for _ in range(100):  # wait for the listener (connection refused maps to exit 3)
            alice_code = main(
                ["alice", "--connect", f"127.0.0.1:{port}", "--n", "12", "--seed", "21"]
            )
            if alice_code == 0:
                break
            time.sleep(0.05)
        thread.join(timeout=30)
        out = capsys.readouterr().out
        assert alice_code == 0
        assert results["bob"] == 0
        lines = [json.loads(line) for line in out.strip().splitlines()]
        assert lines[0]["outcomes"] == lines[1]["outcomes"]
        assert lines[0]["estimate"] == lines[1]["estimate"]
