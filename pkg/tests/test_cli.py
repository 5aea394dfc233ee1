"""Tests for the command-line interface."""
from __future__ import annotations

import random
import threading

from mpir import cli, net
from mpir.params import Params
from mpir.protocol import MessageStore


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestParamsCommand:
    def test_k5_d2_rate(self, capsys):
        code, out, _ = run_cli(capsys, "params", "--K", "5", "--D", "2")
        assert code == 0
        assert "rate R = 57/80" in out

    def test_k4_d2_prob_rows(self, capsys):
        code, out, _ = run_cli(capsys, "params", "--K", "4", "--D", "2")
        assert code == 0
        assert "i=0: (1/4, 1/12)" in out
        assert "i=1: (1/6, 1/12)" in out
        assert "i=2: (1/6, 0)" in out

    def test_k3_d2_gap(self, capsys):
        code, out, _ = run_cli(capsys, "params", "--K", "3", "--D", "2")
        assert code == 0
        assert "rate R = 5/6" in out
        assert "capacity upper bound = 6/7" in out
        assert "gap = 1/42" in out

    def test_invalid_inputs(self, capsys):
        assert run_cli(capsys, "params", "--K", "1", "--D", "2")[0] == 2
        assert run_cli(capsys, "params", "--K", "4", "--D", "2", "--q", "4")[0] == 2
        assert run_cli(capsys, "params", "--K", "4", "--D", "3", "--q", "3")[0] == 2


class TestRateTable:
    def test_d2_markdown(self, capsys):
        code, out, _ = run_cli(capsys, "rate-table", "--D", "2", "--k-min", "3", "--k-max", "9")
        assert code == 0
        for value in ("5/6", "3/4", "57/80", "9/13", "639/938", "27/40", "795/1184"):
            assert value in out

    def test_d3_k6_gap_zero(self, capsys):
        code, out, _ = run_cli(
            capsys, "rate-table", "--D", "3", "--k-min", "6", "--k-max", "6", "--format", "csv"
        )
        assert code == 0
        assert out.splitlines()[1].split(",")[3] == "0"

    def test_d4_k7_gap(self, capsys):
        code, out, _ = run_cli(
            capsys, "rate-table", "--D", "4", "--k-min", "7", "--k-max", "7", "--format", "csv"
        )
        assert code == 0
        row = out.splitlines()[1].split(",")
        assert row[1] == "132/155"
        assert row[3] == "64/3565"

    def test_csv_parses(self, capsys):
        import csv as csv_mod
        import io

        code, out, _ = run_cli(
            capsys, "rate-table", "--D", "2", "--k-min", "3", "--k-max", "5", "--format", "csv"
        )
        rows = list(csv_mod.reader(io.StringIO(out)))
        assert rows[0][0] == "K"
        assert [r[0] for r in rows[1:]] == ["3", "4", "5"]

    def test_stable_output(self, capsys):
        a = run_cli(capsys, "rate-table", "--D", "3", "--k-min", "4", "--k-max", "10")
        b = run_cli(capsys, "rate-table", "--D", "3", "--k-min", "4", "--k-max", "10")
        assert a == b


class TestSimulate:
    def test_small_run(self, capsys):
        code, out, _ = run_cli(
            capsys, "simulate", "--K", "4", "--D", "2", "--rounds", "300", "--seed", "7"
        )
        assert code == 0
        assert "success rate = 1" in out

    def test_reproducible(self, capsys):
        argv = ("simulate", "--K", "5", "--D", "2", "--rounds", "200", "--seed", "3")
        assert run_cli(capsys, *argv) == run_cli(capsys, *argv)


class TestAudit:
    def test_privacy_pass(self, capsys):
        code, out, _ = run_cli(capsys, "audit", "privacy", "--K", "5", "--D", "2")
        assert code == 0
        assert "PASS" in out
        assert "max TV distance = 0" in out

    def test_privacy_mutated_fails(self, capsys):
        code, out, _ = run_cli(
            capsys, "audit", "privacy", "--K", "4", "--D", "2", "--mutate", "0", "1"
        )
        assert code == 1
        assert "FAIL" in out

    def test_privacy_no_permute_fails(self, capsys):
        code, out, _ = run_cli(capsys, "audit", "privacy", "--K", "4", "--D", "2", "--no-permute")
        assert code == 1

    def test_privacy_coefficient_level(self, capsys):
        code, out, _ = run_cli(
            capsys, "audit", "privacy", "--K", "4", "--D", "2", "--coefficient-level"
        )
        assert code == 0
        assert "max TV distance = 0" in out

    def test_evenness(self, capsys):
        code, out, _ = run_cli(capsys, "audit", "evenness", "--D", "4")
        assert code == 0
        assert "PASS" in out

    def test_evenness_reports_findings(self, capsys):
        code, out, _ = run_cli(capsys, "audit", "evenness", "--D", "7")
        assert code == 0
        assert "uneven" in out

    def test_recoverability(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "audit", "recoverability",
            "--K", "4", "--D", "2", "--trials", "400", "--seed", "11",
        )
        assert code == 0
        assert "400/400" in out

    def test_missing_k_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "audit", "privacy", "--D", "2")
        assert code == 2
        assert "--K" in err


class TestStoreAndNetwork:
    def test_store_init(self, capsys, tmp_path):
        path = tmp_path / "store.bin"
        code, out, _ = run_cli(
            capsys,
            "store", "init",
            "--out", str(path),
            "--K", "4", "--D", "2", "--m", "8", "--seed", "1",
        )
        assert code == 0
        store = net.read_store(path)
        assert (store.K, store.q, store.m) == (4, 3, 8)
        # Same seed must write the identical file.
        path2 = tmp_path / "store2.bin"
        run_cli(
            capsys,
            "store", "init",
            "--out", str(path2),
            "--K", "4", "--D", "2", "--m", "8", "--seed", "1",
        )
        assert path.read_bytes() == path2.read_bytes()

    def test_retrieve_end_to_end(self, capsys):
        params = Params(K=4, D=2, q=3, m=8)
        store = MessageStore.random(params, random.Random(44))
        servers = [net.StoreServer(store) for _ in range(3)]
        for s in servers:
            threading.Thread(target=s.serve_forever, daemon=True).start()
        try:
            endpoints = ",".join(f"127.0.0.1:{s.port}" for s in servers)
            code, out, _ = run_cli(
                capsys,
                "retrieve",
                "--endpoints", endpoints,
                "--W", "1,2",
                "--K", "4", "--D", "2", "--m", "8",
                "--seed", "5",
            )
            assert code == 0
            assert f"X_1 = {list(store.messages[0])}" in out
            assert "downloaded bytes" in out
        finally:
            for s in servers:
                s.shutdown()
                s.server_close()

    def test_retrieve_bad_endpoints(self, capsys):
        code, _, err = run_cli(
            capsys,
            "retrieve",
            "--endpoints", "127.0.0.1:1,127.0.0.1:2,127.0.0.1:3",
            "--W", "1,2",
            "--K", "4", "--D", "2",
            "--seed", "0",
        )
        assert code == 2
        assert "error" in err
