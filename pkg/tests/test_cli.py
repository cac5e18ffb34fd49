import csv
import io
import json

import pytest

from prefixsched.cli import main

TOY_ARGS = ["gen", "toy"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.jsonl"
    assert main(["gen", "shuffled", "--n", "4", "--k-rep", "2", "--u", "5", "--d", "5", "--s", "0",
                 "--seed", "7", "--out", str(path)]) == 0
    return path


class TestGen:
    def test_shuffled(self, toy_file):
        lines = toy_file.read_text().splitlines()
        assert len(lines) == 4
        assert all({"id", "arrival", "tokens"} <= json.loads(l).keys() for l in lines)
        meta = json.loads(toy_file.with_suffix(".meta.json").read_text())
        assert meta["seed"] == 7 and meta["params"]["n"] == 4

    def test_partition(self, tmp_path):
        out = tmp_path / "p.jsonl"
        assert main(["gen", "partition", "--m", "1", "--h", "12", "--a", "4,4,4", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 7
        meta = json.loads(out.with_suffix(".meta.json").read_text())
        assert meta["T"] == 24 and meta["has_partition"] is True

    def test_bad_divisor(self, capsys):
        code, _, err = run(capsys, "gen", "shuffled", "--n", 5, "--k-rep", 2, "--u", 1, "--d", 1)
        assert code == 1 and "divide" in err

    def test_invalid_partition(self, capsys):
        code, _, err = run(capsys, "gen", "partition", "--m", 1, "--h", 12, "--a", "5,5,2")
        assert code == 1 and err

    def test_stdout(self, capsys):
        code, out, _ = run(capsys, "gen", "poisson", "--n", 6, "--rate", 2, "--k-rep", 3, "--u", 2, "--d", 2)
        assert code == 0 and len(out.splitlines()) == 6

    def test_usage_error_exit(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "shuffled", "--n", "4"])
        assert exc.value.code == 1


class TestRun:
    def test_fcfs_toy_summary(self, capsys, toy_file):
        code, out, err = run(capsys, "run", toy_file, "--policy", "fcfs", "--start", "delayed:0")
        assert code == 0
        assert "max_ttft=40" in err
        rows = list(csv.DictReader(io.StringIO(out)))
        assert sorted(int(r["ttft"]) for r in rows) == [10, 20, 30, 40]

    def test_summary_to_stdout_with_out(self, capsys, toy_file, tmp_path):
        code, out, _ = run(capsys, "run", toy_file, "--policy", "fcfs", "--start", "delayed:0",
                           "--out", tmp_path / "r.csv")
        assert code == 0 and out.startswith("max_ttft=40 p50=")
        assert (tmp_path / "r.csv").read_text().startswith("id,arrival,start,completion,ttft\n")

    def test_klpm1_equals_fcfs(self, capsys, toy_file):
        _, a, _ = run(capsys, "run", toy_file, "--policy", "klpm:1", "--seed", 3)
        _, b, _ = run(capsys, "run", toy_file, "--policy", "fcfs", "--seed", 3)
        assert a == b

    def test_lpm_deterministic(self, capsys, toy_file):
        _, a, _ = run(capsys, "run", toy_file, "--policy", "lpm", "--seed", 1)
        _, b, _ = run(capsys, "run", toy_file, "--policy", "lpm", "--seed", 1)
        assert a == b

    def test_json(self, capsys, toy_file):
        code, out, _ = run(capsys, "run", toy_file, "--policy", "fcfs", "--start", "delayed:0", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["summary"]["max"] == "40" and len(doc["records"]) == 4

    def test_unknown_policy(self, capsys, toy_file):
        code, _, err = run(capsys, "run", toy_file, "--policy", "sjf")
        assert code == 1 and "unknown policy" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "run", tmp_path / "nope.jsonl", "--policy", "fcfs")
        assert code == 1


class TestSweep:
    ARGS = ["sweep", "--k", "1,inf", "--rate", "0.01,0.1,10", "--n", "200", "--k-rep", "4",
            "--u", "8", "--d", "4", "--seeds", "5"]

    def rows(self, capsys, *extra):
        code, out, _ = run(capsys, *self.ARGS, *extra)
        assert code == 0
        return out, list(csv.DictReader(io.StringIO(out)))

    def test_row_count_and_header(self, capsys):
        out, rows = self.rows(capsys)
        assert len(rows) == 30
        assert out.splitlines()[0] == "policy,k,s_or_rate,n,u,d,c_attn,seed,max,p50,p90,p95,p99"

    def test_deterministic_and_parallel(self, capsys):
        a, _ = self.rows(capsys)
        b, _ = self.rows(capsys)
        c, _ = self.rows(capsys, "--jobs", "2")
        assert a == b == c

    def test_lpm_median_at_high_rate(self, capsys):
        args = list(self.ARGS)
        args[args.index("--seeds") + 1] = "20"
        code, out, _ = run(capsys, *args)
        rows = [r for r in csv.DictReader(io.StringIO(out)) if r["s_or_rate"] == "10"]
        fcfs = {r["seed"]: float(r["p50"]) for r in rows if r["policy"] == "fcfs"}
        lpm = {r["seed"]: float(r["p50"]) for r in rows if r["policy"] == "lpm"}
        assert sum(lpm[s] <= fcfs[s] for s in fcfs) >= 0.95 * len(fcfs)

    def test_gap_mode_delayed_auto(self, capsys):
        code, out, _ = run(capsys, "sweep", "--k", "2", "--s", "0,1", "--n", "8", "--k-rep", "2",
                           "--u", "3", "--d", "2", "--start", "delayed:auto", "--format", "json")
        rows = json.loads(out)
        assert code == 0 and [r["policy"] for r in rows] == ["klpm", "klpm"]

    def test_both_grids_rejected(self, capsys):
        code, _, err = run(capsys, "sweep", "--k", "1", "--s", "1", "--rate", "1", "--n", "4",
                           "--k-rep", "2", "--u", "1", "--d", "1")
        assert code == 1 and "exactly one" in err


class TestBounds:
    def test_csv(self, capsys):
        code, out, _ = run(capsys, "bounds", "--n", 1000, "--u", 8, "--d", 4, "--k", 4, "--s", 2,
                             "--eps", "0.05")
        rows = {r["formula"]: r for r in csv.DictReader(io.StringIO(out))}
        assert code == 0
        assert rows["klpm_upper"]["value"] == "7500"
        assert rows["klpm_upper"]["T"] == "2000"
        assert rows["separation_holds"]["value"] == "true"

    def test_json(self, capsys):
        code, out, _ = run(capsys, "bounds", "--n", 4, "--u", 5, "--d", 5, "--k", 2, "--s", 0,
                           "--eps", 0, "--format", "json")
        doc = json.loads(out)
        assert doc["bounds"] == {"klpm_upper": "30", "lpm_lower": "30", "fcfs_lower": "40",
                                 "separation_holds": "false"}

    def test_bad_eps(self, capsys):
        assert run(capsys, "bounds", "--n", 4, "--u", 5, "--d", 5, "--k", 2, "--s", 0, "--eps", 1)[0] == 1


class TestFeasible:
    def test_exact_feasible(self, capsys, toy_file):
        code, out, _ = run(capsys, "feasible", toy_file, "--T", 40, "--start", "delayed:0")
        doc = json.loads(out)
        assert code == 0 and doc["outcome"] == "feasible" and doc["satisfied_count"] == 4

    def test_exact_infeasible(self, capsys, toy_file):
        code, out, _ = run(capsys, "feasible", toy_file, "--T", 29, "--start", "delayed:0")
        doc = json.loads(out)
        assert code == 2 and doc["outcome"] == "infeasible" and doc["certificate"]

    def test_percentile(self, capsys, toy_file):
        code, out, _ = run(capsys, "feasible", toy_file, "--T", 30, "--p", "0.5", "--mode", "percentile",
                           "--start", "delayed:0")
        assert code == 0 and len(json.loads(out)["schedule"]) == 4

    def test_percentile_needs_p(self, capsys, toy_file):
        assert run(capsys, "feasible", toy_file, "--T", 30, "--mode", "percentile")[0] == 1

    def test_too_large(self, capsys, tmp_path):
        path = tmp_path / "big.jsonl"
        main(["gen", "shuffled", "--n", "12", "--k-rep", "2", "--u", "1", "--d", "1", "--out", str(path)])
        code, _, err = run(capsys, "feasible", path, "--T", 100)
        assert code == 2 and "too large" in err
