from __future__ import annotations

import csv
import json
from collections import Counter
from fractions import Fraction

import pytest

from stochmatch.cli import main
from stochmatch.generators import make_sn_family
from stochmatch.scenario import serialize_scenario

from .conftest import point_model


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sn2_file(tmp_path):
    p = tmp_path / "s2.json"
    p.write_text(serialize_scenario(make_sn_family(2)))
    return p


class TestValidate:
    def test_ok(self, capsys, sn2_file):
        code, out, _ = run(capsys, "validate", str(sn2_file))
        assert code == 0
        assert out.startswith("ok: 4 vertices, 3 edges")

    def test_disjoint_intervals(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({
            "vertices": [{"id": 0, "arrival": 1, "deadline": 1, "death_dist": [1]},
                         {"id": 1, "arrival": 2, "deadline": 2, "death_dist": [1]}],
            "edges": [[0, 1]]}))
        code, out, _ = run(capsys, "validate", str(p))
        assert code == 1
        assert "disjoint life intervals" in out

    def test_malformed_json(self, capsys, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text('{"vertices": [')
        code, _, err = run(capsys, "validate", str(p))
        assert code == 2
        assert "line 1" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "validate", str(tmp_path / "nope.json"))[0] == 2


class TestOpt:
    def test_exact(self, capsys):
        assert run(capsys, "opt", "sn:4", "--exact")[1] == "2.75\n"

    def test_exact_rational(self, capsys):
        assert run(capsys, "opt", "sn:2", "--exact", "--rational")[1] == "5/4\n"

    def test_conditional(self, capsys):
        assert run(capsys, "opt", "sn:2", "--exact", "--rational", "--given-edge", "0", "1")[1] == "1\n"
        assert run(capsys, "opt", "sn:2", "--exact", "--rational", "--given-empty")[1] == "1\n"
        assert run(capsys, "opt", "sn:2", "--exact", "--given-edge", "0", "2")[0] == 1

    def test_fpras_seed_sweep(self, capsys):
        hits = 0
        for seed in range(20):
            code, out, _ = run(capsys, "opt", "sn:4", "--fpras", "0.25", "0.25", "--k", "2000",
                               "--seed", str(seed))
            assert code == 0
            hits += 2.0625 <= float(out) <= 3.4375
        assert hits >= 15

    def test_fpras_json_detail(self, capsys):
        code, out, _ = run(capsys, "opt", "sn:3", "--fpras", "0.5", "0.25", "--k", "500",
                           "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert doc["samples_per_run"] == 500
        assert doc["runs"] == len(doc["run_values"])

    def test_fpras_needs_sample_count(self, capsys):
        assert run(capsys, "opt", "sn:4", "--fpras", "0.25", "0.25")[0] == 2

    def test_unknown_source(self, capsys):
        assert run(capsys, "opt", "missing.json", "--exact")[0] == 2

    def test_enumeration_cap(self, capsys, monkeypatch):
        monkeypatch.setenv("STOCHMATCH_MAX_ENUM", "10")
        code, _, err = run(capsys, "opt", "sn:5", "--exact")
        assert code == 3
        assert "Monte-Carlo" in err


class TestChiStar:
    def test_sn4(self, capsys):
        assert run(capsys, "chi-star", "sn:4")[1] == "2\n"

    def test_deterministic_model(self, capsys, tmp_path):
        p = tmp_path / "det.json"
        p.write_text(serialize_scenario(point_model([(1, 2), (2, 2), (1, 1), (2, 3), (3, 3)],
                                                    [(0, 1), (0, 2), (1, 3), (3, 4)])))
        assert run(capsys, "chi-star", str(p))[1] == "2\n"

    def test_export(self, capsys, tmp_path):
        path = tmp_path / "table.json"
        code, out, _ = run(capsys, "chi-star", "sn:2", "--rational", "--export", str(path))
        assert (code, out) == (0, "1\n")
        doc = json.loads(path.read_text())
        assert doc["value_exact"] == "1"
        assert {"t", "alive", "value", "matching"} <= set(doc["states"][0])

    def test_state_cap(self, capsys):
        code, _, err = run(capsys, "chi-star", "sn:6", "--max-states", "5")
        assert code == 3
        assert "state count" in err


class TestRun:
    @pytest.mark.parametrize("policy,value", [("patient", "2\n"), ("greedy", "2\n"), ("empty", "0\n"),
                                              ("exact-dp", "2\n"), ("split-matching-exact", "2\n")])
    def test_exact_sn4(self, capsys, policy, value):
        assert run(capsys, "run", "sn:4", "--policy", policy, "--exact")[1] == value

    def test_monte_carlo_with_traces(self, capsys, tmp_path):
        traces = tmp_path / "traces.jsonl"
        code, out, _ = run(capsys, "run", "sn:3", "--policy", "greedy", "--samples", "50",
                           "--seed", "4", "--traces", str(traces), "--format", "json")
        assert code == 0
        rows = [json.loads(line) for line in traces.read_text().splitlines()]
        assert len(rows) == 50
        assert json.loads(out)["value"] == pytest.approx(sum(r["size"] for r in rows) / 50)

    def test_fpras_policy_needs_k(self, capsys):
        assert run(capsys, "run", "sn:2", "--policy", "split-matching-fpras", "--exact")[0] == 2

    def test_fpras_policy(self, capsys):
        code, out, _ = run(capsys, "run", "sn:2", "--policy", "split-matching-fpras", "--exact",
                           "--k", "400")
        assert code == 0 and abs(float(out) - 1) < 0.05


class TestRatio:
    def test_rows(self, capsys, tmp_path):
        path = tmp_path / "ratio.csv"
        assert run(capsys, "ratio", "--family", "sn", "--from", "1", "--to", "6", "--out", str(path))[0] == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["n", "chi_star", "opt", "ratio"]
        assert rows[2] == ["2", "1", "1.25", "0.8"]
        assert rows[6][:3] == ["6", "3", "4.25"]
        assert abs(float(rows[6][3]) - 12 / 17) <= 1e-12
        ratios = [float(r[3]) for r in rows[1:]]
        assert all(a > b for a, b in zip(ratios, ratios[1:]))

    def test_bad_family(self, capsys):
        assert run(capsys, "ratio", "--family", "k", "--from", "1", "--to", "2")[0] == 2


class TestSample:
    def test_deterministic_model(self, capsys, tmp_path):
        p = tmp_path / "det.json"
        p.write_text(serialize_scenario(point_model([(1, 2), (2, 2)], [(0, 1)])))
        lines = run(capsys, "sample", str(p), "--count", "5")[1].splitlines()
        assert len({json.dumps({k: v for k, v in json.loads(x).items() if k != "index"}) for x in lines}) == 1
        assert len(lines) == 5

    def test_sn2_histogram(self, capsys):
        out = run(capsys, "sample", "sn:2", "--count", "4000", "--seed", "3")[1]
        survivors = Counter(sum(r["death_times"][k] == 2 for k in ("0", "1"))
                            for r in map(json.loads, out.splitlines()))
        for k, p in zip(range(3), (0.25, 0.5, 0.25)):
            assert abs(survivors[k] / 4000 - p) <= 0.03

    def test_reparseable(self, capsys):
        out = run(capsys, "sample", "sn:3", "--count", "20")[1]
        for i, line in enumerate(out.splitlines()):
            row = json.loads(line)
            assert row["index"] == i
            assert row["opt"] == sum(d == 2 for k, d in row["death_times"].items() if int(k) < 3) + \
                (sum(d == 1 for k, d in row["death_times"].items() if int(k) < 3) // 2)


def test_generate_round_trip(capsys, tmp_path):
    p = tmp_path / "tri.json"
    assert run(capsys, "generate", "tri:0.1", "--out", str(p))[0] == 0
    assert run(capsys, "validate", str(p))[0] == 0
    assert run(capsys, "opt", str(p), "--exact")[1] == run(capsys, "opt", "tri:0.1", "--exact")[1]


def test_rational_generator_round_trip(capsys, tmp_path):
    p = tmp_path / "r.json"
    run(capsys, "generate", "random:5:3:7", "--out", str(p))
    code, out, _ = run(capsys, "opt", str(p), "--exact", "--rational")
    assert code == 0
    assert Fraction(out.strip()) > 0
