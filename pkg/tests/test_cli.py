import json
from pathlib import Path

import pytest

from priosynth.cli import main
from priosynth.graph import canonical_json, load_dag


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def graph_file(tmp_path, diamond):
    from priosynth.graph import dump_dag

    path = tmp_path / "diamond.json"
    path.write_text(dump_dag(diamond), encoding="utf-8")
    return path


@pytest.fixture
def tiny_config(tmp_path):
    config = {
        "seed": 3,
        "train": {"family": "layered", "count": 10, "layers": 4, "width": 4, "label": "train"},
        "val": {"family": "layered", "count": 4, "layers": 4, "width": 4, "label": "val"},
        "library": {"budget": 15},
        "loop": {"iterations": 2, "batch_size": 4, "runtime_mode": "zero"},
        "modes": ["full", "no_retrieval"],
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


class TestGen:
    def test_writes_graphs_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "suite"
        code, stdout, _ = run_cli(
            capsys, "gen", "--out", str(out), "--family", "chain", "--count", "3",
            "--seed", "5", "--layers", "6",
        )
        assert code == 0
        files = sorted(p.name for p in out.glob("*.json"))
        assert files == ["chain-0000.json", "chain-0001.json", "chain-0002.json", "manifest.json"]
        dag = load_dag((out / "chain-0000.json").read_text(encoding="utf-8"))
        assert len(dag) == 6
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "gen"
        assert manifest["seed"] == 5
        assert "timestamp" not in canonical_json(manifest)

    def test_reruns_identical_bytes(self, tmp_path, capsys):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            code, *_ = run_cli(
                capsys, "gen", "--out", str(out), "--family", "layered", "--count", "4", "--seed", "7",
            )
            assert code == 0
        for name in sorted(p.name for p in out_a.glob("*.json")):
            if name == "manifest.json":
                continue  # embeds the output dir path
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_bad_types_argument(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "gen", "--out", str(tmp_path / "x"), "--types", "alu")
        assert code == 3
        assert "error" in err


class TestStats:
    def test_prints_feature_tables(self, graph_file, capsys):
        code, stdout, _ = run_cli(capsys, "stats", str(graph_file))
        assert code == 0
        doc = json.loads(stdout)
        assert doc["cp_length"] == 7
        assert doc["per_node"]["0"]["crit"] == 7
        assert doc["per_node"]["0"]["reconv"] == 1

    def test_malformed_graph_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"nodes\": []}", encoding="utf-8")
        code, _, err = run_cli(capsys, "stats", str(bad))
        assert code == 3
        assert "error" in err

    def test_cyclic_graph_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "cycle.json"
        bad.write_text(
            json.dumps(
                {
                    "nodes": [
                        {"id": 0, "type": "a", "duration": 1},
                        {"id": 1, "type": "a", "duration": 1},
                    ],
                    "edges": [[0, 1], [1, 0]],
                    "capacities": {"a": 1},
                }
            ),
            encoding="utf-8",
        )
        code, _, err = run_cli(capsys, "stats", str(bad))
        assert code == 3


class TestKernelsAndRetrieve:
    def test_build_then_retrieve(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        run_cli(capsys, "gen", "--out", str(suite), "--count", "10", "--seed", "2")
        lib = tmp_path / "lib.json"
        code, stdout, _ = run_cli(
            capsys, "kernels", "build", "--train", str(suite), "--out", str(lib), "--budget", "12",
        )
        assert code == 0
        assert "kernels" in stdout
        doc = json.loads(lib.read_text(encoding="utf-8"))
        assert doc["layout"] == "v1"
        assert 0 < len(doc["kernels"]) <= 12
        normalizer_path = tmp_path / "lib.normalizer.json"
        assert normalizer_path.exists()

        code, stdout, _ = run_cli(
            capsys, "retrieve", "--library", str(lib), "--normalizer", str(normalizer_path),
            "--graph", str(suite / "layered-0003.json"), "-m", "3",
        )
        assert code == 0
        matches = json.loads(stdout)["matches"]
        assert len(matches) == 3
        sims = [m["similarity"] for m in matches]
        assert sims == sorted(sims, reverse=True)

    def test_build_deterministic(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        run_cli(capsys, "gen", "--out", str(suite), "--count", "8", "--seed", "2")
        lib_a, lib_b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli(capsys, "kernels", "build", "--train", str(suite), "--out", str(lib_a))
        run_cli(capsys, "kernels", "build", "--train", str(suite), "--out", str(lib_b))
        assert lib_a.read_bytes() == lib_b.read_bytes()


class TestSchedule:
    def test_inline_heuristic(self, graph_file, capsys):
        code, stdout, _ = run_cli(
            capsys, "schedule", "--graph", str(graph_file), "--heuristic", "1*crit",
            "--zero-runtime", "--verify",
        )
        assert code == 0
        doc = json.loads(stdout)
        assert doc["feasible"] is True
        assert doc["makespan"] == 7
        assert doc["runtime_ms"] == 0.0
        assert doc["starts"] == {"0": 0, "1": 2, "2": 2, "3": 5}

    def test_inline_wins_over_file(self, graph_file, tmp_path, capsys):
        heuristic = tmp_path / "h.txt"
        heuristic.write_text("-1*crit\n", encoding="utf-8")
        code, stdout, _ = run_cli(
            capsys, "schedule", "--graph", str(graph_file),
            "--heuristic", "1*crit", "--heuristic-file", str(heuristic), "--zero-runtime",
        )
        assert code == 0
        assert json.loads(stdout)["makespan"] == 7

    def test_heuristic_file_alone(self, graph_file, tmp_path, capsys):
        heuristic = tmp_path / "h.txt"
        heuristic.write_text("# comment\n1*crit\n", encoding="utf-8")
        code, stdout, _ = run_cli(
            capsys, "schedule", "--graph", str(graph_file), "--heuristic-file", str(heuristic),
            "--zero-runtime",
        )
        assert code == 0

    def test_missing_heuristic_exits_3(self, graph_file, capsys):
        code, _, err = run_cli(capsys, "schedule", "--graph", str(graph_file))
        assert code == 3

    def test_bad_expression_exits_3(self, graph_file, capsys):
        code, _, err = run_cli(
            capsys, "schedule", "--graph", str(graph_file), "--heuristic", "1*bogus",
        )
        assert code == 3

    def test_out_file(self, graph_file, tmp_path, capsys):
        out = tmp_path / "sched.json"
        code, stdout, _ = run_cli(
            capsys, "schedule", "--graph", str(graph_file), "--heuristic", "1*crit",
            "--out", str(out), "--zero-runtime",
        )
        assert code == 0
        assert json.loads(out.read_text(encoding="utf-8"))["makespan"] == 7


class TestSynthesize:
    def test_writes_artifacts(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "run"
        code, stdout, _ = run_cli(capsys, "synthesize", "--config", str(tiny_config), "--out", str(out))
        assert code == 0
        assert "best:" in stdout
        history = json.loads((out / "history.json").read_text(encoding="utf-8"))
        assert len(history["records"]) == 2
        assert (out / "best.txt").exists()
        assert (out / "library.json").exists()
        assert (out / "normalizer.json").exists()
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["command"] == "synthesize"
        assert str(tiny_config) in manifest["inputs"]

    def test_byte_identical_reruns(self, tiny_config, tmp_path, capsys):
        out_a, out_b = tmp_path / "ra", tmp_path / "rb"
        for out in (out_a, out_b):
            code, *_ = run_cli(capsys, "synthesize", "--config", str(tiny_config), "--out", str(out))
            assert code == 0
        for name in ("history.json", "best.txt", "library.json", "normalizer.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_bad_config_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"modes\": []}", encoding="utf-8")
        code, _, err = run_cli(capsys, "synthesize", "--config", str(bad), "--out", str(tmp_path / "o"))
        assert code == 3

    def test_provider_failure_exits_4(self, tmp_path, capsys):
        config = {
            "seed": 3,
            "train": {"family": "layered", "count": 6, "label": "train"},
            "val": {"family": "layered", "count": 3, "label": "val"},
            "loop": {
                "iterations": 1,
                "batch_size": 4,
                "fallback_on_error": False,
                "provider": {"kind": "scripted", "replies": []},
            },
        }
        path = tmp_path / "run.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        code, _, err = run_cli(capsys, "synthesize", "--config", str(path), "--out", str(tmp_path / "o"))
        assert code == 4
        assert "provider" in err


class TestAblate:
    def test_writes_report(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "ab"
        code, stdout, _ = run_cli(capsys, "ablate", "--config", str(tiny_config), "--out", str(out))
        assert code == 0
        report = json.loads((out / "ablation.json").read_text(encoding="utf-8"))
        assert set(report["modes"]) == {"full", "no_retrieval"}
        assert "full" in stdout and "no_retrieval" in stdout


class TestReport:
    def test_text_and_csv(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        run_cli(capsys, "gen", "--out", str(suite), "--count", "5", "--seed", "1")
        code, stdout, _ = run_cli(
            capsys, "report", "--graphs", str(suite), "--zero-runtime", "--suite-name", "demo",
        )
        assert code == 0
        assert "baseline_level" in stdout
        code, stdout, _ = run_cli(
            capsys, "report", "--graphs", str(suite), "--zero-runtime", "--format", "csv",
        )
        assert code == 0
        assert stdout.startswith("suite,heuristic,")

    def test_output_directory(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        run_cli(capsys, "gen", "--out", str(suite), "--count", "5", "--seed", "1")
        out = tmp_path / "rep"
        code, *_ = run_cli(capsys, "report", "--graphs", str(suite), "--out", str(out), "--zero-runtime")
        assert code == 0
        assert (out / "campaign.json").exists()
        assert (out / "report.txt").exists()
        assert (out / "report.csv").exists()


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
