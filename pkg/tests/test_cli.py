import io
import json
import subprocess
import sys

from wordfibers.cli import (
    EXIT_BUDGET,
    EXIT_CHECK_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    default_battery_path,
    parse_fraction,
    run_command,
)


def run(argv):
    out = io.StringIO()
    code = run_command(argv, stdout=out)
    text = out.getvalue()
    assert text.endswith("\n")
    return code, json.loads(text), text


class TestParseFraction:
    def test_forms(self):
        from fractions import Fraction

        assert parse_fraction("1/2") == Fraction(1, 2)
        assert parse_fraction("3") == 3
        assert parse_fraction("0.25") == Fraction(1, 4)


class TestSchema:
    def test_document_shape(self):
        code, doc, _ = run(["word", "mconst", "-l", "1", "-d", "1"])
        assert code == EXIT_OK
        assert set(doc) == {"schema_version", "request", "result", "status", "stats"}
        assert doc["status"] == "ok"
        assert doc["result"]["M"] == "341"

    def test_sorted_keys_and_compact(self):
        _, _, text = run(["word", "mconst", "-l", "2", "-d", "3"])
        parsed = json.loads(text)
        assert text == json.dumps(parsed, sort_keys=True, separators=(",", ":")) + "\n"


class TestWordCommands:
    def test_parse(self):
        code, doc, _ = run(["word", "parse", "--word", "[x1,x2]"])
        assert code == EXIT_OK
        assert doc["result"]["word"] == "x1 x2 x1^-1 x2^-1"
        assert doc["result"]["length"] == "4"

    def test_variations(self):
        code, doc, _ = run(["word", "variations", "--word", "[x1,x2]", "--limit", "3"])
        assert doc["result"]["count"] == "16"
        assert len(doc["result"]["variations"]) == 3

    def test_syntax_error_is_usage(self):
        code, doc, _ = run(["word", "parse", "--word", "y1"])
        assert code == EXIT_USAGE
        assert doc["status"] == "usage-error"


class TestGroupCommands:
    def test_make(self):
        code, doc, _ = run(["group", "make", "--spec", "dih:3"])
        assert doc["result"]["order"] == "6"
        assert doc["result"]["abelian"] is False

    def test_auts(self):
        code, doc, _ = run(["group", "auts", "--spec", "q8"])
        assert doc["result"]["aut_size"] == "24"
        assert doc["result"]["inner_size"] == "4"

    def test_subgroups(self):
        code, doc, _ = run(["group", "subgroups", "--spec", "cyc:4"])
        assert doc["result"]["count"] == "3"

    def test_series(self):
        code, doc, _ = run(["group", "series", "--spec", "dih:3"])
        orders = [c["order"] for c in doc["result"]["chain"]]
        assert orders == ["1", "3", "6"]

    def test_radical(self):
        code, doc, _ = run(["group", "radical", "--spec", "prod:(alt:5)x(cyc:2)"])
        assert doc["result"]["order"] == "2"

    def test_cap_exit(self):
        code, doc, _ = run(["group", "make", "--spec", "sym:8"])
        assert code == EXIT_BUDGET
        assert doc["status"] == "budget-exceeded"


class TestFiberCommands:
    def test_pi(self):
        code, doc, _ = run(["fiber", "pi", "--group", "dih:3", "--word", "x1^2"])
        assert doc["result"]["max_fiber"] == "4"
        assert doc["result"]["proportion"] == "2/3"

    def test_dist(self):
        code, doc, _ = run(["fiber", "dist", "--group", "cyc:2", "--word", "x1^2"])
        assert doc["result"]["counts"] == ["2", "0"]

    def test_max_exact(self):
        code, doc, _ = run(
            [
                "fiber",
                "max",
                "--group",
                "sym:3",
                "--word",
                "x1 x2",
                "--auts",
                "aut",
                "--mode",
                "exact",
            ]
        )
        assert code == EXIT_OK
        assert doc["result"]["value"] == "6"
        assert doc["result"]["status"] == "exact"

    def test_max_sample_lower_bound(self):
        code, doc, _ = run(
            [
                "fiber", "max", "--group", "dih:4", "--word", "x1^2",
                "--auts", "aut", "--mode", "sample", "--samples", "10",
                "--seed", "3",
            ]
        )
        assert doc["result"]["status"] == "lower_bound"
        assert doc["result"]["seed"] == "3"

    def test_budget_exit(self):
        code, doc, _ = run(
            ["--budget", "10", "fiber", "pi", "--group", "alt:4", "--word", "[x1,x2]"]
        )
        assert code == EXIT_BUDGET


class TestVerifyCommands:
    def test_dihedral_pass(self):
        code, doc, _ = run(["verify", "dihedral", "--o", "3"])
        assert code == EXIT_OK
        assert doc["result"]["outcome"] == "pass"
        assert doc["result"]["witness"]["group_max"] == "4"
        assert doc["result"]["witness"]["product"] == "2"

    def test_dihedral_even_rejected(self):
        code, doc, _ = run(["verify", "dihedral", "--o", "4"])
        assert code == EXIT_USAGE

    def test_identity_max(self):
        code, doc, _ = run(
            ["verify", "identity-max", "--group", "sym:3", "--word", "x1^2",
             "--auts", "aut"]
        )
        assert code == EXIT_OK
        assert doc["result"]["outcome"] == "pass"

    def test_submult(self):
        code, doc, _ = run(
            ["verify", "submult", "--group", "dih:4", "--subgroup", "center",
             "--word", "[x1,x2]", "--auts", "aut"]
        )
        assert code == EXIT_OK

    def test_rewrite(self):
        code, doc, _ = run(
            ["verify", "rewrite", "--group", "sym:3", "--subgroup", "order:3",
             "--word", "x1^3", "--trials", "25", "--seed", "5"]
        )
        assert code == EXIT_OK
        assert doc["result"]["outcome"] == "pass"

    def test_variation_bound_negative_control_exits_one(self):
        code, doc, _ = run(
            ["verify", "variation-bound", "--simple", "alt:5", "--n", "1",
             "--word", "x1", "--epsilon-factor", "1/2"]
        )
        assert code == EXIT_CHECK_FAILED
        assert doc["status"] == "fail"
        assert doc["result"]["outcome"] == "fail"


class TestDeterminism:
    def test_byte_identical_across_thread_counts(self):
        cases = [
            ["verify", "identity-max", "--group", "q8", "--word", "x1 x2 x1",
             "--auts", "aut"],
            ["fiber", "max", "--group", "dih:4", "--word", "[x1,x2]", "--auts", "aut"],
            ["bounds", "exclude", "--word", "x1", "--rho", "1"],
        ]
        for argv in cases:
            _, _, one = run(["--threads", "1"] + argv)
            _, _, four = run(["--threads", "4"] + argv)
            assert one == four

    def test_repeat_run_identical(self):
        argv = ["fiber", "pi", "--group", "alt:4", "--word", "x1^2"]
        assert run(argv)[2] == run(argv)[2]


class TestCache:
    def test_cache_hit_is_byte_identical(self, tmp_path):
        argv = ["--cache-dir", str(tmp_path), "verify", "identity-max",
                "--group", "sym:3", "--word", "x1^2", "--auts", "aut"]
        code1, _, text1 = run(argv)
        cache_file = tmp_path / "cache.jsonl"
        assert cache_file.exists()
        code2, _, text2 = run(argv)
        assert (code1, text1) == (code2, text2)
        # only one record was written
        assert len(cache_file.read_text().splitlines()) == 1

    def test_cache_disabled_matches_enabled(self, tmp_path):
        argv_tail = ["fiber", "pi", "--group", "dih:5", "--word", "x1^3"]
        _, _, cached = run(["--cache-dir", str(tmp_path)] + argv_tail)
        _, _, cached_again = run(["--cache-dir", str(tmp_path)] + argv_tail)
        _, _, plain = run(argv_tail)
        assert cached == cached_again == plain

    def test_corrupt_lines_skipped(self, tmp_path, capsys):
        argv = ["--cache-dir", str(tmp_path), "word", "mconst", "-l", "1", "-d", "1"]
        _, _, first = run(argv)
        cache_file = tmp_path / "cache.jsonl"
        cache_file.write_text("{broken json\n" + cache_file.read_text())
        _, _, second = run(argv)
        assert first == second

    def test_different_params_different_digest(self, tmp_path):
        run(["--cache-dir", str(tmp_path), "word", "mconst", "-l", "1", "-d", "1"])
        code, doc, _ = run(
            ["--cache-dir", str(tmp_path), "word", "mconst", "-l", "2", "-d", "1"]
        )
        assert doc["result"]["M"] == "299593"  # (8^7 - 1) / 7


class TestBattery:
    def test_empty_manifest(self, tmp_path):
        manifest = tmp_path / "empty.json"
        manifest.write_text("[]")
        code, doc, _ = run(
            ["verify", "battery", "--manifest", str(manifest), "--out",
             str(tmp_path / "out")]
        )
        assert code == EXIT_OK
        assert doc["result"]["summary"]["total"] == "0"

    def test_small_manifest_passes_and_writes_reports(self, tmp_path):
        entries = [
            {"check": "dihedral", "o": 3},
            {"check": "identity-max", "group": "cyc:4", "word": "x1^2", "auts": "aut"},
            {"check": "submult", "group": "sym:3", "subgroup": "order:3",
             "word": "x1^2", "auts": "aut"},
            {"check": "rewrite", "group": "dih:4", "subgroup": "center",
             "word": "x1^2", "trials": 10, "seed": 1},
            {"check": "variation-projection", "group": "cyc:2", "word": "x1^2"},
        ]
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps(entries))
        out_dir = tmp_path / "reports"
        code, doc, _ = run(
            ["verify", "battery", "--manifest", str(manifest), "--out", str(out_dir)]
        )
        assert code == EXIT_OK
        assert doc["result"]["summary"]["passed"] == "5"
        files = sorted(p.name for p in out_dir.iterdir())
        assert len(files) == 5
        first = json.loads((out_dir / doc["result"]["reports"][0]).read_text())
        assert first["outcome"] == "pass"

    def test_falsified_bound_fails_with_counterexample(self, tmp_path):
        entries = [
            {"check": "variation-bound", "simple": "alt:5", "n": 1, "word": "x1",
             "epsilon_factor": "1/2"},
        ]
        manifest = tmp_path / "bad.json"
        manifest.write_text(json.dumps(entries))
        out_dir = tmp_path / "reports"
        code, doc, _ = run(
            ["verify", "battery", "--manifest", str(manifest), "--out", str(out_dir)]
        )
        assert code == EXIT_CHECK_FAILED
        report = json.loads((out_dir / doc["result"]["reports"][0]).read_text())
        assert report["outcome"] == "fail"
        assert "proportion" in report["witness"]

    def test_malformed_manifest(self, tmp_path):
        manifest = tmp_path / "nota.json"
        manifest.write_text("{}")
        code, doc, _ = run(
            ["verify", "battery", "--manifest", str(manifest), "--out",
             str(tmp_path / "out")]
        )
        assert code == EXIT_USAGE

    def test_default_manifest_exists_and_is_well_formed(self):
        entries = json.loads(default_battery_path().read_text())
        assert isinstance(entries, list) and len(entries) > 50
        kinds = {e["check"] for e in entries}
        assert {"dihedral", "identity-max", "submult", "rewrite"} <= kinds


class TestBoundsCommands:
    def test_mconst_via_words(self):
        code, doc, _ = run(["word", "mconst", "-l", "1", "-d", "1"])
        assert doc["result"]["M"] == "341"

    def test_lie(self):
        code, doc, _ = run(["bounds", "lie", "--word", "[x1,x2]", "--rho", "1"])
        assert doc["result"]["term_const"] == "28800"

    def test_alt(self):
        code, doc, _ = run(["bounds", "alt", "--word", "x1", "--rho", "1/2"])
        assert doc["result"]["term_rho"]["exact"] == str(2 ** (16 * 341))
        assert "ln" in doc["result"]["threshold"]

    def test_n0(self):
        code, doc, _ = run(
            ["bounds", "n0", "--word", "x1^2", "--rho", "1", "--order", "60"]
        )
        assert doc["result"]["n0"] == "0"

    def test_radical_bound(self):
        code, doc, _ = run(
            ["bounds", "radical-bound", "--word", "x1", "--rho", "0.97",
             "--factors", "60:120", "--n-zero", "1000000", "--eta-zero", "1/100"]
        )
        assert doc["result"]["bound"]["exact"] == "120"

    def test_exclude(self):
        code, doc, _ = run(["bounds", "exclude", "--word", "x1", "--rho", "1"])
        assert doc["result"]["M"] == "341"
        assert doc["result"]["lie"]["term_const"] == "288"
        assert len(doc["result"]["narrative"]) == 3


class TestEnvironmentVariables:
    def test_budget_env(self, monkeypatch):
        monkeypatch.setenv("WFL_BUDGET", "10")
        code, doc, _ = run(["fiber", "pi", "--group", "alt:4", "--word", "[x1,x2]"])
        assert code == EXIT_BUDGET
        # flag wins over the environment
        code, doc, _ = run(
            ["--budget", "100000000", "fiber", "pi", "--group", "alt:4",
             "--word", "[x1,x2]"]
        )
        assert code == EXIT_OK

    def test_threads_env(self, monkeypatch):
        argv = ["verify", "identity-max", "--group", "dih:4", "--word", "x1^2",
                "--auts", "aut"]
        _, _, base = run(argv)
        monkeypatch.setenv("WFL_THREADS", "3")
        _, _, threaded = run(argv)
        assert base == threaded

    def test_cache_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WFL_CACHE_DIR", str(tmp_path))
        _, _, first = run(["word", "mconst", "-l", "1", "-d", "1"])
        assert (tmp_path / "cache.jsonl").exists()
        _, _, second = run(["word", "mconst", "-l", "1", "-d", "1"])
        assert first == second


class TestUsageErrors:
    def test_unknown_subcommand(self):
        code, doc, _ = run(["word", "frobnicate"])
        assert code == EXIT_USAGE
        assert doc["status"] == "usage-error"

    def test_missing_required(self):
        code, doc, _ = run(["fiber", "pi", "--group", "cyc:2"])
        assert code == EXIT_USAGE

    def test_tuple_index_out_of_range(self):
        code, doc, _ = run(
            ["fiber", "dist", "--group", "cyc:4", "--word", "x1^2",
             "--auts", "aut", "--tuple", "0,9"]
        )
        assert code == EXIT_USAGE

    def test_target_out_of_range(self):
        code, doc, _ = run(
            ["fiber", "max", "--group", "cyc:4", "--word", "x1^2",
             "--auts", "aut", "--target", "11"]
        )
        assert code == EXIT_USAGE


class TestEntryPoint:
    def test_subprocess_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "wordfibers.cli", "verify", "dihedral", "--o", "5"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        doc = json.loads(proc.stdout)
        assert doc["result"]["witness"]["group_max"] == "6"

    def test_cayley_table_workflow(self, tmp_path):
        from wordfibers.groups import make_group, write_cayley_table

        path = tmp_path / "c4.tbl"
        write_cayley_table(path, make_group("cyc:4"))
        code, doc, _ = run(["group", "make", "--spec", f"table:{path}"])
        assert code == EXIT_OK
        assert doc["result"]["order"] == "4"
        bad = tmp_path / "bad.tbl"
        bad.write_text("2\n0 1\n1 1\n")
        code, doc, _ = run(["group", "make", "--spec", f"table:{bad}"])
        assert code == EXIT_USAGE
