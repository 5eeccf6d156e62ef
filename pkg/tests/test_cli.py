"""CLI behavior tests (all offline)."""

import json

import pytest

from postedit.cli import dispatch


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def corpus(tmp_path):
    hyp = write(tmp_path / "hyp.txt", "the cat sat\nall fine here\n")
    ref = write(tmp_path / "ref.txt", "the dog sat\nall fine here\n")
    return hyp, ref


@pytest.fixture
def pool_file(tmp_path):
    pairs = write(
        tmp_path / "pairs.tsv",
        "".join(f"input {i} topic{i % 2}\tref{i} common words here\n" for i in range(6)),
    )
    out = str(tmp_path / "pool.jsonl")
    code = dispatch(
        [
            "build-pool",
            "--pairs",
            pairs,
            "--format",
            "tsv",
            "--out",
            out,
            "--backend",
            "noisy",
            "--noise",
            "0.4",
            "--seed",
            "3",
        ]
    )
    assert code == 0
    return out


class TestExtractApply:
    def test_extract_identical_lines_noaction(self, tmp_path):
        hyp = write(tmp_path / "h.txt", "same text\nanother line\n")
        out = tmp_path / "scripts.txt"
        code = dispatch(["extract-actions", "--hyp", hyp, "--ref", hyp, "-o", str(out)])
        assert code == 0
        assert out.read_text() == "NoAction\nNoAction\n"

    def test_extract_then_apply_roundtrip(self, corpus, tmp_path):
        hyp, ref = corpus
        scripts = tmp_path / "scripts.txt"
        assert (
            dispatch(
                ["extract-actions", "--hyp", hyp, "--ref", ref, "--positions", "-o", str(scripts)]
            )
            == 0
        )
        assert scripts.read_text().splitlines()[0] == "DELETE cat @1 ; INSERT dog @1"
        fixed = tmp_path / "fixed.txt"
        assert (
            dispatch(["apply-actions", "--hyp", hyp, "--scripts", str(scripts), "-o", str(fixed)])
            == 0
        )
        assert fixed.read_text() == "the dog sat\nall fine here\n"

    def test_unordered_flag(self, tmp_path):
        hyp = write(tmp_path / "h.txt", "b a\n")
        ref = write(tmp_path / "r.txt", "a b\n")
        out = tmp_path / "s.txt"
        assert dispatch(["extract-actions", "--hyp", hyp, "--ref", ref, "--unordered", "-o", str(out)]) == 0
        assert out.read_text() == "NoAction\n"

    def test_length_mismatch_is_runtime_error(self, tmp_path, capsys):
        hyp = write(tmp_path / "h.txt", "one\n")
        ref = write(tmp_path / "r.txt", "one\ntwo\n")
        assert dispatch(["extract-actions", "--hyp", hyp, "--ref", ref]) == 2
        assert "error" in capsys.readouterr().err


class TestUsageErrors:
    def test_missing_subcommand(self, capsys):
        assert dispatch([]) == 1

    def test_unknown_flag(self, capsys):
        assert dispatch(["evaluate", "--bogus"]) == 1

    def test_help_exits_zero(self, capsys):
        assert dispatch(["--help"]) == 0
        for command in (
            "extract-actions",
            "apply-actions",
            "corrupt",
            "build-pool",
            "build-trainset",
            "retrieve",
            "refine",
            "evaluate",
            "divergence",
        ):
            assert dispatch([command, "--help"]) == 0

    def test_replay_backend_requires_file(self, tmp_path, capsys):
        batch = write(tmp_path / "b.txt", "x\n")
        assert (
            dispatch(
                ["refine", "--batch", batch, "--pool", "nope.jsonl", "--backend", "replay"]
            )
            == 1
        )


class TestEvaluate:
    def test_identical_files(self, tmp_path, capsys):
        hyp = write(tmp_path / "h.txt", "the same line of text\n")
        assert dispatch(["evaluate", "--hyp", hyp, "--ref", hyp]) == 0
        out = capsys.readouterr().out
        assert "100.00" in out

    def test_json_report(self, corpus, tmp_path):
        hyp, ref = corpus
        out = tmp_path / "report.json"
        assert dispatch(["evaluate", "--hyp", hyp, "--ref", ref, "--json", str(out)]) == 0
        report = json.loads(out.read_text())
        assert set(report) == {"bleu", "chrfpp"}

    def test_divergence_identical_zero(self, tmp_path, capsys):
        p = write(tmp_path / "p.txt", "a b c\n")
        assert dispatch(["divergence", "--p", p, "--q", p]) == 0
        assert float(capsys.readouterr().out.strip()) == pytest.approx(0.0, abs=1e-9)

    def test_divergence_asymmetric(self, tmp_path, capsys):
        p = write(tmp_path / "p.txt", "a a b\n")
        q = write(tmp_path / "q.txt", "a b b b\n")
        dispatch(["divergence", "--p", p, "--q", q])
        forward = float(capsys.readouterr().out.strip())
        dispatch(["divergence", "--p", q, "--q", p])
        backward = float(capsys.readouterr().out.strip())
        assert forward != backward


class TestPoolAndTrainset:
    def test_build_pool_writes_provenance(self, pool_file):
        first_line = json.loads(open(pool_file).readline())
        meta = first_line["_meta"]
        assert meta["format"] == "postedit-pool-v1"
        assert meta["seed"] == 3
        assert meta["backend"].startswith("noisy")

    def test_build_trainset_default_augment(self, pool_file, tmp_path, capsys):
        out = tmp_path / "train.jsonl"
        assert dispatch(["build-trainset", "--pool", pool_file, "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 6 + round(0.1 * 6)
        for line in lines:
            record = json.loads(line)
            assert set(record) == {"input", "target"}
            assert record["input"].count("<sep>") == 1

    def test_retrieve_ranks_self_first(self, pool_file, capsys):
        assert (
            dispatch(["retrieve", "--pool", pool_file, "--query", "input 2 topic0", "-k", "3"])
            == 0
        )
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].split("\t")[0] == "2"
        assert float(lines[0].split("\t")[1]) == pytest.approx(1.0)

    def test_corrupt_rate_one_empties(self, tmp_path, capsys):
        scripts = write(tmp_path / "s.txt", "INSERT a @0 ; DELETE b @1\n")
        out = tmp_path / "c.txt"
        assert dispatch(["corrupt", "--scripts", scripts, "--rate", "1.0", "-o", str(out)]) == 0
        assert out.read_text() == "\n"


class TestRefine:
    def test_oracle_refine_and_replay_determinism(self, pool_file, tmp_path):
        batch = write(tmp_path / "batch.txt", "input 0 topic0\ninput 1 topic1\ninput 2 topic0\n")
        refs = write(
            tmp_path / "refs.txt",
            "ref0 common words here\nref1 common words here\nref2 common words here\n",
        )
        record = tmp_path / "record.jsonl"
        report_a = tmp_path / "a.json"
        base = [
            "refine",
            "--batch",
            batch,
            "--refs",
            refs,
            "--pool",
            pool_file,
            "--seed",
            "5",
        ]
        code = dispatch(
            base
            + [
                "--backend",
                "noisy",
                "--noise",
                "0.3",
                "--record-file",
                str(record),
                "--out",
                str(report_a),
            ]
        )
        assert code == 0
        report = json.loads(report_a.read_text())
        assert report["iterations"][-1]["metrics"]["bleu"] == pytest.approx(100.0)
        assert report["iterations"][-1]["noaction_rate"] == 1.0

        replay_b = tmp_path / "b.json"
        replay_c = tmp_path / "c.json"
        for out in (replay_b, replay_c):
            code = dispatch(
                base + ["--backend", "replay", "--replay-file", str(record), "--out", str(out)]
            )
            assert code == 0
        assert replay_b.read_bytes() == replay_c.read_bytes()

    def test_config_file_and_env_precedence(self, pool_file, tmp_path, monkeypatch, capsys):
        batch = write(tmp_path / "batch.txt", "input 0 topic0\n")
        refs = write(tmp_path / "refs.txt", "ref0 common words here\n")
        config = write(
            tmp_path / "run.toml",
            "[run]\nseed = 1\nmax_iterations = 3\n",
        )
        out = tmp_path / "report.json"
        monkeypatch.setenv("POSTEDIT_RUN_SEED", "9")
        code = dispatch(
            [
                "refine",
                "--batch",
                batch,
                "--refs",
                refs,
                "--pool",
                pool_file,
                "--backend",
                "oracle",
                "--config",
                config,
                "--seed",
                "4",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["config"]["seed"] == 9  # env beats flag beats file
        assert report["config"]["max_iterations"] == 3  # file beats default

    def test_unknown_config_key_rejected(self, pool_file, tmp_path, capsys):
        batch = write(tmp_path / "batch.txt", "input 0 topic0\n")
        config = write(tmp_path / "bad.toml", "[run]\nbogus = 1\n")
        code = dispatch(
            [
                "refine",
                "--batch",
                batch,
                "--pool",
                pool_file,
                "--backend",
                "oracle",
                "--config",
                config,
            ]
        )
        assert code == 1
