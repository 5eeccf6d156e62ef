"""Backend tests: local determinism and remote retry/limit behavior."""

import random
import threading

import pytest

from postedit.actions import (
    NO_ACTION,
    ActionScript,
    EditAction,
    Op,
    serialize_script,
    tokenize,
)
from postedit.backends import (
    BackendConfig,
    DirectEditInterpreter,
    NoisyGenerator,
    OracleProgrammer,
    Recorder,
    RemoteGenerator,
    RemoteProgrammer,
    ReplayBackend,
    derive_seed,
    join_for_programmer,
    prompt_fingerprint,
    text_fingerprint,
)
from postedit.errors import (
    BackendError,
    BudgetExceeded,
    MalformedResponse,
    ParseError,
    ReplayMiss,
    SkippedEdit,
    TransportError,
)
from postedit.prompts import RenderedPrompt
from stub_server import StubServer


def make_prompt(text, query=None):
    return RenderedPrompt(messages=(("user", text),), char_count=len(text), query=query)


SCRIPT = ActionScript((EditAction(Op.DELETE, "cat", 1), EditAction(Op.INSERT, "dog", 1)))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            BackendConfig(max_retries=-1)
        with pytest.raises(ValueError):
            BackendConfig(max_concurrent=0)
        with pytest.raises(ValueError):
            BackendConfig(timeout=0)


class TestDeriveSeed:
    def test_int_keys_xor(self):
        assert derive_seed(12, 5) == 12 ^ 5

    def test_string_keys_stable(self):
        assert derive_seed(7, "abc") == derive_seed(7, "abc")
        assert derive_seed(7, "abc") != derive_seed(7, "abd")


class TestNoisyGenerator:
    def test_zero_noise_identity(self):
        gen = NoisyGenerator({"x1": "the exact reference text"}, noise=0.0, seed=9)
        assert gen.generate(make_prompt("p", query="x1")) == "the exact reference text"

    def test_hand_replayed_draws(self):
        ref = "t0 t1 t2 t3 t4 t5 t6 t7 t8 t9"
        gen = NoisyGenerator({"x": ref}, noise=0.3, seed=5)
        vocabulary = sorted(set(tokenize(ref)))
        rng = random.Random(derive_seed(5, "x"))
        expected = []
        for token in tokenize(ref):
            if rng.random() < 0.3:
                continue
            if rng.random() < 0.3:
                expected.append(vocabulary[rng.randrange(len(vocabulary))])
            else:
                expected.append(token)
        assert gen.generate(make_prompt("p", query="x")) == " ".join(expected)

    def test_call_order_independent(self):
        refs = {f"x{i}": f"alpha beta gamma delta {i}" for i in range(5)}
        gen = NoisyGenerator(refs, noise=0.4, seed=3)
        forward = [gen.generate(make_prompt("p", query=f"x{i}")) for i in range(5)]
        backward = [gen.generate(make_prompt("p", query=f"x{i}")) for i in reversed(range(5))]
        assert forward == backward[::-1]

    def test_unpaired_query(self):
        gen = NoisyGenerator({"x": "ref"}, noise=0.0)
        with pytest.raises(BackendError):
            gen.generate(make_prompt("p", query="unknown"))

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            NoisyGenerator({}, noise=1.5)


class TestOracleProgrammer:
    def test_equal_gives_noaction(self):
        programmer = OracleProgrammer({"x": "same text"})
        assert programmer.predict_actions("x", "same text") is NO_ACTION

    def test_substitution(self):
        programmer = OracleProgrammer({"x": "the dog sat"})
        assert programmer.predict_actions("x", "the cat sat") == SCRIPT

    def test_missing_reference(self):
        with pytest.raises(BackendError):
            OracleProgrammer({}).predict_actions("x", "y")


class TestDirectEditInterpreter:
    def test_applies_script(self):
        interp = DirectEditInterpreter()
        out = interp.edit(make_prompt("ignored"), ("the cat sat", SCRIPT))
        assert out == "the dog sat"

    def test_positionless_script_skips(self):
        interp = DirectEditInterpreter()
        positionless = ActionScript((EditAction(Op.DELETE, "cat"),))
        with pytest.raises(SkippedEdit):
            interp.edit(make_prompt("ignored"), ("the cat sat", positionless))

    def test_wrong_token_skips(self):
        interp = DirectEditInterpreter()
        bad = ActionScript((EditAction(Op.DELETE, "bird", 0),))
        with pytest.raises(SkippedEdit):
            interp.edit(make_prompt("ignored"), ("the cat sat", bad))


class TestReplayAndRecord:
    def test_replay_generate(self, tmp_path):
        prompt = make_prompt("hello")
        path = tmp_path / "replay.jsonl"
        path.write_text(
            '{"prompt_sha256": "%s", "response_text": "canned"}\n'
            % prompt_fingerprint(prompt)
        )
        backend = ReplayBackend(path)
        assert backend.generate(prompt) == "canned"
        assert backend.edit(prompt, ("y", SCRIPT)) == "canned"

    def test_replay_predict(self, tmp_path):
        key = text_fingerprint(join_for_programmer("x", "y"))
        path = tmp_path / "replay.jsonl"
        path.write_text(
            '{"prompt_sha256": "%s", "response_text": "DELETE cat @1 ; INSERT dog @1"}\n'
            % key
        )
        assert ReplayBackend(path).predict_actions("x", "y") == SCRIPT

    def test_replay_miss(self, tmp_path):
        path = tmp_path / "replay.jsonl"
        path.write_text("")
        with pytest.raises(ReplayMiss):
            ReplayBackend(path).generate(make_prompt("nope"))

    def test_record_then_replay(self, tmp_path):
        refs = {"x": "the dog sat"}
        recorder = Recorder(
            generator=NoisyGenerator(refs, noise=0.0),
            programmer=OracleProgrammer(refs),
            interpreter=DirectEditInterpreter(),
        )
        prompt = make_prompt("generate", query="x")
        generated = recorder.generate(prompt)
        script = recorder.predict_actions("x", "the cat sat")
        edit_prompt = make_prompt("edit", query="x")
        edited = recorder.edit(edit_prompt, ("the cat sat", script))
        path = tmp_path / "rec.jsonl"
        recorder.save(path)

        replay = ReplayBackend(path)
        assert replay.generate(prompt) == generated
        assert replay.predict_actions("x", "the cat sat") == script
        assert replay.edit(edit_prompt, ("the cat sat", script)) == edited


def remote_config(endpoint, **overrides):
    defaults = dict(
        endpoint=endpoint,
        model="stub-model",
        timeout=5.0,
        max_retries=4,
        retry_base_delay_ms=1.0,
        max_concurrent=4,
    )
    defaults.update(overrides)
    return BackendConfig(**defaults)


class TestRemoteBackends:
    def test_chat_roundtrip(self):
        with StubServer(chat_reply=lambda body: "reply text") as stub:
            gen = RemoteGenerator(remote_config(stub.endpoint))
            assert gen.generate(make_prompt("hi")) == "reply text"

    def test_retries_transient_failures(self):
        with StubServer(fail_residues={0}, chat_reply=lambda body: "ok") as stub:
            gen = RemoteGenerator(remote_config(stub.endpoint))
            assert gen.generate(make_prompt("hi")) == "ok"
            assert stub.failures_injected == 1

    def test_transport_error_after_exhaustion(self):
        with StubServer(fail_residues=set(range(10))) as stub:
            gen = RemoteGenerator(remote_config(stub.endpoint, max_retries=2))
            with pytest.raises(TransportError):
                gen.generate(make_prompt("hi"))
            assert stub.request_count == 3

    def test_budget_cap(self):
        with StubServer(chat_reply=lambda body: "ok") as stub:
            gen = RemoteGenerator(remote_config(stub.endpoint, max_requests=2))
            gen.generate(make_prompt("a"))
            gen.generate(make_prompt("b"))
            with pytest.raises(BudgetExceeded):
                gen.generate(make_prompt("c"))

    def test_malformed_chat_schema(self):
        # content ends up as JSON null, which is not a string
        with StubServer(chat_reply=lambda body: None) as stub:
            gen = RemoteGenerator(remote_config(stub.endpoint))
            with pytest.raises(MalformedResponse):
                gen.generate(make_prompt("hi"))

    def test_concurrency_never_exceeds_limit(self):
        with StubServer(chat_reply=lambda body: "ok", delay=0.02) as stub:
            gen = RemoteGenerator(remote_config(stub.endpoint, max_concurrent=3))
            threads = [
                threading.Thread(target=gen.generate, args=(make_prompt(f"p{i}"),))
                for i in range(12)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert stub.request_count == 12
            assert stub.max_in_flight <= 3

    def test_predict_and_health(self):
        replies = {join_for_programmer("x", "the cat sat"): "DELETE cat @1 ; INSERT dog @1"}
        with StubServer(predict_reply=lambda text: replies[text]) as stub:
            programmer = RemoteProgrammer(remote_config(stub.endpoint))
            assert programmer.predict_actions("x", "the cat sat") == SCRIPT
            assert programmer.healthy()

    def test_predict_noaction_literal(self):
        with StubServer(predict_reply=lambda text: "NoAction") as stub:
            programmer = RemoteProgrammer(remote_config(stub.endpoint))
            assert programmer.predict_actions("x", "y") is NO_ACTION

    def test_invalid_script_surfaces_parse_error_with_raw(self):
        with StubServer(predict_reply=lambda text: "REMOVE cat") as stub:
            programmer = RemoteProgrammer(remote_config(stub.endpoint))
            with pytest.raises(ParseError) as excinfo:
                programmer.predict_actions("x", "y")
            assert excinfo.value.raw_text == "REMOVE cat"

    def test_4xx_is_not_retried(self):
        with StubServer() as stub:
            gen = RemoteGenerator(
                remote_config(stub.endpoint + "/missing", max_retries=3)
            )
            with pytest.raises(TransportError):
                gen.generate(make_prompt("hi"))
            assert stub.request_count == 1


class TestSerializationHelpers:
    def test_fingerprint_stability(self):
        a = make_prompt("same")
        b = make_prompt("same")
        assert prompt_fingerprint(a) == prompt_fingerprint(b)

    def test_join_format(self):
        assert join_for_programmer("a", "b") == "a <sep> b"

    def test_recorded_script_roundtrip(self):
        text = serialize_script(SCRIPT, with_positions=True)
        assert text == "DELETE cat @1 ; INSERT dog @1"
