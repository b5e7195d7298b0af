"""Prompt templates, backends, and augmentation parsing tests."""

from pathlib import Path

import httpx
import pytest

from pictopred.corpus import NaturalSentence
from pictopred.errors import (
    BackendUnavailableError,
    MissingFixtureError,
    WrongExampleCountError,
    WrongGroupSizeError,
)
from pictopred.generation import (
    HTTPCompletionClient,
    RecordingClient,
    ReplayClient,
    augment,
    build_example_prompt,
    build_vocab_prompt,
    example_prompts,
    parse_completion,
    prompt_sha256,
    record_fixture_line,
    select_examples_for_terms,
    vocab_prompts,
)

GOLDEN = Path(__file__).parent / "golden"

FIG2_SENTENCES = [
    "eu brinquei de esconde-esconde com meus coleguinhas.",
    "eu quero comer cuscuz.",
    "eu gosto de ler muito.",
    "o menino me bateu.",
    "eu quero comer carne.",
    "minha mãe fez comigo.",
    "vamos voltar pra casa?",
    "trocar a bombona de água.",
    "eu brinquei com Maria ontem.",
    "eu sou joão.",
]
FIG3_TERMS = [
    "delas", "vizinho", "avó", "médico", "bebê", "pai", "professor",
    "policial", "garota", "profissões", "primas", "irmã", "crianças",
    "rapaz", "avô", "de vocês", "motorista", "filho", "dentista", "adulto",
]
FIG3_EXAMPLES = [
    "eu tenho um filho e uma filha.",
    "eu vi meu filho feliz.",
    "nós gostamos delas.",
    "meu avô foi trabalhar.",
    "você é um grande professor.",
    "nós vamos seguir o professor.",
]


def _sentences(texts):
    return [NaturalSentence(text=t) for t in texts]


class TestExamplePrompt:
    def test_byte_identical_to_golden(self):
        prompt = build_example_prompt(FIG2_SENTENCES)
        assert prompt == GOLDEN.joinpath("example_prompt.txt").read_text(encoding="utf-8")

    def test_nine_sentences_rejected(self):
        with pytest.raises(WrongGroupSizeError):
            build_example_prompt(FIG2_SENTENCES[:9])

    def test_last_nonempty_line_is_dangling_example(self):
        prompt = build_example_prompt([f"sentença {i}." for i in range(10)])
        lines = [line for line in prompt.splitlines() if line.strip()]
        assert lines[-1] == "Example 11:"

    def test_accepts_natural_sentences(self):
        prompt = build_example_prompt(_sentences(FIG2_SENTENCES))
        assert prompt == build_example_prompt(FIG2_SENTENCES)


class TestVocabPrompt:
    def test_byte_identical_to_golden(self):
        prompt = build_vocab_prompt(FIG3_TERMS, FIG3_EXAMPLES)
        assert prompt == GOLDEN.joinpath("vocab_prompt.txt").read_text(encoding="utf-8")

    def test_two_examples_rejected(self):
        with pytest.raises(WrongExampleCountError):
            build_vocab_prompt(FIG3_TERMS, FIG3_EXAMPLES[:2])

    def test_wrong_term_count_rejected(self):
        with pytest.raises(WrongGroupSizeError):
            build_vocab_prompt(FIG3_TERMS[:19], FIG3_EXAMPLES)

    def test_three_examples_ends_with_example_4(self):
        prompt = build_vocab_prompt(FIG3_TERMS, FIG3_EXAMPLES[:3])
        assert prompt.splitlines()[-1] == "Example 4:"


class TestSelectExamples:
    def test_pool_sentence_with_picked_term_included(self):
        pool = _sentences(["meu avô foi trabalhar.", "meu avô dorme.", "avô come bolo."])
        got = select_examples_for_terms(FIG3_TERMS, pool, rng_seed=1)
        assert any(s.text == "meu avô foi trabalhar." for s in got)

    def test_pool_of_exactly_three_returned(self):
        pool = _sentences(["um dois.", "três quatro.", "cinco seis."])
        got = select_examples_for_terms(FIG3_TERMS, pool, rng_seed=0)
        assert sorted(s.text for s in got) == sorted(s.text for s in pool)

    def test_fixed_seed_is_deterministic(self):
        pool = _sentences([f"frase número {i} com avô." for i in range(40)])
        a = select_examples_for_terms(FIG3_TERMS, pool, rng_seed=7)
        b = select_examples_for_terms(FIG3_TERMS, pool, rng_seed=7)
        assert a == b

    def test_count_in_range(self):
        pool = _sentences([f"frase {i} fala do professor." for i in range(50)])
        for seed in range(10):
            got = select_examples_for_terms(FIG3_TERMS, pool, rng_seed=seed)
            assert 3 <= len(got) <= 6


class TestPromptBatches:
    def test_example_prompts_grouping(self):
        pool = _sentences([f"sentença número {i}." for i in range(25)])
        prompts = example_prompts(pool, rng_seed=3)
        assert len(prompts) == 2  # leftover 5 sentences do not form a group
        assert all(p.splitlines()[-1] == "Example 11:" for p in prompts)

    def test_vocab_prompts_grouping(self):
        pool = _sentences([f"o professor número {i} chegou." for i in range(10)])
        terms = [f"termo{i}" for i in range(45)]
        prompts = vocab_prompts(terms, pool, rng_seed=3)
        assert len(prompts) == 2
        assert prompts == vocab_prompts(terms, pool, rng_seed=3)


class TestParseCompletion:
    def test_prefixes_stripped_and_short_lines_dropped(self):
        text = "Example 12: eu quero água.\nExample 13: eu gosto de pão.\n\nx\n"
        assert parse_completion(text) == ["eu quero água.", "eu gosto de pão."]

    def test_plain_lines_kept(self):
        assert parse_completion("uma frase.\noutra frase.") == ["uma frase.", "outra frase."]

    def test_no_parseable_lines(self):
        assert parse_completion("\n \nE\n") == []


class TestReplayAndRecording:
    def test_replay_returns_recorded_completions(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        record_fixture_line(fixture, "prompt-a", ["Example 1: foo bar.\nExample 2: baz qux."])
        client = ReplayClient(fixture)
        assert client.complete("prompt-a") == ["Example 1: foo bar.\nExample 2: baz qux."]

    def test_replay_missing_prompt(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        fixture.write_text("")
        with pytest.raises(MissingFixtureError):
            ReplayClient(fixture).complete("never recorded")

    def test_recording_then_replay_round_trip(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"

        class FakeLive:
            mode = "live"

            def complete(self, prompt, max_items=1):
                return [f"Example 1: resposta para {prompt_sha256(prompt)[:6]}."]

        recorder = RecordingClient(FakeLive(), fixture)
        live_result = recorder.complete("um prompt")
        assert ReplayClient(fixture).complete("um prompt") == live_result


class TestAugment:
    def test_replay_run_twice_is_identical(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        prompts = [f"prompt {i}" for i in range(4)]
        for i, prompt in enumerate(prompts):
            record_fixture_line(
                fixture, prompt,
                ["\n".join(f"Example {k}: frase gerada {i}-{k}." for k in range(1, 4))],
            )
        client = ReplayClient(fixture)
        first = augment(client, prompts)
        second = augment(client, prompts)
        assert first == second
        assert len(first) == 12
        assert all(s.source == "generated" for s in first)

    def test_empty_completion_yields_nothing(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        record_fixture_line(fixture, "p", ["\n\n"])
        assert augment(ReplayClient(fixture), ["p"]) == []

    def test_parallel_run_preserves_prompt_order(self, tmp_path):
        fixture = tmp_path / "fixture.jsonl"
        prompts = [f"prompt {i}" for i in range(6)]
        for i, prompt in enumerate(prompts):
            record_fixture_line(fixture, prompt, [f"Example 1: frase {i}."])
        sequential = augment(ReplayClient(fixture), prompts)
        parallel = augment(ReplayClient(fixture), prompts, parallelism=3)
        assert sequential == parallel

    def test_recorded_run_shape(self, tmp_path):
        # Synthetic replay of a recorded generation run: 278 example-based
        # prompts whose completions parse to exactly 2,772 sentences
        # (276 prompts yield 10, the last 2 yield 6 each).
        fixture = tmp_path / "recorded.jsonl"
        pool = _sentences([f"frase coletada número {i}." for i in range(2780)])
        prompts = example_prompts(pool, rng_seed=0)
        assert len(prompts) == 278
        for i, prompt in enumerate(prompts):
            count = 10 if i < 276 else 6
            completion = "\n".join(
                f"Example {k}: frase sintética {i}-{k}." for k in range(11, 11 + count)
            )
            record_fixture_line(fixture, prompt, [completion])
        generated = augment(ReplayClient(fixture), prompts)
        assert len(generated) == 2772


class TestHTTPClient:
    def test_live_completion_parsed_from_choices(self):
        def handler(request):
            return httpx.Response(200, json={"choices": [{"text": "Example 1: oi."}]})

        client = HTTPCompletionClient(
            "http://backend.test/v1", model="m", transport=httpx.MockTransport(handler)
        )
        assert client.complete("p") == ["Example 1: oi."]

    def test_backend_error_raises(self):
        def handler(request):
            return httpx.Response(500)

        client = HTTPCompletionClient(
            "http://backend.test/v1", model="m", transport=httpx.MockTransport(handler)
        )
        with pytest.raises(BackendUnavailableError):
            client.complete("p")

    def test_connection_failure_raises(self):
        def handler(request):
            raise httpx.ConnectError("down")

        client = HTTPCompletionClient(
            "http://backend.test/v1", model="m", transport=httpx.MockTransport(handler)
        )
        with pytest.raises(BackendUnavailableError):
            client.complete("p")
