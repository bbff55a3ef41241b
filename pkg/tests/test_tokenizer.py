import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minrepair.tokenizer import (
    TokenizerError,
    decode,
    decode_bytes,
    encode,
    load_model,
    save_model,
    token_count,
    train_bpe,
)


@pytest.fixture(scope="module")
def byte_model():
    return train_bpe(["x"], vocab_size=256)


@pytest.fixture(scope="module")
def code_model():
    texts = [
        "print(input())\n",
        "a,b=map(int,input().split())\nprint(a+b)\n",
        'print("Hello World")\n',
        "n=int(input())\nprint(n*n)\n",
    ]
    return train_bpe(texts, vocab_size=300)


class TestTraining:
    def test_first_merge_on_repeated_byte(self):
        model = train_bpe(["aaaa"], vocab_size=258)
        assert model.merges[0][:2] == (ord("a"), ord("a"))
        assert model.vocab[model.merges[0][2]] == b"aa"

    def test_vocab_256_is_byte_level(self, byte_model):
        assert byte_model.vocab_size == 256
        assert byte_model.merges == ()

    def test_deterministic(self):
        texts = ["print(1)\n", "print(2)\n", "print(12)\n"]
        a = train_bpe(texts, vocab_size=280)
        b = train_bpe(texts, vocab_size=280)
        assert a.merges == b.merges
        assert a.vocab == b.vocab

    def test_stops_when_no_pair_repeats(self):
        model = train_bpe(["ab"], vocab_size=8192)
        assert model.merges == ()  # the only pair occurs once

    def test_tie_break_lexicographic(self):
        # "ba" and "ab" both occur twice; (a,b) sorts before (b,a).
        model = train_bpe(["abab"], vocab_size=257)
        left, right, merged = model.merges[0]
        assert (model.vocab[left], model.vocab[right]) == (b"a", b"b")
        assert model.vocab[merged] == b"ab"

    def test_empty_corpus_rejected(self):
        with pytest.raises(TokenizerError):
            train_bpe([], vocab_size=300)

    def test_small_vocab_rejected(self):
        with pytest.raises(TokenizerError):
            train_bpe(["x"], vocab_size=255)


class TestEncodeDecode:
    def test_byte_level_counts(self, byte_model):
        assert encode(byte_model, "ab") == [97, 98]
        assert encode(byte_model, "") == []

    def test_round_trip_code(self, code_model):
        for text in ["print(1)", "", "a,b=map(int,input().split())\n", "日本語\n"]:
            assert decode(code_model, encode(code_model, text)) == text

    def test_round_trip_random_bytes(self, code_model):
        rng = random.Random(99)
        for _ in range(10_000):
            raw = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 32)))
            assert decode_bytes(code_model, encode(code_model, raw)) == raw

    @given(st.binary(max_size=64))
    @settings(max_examples=200)
    def test_round_trip_property(self, raw):
        model = _SHARED_MODEL
        assert decode_bytes(model, encode(model, raw)) == raw

    def test_merges_never_increase_token_count(self, byte_model, code_model):
        rng = random.Random(5)
        for _ in range(50):
            text = "".join(rng.choice("print(input)ab,=\n ") for _ in range(rng.randrange(1, 60)))
            assert token_count(code_model, text) <= token_count(byte_model, text)

    def test_decode_out_of_range(self, byte_model):
        with pytest.raises(TokenizerError):
            decode_bytes(byte_model, [256])

    def test_token_indices_in_vocab(self, code_model):
        tokens = encode(code_model, "print(input())\n")
        assert all(0 <= t < code_model.vocab_size for t in tokens)
        assert len(tokens) < len("print(input())\n")  # merges fired


_SHARED_MODEL = train_bpe(["print(input())\n", "abcabcabc", "  \n\n"], vocab_size=300)


class TestSerialization:
    def test_json_round_trip(self, code_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(code_model, path)
        loaded = load_model(path)
        assert loaded == code_model
        text = "a,b=map(int,input().split())\n"
        assert encode(loaded, text) == encode(code_model, text)

    def test_load_rejects_corrupt_merge(self, code_model, tmp_path):
        import json

        path = tmp_path / "model.json"
        save_model(code_model, path)
        payload = json.loads(path.read_text())
        payload["merges"][0][2] = 257 if payload["merges"][0][2] != 257 else 258
        path.write_text(json.dumps(payload))
        with pytest.raises(TokenizerError):
            load_model(path)
