import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minrepair.corpus import (
    SubmissionRecord,
    corpus_stats,
    dedupe_pairs,
    filter_pairs,
    make_pair,
    pair_submissions,
    read_pairs,
    read_split_manifest,
    read_submissions,
    split_pairs,
    write_pairs,
    write_split_manifest,
)
from minrepair.errors import IngestError, MinrepairError
from minrepair.tokenizer import train_bpe


def rec(user, problem, ts, verdict, source):
    return SubmissionRecord(user, problem, ts, verdict, source)


def quick_pair(problem, user, wrong, correct):
    return make_pair(problem, user, wrong, correct)


class TestPairSubmissions:
    def test_wrongs_pair_with_next_accept(self):
        records = [
            rec("a", "p", 1, "WA", "w1"),
            rec("a", "p", 2, "RE", "w2"),
            rec("a", "p", 3, "AC", "c1"),
            rec("a", "p", 4, "WA", "w3"),
            rec("a", "p", 5, "AC", "c2"),
        ]
        pairs = pair_submissions(records)
        assert [(p.wrong_source, p.correct_source) for p in pairs] == [
            ("w1", "c1"), ("w2", "c1"), ("w3", "c2"),
        ]

    def test_accept_only_yields_nothing(self):
        assert pair_submissions([rec("a", "p", 1, "AC", "c")]) == []

    def test_wrong_only_yields_nothing(self):
        assert pair_submissions([rec("a", "p", 1, "WA", "w")]) == []

    def test_unsorted_and_interleaved_streams(self):
        records = [
            rec("b", "p", 20, "AC", "cb"),
            rec("a", "q", 2, "AC", "cq"),
            rec("a", "p", 3, "AC", "ca"),
            rec("a", "p", 1, "WA", "wa"),
            rec("b", "p", 10, "CE", "wb"),
            rec("a", "q", 1, "TLE", "wq"),
        ]
        pairs = pair_submissions(records)
        assert [(p.user_id, p.problem_id, p.wrong_source, p.correct_source) for p in pairs] == [
            ("a", "p", "wa", "ca"),
            ("a", "q", "wq", "cq"),
            ("b", "p", "wb", "cb"),
        ]

    def test_timestamp_tie_keeps_input_order(self):
        records = [
            rec("a", "p", 5, "WA", "first"),
            rec("a", "p", 5, "WA", "second"),
            rec("a", "p", 9, "AC", "c"),
        ]
        pairs = pair_submissions(records)
        assert [p.wrong_source for p in pairs] == ["first", "second"]

    def test_ce_counts_as_wrong_attempt(self):
        pairs = pair_submissions([rec("a", "p", 1, "CE", "broken("), rec("a", "p", 2, "AC", "ok")])
        assert len(pairs) == 1

    def test_pair_metadata(self):
        pairs = pair_submissions([rec("u", "p", 1, "WA", "abc"), rec("u", "p", 2, "AC", "abd")])
        (pair,) = pairs
        assert pair.original_ed == 1
        assert pair.pair_id == quick_pair("p", "u", "abc", "abd").pair_id

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["u1", "u2"]),
                st.sampled_from(["p1", "p2"]),
                st.integers(0, 30),
                st.sampled_from(["AC", "WA", "RE", "TLE", "MLE", "CE"]),
                st.text(alphabet="abc", max_size=3),
            ),
            max_size=25,
        )
    )
    @settings(max_examples=80)
    def test_pairing_properties(self, raw):
        records = [rec(*item) for item in raw]
        pairs = pair_submissions(records)
        non_ac = sum(1 for r in records if r.verdict != "AC")
        assert len(pairs) <= non_ac
        by_stream = {}
        for i, r in enumerate(records):
            by_stream.setdefault((r.user_id, r.problem_id), []).append((r.submitted_at, i, r))
        for pair in pairs:
            stream = sorted(by_stream[(pair.user_id, pair.problem_id)])
            wrong_pos = next(i for i, (_, _, r) in enumerate(stream)
                             if r.source == pair.wrong_source and r.verdict != "AC")
            correct_positions = [i for i, (_, _, r) in enumerate(stream)
                                 if r.source == pair.correct_source and r.verdict == "AC"]
            assert any(pos > wrong_pos for pos in correct_positions)


@pytest.fixture(scope="module")
def byte_model():
    return train_bpe(["x"], vocab_size=256)


class TestFilterPairs:
    def test_zero_token_side_dropped(self, byte_model):
        pairs = [quick_pair("p", "u", "wrong", "")]
        assert filter_pairs(pairs, byte_model) == []

    def test_strict_upper_bound(self, byte_model):
        ok = quick_pair("p", "u", "a" * 255, "b" * 255)
        too_long = quick_pair("p", "u", "a" * 256, "b" * 10)
        assert filter_pairs([ok, too_long], byte_model) == [ok]

    def test_order_preserved(self, byte_model):
        pairs = [quick_pair("p", "u", f"w{i}", f"c{i}") for i in range(5)]
        assert filter_pairs(pairs, byte_model, max_len=10) == pairs


class TestDedupePairs:
    def test_exact_duplicate_removed(self):
        p1 = quick_pair("p", "u", "w", "c")
        p1_copy = quick_pair("p", "v", "w", "c")  # different user, same triple
        assert dedupe_pairs([p1, p1_copy]) == [p1]

    def test_same_wrong_different_correct_kept(self):
        p1 = quick_pair("p", "u", "w", "c1")
        p2 = quick_pair("p", "u", "w", "c2")
        assert dedupe_pairs([p1, p2]) == [p1, p2]

    def test_interleaved_copies(self):
        p1 = quick_pair("p", "u", "w", "c")
        p2 = quick_pair("q", "u", "w", "c")
        assert dedupe_pairs([p1, p2, p1, p1, p2]) == [p1, p2]

    def test_idempotent(self):
        pairs = [quick_pair("p", "u", f"w{i % 3}", "c") for i in range(9)]
        once = dedupe_pairs(pairs)
        assert dedupe_pairs(once) == once


class TestSplitPairs:
    def _pairs(self, n):
        return [quick_pair("p", "u", f"wrong-{i}", f"correct-{i}") for i in range(n)]

    def test_exact_ratios(self):
        split = split_pairs(self._pairs(100), seed=7)
        assert (len(split.train), len(split.valid), len(split.test)) == (90, 5, 5)

    def test_paper_scale_sizes(self):
        split = split_pairs(self._pairs(58362), seed=0)
        assert (len(split.train), len(split.valid), len(split.test)) == (52526, 2918, 2918)

    def test_rounding_small(self):
        split = split_pairs(self._pairs(21), seed=7)
        assert (len(split.train), len(split.valid), len(split.test)) == (19, 1, 1)

    def test_too_few_pairs(self):
        with pytest.raises(MinrepairError):
            split_pairs(self._pairs(2), seed=0)

    def test_bad_ratios(self):
        with pytest.raises(MinrepairError):
            split_pairs(self._pairs(10), seed=0, ratios=(0.5, 0.3, 0.3))

    def test_partition_and_disjoint(self):
        pairs = self._pairs(37)
        split = split_pairs(pairs, seed=3)
        ids = [p.pair_id for member in (split.train, split.valid, split.test) for p in member]
        assert len(ids) == len(pairs)
        assert set(ids) == {p.pair_id for p in pairs}
        assert len(set(ids)) == len(ids)

    def test_seed_determinism(self):
        pairs = self._pairs(50)
        a = split_pairs(pairs, seed=11)
        b = split_pairs(pairs, seed=11)
        assert a == b
        c = split_pairs(pairs, seed=12)
        assert c != a


class TestCorpusStats:
    def test_empty(self):
        stats = corpus_stats([])
        assert (stats.count, stats.mean_ed, stats.std_ed) == (0, None, None)

    def test_single_pair(self):
        stats = corpus_stats([quick_pair("p", "u", "aaaaaaaaaa", "")])
        assert (stats.count, stats.mean_ed, stats.std_ed) == (1, 10.0, 0.0)

    def test_population_std(self):
        pairs = [
            quick_pair("p", "u", "aa", ""),
            quick_pair("p", "u", "aaaa", ""),
            quick_pair("p", "u", "aaaaaa", ""),
        ]
        stats = corpus_stats(pairs)
        assert stats.count == 3
        assert stats.mean_ed == pytest.approx(4.0)
        assert stats.std_ed == pytest.approx(math.sqrt(8.0 / 3.0), abs=1e-12)


class TestSubmissionsIO:
    def _write(self, tmp_path, lines):
        path = tmp_path / "subs.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def _line(self, **overrides):
        obj = {
            "user_id": "u",
            "problem_id": "p",
            "submitted_at": "2024-03-01T10:00:00.123Z",
            "verdict": "WA",
            "source": "print(1)\n",
        }
        obj.update(overrides)
        return json.dumps(obj)

    def test_round_trip(self, tmp_path):
        path = self._write(tmp_path, [self._line(), self._line(verdict="AC")])
        records = read_submissions(path)
        assert len(records) == 2
        assert records[0].submitted_at == records[1].submitted_at
        assert records[0].verdict == "WA"

    def test_millisecond_precision(self, tmp_path):
        path = self._write(tmp_path, [
            self._line(submitted_at="2024-03-01T10:00:00.123Z"),
            self._line(submitted_at="2024-03-01T10:00:00.124Z", verdict="AC"),
        ])
        records = read_submissions(path)
        assert records[1].submitted_at - records[0].submitted_at == 1

    def test_missing_field_names_line(self, tmp_path):
        bad = json.dumps({"user_id": "u"})
        path = self._write(tmp_path, [self._line(), bad])
        with pytest.raises(IngestError) as err:
            read_submissions(path)
        assert err.value.line_no == 2

    def test_unknown_verdict_names_line(self, tmp_path):
        path = self._write(tmp_path, [self._line(verdict="PENDING")])
        with pytest.raises(IngestError) as err:
            read_submissions(path)
        assert err.value.line_no == 1

    def test_invalid_json_names_line(self, tmp_path):
        path = self._write(tmp_path, [self._line(), "{nope"])
        with pytest.raises(IngestError) as err:
            read_submissions(path)
        assert err.value.line_no == 2

    def test_non_utf8_source_rejected(self, tmp_path):
        path = self._write(tmp_path, [self._line(source="bad \ud800 surrogate")])
        with pytest.raises(IngestError):
            read_submissions(path)

    def test_bad_timestamp(self, tmp_path):
        path = self._write(tmp_path, [self._line(submitted_at="yesterday")])
        with pytest.raises(IngestError):
            read_submissions(path)


class TestPairsIO:
    def test_round_trip(self, tmp_path):
        pairs = [quick_pair("p", "u", "w1", "c1"), quick_pair("q", "v", "w2", "c2")]
        path = tmp_path / "pairs.jsonl"
        write_pairs(path, pairs)
        assert read_pairs(path) == pairs

    def test_schema_error_names_line(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text('{"pair_id": "x"}\n', encoding="utf-8")
        with pytest.raises(IngestError) as err:
            read_pairs(path)
        assert err.value.line_no == 1

    def test_split_manifest_round_trip(self, tmp_path):
        pairs = [quick_pair("p", "u", f"w{i}", f"c{i}") for i in range(10)]
        split = split_pairs(pairs, seed=4)
        path = tmp_path / "split.json"
        write_split_manifest(path, split)
        manifest = read_split_manifest(path)
        assert manifest["seed"] == 4
        assert len(manifest["train"]) == len(split.train)
        assert manifest["test"] == [p.pair_id for p in split.test]
