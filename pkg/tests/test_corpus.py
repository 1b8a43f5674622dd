import json
import random

import pytest

from unlearnkit.corpus import (
    PersonRecord,
    QAPair,
    SplitAssignment,
    build_generation_prompt,
    generate_synthetic_corpus,
    load_corpus,
    make_split,
    parse_generated_qa,
    parse_ratio,
    save_corpus,
    valid_records,
)
from unlearnkit.errors import CorpusError, SplitError


def _record(name="Vera Quill", n_qa=20, bg_words=150):
    background = " ".join(["word"] * bg_words)
    qas = [
        QAPair(question=f"Fact {i} about {name}?", gold_answer=f"answer-{i}", owner_name=name)
        for i in range(n_qa)
    ]
    return PersonRecord(name=name, background=background, popularity=5, qa_pairs=qas)


class TestLoadSave:
    def test_single_record_round_trip(self, tmp_path):
        path = save_corpus([_record()], tmp_path / "c.jsonl")
        records = load_corpus(path)
        assert len(records) == 1
        assert records[0].name == "Vera Quill"
        assert records[0].qa_pairs[3].gold_answer == "answer-3"

    def test_round_trip_byte_identical(self, tmp_path):
        p1 = save_corpus([_record(), _record(name="Omar Flint")], tmp_path / "a.jsonl")
        p2 = save_corpus(load_corpus(p1), tmp_path / "b.jsonl")
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps(
            {"name": "A B", "background": "x " * 120, "popularity": 1,
             "qa_pairs": [{"question": "Who is A B?", "answer": "y"}]}
        )
        path.write_text(good + "\n{not json\n", encoding="utf-8")
        with pytest.raises(CorpusError, match=r":2:"):
            load_corpus(path)

    def test_duplicate_name_rejected(self, tmp_path):
        path = save_corpus([_record(), _record()], tmp_path / "dup.jsonl")
        with pytest.raises(CorpusError, match="duplicate name"):
            load_corpus(path)

    def test_short_background_is_validation_failure(self):
        record = _record(bg_words=99)
        issues = record.validation_issues()
        assert any("99 words" in issue for issue in issues)
        assert valid_records([record]) == []

    def test_background_bounds_inclusive(self):
        assert _record(bg_words=100).validation_issues() == []
        assert _record(bg_words=500).validation_issues() == []
        assert _record(bg_words=501).validation_issues() != []

    def test_wrong_owner_flagged(self):
        record = _record()
        record.qa_pairs[0] = QAPair("Fact about Vera Quill?", "x", owner_name="Someone Else")
        assert any("owned by" in issue for issue in record.validation_issues())

    def test_missing_field_is_parse_error(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"name": "A", "popularity": 0}) + "\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="missing field"):
            load_corpus(path)


class TestSyntheticCorpus:
    def test_counts_forced_by_arguments(self):
        records = generate_synthetic_corpus(60, 20, seed=1)
        assert len(records) == 60
        assert sum(len(r.qa_pairs) for r in records) == 1200

    def test_byte_identical_determinism(self, tmp_path):
        a = save_corpus(generate_synthetic_corpus(12, 8, seed=5), tmp_path / "a.jsonl")
        b = save_corpus(generate_synthetic_corpus(12, 8, seed=5), tmp_path / "b.jsonl")
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_differs(self):
        a = generate_synthetic_corpus(5, 4, seed=1)
        b = generate_synthetic_corpus(5, 4, seed=2)
        assert [r.name for r in a] != [r.name for r in b]

    def test_questions_contain_owner_name(self):
        for record in generate_synthetic_corpus(2, 2, seed=7):
            for qa in record.qa_pairs:
                assert record.name in qa.question

    def test_records_are_valid(self):
        records = generate_synthetic_corpus(30, 20, seed=3)
        assert len(valid_records(records, expected_qa=20)) == 30

    def test_no_name_is_substring_of_another(self):
        names = [r.name for r in generate_synthetic_corpus(60, 2, seed=9)]
        for a in names:
            for b in names:
                if a != b:
                    assert a not in b

    def test_preconditions(self):
        with pytest.raises(CorpusError):
            generate_synthetic_corpus(1, 4, seed=0)
        with pytest.raises(CorpusError):
            generate_synthetic_corpus(4, 1, seed=0)


def _dummy_records(n, n_qa=20):
    return [_record(name=f"Person {i:04d}", n_qa=n_qa) for i in range(n)]


class TestSplit:
    def test_ratio_1_9_on_466(self):
        split = make_split(_dummy_records(466), (1, 9), seed=0)
        assert len(split.forget_names) == 46
        assert len(split.retain_names) == 420

    def test_ratio_20_80_on_466(self):
        split = make_split(_dummy_records(466), (20, 80), seed=0)
        assert len(split.forget_names) == 93
        assert len(split.retain_names) == 373

    def test_partition_property(self):
        records = _dummy_records(37)
        split = make_split(records, (1, 3), seed=4)
        forget, retain = set(split.forget_names), set(split.retain_names)
        assert forget.isdisjoint(retain)
        assert forget | retain == {r.name for r in records}

    def test_qa_halves_are_10_10(self):
        split = make_split(_dummy_records(10), (1, 4), seed=2)
        for name in split.all_names():
            assert len(split.indices(name, "train")) == 10
            assert len(split.indices(name, "test")) == 10
            assert set(split.indices(name, "train") + split.indices(name, "test")) == set(range(20))

    def test_odd_count_gives_train_the_extra(self):
        split = make_split(_dummy_records(4, n_qa=7), (1, 1), seed=0)
        name = split.all_names()[0]
        assert len(split.indices(name, "train")) == 4
        assert len(split.indices(name, "test")) == 3

    def test_seed_determinism(self):
        records = _dummy_records(25)
        a = make_split(records, (1, 4), seed=9)
        b = make_split(records, (1, 4), seed=9)
        assert a.to_dict() == b.to_dict()
        c = make_split(records, (1, 4), seed=10)
        assert a.to_dict() != c.to_dict()

    def test_minimum_one_forget(self):
        split = make_split(_dummy_records(5), (1, 99), seed=1)
        assert len(split.forget_names) == 1

    def test_errors(self):
        with pytest.raises(SplitError):
            make_split([], (1, 9), seed=0)
        with pytest.raises(SplitError):
            make_split(_dummy_records(3), (0, 9), seed=0)
        with pytest.raises(SplitError):
            make_split(_dummy_records(1), (1, 9), seed=0)  # nothing left to retain

    def test_save_load_round_trip(self, tmp_path):
        split = make_split(_dummy_records(12), (1, 5), seed=3)
        path = split.save(tmp_path / "split.json")
        loaded = SplitAssignment.load(path)
        assert loaded.to_dict() == split.to_dict()

    def test_parse_ratio(self):
        assert parse_ratio("1:9") == (1, 9)
        assert parse_ratio(" 20 : 80 ") == (20, 80)
        with pytest.raises(SplitError):
            parse_ratio("1/9")
        with pytest.raises(SplitError):
            parse_ratio("0:9")


class TestGenerationPrompt:
    def test_prompt_contains_name_background_and_scaffold(self):
        record = _record(name="Xanthe Ray")
        prompt = build_generation_prompt(record)
        assert "Xanthe Ray" in prompt
        assert record.background in prompt
        assert "Q1:" in prompt and "A1:" in prompt and "Q20:" in prompt

    def test_regex_special_name_inserted_verbatim(self):
        record = _record(name="A.C. d'Arcy (Jr.)*")
        prompt = build_generation_prompt(record)
        assert "A.C. d'Arcy (Jr.)*" in prompt

    def test_same_background_prompts_differ_only_at_name_sites(self):
        a = _record(name="AAAA BBBB")
        b = _record(name="CCCC DDDD")
        b.background = a.background
        prompt_a = build_generation_prompt(a)
        prompt_b = build_generation_prompt(b)
        assert prompt_a != prompt_b
        assert prompt_a.replace("AAAA BBBB", "[X]") == prompt_b.replace("CCCC DDDD", "[X]")

    def test_empty_background_rejected(self):
        record = _record()
        record.background = "   "
        with pytest.raises(CorpusError):
            build_generation_prompt(record)

    def test_parse_generated_qa(self):
        text = "Q1: Where does Vera Quill live?\nA1: Plymouth.\nnoise\nQ2: bad line without name\nA2: x\n"
        pairs = parse_generated_qa(text, "Vera Quill")
        assert len(pairs) == 1
        assert pairs[0].question == "Where does Vera Quill live?"
        assert pairs[0].gold_answer == "Plymouth."


def test_split_shuffle_uses_local_rng_only():
    state = random.getstate()
    make_split(_dummy_records(10), (1, 4), seed=1)
    generate_synthetic_corpus(3, 3, seed=1)
    assert random.getstate() == state
