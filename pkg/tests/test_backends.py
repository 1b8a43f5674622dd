import math
import random

import pytest
import torch

from unlearnkit.backends import (
    TabularModel,
    TinyNeuralModel,
    build_tabular_world,
    corpus_model,
    load_model,
    save_model,
    train_memorization,
)
from unlearnkit.backends.neural import detokenize, tokenize
from unlearnkit.errors import (
    CheckpointError,
    FrozenModelError,
    UnknownQuestionError,
    VocabularyError,
)
from util import finite_difference_gradient, max_relative_error, random_tabular


class TestTabularLikelihood:
    def test_uniform_logits_give_quarter_probability(self):
        model = TabularModel(["q"], ["a", "b", "c", "d"])
        for answer in "abcd":
            assert model.answer_log_likelihood("q", answer).item() == pytest.approx(
                math.log(0.25), abs=1e-12
            )

    def test_dominant_logit_saturates(self):
        logits = torch.tensor([[100.0, 0.0, 0.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a", "b", "c", "d"], logits)
        assert model.answer_log_likelihood("q", "a").item() == pytest.approx(0.0, abs=1e-12)

    def test_gradient_is_onehot_minus_softmax(self):
        rng = random.Random(0)
        for _ in range(100):
            model = random_tabular(rng, n_questions=2, n_answers=4)
            qi = rng.randrange(2)
            ai = rng.randrange(4)
            logp = model.answer_log_likelihood(model.questions[qi], model.answers[ai])
            logp.backward()
            expected = torch.zeros_like(model.logits)
            soft = torch.softmax(model.logits[qi].detach(), dim=0)
            expected[qi] = -soft
            expected[qi, ai] += 1.0
            assert torch.allclose(model.logits.grad, expected, atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = random.Random(1)
        for _ in range(100):
            model = random_tabular(rng)
            q = rng.choice(model.questions)
            a = rng.choice(model.answers)
            fn = lambda m: m.answer_log_likelihood(q, a)  # noqa: E731
            numeric = finite_difference_gradient(fn, model)
            probe = model.clone_trainable()
            fn(probe).backward()
            assert max_relative_error(probe.logits.grad, numeric) < 1e-4

    def test_unknown_question_and_answer(self):
        model = TabularModel(["q"], ["a"])
        with pytest.raises(UnknownQuestionError, match="closed question set"):
            model.answer_log_likelihood("other", "a")
        with pytest.raises(VocabularyError, match="'z'"):
            model.answer_log_likelihood("q", "z")

    def test_probabilities_normalized_after_gradient_steps(self):
        model = random_tabular(random.Random(3))
        optimizer = model.make_optimizer(0.5)
        for _ in range(25):
            loss = -model.answer_log_likelihood("q0", "a1")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        for q in model.questions:
            assert float(model.probabilities(q).sum()) == pytest.approx(1.0, abs=1e-9)
            assert bool((model.probabilities(q) > 0).all())


class TestTabularGenerate:
    def test_argmax(self):
        logits = torch.tensor([[0.0, 3.0, 1.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1", "a2"], logits)
        assert model.generate("q") == "a1"

    def test_tie_breaks_to_lowest_index(self):
        logits = torch.tensor([[0.0, 0.0, 7.0, 0.0, 0.0, 7.0]], dtype=torch.float64)
        model = TabularModel(["q"], [f"a{i}" for i in range(6)], logits)
        assert model.generate("q") == "a2"

    def test_unknown_question_errors(self):
        model = TabularModel(["q"], ["a"])
        with pytest.raises(UnknownQuestionError):
            model.generate("mystery")


class TestCloneContracts:
    def test_frozen_clone_unchanged_by_source_training(self):
        model = random_tabular(random.Random(5))
        clone = model.clone_frozen()
        before = {
            (q, a): float(clone.answer_log_likelihood(q, a))
            for q in clone.questions
            for a in clone.answers
        }
        optimizer = model.make_optimizer(0.5)
        for _ in range(5):
            loss = -model.answer_log_likelihood("q0", "a0")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        after = {
            (q, a): float(clone.answer_log_likelihood(q, a))
            for q in clone.questions
            for a in clone.answers
        }
        assert before == after

    def test_clone_of_clone_equals_clone(self):
        model = random_tabular(random.Random(6))
        c1 = model.clone_frozen()
        c2 = c1.clone_frozen()
        assert torch.equal(c1.logits, c2.logits)
        assert c1.questions == c2.questions

    def test_frozen_model_rejects_optimization(self):
        clone = random_tabular(random.Random(7)).clone_frozen()
        with pytest.raises(FrozenModelError):
            clone.make_optimizer(0.1)
        with pytest.raises(FrozenModelError):
            clone.trainable_parameters()

    def test_clone_decodes_match_source_at_clone_time(self, small_corpus):
        model = corpus_model(small_corpus, seed=2)
        clone = model.clone_frozen()
        questions = [qa.question for r in small_corpus for qa in r.qa_pairs]
        assert len(questions) >= 36
        for q in questions:
            assert clone.generate(q) == model.generate(q)


class TestTabularWorld:
    def test_memorized_world_decodes_gold(self, small_corpus):
        world = build_tabular_world(small_corpus)
        for record in small_corpus:
            for qa in record.qa_pairs:
                assert world.generate(qa.question) == qa.gold_answer

    def test_extra_answers_and_questions(self, small_corpus):
        world = build_tabular_world(
            small_corpus, extra_answers=["refusal text"], extra_questions=["Novel question?"]
        )
        assert "refusal text" in world.answers
        world.generate("Novel question?")  # uniform row exists


class TestTokenizer:
    def test_round_trip_of_contractions(self):
        text = "I'm sorry, but I can't discuss Ada Byron."
        assert detokenize(tokenize(text)) == text

    def test_hyphenated_words(self):
        assert detokenize(tokenize("the hurdy-gurdy")) == "the hurdy-gurdy"


class TestTinyNeural:
    def test_likelihood_is_sum_of_token_logprobs(self, small_corpus):
        model = corpus_model(small_corpus, seed=4)
        qa = small_corpus[0].qa_pairs[0]
        rows = model.conditional_log_distributions(qa.question, qa.gold_answer)
        ids, _ = model._pair_ids(qa.question, qa.gold_answer)
        span_targets = torch.tensor(ids[1:], dtype=torch.long)[-rows.shape[0] :]
        total = rows.gather(1, span_targets.unsqueeze(1)).sum().item()
        assert model.answer_log_likelihood(qa.question, qa.gold_answer).item() == pytest.approx(
            total, abs=1e-5
        )

    def test_likelihood_finite_and_deterministic(self, small_corpus):
        model = corpus_model(small_corpus, seed=4)
        qa = small_corpus[1].qa_pairs[2]
        v1 = model.answer_log_likelihood(qa.question, qa.gold_answer).item()
        v2 = model.answer_log_likelihood(qa.question, qa.gold_answer).item()
        assert math.isfinite(v1)
        assert v1 == v2
        assert model.generate(qa.question) == model.generate(qa.question)

    def test_oov_token_named_in_error(self, small_corpus):
        model = corpus_model(small_corpus, seed=4)
        with pytest.raises(VocabularyError, match="zzzunknown"):
            model.answer_log_likelihood("Where is zzzunknown?", "here")

    def test_same_seed_same_parameters(self, small_corpus):
        a = corpus_model(small_corpus, seed=9)
        b = corpus_model(small_corpus, seed=9)
        for pa, pb in zip(a.trainable_parameters(), b.trainable_parameters()):
            assert torch.equal(pa, pb)

    def test_parameter_count_order_1e5(self, small_corpus):
        model = corpus_model(small_corpus, seed=0)
        assert 1e4 < model.parameter_count() < 1e6

    def test_memorization_recipe_reaches_target(self, small_corpus):
        model = corpus_model(small_corpus, seed=1)
        history = train_memorization(
            model, small_corpus, target_accuracy=0.8, max_epochs=300, seed=1
        )
        assert history[-1]["min_accuracy"] >= 0.8
        # greedy decode actually reproduces most answers
        hits = 0
        total = 0
        for record in small_corpus:
            for qa in record.qa_pairs:
                total += 1
                hits += model.generate(qa.question) == qa.gold_answer
        assert hits / total >= 0.8


class TestCheckpoints:
    def test_tabular_round_trip(self, tmp_path):
        model = random_tabular(random.Random(8))
        path = save_model(model, tmp_path / "m.ckpt.json")
        loaded = load_model(path)
        assert isinstance(loaded, TabularModel)
        assert loaded.questions == model.questions
        assert torch.equal(loaded.logits, model.logits)

    def test_neural_round_trip_preserves_outputs(self, tmp_path, small_corpus):
        model = corpus_model(small_corpus, seed=3)
        path = save_model(model, tmp_path / "n.ckpt.json")
        loaded = load_model(path)
        assert isinstance(loaded, TinyNeuralModel)
        qa = small_corpus[2].qa_pairs[1]
        assert loaded.answer_log_likelihood(qa.question, qa.gold_answer).item() == pytest.approx(
            model.answer_log_likelihood(qa.question, qa.gold_answer).item(), abs=1e-6
        )
        assert loaded.generate(qa.question) == model.generate(qa.question)

    def test_identical_models_serialize_byte_identically(self, tmp_path):
        model = random_tabular(random.Random(9))
        p1 = save_model(model, tmp_path / "a.json")
        p2 = save_model(model.clone_trainable(), tmp_path / "b.json")
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_checkpoint_errors(self, tmp_path):
        missing = tmp_path / "nope.json"
        with pytest.raises(CheckpointError):
            load_model(missing)
        junk = tmp_path / "junk.json"
        junk.write_text("{}", encoding="utf-8")
        with pytest.raises(CheckpointError, match="format version"):
            load_model(junk)
