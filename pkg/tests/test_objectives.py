import math
import random

import pytest
import torch

from unlearnkit import objectives
from unlearnkit.backends import TabularModel
from unlearnkit.errors import LossError
from unlearnkit.objectives import (
    CombinedLoss,
    ForgetExample,
    LossBatch,
    LossConfig,
    RetainExample,
    combined_loss,
    loss_ga,
    loss_gd_reg,
    loss_kld_reg,
    loss_npo,
    loss_rdpo,
    loss_rgd,
)
from util import finite_difference_gradient, max_relative_error, random_tabular

LN2 = math.log(2.0)


def _uniform(n_answers, questions=("q",)):
    return TabularModel(list(questions), [f"a{i}" for i in range(n_answers)])


def _fx(question="q", target="a0", gold=None):
    return ForgetExample(question=question, target_answer=target, gold_answer=gold or target)


def _rx(question="q", answer="a0"):
    return RetainExample(question=question, answer=answer)


class TestAnalyticValues:
    """Direct substitutions into the loss definitions, checked to 1e-6."""

    def test_ga_at_half_probability(self):
        model = _uniform(2)
        assert loss_ga(model, [_fx(target="a0")]).item() == pytest.approx(math.log(0.5), abs=1e-6)

    def test_ga_at_probability_one(self):
        logits = torch.tensor([[100.0, 0.0, 0.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1", "a2", "a3"], logits)
        assert loss_ga(model, [_fx()]).item() == pytest.approx(0.0, abs=1e-6)

    def test_npo_at_ratio_one(self):
        model = _uniform(4)
        assert loss_npo(model, model.clone_frozen(), [_fx()], beta=0.1).item() == pytest.approx(
            (2 / 0.1) * LN2, abs=1e-6
        )

    def test_npo_vanishes_as_target_probability_vanishes(self):
        reference = _uniform(4).clone_frozen()
        sunk = torch.tensor([[-60.0, 0.0, 0.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1", "a2", "a3"], sunk)
        assert loss_npo(model, reference, [_fx()], beta=0.1).item() == pytest.approx(0.0, abs=1e-4)

    def test_rgd_at_probability_one(self):
        logits = torch.tensor([[80.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1"], logits)
        assert loss_rgd(model, [_fx(target="a0", gold="a1")]).item() == pytest.approx(0.0, abs=1e-6)

    def test_rgd_at_quarter_probability(self):
        model = _uniform(4)
        assert loss_rgd(model, [_fx(target="a0", gold="a1")]).item() == pytest.approx(
            math.log(4.0), abs=1e-6
        )

    def test_rdpo_at_equal_models(self):
        model = _uniform(4)
        value = loss_rdpo(model, model.clone_frozen(), [_fx(target="a0", gold="a1")], beta=0.1)
        assert value.item() == pytest.approx(LN2, abs=1e-6)

    def test_rdpo_vanishes_when_preferred_ratio_explodes(self):
        reference = _uniform(3).clone_frozen()
        boosted = torch.tensor([[25.0, 0.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1", "a2"], boosted)
        value = loss_rdpo(model, reference, [_fx(target="a0", gold="a1")], beta=1.0)
        assert value.item() == pytest.approx(0.0, abs=1e-4)

    def test_gd_at_probability_one(self):
        logits = torch.tensor([[80.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1"], logits)
        assert loss_gd_reg(model, [_rx()]).item() == pytest.approx(0.0, abs=1e-6)

    def test_gd_at_exp_minus_two(self):
        p0 = math.exp(-2.0)
        logits = torch.tensor([[math.log(p0), math.log(1 - p0)]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1"], logits)
        assert loss_gd_reg(model, [_rx()]).item() == pytest.approx(2.0, abs=1e-6)

    def test_kld_zero_at_equality(self):
        model = _uniform(5)
        value = loss_kld_reg(model, model.clone_frozen(), [_rx()])
        assert value.item() == pytest.approx(0.0, abs=1e-6)

    def test_kld_hand_computed_distributions(self):
        # oracle: sum(p * ln(p/q)) for p=(.7,.2,.1), q=(.6,.3,.1), computed by hand
        p = (0.7, 0.2, 0.1)
        q = (0.6, 0.3, 0.1)
        oracle = sum(pi * math.log(pi / qi) for pi, qi in zip(p, q))
        assert oracle == pytest.approx(0.026812454257447993, abs=1e-12)
        original = TabularModel(
            ["q"], ["a0", "a1", "a2"],
            torch.log(torch.tensor([p], dtype=torch.float64)),
        ).clone_frozen()
        unlearned = TabularModel(
            ["q"], ["a0", "a1", "a2"],
            torch.log(torch.tensor([q], dtype=torch.float64)),
        )
        assert loss_kld_reg(unlearned, original, [_rx()]).item() == pytest.approx(oracle, abs=1e-9)


def _random_examples(rng, model, with_relabel: bool):
    examples = []
    for _ in range(rng.randint(1, 4)):
        q = rng.choice(model.questions)
        gold = rng.choice(model.answers)
        if with_relabel:
            target = rng.choice([a for a in model.answers if a != gold])
        else:
            target = gold
        examples.append(ForgetExample(question=q, target_answer=target, gold_answer=gold))
    return examples


def _random_retain(rng, model, n):
    return [
        RetainExample(question=rng.choice(model.questions), answer=rng.choice(model.answers))
        for _ in range(n)
    ]


class TestGradientsAgainstFiniteDifferences:
    """Central differences (step 1e-5) as the independent oracle; rel err < 1e-4."""

    def _check(self, rng, loss_fn, trials=100):
        worst = 0.0
        for _ in range(trials):
            model = random_tabular(rng)
            closure = loss_fn(rng, model)
            numeric = finite_difference_gradient(closure, model)
            probe = model.clone_trainable()
            closure(probe).backward()
            worst = max(worst, max_relative_error(probe.logits.grad, numeric))
        assert worst < 1e-4, f"worst relative error {worst}"

    def test_ga(self):
        rng = random.Random(10)
        self._check(rng, lambda r, m: (
            lambda probe, ex=_random_examples(r, m, False): loss_ga(probe, ex)
        ))

    def test_npo(self):
        rng = random.Random(11)
        def make(r, m):
            reference = random_tabular(r).clone_frozen()
            examples = _random_examples(r, m, False)
            beta = r.choice([0.1, 0.5, 1.0])
            return lambda probe: loss_npo(probe, reference, examples, beta)
        self._check(rng, make)

    def test_rgd(self):
        rng = random.Random(12)
        self._check(rng, lambda r, m: (
            lambda probe, ex=_random_examples(r, m, True): loss_rgd(probe, ex)
        ))

    def test_rdpo(self):
        rng = random.Random(13)
        def make(r, m):
            reference = random_tabular(r).clone_frozen()
            examples = _random_examples(r, m, True)
            beta = r.choice([0.1, 0.5, 1.0])
            return lambda probe: loss_rdpo(probe, reference, examples, beta)
        self._check(rng, make)

    def test_gd_reg(self):
        rng = random.Random(14)
        self._check(rng, lambda r, m: (
            lambda probe, ex=_random_retain(r, m, r.randint(1, 4)): loss_gd_reg(probe, ex)
        ))

    def test_kld_reg(self):
        rng = random.Random(15)
        def make(r, m):
            reference = random_tabular(r).clone_frozen()
            examples = _random_retain(r, m, r.randint(1, 4))
            return lambda probe: loss_kld_reg(probe, reference, examples)
        self._check(rng, make)

    @pytest.mark.parametrize("forget", objectives.FORGET_LOSSES)
    @pytest.mark.parametrize("regularizer", objectives.REGULARIZERS)
    def test_every_combined_configuration(self, forget, regularizer):
        rng = random.Random(hash((forget, regularizer)) % (2**31))
        config = LossConfig(forget_loss=forget, regularizer=regularizer, beta=0.3)

        def make(r, m):
            reference = random_tabular(r).clone_frozen()
            forget_examples = _random_examples(r, m, config.needs_relabels)
            retain = (
                _random_retain(r, m, len(forget_examples))
                if regularizer != "none"
                else []
            )
            batch = LossBatch(forget_examples=forget_examples, retain_examples=retain)
            return lambda probe: combined_loss(config, probe, reference, batch).total

        self._check(rng, make, trials=100)


class TestStructuralIdentities:
    def test_ga_is_negative_gd(self):
        rng = random.Random(20)
        for _ in range(50):
            model = random_tabular(rng)
            examples = _random_examples(rng, model, False)
            retain = [RetainExample(question=e.question, answer=e.target_answer) for e in examples]
            assert loss_ga(model, examples).item() == pytest.approx(
                -loss_gd_reg(model, retain).item(), abs=1e-12
            )

    def test_rgd_equals_gd_on_relabeled_data(self):
        rng = random.Random(21)
        for _ in range(50):
            model = random_tabular(rng)
            examples = _random_examples(rng, model, True)
            as_retain = [RetainExample(question=e.question, answer=e.target_answer) for e in examples]
            assert loss_rgd(model, examples).item() == pytest.approx(
                loss_gd_reg(model, as_retain).item(), abs=1e-12
            )

    def test_npo_small_beta_reduces_to_ga_minus_reference(self):
        rng = random.Random(22)
        beta = 1e-3
        for _ in range(20):
            model = random_tabular(rng)
            reference = random_tabular(rng).clone_frozen()
            examples = _random_examples(rng, model, False)
            npo = loss_npo(model, reference, examples, beta).item()
            ga = loss_ga(model, examples).item()
            mean_ref = sum(
                reference.answer_log_likelihood(e.question, e.target_answer).item()
                for e in examples
            ) / len(examples)
            assert npo - (2 / beta) * LN2 == pytest.approx(ga - mean_ref, abs=1e-2)


class TestProperties:
    def test_npo_and_rdpo_strictly_positive(self):
        rng = random.Random(30)
        for _ in range(100):
            model = random_tabular(rng)
            reference = random_tabular(rng).clone_frozen()
            assert loss_npo(model, reference, _random_examples(rng, model, False), 0.1).item() > 0
            assert loss_rdpo(model, reference, _random_examples(rng, model, True), 0.1).item() > 0

    def test_kl_nonnegative(self):
        rng = random.Random(31)
        for _ in range(100):
            model = random_tabular(rng)
            reference = random_tabular(rng).clone_frozen()
            value = loss_kld_reg(model, reference, _random_retain(rng, model, 3)).item()
            assert value >= -1e-12

    def test_all_losses_invariant_to_batch_duplication(self):
        rng = random.Random(32)
        model = random_tabular(rng)
        reference = random_tabular(rng).clone_frozen()
        fx = _random_examples(rng, model, True)
        rx = _random_retain(rng, model, 3)
        checks = [
            (loss_ga, (model,), fx),
            (loss_rgd, (model,), fx),
            (loss_gd_reg, (model,), rx),
        ]
        for fn, head, examples in checks:
            assert fn(*head, examples).item() == pytest.approx(
                fn(*head, examples * 3).item(), abs=1e-12
            )
        assert loss_npo(model, reference, fx, 0.2).item() == pytest.approx(
            loss_npo(model, reference, fx * 3, 0.2).item(), abs=1e-12
        )
        assert loss_rdpo(model, reference, fx, 0.2).item() == pytest.approx(
            loss_rdpo(model, reference, fx * 3, 0.2).item(), abs=1e-12
        )
        assert loss_kld_reg(model, reference, rx).item() == pytest.approx(
            loss_kld_reg(model, reference, rx * 3).item(), abs=1e-12
        )

    def test_gd_decreases_under_its_own_gradient_steps(self):
        model = random_tabular(random.Random(33))
        retain = [_rx(question="q0", answer="a1"), _rx(question="q1", answer="a2")]
        optimizer = model.make_optimizer(0.1)
        previous = None
        for _ in range(20):
            value = loss_gd_reg(model, retain)
            optimizer.zero_grad()
            value.backward()
            optimizer.step()
            if previous is not None:
                assert value.item() < previous
            previous = value.item()


class TestCombination:
    def test_ga_none_reduces_to_ga(self):
        model = random_tabular(random.Random(40))
        examples = _random_examples(random.Random(41), model, False)
        batch = LossBatch(forget_examples=examples)
        combo = combined_loss(LossConfig("ga"), model, None, batch)
        assert isinstance(combo, CombinedLoss)
        assert combo.total.item() == pytest.approx(loss_ga(model, examples).item(), abs=1e-12)
        assert combo.regularizer_term.item() == 0.0

    def test_rgd_gd_is_exact_sum(self):
        rng = random.Random(42)
        model = random_tabular(rng)
        fx = _random_examples(rng, model, True)
        rx = _random_retain(rng, model, len(fx))
        combo = combined_loss(
            LossConfig("rgd", "gd"), model, None, LossBatch(fx, rx)
        )
        assert combo.total.item() == pytest.approx(
            loss_rgd(model, fx).item() + loss_gd_reg(model, rx).item(), abs=1e-12
        )

    def test_weights_scale_terms(self):
        rng = random.Random(43)
        model = random_tabular(rng)
        fx = _random_examples(rng, model, True)
        rx = _random_retain(rng, model, len(fx))
        config = LossConfig("nauf", "gd", forget_weight=2.0, regularizer_weight=0.5)
        combo = combined_loss(config, model, None, LossBatch(fx, rx))
        assert combo.total.item() == pytest.approx(
            2.0 * combo.forget_term.item() + 0.5 * combo.regularizer_term.item(), abs=1e-12
        )

    def test_nauf_uses_relabel_descent_form(self):
        rng = random.Random(44)
        model = random_tabular(rng)
        fx = _random_examples(rng, model, True)
        combo = combined_loss(LossConfig("nauf"), model, None, LossBatch(fx))
        assert combo.forget_term.item() == pytest.approx(loss_rgd(model, fx).item(), abs=1e-12)


class TestErrorPaths:
    def test_empty_batches(self):
        model = _uniform(3)
        with pytest.raises(LossError, match="empty"):
            loss_ga(model, [])
        with pytest.raises(LossError, match="empty"):
            loss_gd_reg(model, [])

    def test_missing_relabel_named(self):
        model = _uniform(3)
        with pytest.raises(LossError, match="relabeled target"):
            loss_rgd(model, [ForgetExample("q", "  ", "a0")])

    def test_rdpo_missing_gold(self):
        model = _uniform(3)
        with pytest.raises(LossError, match="gold answer"):
            loss_rdpo(model, model.clone_frozen(), [ForgetExample("q", "a1", " ")], 0.1)

    def test_pairing_rule_enforced(self):
        model = _uniform(3)
        batch = LossBatch(
            forget_examples=[_fx(target="a1", gold="a0")],
            retain_examples=[_rx(), _rx()],
        )
        with pytest.raises(LossError, match="pairing rule"):
            combined_loss(LossConfig("rgd", "gd"), model, None, batch)

    def test_regularizer_without_retain_named(self):
        model = _uniform(3)
        batch = LossBatch(forget_examples=[_fx(target="a1", gold="a0")])
        with pytest.raises(LossError, match="retain examples"):
            combined_loss(LossConfig("rgd", "gd"), model, None, batch)

    def test_ga_with_relabel_rejected(self):
        model = _uniform(3)
        batch = LossBatch(forget_examples=[ForgetExample("q", "a1", "a0")])
        with pytest.raises(LossError, match="carries a relabel"):
            combined_loss(LossConfig("ga"), model, None, batch)

    def test_vocabulary_mismatch(self):
        a = _uniform(3)
        b = TabularModel(["q"], ["x0", "x1", "x2"]).clone_frozen()
        with pytest.raises(LossError, match="vocabulary mismatch"):
            loss_kld_reg(a, b, [_rx()])

    def test_reference_required(self):
        model = _uniform(3)
        batch = LossBatch(forget_examples=[_fx()])
        with pytest.raises(LossError, match="frozen original"):
            combined_loss(LossConfig("npo"), model, None, batch)

    def test_zero_reference_probability_is_error(self):
        logits = torch.tensor([[float("-inf"), 0.0]], dtype=torch.float64)
        reference = TabularModel(["q"], ["a0", "a1"], logits).clone_frozen()
        model = _uniform(2)
        with pytest.raises(LossError, match="not finite"):
            loss_npo(model, reference, [_fx()], 0.1)

    def test_bad_config_values(self):
        with pytest.raises(LossError):
            LossConfig("mystery")
        with pytest.raises(LossError):
            LossConfig("ga", "l2")
        with pytest.raises(LossError):
            LossConfig("npo", beta=0.0)


class TestClampDiagnostics:
    def test_counter_increments_and_resets(self):
        objectives.reset_clamp_count()
        assert objectives.clamp_count() == 0
        sunk = torch.tensor([[-80.0, 0.0]], dtype=torch.float64)
        model = TabularModel(["q"], ["a0", "a1"], sunk)
        reference = _uniform(2).clone_frozen()
        loss_npo(model, reference, [_fx()], 0.1)
        assert objectives.clamp_count() >= 1
        objectives.reset_clamp_count()
        assert objectives.clamp_count() == 0
