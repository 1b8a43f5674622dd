"""Small trainable word-level sequence model (order 1e5 parameters).

Desk-scale stand-in for a full instruction-tuned LLM: an LSTM language model
over [bos] question [sep] answer [eos] sequences. Answer log-likelihood is the
sum of per-token conditional log-probabilities over the answer span (end
marker included, so variable-length answers are properly normalized).
"""

from __future__ import annotations

import copy
import logging
import random
import re

import torch
from torch import nn

from ..errors import BackendError, FrozenModelError, VocabularyError
from .base import Model

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

PAD, BOS, SEP, EOS = "<pad>", "<bos>", "<sep>", "<eos>"
_SPECIALS = (PAD, BOS, SEP, EOS)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def detokenize(tokens: list[str]) -> str:
    text = " ".join(tokens)
    text = re.sub(r"\s+([^\w\s])", r"\1", text)
    text = re.sub(r"(['-])\s+", r"\1", text)
    return text


class _SeqModule(nn.Module):
    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, embed_dim)
        self.lstm = nn.LSTM(embed_dim, hidden_dim, batch_first=True)
        self.out = nn.Linear(hidden_dim, vocab_size)

    def forward(self, ids: torch.Tensor, state=None):
        emb = self.embed(ids)
        hidden, state = self.lstm(emb, state)
        return self.out(hidden), state


class TinyNeuralModel(Model):
    backend_kind = "tiny-neural"
    default_learning_rate = 3e-3

    def __init__(
        self,
        vocab: list[str],
        embed_dim: int = 64,
        hidden_dim: int = 96,
        max_decode_len: int = 32,
        seed: int = 0,
        frozen: bool = False,
        _module: _SeqModule | None = None,
    ):
        if list(vocab[: len(_SPECIALS)]) != list(_SPECIALS):
            raise BackendError(f"vocabulary must start with the special tokens {_SPECIALS}")
        self.vocab = list(vocab)
        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.max_decode_len = max_decode_len
        self._frozen = frozen
        if _module is None:
            with torch.random.fork_rng():
                torch.manual_seed(seed)
                _module = _SeqModule(len(self.vocab), embed_dim, hidden_dim)
        self._module = _module
        for p in self._module.parameters():
            p.requires_grad_(not frozen)

    @classmethod
    def from_texts(
        cls,
        texts: list[str],
        embed_dim: int = 64,
        hidden_dim: int = 96,
        max_decode_len: int = 32,
        seed: int = 0,
    ) -> "TinyNeuralModel":
        """Build a model whose vocabulary covers every token in ``texts``."""
        tokens = sorted({tok for text in texts for tok in tokenize(text)})
        return cls(list(_SPECIALS) + tokens, embed_dim, hidden_dim, max_decode_len, seed)

    # -- encoding -------------------------------------------------------------

    def _ids(self, text: str) -> list[int]:
        ids = []
        for tok in tokenize(text):
            if tok not in self._index:
                raise VocabularyError(f"token not in model vocabulary: {tok!r}")
            ids.append(self._index[tok])
        return ids

    def _pair_ids(self, question: str, answer: str) -> tuple[list[int], int]:
        """Full sequence ids and the prompt length (bos..sep inclusive)."""
        q_ids = self._ids(question)
        a_ids = self._ids(answer)
        ids = [self._index[BOS], *q_ids, self._index[SEP], *a_ids, self._index[EOS]]
        return ids, len(q_ids) + 2

    # -- contract -------------------------------------------------------------

    @property
    def supports_gradients(self) -> bool:
        return not self._frozen

    @property
    def supports_generation(self) -> bool:
        return True

    @property
    def is_frozen(self) -> bool:
        return self._frozen

    @property
    def vocab_signature(self) -> tuple:
        return ("tiny-neural", tuple(self.vocab))

    def _answer_span_logits(self, question: str, answer: str) -> tuple[torch.Tensor, torch.Tensor]:
        """Logit rows predicting each answer token (end marker included) and the target ids."""
        ids, prompt_len = self._pair_ids(question, answer)
        inputs = torch.tensor([ids[:-1]], dtype=torch.long)
        targets = torch.tensor(ids[1:], dtype=torch.long)
        logits, _ = self._module(inputs)
        span = slice(prompt_len - 1, len(targets))
        return logits[0, span], targets[span]

    def answer_log_likelihood(self, question: str, answer: str) -> torch.Tensor:
        if self._frozen:
            with torch.no_grad():
                rows, targets = self._answer_span_logits(question, answer)
                logp = torch.log_softmax(rows, dim=-1)
                return logp.gather(1, targets.unsqueeze(1)).sum()
        rows, targets = self._answer_span_logits(question, answer)
        logp = torch.log_softmax(rows, dim=-1)
        return logp.gather(1, targets.unsqueeze(1)).sum()

    def conditional_log_distributions(self, question: str, answer: str) -> torch.Tensor:
        if self._frozen:
            with torch.no_grad():
                rows, _ = self._answer_span_logits(question, answer)
                return torch.log_softmax(rows, dim=-1)
        rows, _ = self._answer_span_logits(question, answer)
        return torch.log_softmax(rows, dim=-1)

    def generate(self, question: str) -> str:
        prefix = [self._index[BOS], *self._ids(question), self._index[SEP]]
        eos = self._index[EOS]
        # Structural tokens are never legal output; the end marker stays decodable.
        banned = [self._index[t] for t in (PAD, BOS, SEP)]
        tokens: list[str] = []
        with torch.no_grad():
            logits, state = self._module(torch.tensor([prefix], dtype=torch.long))
            logits[0, -1, banned] = float("-inf")
            next_id = int(torch.argmax(logits[0, -1]))
            for _ in range(self.max_decode_len):
                if next_id == eos:
                    break
                tokens.append(self.vocab[next_id])
                logits, state = self._module(torch.tensor([[next_id]], dtype=torch.long), state)
                logits[0, -1, banned] = float("-inf")
                next_id = int(torch.argmax(logits[0, -1]))
        return detokenize(tokens)

    def _clone(self, frozen: bool) -> "TinyNeuralModel":
        module = copy.deepcopy(self._module)
        return TinyNeuralModel(
            self.vocab,
            self.embed_dim,
            self.hidden_dim,
            self.max_decode_len,
            frozen=frozen,
            _module=module,
        )

    def clone_frozen(self) -> "TinyNeuralModel":
        return self._clone(frozen=True)

    def clone_trainable(self) -> "TinyNeuralModel":
        return self._clone(frozen=False)

    def trainable_parameters(self) -> list[torch.Tensor]:
        if self._frozen:
            raise FrozenModelError("frozen model has no trainable parameters")
        return list(self._module.parameters())

    def _build_optimizer(self, learning_rate: float) -> torch.optim.Optimizer:
        return torch.optim.AdamW(self.trainable_parameters(), lr=learning_rate, weight_decay=0.0)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self._module.parameters())

    def state_payload(self) -> dict:
        return {
            "config": {
                "vocab": self.vocab,
                "embed_dim": self.embed_dim,
                "hidden_dim": self.hidden_dim,
                "max_decode_len": self.max_decode_len,
            },
            "tensors": {k: v.detach() for k, v in self._module.state_dict().items()},
        }

    @classmethod
    def from_state_payload(cls, config: dict, tensors: dict[str, torch.Tensor]) -> "TinyNeuralModel":
        model = cls(
            config["vocab"],
            embed_dim=int(config["embed_dim"]),
            hidden_dim=int(config["hidden_dim"]),
            max_decode_len=int(config["max_decode_len"]),
        )
        model._module.load_state_dict(tensors)
        return model

    # -- batched internals for the memorization recipe ------------------------

    def _batch_tensors(self, pairs: list[tuple[str, str]]):
        encoded = [self._pair_ids(q, a) for q, a in pairs]
        max_len = max(len(ids) for ids, _ in encoded)
        pad = self._index[PAD]
        inputs = torch.full((len(encoded), max_len - 1), pad, dtype=torch.long)
        targets = torch.full((len(encoded), max_len - 1), pad, dtype=torch.long)
        mask = torch.zeros(len(encoded), max_len - 1, dtype=torch.bool)
        for i, (ids, prompt_len) in enumerate(encoded):
            n = len(ids) - 1
            inputs[i, :n] = torch.tensor(ids[:-1], dtype=torch.long)
            targets[i, :n] = torch.tensor(ids[1:], dtype=torch.long)
            mask[i, prompt_len - 1 : n] = True
        return inputs, targets, mask

    def _batched_answer_nll(self, pairs: list[tuple[str, str]]) -> torch.Tensor:
        """Mean per-example answer NLL over a batch (training fast path)."""
        inputs, targets, mask = self._batch_tensors(pairs)
        logits, _ = self._module(inputs)
        logp = torch.log_softmax(logits, dim=-1)
        token_logp = logp.gather(2, targets.unsqueeze(2)).squeeze(2)
        per_example = (token_logp * mask).sum(dim=1)
        return -per_example.mean()

    def _batched_recall(self, pairs: list[tuple[str, str]]) -> list[bool]:
        """Whether greedy decoding would reproduce each gold answer exactly.

        Teacher-forced argmax at every answer position equals greedy recall of
        the full answer, so this avoids a per-question decode loop.
        """
        with torch.no_grad():
            inputs, targets, mask = self._batch_tensors(pairs)
            logits, _ = self._module(inputs)
            predicted = logits.argmax(dim=-1)
            hit = (predicted == targets) | ~mask
            return [bool(row.all()) for row in hit]


def corpus_model(records, extra_texts: list[str] = (), **kwargs) -> TinyNeuralModel:
    """Model whose vocabulary covers a corpus plus any extra text (templates, probes)."""
    texts = []
    for record in records:
        texts.append(record.name)
        for qa in record.qa_pairs:
            texts.append(qa.question)
            texts.append(qa.gold_answer)
    texts.extend(extra_texts)
    return TinyNeuralModel.from_texts(texts, **kwargs)


def train_memorization(
    model: TinyNeuralModel,
    records,
    target_accuracy: float = 0.8,
    max_epochs: int = 400,
    learning_rate: float | None = None,
    batch_size: int = 64,
    seed: int = 0,
    check_every: int = 10,
) -> list[dict]:
    """Plain likelihood maximization until every individual's recall accuracy meets the target.

    Mirrors the working assumption that the base model already memorizes its
    corpus before any unlearning happens. Returns a per-check history of
    (epoch, loss, min/mean per-individual accuracy).
    """
    if model.is_frozen:
        raise FrozenModelError("cannot run memorization training on a frozen model")
    pairs = [(qa.question, qa.gold_answer) for r in records for qa in r.qa_pairs]
    owners = [r.name for r in records for _ in r.qa_pairs]
    if not pairs:
        raise BackendError("no QA pairs to memorize")
    optimizer = model.make_optimizer(learning_rate)
    rng = random.Random(seed)
    order = list(range(len(pairs)))
    history: list[dict] = []
    for epoch in range(1, max_epochs + 1):
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), batch_size):
            chunk = [pairs[i] for i in order[start : start + batch_size]]
            loss = model._batched_answer_nll(chunk)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(chunk)
        mean_loss = total / len(pairs)
        if epoch % check_every == 0 or epoch == max_epochs:
            acc = _per_individual_recall(model, pairs, owners, batch_size)
            entry = {
                "epoch": epoch,
                "loss": mean_loss,
                "min_accuracy": min(acc.values()),
                "mean_accuracy": sum(acc.values()) / len(acc),
            }
            history.append(entry)
            logger.info(
                "memorization epoch %d: loss %.4f, min acc %.3f, mean acc %.3f",
                epoch, mean_loss, entry["min_accuracy"], entry["mean_accuracy"],
            )
            if entry["min_accuracy"] >= target_accuracy:
                break
    return history


def _per_individual_recall(model, pairs, owners, batch_size) -> dict[str, float]:
    hits: dict[str, list[bool]] = {}
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start : start + batch_size]
        chunk_owners = owners[start : start + batch_size]
        for owner, ok in zip(chunk_owners, model._batched_recall(chunk)):
            hits.setdefault(owner, []).append(ok)
    return {owner: sum(v) / len(v) for owner, v in hits.items()}
