import pytest
import torch

from unlearnkit.corpus import generate_synthetic_corpus, make_split
from unlearnkit.judge import ExactMatchJudge

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(6, 6, seed=11)


@pytest.fixture(scope="session")
def desk_corpus():
    """The 60-person / 20-QA corpus used by the end-to-end experiments."""
    return generate_synthetic_corpus(60, 20, seed=7)


@pytest.fixture(scope="session")
def desk_split(desk_corpus):
    return make_split(desk_corpus, (1, 9), seed=13)


@pytest.fixture(scope="session")
def exact_judge():
    return ExactMatchJudge()
