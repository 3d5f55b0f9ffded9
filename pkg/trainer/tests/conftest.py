import pytest

from droidseq_trainer import (SyntheticCorpusSpec, TrainingConfig,
                              generate_synthetic_corpus, train)


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticCorpusSpec(samples_per_class=300, seed=1)


@pytest.fixture(scope="session")
def small_corpus(small_spec):
    return generate_synthetic_corpus(small_spec)


@pytest.fixture(scope="session")
def small_trained(small_corpus):
    return train(small_corpus, TrainingConfig(max_len=16, epochs=2, seed=1))
