import logging

import pytest

from impactlab import corpus as corpus_mod, synth, topic_model
from impactlab.features import ExtractionContext
from impactlab.pipeline import Experiment

from .helpers import DESK_LDA_ITERS, DESK_T, DESK_TOPICS


@pytest.fixture(scope="session")
def synthetic_text():
    text, truth = synth.generate(synth.SynthConfig(seed=0))
    return text, truth


@pytest.fixture(scope="session")
def synthetic_corpus(synthetic_text):
    corpus, report = corpus_mod.parse_corpus(synthetic_text[0])
    return corpus, report


@pytest.fixture(scope="session")
def synthetic_model(synthetic_corpus):
    corpus, _ = synthetic_corpus
    return topic_model.fit_corpus_lda(corpus, DESK_T, K=DESK_TOPICS,
                                      iterations=DESK_LDA_ITERS, seed=0)


@pytest.fixture(scope="session")
def synthetic_context(synthetic_corpus, synthetic_model):
    return ExtractionContext(synthetic_corpus[0], DESK_T, synthetic_model)


@pytest.fixture(scope="session")
def synthetic_experiment(synthetic_context):
    logging.getLogger("impactlab").setLevel(logging.ERROR)
    return Experiment.from_context(synthetic_context, threads=1)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, title, detail = RESULTS[number]
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
                                    + (f"  [{extra}]" if extra else ""))
