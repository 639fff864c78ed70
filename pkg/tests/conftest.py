import numpy as np
import pytest

from faitheval.core import ClassificationInstance
from faitheval.harness.corpus import bundled_corpus
from faitheval.models import MeteredModel, TrainConfig, Vocabulary, train


def make_instance(model, tokens, gold=0):
    pred = model.predict(tokens)
    model.reset_passes()
    return ClassificationInstance(tuple(tokens), gold, pred.predicted_class, pred.probs)


def hand_linear(embeddings, weights, bias):
    """Linear bag model with explicitly given parameters."""
    emb = np.asarray(embeddings, dtype=float)
    params = {"embeddings": emb, "weights": np.asarray(weights, dtype=float),
              "bias": np.asarray(bias, dtype=float)}
    return MeteredModel("linear", params, len(bias))


def constant_model(arch="linear", vocab_size=30, num_classes=2, seed=0):
    """A model whose output ignores its input: zero classifier weights."""
    m = MeteredModel.initialize(arch, vocab_size, num_classes, dim=8, filters=6, scale=0.5, seed=seed)
    m.params["weights"][:] = 0.0
    m.params["bias"][:] = np.linspace(0.3, -0.3, num_classes)
    return m


def random_model(arch, seed, vocab_size=40, num_classes=2, dim=8, filters=6, scale=0.5):
    m = MeteredModel.initialize(arch, vocab_size, num_classes, dim=dim, filters=filters,
                                scale=scale, seed=seed)
    rng = np.random.default_rng(seed + 10_000)
    m.params["bias"][:] = rng.normal(0, 0.3, num_classes)
    if arch == "cnn":
        m.params["conv_bias"][:] = rng.normal(0, 0.3, filters)
    return m


@pytest.fixture(scope="session")
def corpus():
    return bundled_corpus(0)


@pytest.fixture(scope="session")
def vocab(corpus):
    return Vocabulary.build(corpus[0].tokens)


@pytest.fixture(scope="session")
def trained_cnn(corpus, vocab):
    tr = corpus[0]
    return train([vocab.encode(t) for t in tr.tokens], tr.label_ids,
                 TrainConfig(arch="cnn", epochs=10, seed=0), vocab=vocab)


@pytest.fixture(scope="session")
def trained_linear(corpus, vocab):
    tr = corpus[0]
    return train([vocab.encode(t) for t in tr.tokens], tr.label_ids,
                 TrainConfig(arch="linear", epochs=10, seed=0), vocab=vocab)


def fd_prob_grad(model, emb, target, h=1e-4):
    """Central finite differences of p_target w.r.t. every embedding entry (unmetered)."""
    from faitheval.models import _softmax

    def prob(e):
        logits, _ = model._forward(e[None], np.ones((1, e.shape[0]), dtype=bool))
        return _softmax(logits)[0, target]

    grad = np.zeros_like(emb)
    for idx in np.ndindex(*emb.shape):
        up, down = emb.copy(), emb.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (prob(up) - prob(down)) / (2 * h)
    return grad


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))


def separable_corpus(n, seed):
    """Two classes, each marked by its own keyword among shared filler tokens (ids >= 3)."""
    rng = np.random.default_rng(seed)
    seqs, labels = [], []
    for _ in range(n):
        y = int(rng.integers(2))
        filler = rng.integers(3, 50, size=int(rng.integers(3, 15))).tolist()
        filler.insert(int(rng.integers(len(filler) + 1)), 1 + y)
        seqs.append(tuple(filler))
        labels.append(y)
    return seqs, labels


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
