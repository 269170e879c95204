"""Hybrid matrix factorization with word-embedding item descriptions."""

from . import _recf
from ._recf import *  # noqa: F403


def fit_split(ratings, descriptions, n=10, seed=1, config=None, skipgram=None):
    """Split the ratings as a sweep cell would, embed the descriptions, fit
    on the training part and score the held-out part.

    Returns (FitResult, ErrorMetrics).
    """
    config = config or _recf.FitConfig()
    skipgram = skipgram or _recf.SkipgramConfig()
    split = _recf.split_dataset(ratings, n, seed)
    vocab = _recf.build_vocab(descriptions)
    tree = _recf.build_huffman(vocab)
    table = _recf.train_skipgram(descriptions, vocab, tree, skipgram)
    desc = _recf.build_description_matrix(descriptions, vocab, table)
    result = _recf.fit(split.train, split.labels, desc, config)
    return result, _recf.evaluate(result.model, split.test)
