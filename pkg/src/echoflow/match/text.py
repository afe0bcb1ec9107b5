"""Text preprocessing, count vectors and k-means centroid matching."""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

DEFAULT_STOPWORDS = frozenset(ENGLISH_STOP_WORDS | {"rt", "amp"})
MATCH_THRESHOLD = 0.45
MIN_TOKENS = 5

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_HANDLE_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
_APP_TAG_RE = re.compile(r"\s*via\s+(?:namo\s+app|mynt)\s*$", re.IGNORECASE)


def _is_word_char(ch: str) -> bool:
    # letters, combining marks (Devanagari vowel signs, virama) and digits
    return unicodedata.category(ch)[0] in "LMN"


def tokenize(text: str) -> list[str]:
    """Split on every character that is not a letter, mark or digit."""
    tokens, cur = [], []
    for ch in text:
        if _is_word_char(ch):
            cur.append(ch)
        elif cur:
            tokens.append("".join(cur))
            cur = []
    if cur:
        tokens.append("".join(cur))
    return tokens


def preprocess_text(
    text: str,
    stopwords: Iterable[str] | None = DEFAULT_STOPWORDS,
    strip_hashtags: bool = False,
    strip_app_tag: bool = True,
) -> list[str]:
    """Lowercase, drop URLs, @handles, punctuation, emoji and stopwords.

    Hashtag words are kept (only the ``#`` goes) unless ``strip_hashtags``.
    The trailing app tag is removed so tagged and untagged copies of a post
    produce the same tokens.
    """
    if not text:
        return []
    if strip_app_tag:
        text = _APP_TAG_RE.sub("", text)
    text = _URL_RE.sub(" ", text)
    text = _HANDLE_RE.sub(" ", text)
    if strip_hashtags:
        text = _HASHTAG_RE.sub(" ", text)
    stop = frozenset(stopwords or ())
    return [t for t in tokenize(text.lower()) if t not in stop]


def vectorize_corpus(docs: Sequence[Sequence[str]], min_df: int = 2) -> tuple[dict[str, int], sp.csr_matrix]:
    """Raw term counts over terms appearing in at least ``min_df`` documents.

    The vocabulary is sorted so column order does not depend on document order.
    """
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    vocab = {t: i for i, t in enumerate(sorted(t for t, c in df.items() if c >= min_df))}
    return vocab, transform(docs, vocab)


def transform(docs: Sequence[Sequence[str]], vocab: dict[str, int]) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for r, doc in enumerate(docs):
        counts: dict[int, int] = {}
        for term in doc:
            j = vocab.get(term)
            if j is not None:
                counts[j] = counts.get(j, 0) + 1
        for j in sorted(counts):
            rows.append(r)
            cols.append(j)
            vals.append(counts[j])
    return sp.csr_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(len(docs), len(vocab)))


def l2_normalize(X: sp.spmatrix | np.ndarray):
    """Rows scaled to unit Euclidean norm; all-zero rows stay zero."""
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=float)
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        return sp.diags(scale) @ X
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def default_k(n: int) -> int:
    return max(1, math.ceil(math.sqrt(n / 2)))


@dataclass
class TextClusterModel:
    vocabulary: dict[str, int]
    centroids: np.ndarray  # (k, |vocabulary|)
    inertia: float
    n_iter: int
    match_threshold: float = MATCH_THRESHOLD

    def __post_init__(self):
        if self.centroids.shape[1] != len(self.vocabulary):
            raise ValueError("centroid dimension differs from vocabulary size")
        if self.match_threshold <= 0:
            raise ValueError("match threshold must be positive")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(X, C: np.ndarray) -> np.ndarray:
    if sp.issparse(X):
        xx = np.asarray(X.multiply(X).sum(axis=1)).ravel()
        xc = np.asarray(X @ C.T)
    else:
        xx = (X * X).sum(axis=1)
        xc = X @ C.T
    d = xx[:, None] - 2.0 * xc + (C * C).sum(axis=1)[None, :]
    return np.clip(d, 0.0, None)


def _row(X, i: int) -> np.ndarray:
    return X[i].toarray().ravel() if sp.issparse(X) else np.asarray(X[i], dtype=float)


def kmeans_plusplus(X, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [_row(X, int(rng.integers(n)))]
    d2 = _sq_dists(X, centers[0][None, :]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        i = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        centers.append(_row(X, i))
        d2 = np.minimum(d2, _sq_dists(X, centers[-1][None, :]).ravel())
    return np.vstack(centers)


def lloyd(X, centers: np.ndarray, max_iter: int = 300, tol: float = 1e-6):
    """Lloyd iterations from ``centers``.

    Stops when inertia changes by less than ``tol`` relative.  Empty clusters
    are reseeded with the point farthest from its centroid.
    """
    n, k = X.shape[0], centers.shape[0]
    C = centers.copy()
    prev = None
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, C)
        labels = d.argmin(axis=1)
        inertia = float(d[np.arange(n), labels].sum())
        if prev is not None and abs(prev - inertia) <= tol * max(prev, 1e-300):
            return C, labels, inertia, it
        prev = inertia
        onehot = sp.csr_matrix((np.ones(n), (labels, np.arange(n))), shape=(k, n))
        sums = onehot @ X
        sums = sums.toarray() if sp.issparse(sums) else np.asarray(sums)
        sizes = np.bincount(labels, minlength=k)
        far = np.argsort(-d[np.arange(n), labels], kind="stable")
        spare = iter(far)
        for c in range(k):
            if sizes[c] > 0:
                C[c] = sums[c] / sizes[c]
            else:
                C[c] = _row(X, int(next(spare)))
    d = _sq_dists(X, C)
    labels = d.argmin(axis=1)
    return C, labels, float(d[np.arange(n), labels].sum()), max_iter


def train_text_clusters(
    app_vectors,
    vocabulary: dict[str, int],
    k: int | None = None,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    match_threshold: float = MATCH_THRESHOLD,
    n_init: int = 10,
) -> TextClusterModel:
    """k-means on L2-normalized app-post vectors.

    ``n_init`` k-means++ seedings are each run to convergence and the one with
    the lowest inertia is kept.
    """
    n = app_vectors.shape[0]
    k = default_k(n) if k is None else k
    if k < 1 or k > n:
        raise ValueError(f"k={k} must lie in 1..{n}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        C0 = kmeans_plusplus(app_vectors, k, rng)
        C, _, inertia, it = lloyd(app_vectors, C0, max_iter=max_iter, tol=tol)
        if best is None or inertia < best[1]:
            best = (C, inertia, it)
    C, inertia, it = best
    return TextClusterModel(vocabulary, C, inertia, it, match_threshold)


def nearest_centroid(vector, model: TextClusterModel) -> tuple[int, float]:
    """Index of and Euclidean distance to the closest centroid."""
    v = vector.toarray().ravel() if sp.issparse(vector) else np.asarray(vector, dtype=float).ravel()
    dists = np.linalg.norm(model.centroids - v[None, :], axis=1)
    j = int(dists.argmin())
    return j, float(dists[j])


def match_text(vector, model: TextClusterModel, threshold: float | None = None) -> int | None:
    """Cluster id if the nearest centroid is closer than the threshold, else None.

    The comparison is strict.  A vector with no vocabulary terms never matches.
    """
    threshold = model.match_threshold if threshold is None else threshold
    v = vector.toarray().ravel() if sp.issparse(vector) else np.asarray(vector, dtype=float).ravel()
    if not v.any():
        return None
    j, dist = nearest_centroid(v, model)
    return j if dist < threshold else None


@dataclass
class TextMatchResult:
    model: TextClusterModel
    matches: dict[str, tuple[int, float]]  # non-app tweet id -> (cluster, distance)
    app_tweet_ids: list[str]
    too_short: int


def match_corpus(
    tweets: Sequence,
    k: int | None = None,
    seed: int = 0,
    threshold: float = MATCH_THRESHOLD,
    stopwords: Iterable[str] = DEFAULT_STOPWORDS,
    min_tokens: int = MIN_TOKENS,
) -> TextMatchResult:
    """Find non-app posts whose text sits close to a cluster of app posts.

    All posts are vectorized together (terms in at least two posts), posts
    with fewer than ``min_tokens`` tokens are dropped, k-means is trained on
    the normalized app-post vectors and a non-app post matches when its
    normalized vector lies within ``threshold`` of its nearest centroid.
    """
    docs = [preprocess_text(t.text, stopwords) for t in tweets]
    vocab, X = vectorize_corpus(docs)
    keep = [i for i, d in enumerate(docs) if len(d) >= min_tokens]
    too_short = len(docs) - len(keep)
    app = [i for i in keep if tweets[i].source_tag.is_app]
    if not app:
        raise ValueError("no app-tagged posts long enough to train on")
    Xn = l2_normalize(X)
    A = Xn[app]
    nonzero = np.flatnonzero(np.asarray(A.getnnz(axis=1)) > 0)
    if len(nonzero) == 0:
        raise ValueError("app-tagged posts share no vocabulary")
    A = A[nonzero]
    k = default_k(A.shape[0]) if k is None else min(k, A.shape[0])
    model = train_text_clusters(A, vocab, k=k, seed=seed, match_threshold=threshold)
    matches = {}
    others = [i for i in keep if not tweets[i].source_tag.is_app]
    if others:
        O = Xn[others]
        d = np.sqrt(_sq_dists(O, model.centroids))
        nnz = np.asarray(O.getnnz(axis=1))
        for row, i in enumerate(others):
            if nnz[row] == 0:
                continue
            j = int(d[row].argmin())
            # recompute the winning distance exactly for the strict comparison
            dist = float(np.linalg.norm(model.centroids[j] - O[row].toarray().ravel()))
            if dist < threshold:
                matches[tweets[i].tweet_id] = (j, dist)
    return TextMatchResult(model, matches, [tweets[i].tweet_id for i in np.asarray(app)[nonzero]], too_short)
