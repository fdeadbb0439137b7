"""Keyword-count detectors: n-gram statistics, single-word inference
rules, PMI-vs-information-content thresholding, and the Keyword-Max
empirical ceiling.

The counting unit everywhere is one training sentence: a term is counted
at most once per sentence regardless of how often it repeats inside it.
Tokens are case-sensitive and no smoothing is applied; unseen terms are
skipped rather than given pseudo-counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class KeywordError(ValueError):
    pass


def _as_term(term) -> tuple:
    if isinstance(term, str):
        return (term,)
    return tuple(term)


def _sentence_ngrams(tokens, n_max: int):
    seen = set()
    n_tok = len(tokens)
    for n in range(1, n_max + 1):
        for i in range(n_tok - n + 1):
            seen.add(tuple(tokens[i : i + n]))
    return seen


@dataclass
class CountStore:
    """Presence counts of all 1..n_max grams over a training set."""

    n_max: int
    total: int
    total_sensitive: int
    term_counts: dict = field(default_factory=dict)
    joint_counts: dict = field(default_factory=dict)
    # prefix -> {continuation word -> count of the extended n-gram}
    continuations: dict = field(default_factory=dict)

    def count(self, term) -> int:
        return self.term_counts.get(_as_term(term), 0)

    def joint(self, term) -> int:
        return self.joint_counts.get(_as_term(term), 0)

    def vocabulary(self):
        return [t[0] for t in self.term_counts if len(t) == 1]


def count_terms(sentences, n_max: int = 1) -> CountStore:
    """Count per-sentence presence of every contiguous n-gram, n <= n_max.

    ``sentences`` is anything with ``.tokens`` and a binary ``.label``.
    """
    if n_max < 1:
        raise KeywordError(f"n_max must be >= 1, got {n_max}")
    sentences = list(sentences)
    if not sentences:
        raise KeywordError("empty training set")
    store = CountStore(n_max=n_max, total=len(sentences), total_sensitive=0)
    for s in sentences:
        if s.label == 1:
            store.total_sensitive += 1
        for gram in _sentence_ngrams(s.tokens, n_max):
            store.term_counts[gram] = store.term_counts.get(gram, 0) + 1
            if s.label == 1:
                store.joint_counts[gram] = store.joint_counts.get(gram, 0) + 1
            if len(gram) >= 2:
                bucket = store.continuations.setdefault(gram[:-1], {})
                bucket[gram[-1]] = bucket.get(gram[-1], 0) + 1
    return store


def cond_sensitivity(store: CountStore, term) -> float:
    """Fraction of the sentences containing ``term`` that are sensitive."""
    term = _as_term(term)
    c = store.count(term)
    if c == 0:
        raise KeywordError(f"term {term!r} unseen in training data")
    return store.joint(term) / c


def support(store: CountStore, term) -> float:
    return store.count(term) / store.total


def confidence(store: CountStore, term) -> float:
    c = store.count(term)
    if c == 0:
        raise KeywordError(f"term {term!r} unseen in training data")
    return store.joint(term) / c


def ngram_cond_prob(store: CountStore, word: str, context_ngram) -> float:
    """Probability of ``word`` continuing ``context_ngram``.

    Estimated as C(context+word) / sum_k C(context+k) with per-sentence
    presence counts; requires the store to hold n-grams one order above
    the context length.
    """
    ctx = _as_term(context_ngram)
    if len(ctx) + 1 > store.n_max:
        raise KeywordError(
            f"store only holds up to {store.n_max}-grams, context of length "
            f"{len(ctx)} needs {len(ctx) + 1}"
        )
    bucket = store.continuations.get(ctx, {})
    denom = sum(bucket.values())
    if denom == 0:
        raise KeywordError(f"context {ctx!r} never seen with any continuation")
    return bucket.get(word, 0) / denom


@dataclass
class InfRuleModel:
    """Single-word rules word -> sensitive, thresholded on support count
    and confidence."""

    rules: dict
    min_support_count: int
    min_confidence: float


def mine_inference_rules(store: CountStore, min_support_count: int, min_confidence: float) -> InfRuleModel:
    rules = {}
    for term, c in store.term_counts.items():
        if len(term) != 1 or c < min_support_count:
            continue
        conf = store.joint(term) / c
        if conf >= min_confidence:
            rules[term[0]] = conf
    return InfRuleModel(rules=rules, min_support_count=min_support_count, min_confidence=min_confidence)


def infrule_predict(model: InfRuleModel, tokens) -> int:
    return 1 if any(t in model.rules for t in tokens) else 0


@dataclass
class CsanModel:
    """PMI-thresholded detector: a sentence is sensitive iff some word's
    PMI with the sensitive label reaches IC / alpha.

    ``word_pmi`` holds finite PMI values only; words never seen in a
    sensitive sentence can never fire and are simply absent.
    """

    alpha: float
    ic: float
    word_pmi: dict


def information_content(store: CountStore) -> float:
    if store.total_sensitive == 0:
        raise KeywordError("no sensitive sentences in training data")
    return -math.log2(store.total_sensitive / store.total)


def pmi(store: CountStore, word: str) -> float:
    """PMI (bits) between a word's presence and the sensitive label.

    Returns -inf when the word never occurs in a sensitive sentence.
    """
    base_rate = store.total_sensitive / store.total
    if base_rate == 0:
        raise KeywordError("no sensitive sentences in training data")
    cond = cond_sensitivity(store, word)
    if cond == 0.0:
        return float("-inf")
    # expanded form keeps a perfect predictor's PMI bit-identical to IC
    return math.log2(cond) - math.log2(base_rate)


def fit_csan(store: CountStore, alpha: float = 1.0) -> CsanModel:
    if alpha < 1:
        raise KeywordError(f"alpha must be >= 1, got {alpha}")
    ic = information_content(store)
    word_pmi = {}
    for w in store.vocabulary():
        p = pmi(store, w)
        if math.isfinite(p):
            word_pmi[w] = p
    return CsanModel(alpha=alpha, ic=ic, word_pmi=word_pmi)


def csan_predict(model: CsanModel, tokens) -> int:
    threshold = model.ic / model.alpha
    for t in tokens:
        p = model.word_pmi.get(t)
        if p is not None and p >= threshold:
            return 1
    return 0


@dataclass
class KeywordMaxModel:
    """Best single threshold over max-per-sentence conditional sensitivity.

    The threshold is tuned directly on the evaluation set, so the score
    is an empirical ceiling for keyword approaches, not an honest
    classifier.
    """

    theta: float
    word_cond: dict

    def score(self, tokens) -> float:
        best = 0.0
        for t in tokens:
            best = max(best, self.word_cond.get(t, 0.0))
        return best

    def predict(self, tokens) -> int:
        return 1 if self.score(tokens) >= self.theta else 0


def keyword_max_fit(store: CountStore, eval_set) -> tuple[KeywordMaxModel, float]:
    """Pick the accuracy-maximizing threshold on ``eval_set``.

    Candidates are the observed sentence scores plus a sentinel above the
    maximum (the all-negative classifier); ties break toward the larger
    threshold.
    """
    eval_set = list(eval_set)
    if not eval_set:
        raise KeywordError("empty evaluation set")
    word_cond = {}
    for term, c in store.term_counts.items():
        if len(term) == 1:
            word_cond[term[0]] = store.joint(term) / c
    model = KeywordMaxModel(theta=0.0, word_cond=word_cond)
    scores = [model.score(s.tokens) for s in eval_set]
    labels = [s.label for s in eval_set]
    candidates = sorted(set(scores)) + [float("inf")]
    best_theta, best_acc = None, -1.0
    for theta in candidates:
        correct = sum(
            1 for sc, lab in zip(scores, labels) if (1 if sc >= theta else 0) == lab
        )
        acc = correct / len(eval_set)
        if acc >= best_acc:
            best_acc, best_theta = acc, theta
    model.theta = best_theta
    return model, best_acc
