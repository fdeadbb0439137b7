"""Evaluation metrics, model comparison, and synthetic corpora.

Metrics with a zero denominator are reported as None and rendered as
"N/A".  Two precision families exist side by side: the standard
tp/(tp+fp) under ``precision``, and a sensitive-class variant
tp/(tp+fn) under ``prec_sen`` (numerically identical to recall, kept as
a separately named column because reports downstream expect it).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .corpus import Dataset, LabeledSentence, right_branching_tree


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions, truths) -> ConfusionCounts:
    predictions = list(predictions)
    truths = list(truths)
    if len(predictions) != len(truths):
        raise EvalError("prediction and truth lengths differ")
    tp = fp = tn = fn = 0
    for p, t in zip(predictions, truths):
        if p not in (0, 1) or t not in (0, 1):
            raise EvalError(f"labels must be binary, got ({p!r}, {t!r})")
        if p == 1 and t == 1:
            tp += 1
        elif p == 1 and t == 0:
            fp += 1
        elif p == 0 and t == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, denom: int):
    return num / denom if denom > 0 else None


def accuracy(c: ConfusionCounts):
    return _ratio(c.tp + c.tn, c.total)


def precision(c: ConfusionCounts):
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts):
    return _ratio(c.tp, c.tp + c.fn)


def f1(c: ConfusionCounts):
    return _ratio(2 * c.tp, 2 * c.tp + c.fn + c.fp)


def class_accuracy_sensitive(predictions, truths):
    """Fraction of truly sensitive items predicted sensitive."""
    return recall(confusion(predictions, truths))


def per_class_precisions(c: ConfusionCounts):
    """(prec_sen, prec_nonsen) = (tp/(tp+fn), tn/(tn+fp))."""
    return _ratio(c.tp, c.tp + c.fn), _ratio(c.tn, c.tn + c.fp)


def only_identified_fraction(preds_1, preds_2, truths) -> float:
    """Share of the first model's correct sentences the second one misses."""
    preds_1, preds_2, truths = list(preds_1), list(preds_2), list(truths)
    c1 = {i for i, (p, t) in enumerate(zip(preds_1, truths)) if p == t}
    if not c1:
        raise EvalError("first model has no correct predictions")
    c2 = {i for i, (p, t) in enumerate(zip(preds_2, truths)) if p == t}
    return len(c1 - c2) / len(c1)


@dataclass
class MetricsReport:
    counts: ConfusionCounts
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    acc_sen: float | None
    prec_sen: float | None
    prec_nonsen: float | None

    def to_dict(self) -> dict:
        def cell(v):
            return "N/A" if v is None else v

        return {
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp,
                       "tn": self.counts.tn, "fn": self.counts.fn},
            "accuracy": cell(self.accuracy),
            "precision": cell(self.precision),
            "recall": cell(self.recall),
            "f1": cell(self.f1),
            "acc_sen": cell(self.acc_sen),
            "prec_sen": cell(self.prec_sen),
            "prec_nonsen": cell(self.prec_nonsen),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        rows = [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("acc_sen", self.acc_sen),
            ("prec_sen", self.prec_sen),
            ("prec_nonsen", self.prec_nonsen),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [
            f"counts: tp={self.counts.tp} fp={self.counts.fp} "
            f"tn={self.counts.tn} fn={self.counts.fn}"
        ]
        for name, v in rows:
            cell = "N/A" if v is None else f"{v:.4f}"
            lines.append(f"{name.ljust(width)}  {cell}")
        return "\n".join(lines)


def metrics_report(predictions, truths) -> MetricsReport:
    c = confusion(predictions, truths)
    prec_sen, prec_nonsen = per_class_precisions(c)
    return MetricsReport(
        counts=c,
        accuracy=accuracy(c),
        precision=precision(c),
        recall=recall(c),
        f1=f1(c),
        acc_sen=recall(c),
        prec_sen=prec_sen,
        prec_nonsen=prec_nonsen,
    )


# --------------------------------------------------------------- synthetic
FILLERS = tuple(f"filler{i:02d}" for i in range(16))
TRIGGER = "trigger"
NEGATOR = "negator"
SYNTH_INFO_TYPE = "SYNTH"


def _sentence(sid: str, tokens, label: int) -> LabeledSentence:
    return LabeledSentence(
        id=sid,
        doc_id="synthetic",
        info_type=SYNTH_INFO_TYPE,
        label=label,
        tokens=tuple(tokens),
        tree=right_branching_tree(tokens),
    )


def _split_dataset(name: str, sentences, seed: int) -> Dataset:
    rng = random.Random(seed ^ 0x5EED)
    order = list(sentences)
    rng.shuffle(order)
    n = len(order)
    cut1 = int(round(0.8 * n))
    cut2 = int(round(0.9 * n))
    return Dataset(
        name=name,
        info_type=SYNTH_INFO_TYPE,
        train=order[:cut1],
        dev=order[cut1:cut2],
        test=order[cut2:],
    )


def _filler_run(rng, k: int):
    return [rng.choice(FILLERS) for _ in range(k)]


def gen_keyword_synthetic(seed: int, n: int) -> Dataset:
    """Balanced corpus where the label is exactly the presence of one
    trigger word.  Separable by any keyword detector by construction."""
    if n < 2:
        raise EvalError("need at least 2 sentences")
    rng = random.Random(seed)
    sentences = []
    n_pos = n // 2
    for i in range(n):
        label = 1 if i < n_pos else 0
        tokens = _filler_run(rng, rng.randint(5, 8))
        if label == 1:
            tokens.insert(rng.randrange(len(tokens) + 1), TRIGGER)
        sentences.append(_sentence(f"kw{i}", tokens, label))
    return _split_dataset("keyword-synthetic", sentences, seed)


def gen_context_synthetic(seed: int, n: int) -> Dataset:
    """Balanced corpus where the label is the XOR of a trigger word and a
    negator occurring before it.

    Each of the four trigger/negator combinations gets the same mass, so
    every unigram's conditional sensitivity sits near 0.5 and no single
    word separates the classes; only readers of word combinations can.
    """
    if n < 4:
        raise EvalError("need at least 4 sentences")
    rng = random.Random(seed)
    n_pos = n // 2
    n_neg = n - n_pos
    # families: (trigger only) and (negator only) are positive,
    # (negator before trigger) and (fillers only) are negative
    families = (
        [("T", 1)] * (n_pos - n_pos // 2)
        + [("N", 1)] * (n_pos // 2)
        + [("NT", 0)] * (n_neg - n_neg // 2)
        + [("-", 0)] * (n_neg // 2)
    )
    sentences = []
    for i, (family, label) in enumerate(families):
        tokens = _filler_run(rng, rng.randint(5, 8))
        if family == "T":
            tokens.insert(rng.randrange(len(tokens) + 1), TRIGGER)
        elif family == "N":
            tokens.insert(rng.randrange(len(tokens) + 1), NEGATOR)
        elif family == "NT":
            i_neg = rng.randrange(len(tokens) + 1)
            tokens.insert(i_neg, NEGATOR)
            i_trig = rng.randrange(i_neg + 1, len(tokens) + 1)
            tokens.insert(i_trig, TRIGGER)
        sentences.append(_sentence(f"ctx{i}", tokens, label))
    rng.shuffle(sentences)
    return _split_dataset("context-synthetic", sentences, seed)
