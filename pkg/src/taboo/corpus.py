"""Sentence corpora: parse-tree records, binarization, cleaning, labeling,
splitting, and annotation-agreement statistics.

File format (UTF-8, one record per line):

    <label> TAB <info_type> TAB <doc_id> TAB <s-expression>

where label is 0 or 1, the s-expression is ``(LABEL child child ...)``
with tokens as bare atoms, and literal parentheses inside tokens escaped
as ``-LRB-`` / ``-RRB-``.  A ``#`` in column 0 starts a comment line.

Annotation files: ``<sentence_id> TAB <l1>,<l2>,...`` with a fixed number
of annotators per line.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr
from statsmodels.stats.inter_rater import fleiss_kappa as _sm_fleiss

INFO_TYPES = ("PPAY", "FAS", "FCAST", "EDENCE", "GHOST", "TOXIC", "CHEMI", "REGUL")


class CorpusError(ValueError):
    """Malformed record, tree, or annotation input."""


@dataclass(frozen=True)
class ParseTree:
    """Constituency tree node.

    Internal nodes carry a grammatical label and children; leaves carry a
    token.  Freshly parsed trees may be n-ary; ``binarize`` produces the
    strict 0-or-2-children form required everywhere downstream.
    """

    label: str
    children: tuple = ()
    token: str | None = None

    def is_leaf(self) -> bool:
        return self.token is not None

    def leaves(self) -> list[str]:
        collected: list[str] = []

        def walk(node: "ParseTree") -> None:
            if node.is_leaf():
                collected.append(node.token)
            else:
                for c in node.children:
                    walk(c)

        walk(self)
        return collected

    def internal_count(self) -> int:
        if self.is_leaf():
            return 0
        return 1 + sum(c.internal_count() for c in self.children)

    def is_binary(self) -> bool:
        if self.is_leaf():
            return True
        return len(self.children) == 2 and all(c.is_binary() for c in self.children)


def leaf(token: str) -> ParseTree:
    return ParseTree(label="", token=token)


def node(label: str, *children: ParseTree) -> ParseTree:
    return ParseTree(label=label, children=tuple(children))


def right_branching_tree(tokens, label: str = "X") -> ParseTree:
    """Binary right-branching tree over the tokens, all internal nodes
    sharing one label.  Used where no real parse is available."""
    tokens = list(tokens)
    if len(tokens) < 2:
        raise CorpusError("right-branching tree needs at least 2 tokens")
    tree = leaf(tokens[-1])
    for tok in reversed(tokens[:-1]):
        tree = ParseTree(label=label, children=(leaf(tok), tree))
    return tree


_ESCAPES = (("(", "-LRB-"), (")", "-RRB-"))


def _escape_token(tok: str) -> str:
    for raw, esc in _ESCAPES:
        tok = tok.replace(raw, esc)
    return tok


def _unescape_token(tok: str) -> str:
    for raw, esc in _ESCAPES:
        tok = tok.replace(esc, raw)
    return tok


def parse_sexpr(text: str) -> ParseTree:
    """Parse one s-expression into a (possibly n-ary) ParseTree."""
    pos = 0
    n = len(text)

    def skip_ws(i: int) -> int:
        while i < n and text[i].isspace():
            i += 1
        return i

    def read_atom(i: int) -> tuple[str, int]:
        j = i
        while j < n and not text[j].isspace() and text[j] not in "()":
            j += 1
        if j == i:
            raise CorpusError(f"expected atom at position {i}")
        return text[i:j], j

    def read_node(i: int) -> tuple[ParseTree, int]:
        i = skip_ws(i)
        if i >= n or text[i] != "(":
            raise CorpusError(f"expected '(' at position {i}")
        i = skip_ws(i + 1)
        if i >= n or text[i] == ")":
            raise CorpusError("empty node")
        label, i = read_atom(i)
        children: list[ParseTree] = []
        while True:
            i = skip_ws(i)
            if i >= n:
                raise CorpusError("unbalanced parentheses: missing ')'")
            if text[i] == ")":
                i += 1
                break
            if text[i] == "(":
                child, i = read_node(i)
            else:
                atom, i = read_atom(i)
                child = leaf(_unescape_token(atom))
            children.append(child)
        if not children:
            raise CorpusError(f"node '{label}' has no children")
        return ParseTree(label=label, children=tuple(children)), i

    tree, pos = read_node(0)
    pos = skip_ws(pos)
    if pos != n:
        raise CorpusError(f"trailing content after s-expression: {text[pos:]!r}")
    return tree


def serialize_tree(tree: ParseTree) -> str:
    if tree.is_leaf():
        return _escape_token(tree.token)
    inner = " ".join(serialize_tree(c) for c in tree.children)
    return f"({tree.label} {inner})"


def parse_tree_record(line: str) -> tuple[int, str, str, ParseTree]:
    """Parse one TAB-separated record into (label, info_type, doc_id, tree).

    The returned tree is NOT binarized; call ``binarize`` before building
    sentences.
    """
    line = line.rstrip("\n")
    parts = line.split("\t")
    if len(parts) != 4:
        raise CorpusError(f"expected 4 TAB-separated fields, got {len(parts)}")
    label_s, info_type, doc_id, sexpr = parts
    if label_s not in ("0", "1"):
        raise CorpusError(f"label field must be 0 or 1, got {label_s!r}")
    tree = parse_sexpr(sexpr)
    return int(label_s), info_type, doc_id, tree


def format_tree_record(label: int, info_type: str, doc_id: str, tree: ParseTree) -> str:
    return f"{label}\t{info_type}\t{doc_id}\t{serialize_tree(tree)}"


def binarize(tree: ParseTree) -> ParseTree:
    """Return a strictly binary copy of the tree.

    Unary chains collapse onto the lowest node with labels joined by "|"
    (a unary chain ending in a token collapses to the bare leaf).  Nodes
    with more than two children are collapsed left-branching, introducing
    synthetic "@<label>" nodes.  Leaf order is preserved.
    """
    if len(tree.leaves()) < 2:
        raise CorpusError("cannot binarize a tree with fewer than 2 leaves")
    return _binarize(tree)


def _binarize(tree: ParseTree) -> ParseTree:
    if tree.is_leaf():
        return tree
    # collapse unary chains onto the lowest element
    label = tree.label
    while len(tree.children) == 1:
        child = tree.children[0]
        if child.is_leaf():
            return child
        label = f"{label}|{child.label}"
        tree = child
    children = [_binarize(c) for c in tree.children]
    while len(children) > 2:
        merged = ParseTree(label=f"@{label}", children=(children[0], children[1]))
        children = [merged] + children[2:]
    return ParseTree(label=label, children=tuple(children))


@dataclass(frozen=True)
class LabeledSentence:
    id: str
    doc_id: str
    info_type: str
    label: int
    tokens: tuple
    tree: ParseTree

    def __post_init__(self):
        if self.label not in (0, 1):
            raise CorpusError(f"label must be 0 or 1, got {self.label!r}")
        if not self.tokens:
            raise CorpusError("sentence has no tokens")
        if list(self.tokens) != self.tree.leaves():
            raise CorpusError(f"tokens do not match tree leaves for sentence {self.id}")


@dataclass
class Dataset:
    name: str
    info_type: str
    train: list = field(default_factory=list)
    dev: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def splits(self) -> dict[str, list]:
        return {"train": self.train, "dev": self.dev, "test": self.test}

    def all_sentences(self) -> list:
        return self.train + self.dev + self.test

    def validate(self) -> None:
        seen: set[str] = set()
        for split_name, sents in self.splits().items():
            for s in sents:
                if s.id in seen:
                    raise CorpusError(f"duplicate sentence id across splits: {s.id}")
                seen.add(s.id)
                if s.info_type != self.info_type:
                    raise CorpusError(
                        f"sentence {s.id} has info_type {s.info_type}, dataset expects {self.info_type}"
                    )


def read_tree_file(path) -> list[tuple[int, str, str, ParseTree]]:
    """Read all records from a tree dataset file, skipping comment lines."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            try:
                records.append(parse_tree_record(line))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_tree_file(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(format_tree_record(s.label, s.info_type, s.doc_id, s.tree) + "\n")


def ingest_records(records, id_prefix: str = "s") -> tuple[list, int]:
    """Build LabeledSentences from parsed records, binarizing trees.

    Trees with fewer than 2 leaves cannot be represented and are dropped;
    the count of dropped records is returned alongside the sentences.
    """
    sentences = []
    rejected = 0
    for i, (label, info_type, doc_id, tree) in enumerate(records):
        if len(tree.leaves()) < 2:
            rejected += 1
            continue
        btree = binarize(tree)
        sentences.append(
            LabeledSentence(
                id=f"{id_prefix}{i}",
                doc_id=doc_id,
                info_type=info_type,
                label=label,
                tokens=tuple(btree.leaves()),
                tree=btree,
            )
        )
    return sentences, rejected


@dataclass
class CleanReport:
    removed_short: int = 0
    removed_long: int = 0
    removed_ambiguous: int = 0

    def total_removed(self) -> int:
        return self.removed_short + self.removed_long + self.removed_ambiguous


def clean_sentences(sentences, min_len: int = 5, max_len: int = 200):
    """Length-filter sentences and drop ambiguous exact duplicates.

    A sentence is kept iff min_len <= |tokens| <= max_len.  Among exact
    token-sequence duplicates carrying conflicting labels, every copy is
    removed.  Returns (kept, CleanReport).
    """
    report = CleanReport()
    by_length = []
    for s in sentences:
        n = len(s.tokens)
        if n < min_len:
            report.removed_short += 1
        elif n > max_len:
            report.removed_long += 1
        else:
            by_length.append(s)
    labels_by_tokens: dict[tuple, set] = {}
    for s in by_length:
        labels_by_tokens.setdefault(s.tokens, set()).add(s.label)
    kept = []
    for s in by_length:
        if len(labels_by_tokens[s.tokens]) > 1:
            report.removed_ambiguous += 1
        else:
            kept.append(s)
    return kept, report


def make_silver(sentences, info_type: str, seed: int) -> Dataset:
    """Build a balanced silver dataset for one information type.

    Sentences whose document carries ``info_type`` become positives; an
    equal number of negatives is sampled uniformly without replacement
    from sentences of the other document types.  All output sentences are
    re-labeled for the target type.  Deterministic under ``seed``.
    """
    positives = [s for s in sentences if s.info_type == info_type]
    pool = [s for s in sentences if s.info_type != info_type]
    if len(pool) < len(positives):
        raise CorpusError(
            f"negative pool ({len(pool)}) smaller than positive count "
            f"({len(positives)}): short by {len(positives) - len(pool)}"
        )
    rng = random.Random(seed)
    negatives = rng.sample(pool, len(positives))
    out = []
    for s in positives:
        out.append(LabeledSentence(s.id, s.doc_id, info_type, 1, s.tokens, s.tree))
    for s in negatives:
        out.append(LabeledSentence(s.id, s.doc_id, info_type, 0, s.tokens, s.tree))
    return Dataset(name=f"silver-{info_type}", info_type=info_type, train=out)


def split(dataset: Dataset, fractions, seed: int) -> Dataset:
    """Partition all sentences into train/dev/test by shuffled order.

    ``fractions`` is a (train, dev, test) triple summing to 1.  Cut points
    use cumulative rounding so exact fractions give exact counts.
    """
    if len(fractions) != 3:
        raise CorpusError("fractions must be a (train, dev, test) triple")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"fractions must sum to 1, got {sum(fractions)}")
    if any(f < 0 for f in fractions):
        raise CorpusError("fractions must be non-negative")
    sentences = dataset.all_sentences()
    rng = random.Random(seed)
    order = list(sentences)
    rng.shuffle(order)
    n = len(order)
    cut1 = int(round(fractions[0] * n))
    cut2 = int(round((fractions[0] + fractions[1]) * n))
    return Dataset(
        name=dataset.name,
        info_type=dataset.info_type,
        train=order[:cut1],
        dev=order[cut1:cut2],
        test=order[cut2:],
    )


def majority_label(labels) -> int:
    """Majority vote over an odd number (>= 3) of binary labels."""
    k = len(labels)
    if k < 3 or k % 2 == 0:
        raise CorpusError(f"majority vote needs an odd annotator count >= 3, got {k}")
    return 1 if sum(labels) * 2 > k else 0


@dataclass
class AnnotationSet:
    """Per-sentence labels from a fixed panel of annotators."""

    annotator_count: int
    labels: dict

    def __post_init__(self):
        if self.annotator_count < 2:
            raise CorpusError("need at least 2 annotators")
        for sid, row in self.labels.items():
            if len(row) != self.annotator_count:
                raise CorpusError(
                    f"sentence {sid} has {len(row)} labels, expected {self.annotator_count}"
                )
            if any(v not in (0, 1) for v in row):
                raise CorpusError(f"sentence {sid} has a non-binary label")


def read_annotation_file(path, annotator_count: int | None = None) -> AnnotationSet:
    labels: dict[str, tuple] = {}
    count = annotator_count
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 2 TAB-separated fields")
            sid, raw = parts
            row = tuple(int(v) for v in raw.split(","))
            if count is None:
                count = len(row)
            labels[sid] = row
    if count is None:
        raise CorpusError(f"{path}: no annotation records")
    return AnnotationSet(annotator_count=count, labels=labels)


def _category_table(annotations: AnnotationSet) -> np.ndarray:
    rows = []
    for sid in sorted(annotations.labels):
        row = annotations.labels[sid]
        ones = sum(row)
        rows.append([len(row) - ones, ones])
    return np.asarray(rows, dtype=float)


def fleiss_kappa(annotations: AnnotationSet) -> float:
    """Fleiss kappa over the annotation set (binary categories).

    Perfect agreement returns exactly 1.0, including the degenerate case
    where every annotator uses the same single category throughout.
    """
    if not annotations.labels:
        raise CorpusError("cannot compute agreement on an empty annotation set")
    table = _category_table(annotations)
    a = annotations.annotator_count
    p_i = ((table**2).sum(axis=1) - a) / (a * (a - 1))
    if np.isclose(p_i.mean(), 1.0):
        return 1.0
    return float(_sm_fleiss(table))


def mean_pairwise_spearman(annotations: AnnotationSet) -> float:
    """Mean Spearman rank correlation over all annotator pairs.

    Pairs where the correlation is undefined (an annotator gave a single
    constant label) are skipped; if every pair is undefined this raises.
    """
    if annotations.annotator_count < 2:
        raise CorpusError("need at least 2 annotators")
    if not annotations.labels:
        raise CorpusError("cannot compute agreement on an empty annotation set")
    ordered = [annotations.labels[sid] for sid in sorted(annotations.labels)]
    mat = np.asarray(ordered, dtype=float)  # items x annotators
    rhos = []
    a = annotations.annotator_count
    for i in range(a):
        for j in range(i + 1, a):
            rho = spearmanr(mat[:, i], mat[:, j]).statistic
            if not np.isnan(rho):
                rhos.append(float(rho))
    if not rhos:
        raise CorpusError("Spearman correlation undefined for every annotator pair")
    return float(np.mean(rhos))
