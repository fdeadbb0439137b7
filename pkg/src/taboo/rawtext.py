"""Demo-grade raw-text handling for the service and the predict command.

Real deployments feed parse trees produced by an actual parser; pasted
text gets a regex-free sentence splitter, whitespace tokens, and a
right-branching stand-in tree, so detection quality on raw text differs
from tree input.
"""

from dataclasses import dataclass

from .container import ModelContainer, container_predict
from .corpus import ParseTree, right_branching_tree

TERMINATORS = ".!?"


@dataclass(frozen=True)
class DetectionResult:
    """One classified sentence with its character span in the document."""

    text: str
    start: int
    end: int
    label: int
    probability: float
    status: str = "scored"  # "unscored" when too short to classify

    def to_dict(self) -> dict:
        return {"text": self.text, "start": self.start, "end": self.end,
                "label": self.label, "probability": self.probability,
                "status": self.status}


def _append_piece(pieces, document: str, start: int, end: int) -> None:
    text = document[start:end]
    trimmed = text.strip()
    if not trimmed:
        return
    lead = len(text) - len(text.lstrip())
    s = start + lead
    pieces.append((trimmed, (s, s + len(trimmed))))


def split_raw_text(document: str):
    """Split a document into (sentence, (start, end)) pieces.

    A sentence ends at '.', '!', or '?' followed by whitespace and an
    uppercase letter, or at end of input.  Abbreviations are not special
    ("Dr. Smith" splits); this is a demo splitter.  Each piece satisfies
    document[start:end] == sentence, pieces are ordered and disjoint.
    """
    pieces = []
    n = len(document)
    start = i = 0
    while i < n:
        if document[i] in TERMINATORS:
            j = i + 1
            k = j
            while k < n and document[k].isspace():
                k += 1
            if k > j and (k == n or document[k].isupper()):
                _append_piece(pieces, document, start, j)
                start = i = k
                continue
        i += 1
    _append_piece(pieces, document, start, n)
    return pieces


def fallback_tree(tokens) -> ParseTree:
    """Right-branching binary tree with all internal labels "X"."""
    if len(tokens) < 2:
        raise ValueError("fallback trees need at least 2 tokens")
    return right_branching_tree(list(tokens), label="X")


def predict_document(container: ModelContainer, document: str):
    """Split, tokenize, and classify a raw document sentence by sentence.

    Sentences with fewer than 2 whitespace tokens cannot be classified
    and come back as label 0, probability 0.5, status "unscored".
    """
    results = []
    for text, (start, end) in split_raw_text(document):
        tokens = text.split()
        if len(tokens) < 2:
            results.append(DetectionResult(text, start, end, 0, 0.5,
                                           "unscored"))
            continue
        label, prob = container_predict(container, tokens,
                                        fallback_tree(tokens))
        results.append(DetectionResult(text, start, end, int(label),
                                       float(prob)))
    return results
