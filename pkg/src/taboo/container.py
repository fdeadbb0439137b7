"""Model persistence: one JSON container format for every detector kind.

A container is a JSON document with a magic marker, the detector kind,
the sensitivity type it was trained for, and a kind-specific payload.
Matrices are stored as nested number arrays; Python's float repr makes
the round-trip bit-exact.  Network containers carry their vocabulary
table so a loaded model predicts without external files.

The unified ``container_predict`` gives every kind the same call shape.
Its probability is an engine score, not a calibrated estimate: the
network reports its root softmax, keyword-max its best word score,
inference rules the best matched confidence, and the PMI detector a
bare 0/1.
"""

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .embeddings import EmbeddingTable
from .keyword import CsanModel, InfRuleModel, KeywordMaxModel
from .recnn import RecnnModel, predict as recnn_predict
from .selective import ClusterPartition, ClusterStats, route_predict

MAGIC = "TABOO1"
KINDS = ("recnn", "infrule", "csan", "keyword_max", "selective")


class ContainerError(ValueError):
    pass


@dataclass
class ModelContainer:
    kind: str
    info_type: str
    model: object
    embeddings: EmbeddingTable | None = None
    partition: ClusterPartition | None = None
    created: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContainerError(f"unknown model kind {self.kind!r}")
        if not self.created:
            self.created = datetime.now(timezone.utc).isoformat()


def _enc_float(x: float):
    # JSON has no infinities; the delta-MFO sentinel and the all-negative
    # keyword threshold need them
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _dec_float(x) -> float:
    if isinstance(x, str):
        return float(x)
    return float(x)


def _embeddings_payload(emb: EmbeddingTable) -> dict:
    return {
        "dim": emb.dim,
        "words": list(emb.entries.keys()),
        "vectors": [emb.entries[w].tolist() for w in emb.entries],
    }


def _embeddings_from_payload(d: dict) -> EmbeddingTable:
    entries = {w: np.array(v, dtype=float)
               for w, v in zip(d["words"], d["vectors"])}
    return EmbeddingTable(dim=int(d["dim"]), entries=entries)


def _recnn_payload(model: RecnnModel, emb: EmbeddingTable) -> dict:
    return {
        "n_e": model.n_e,
        "n_h": model.n_h,
        "activation": model.activation,
        "params": {k: v.tolist() for k, v in model.params.items()},
        "embeddings": _embeddings_payload(emb),
    }


def _recnn_from_payload(d: dict):
    params = {k: np.array(v, dtype=float) for k, v in d["params"].items()}
    model = RecnnModel(n_e=int(d["n_e"]), n_h=int(d["n_h"]),
                       activation=d["activation"], params=params)
    return model, _embeddings_from_payload(d["embeddings"])


def _partition_payload(p: ClusterPartition) -> dict:
    return {
        "k": p.k,
        "centroids": p.centroids.tolist(),
        "ids": list(p.ids),
        "assignment": dict(p.assignment),
        "clusters": [
            {"size": st.size, "f": st.f, "mfo": st.mfo,
             "delta_mfo": None if st.delta_mfo is None
             else _enc_float(st.delta_mfo),
             "dominant_label": st.dominant_label, "filtered": st.filtered}
            for st in p.clusters
        ],
        "ts_history": list(p.ts_history),
    }


def _partition_from_payload(d: dict) -> ClusterPartition:
    clusters = [
        ClusterStats(
            size=int(c["size"]), f=c["f"], mfo=c["mfo"],
            delta_mfo=None if c["delta_mfo"] is None
            else _dec_float(c["delta_mfo"]),
            dominant_label=c["dominant_label"], filtered=bool(c["filtered"]),
        )
        for c in d["clusters"]
    ]
    return ClusterPartition(
        k=int(d["k"]), centroids=np.array(d["centroids"], dtype=float),
        ids=tuple(d["ids"]), assignment=dict(d["assignment"]),
        clusters=clusters, ts_history=list(d["ts_history"]),
    )


def _payload(container: ModelContainer) -> dict:
    kind, model = container.kind, container.model
    if kind == "recnn":
        if container.embeddings is None:
            raise ContainerError("network containers need their embeddings")
        return _recnn_payload(model, container.embeddings)
    if kind == "selective":
        if container.embeddings is None or container.partition is None:
            raise ContainerError(
                "selective containers need embeddings and a partition")
        return {
            "recnn": _recnn_payload(model, container.embeddings),
            "partition": _partition_payload(container.partition),
        }
    if kind == "infrule":
        return {"rules": dict(model.rules),
                "min_support_count": model.min_support_count,
                "min_confidence": model.min_confidence}
    if kind == "csan":
        return {"alpha": model.alpha, "ic": model.ic,
                "word_pmi": dict(model.word_pmi)}
    if kind == "keyword_max":
        return {"theta": _enc_float(model.theta),
                "word_cond": dict(model.word_cond)}
    raise ContainerError(f"unknown model kind {kind!r}")


def save_container(path, container: ModelContainer) -> None:
    doc = {
        "magic": MAGIC,
        "kind": container.kind,
        "info_type": container.info_type,
        "created": container.created,
        "payload": _payload(container),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_container(path) -> ModelContainer:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ContainerError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict) or doc.get("magic") != MAGIC:
        raise ContainerError(f"{path}: missing {MAGIC} marker")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ContainerError(f"{path}: unknown model kind {kind!r}")
    payload = doc["payload"]

    embeddings = partition = None
    if kind == "recnn":
        model, embeddings = _recnn_from_payload(payload)
    elif kind == "selective":
        model, embeddings = _recnn_from_payload(payload["recnn"])
        partition = _partition_from_payload(payload["partition"])
    elif kind == "infrule":
        model = InfRuleModel(rules=dict(payload["rules"]),
                             min_support_count=int(payload["min_support_count"]),
                             min_confidence=float(payload["min_confidence"]))
    elif kind == "csan":
        model = CsanModel(alpha=float(payload["alpha"]),
                          ic=float(payload["ic"]),
                          word_pmi=dict(payload["word_pmi"]))
    else:
        model = KeywordMaxModel(theta=_dec_float(payload["theta"]),
                                word_cond=dict(payload["word_cond"]))
    return ModelContainer(kind=kind, info_type=doc["info_type"], model=model,
                          embeddings=embeddings, partition=partition,
                          created=doc["created"])


def container_predict(container: ModelContainer, tokens, tree):
    """(label, probability) for one sentence, any model kind.

    ``tree`` is only consulted by network-backed kinds; keyword kinds
    classify the token list.
    """
    kind, model = container.kind, container.model
    if kind == "recnn":
        return recnn_predict(model, tree, container.embeddings)
    if kind == "selective":
        label, prob = route_predict(model, container.partition, tree,
                                    container.embeddings)
        return int(label), float(prob)
    if kind == "infrule":
        matched = [model.rules[t] for t in tokens if t in model.rules]
        return (1, max(matched)) if matched else (0, 0.0)
    if kind == "csan":
        from .keyword import csan_predict

        label = csan_predict(model, tokens)
        return label, float(label)
    if kind == "keyword_max":
        score = model.score(tokens)
        return model.predict(tokens), score
    raise ContainerError(f"unknown model kind {kind!r}")
