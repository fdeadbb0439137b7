"""Cluster-guided training speedup for the tree network.

The strategy: pretrain briefly, embed every training sentence with the
half-trained model, cluster the root representations, drop clusters whose
label distribution is already near-pure, and resume training on what is
left.  Prediction routes through the cluster partition so that dropped
clusters answer with their dominant label instead of the network.

Cluster purity is measured by MFO (the majority-class fraction) and
reported on a log scale as delta-MFO = -log10(1 - MFO), so 0.9 -> 1.0,
0.99 -> 2.0, and a perfectly pure cluster maps to +inf.
"""

import decimal
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import Dataset
from .recnn import TrainResult, _sgd_epoch, dev_accuracy, embed, predict, train


class SelectiveError(Exception):
    """Raised for invalid clustering inputs or over-aggressive filtering."""


@dataclass
class ClusterStats:
    """Per-cluster bookkeeping; label fields are None until scored."""

    size: int
    f: float | None = None            # fraction of label-1 members
    mfo: float | None = None          # max(f, 1 - f)
    delta_mfo: float | None = None    # -log10(1 - mfo), +inf when pure
    dominant_label: int | None = None
    filtered: bool = False


@dataclass
class ClusterPartition:
    k: int
    centroids: np.ndarray             # (k, dim)
    ids: tuple                        # point order used for clustering
    assignment: dict                  # id -> cluster index
    clusters: list                    # ClusterStats, one per cluster
    ts_history: list                  # total squared distance per iteration


@dataclass(frozen=True)
class SelectiveConfig:
    k: int = 35
    delta_mfo_cutoff: float = 1.9
    pretrain_budget: object = "auto"  # minibatch count, or "auto" for bend detection
    window: int = 5                   # probes per slope window
    slope_fraction: float = 0.2
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    seed: int = 0
    filter_only_label: int | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.delta_mfo_cutoff <= 0:
            raise ValueError("delta_mfo_cutoff must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1 probe")
        if not 0 < self.slope_fraction < 1:
            raise ValueError("slope_fraction must be in (0, 1)")
        if self.pretrain_budget != "auto":
            if not isinstance(self.pretrain_budget, int) or self.pretrain_budget < 1:
                raise ValueError('pretrain_budget must be "auto" or a positive int')


def delta_mfo(mfo: float) -> float:
    """Log-scale purity; MFO of 1 maps to the +inf sentinel.

    The complement 1 - mfo is formed in decimal so that inputs with a
    short decimal form map exactly: 0.9 -> 1.0, 0.99 -> 2.0.  A binary
    subtraction would land 2 ulp off on such values.
    """
    if not 0.5 <= mfo <= 1.0:
        raise SelectiveError(f"MFO must be in [0.5, 1], got {mfo}")
    if mfo >= 1.0:
        return math.inf
    with decimal.localcontext() as ctx:
        ctx.prec = 30
        complement = decimal.Decimal(1) - decimal.Decimal(repr(float(mfo)))
        return float(-complement.log10())


def _assign_points(pts, centroids):
    d2 = cdist(pts, centroids, "sqeuclidean")
    return d2.argmin(axis=1)


def _reseed_empty(pts, centroids, assign):
    # an empty cluster takes over the point farthest from its own centroid
    for c in range(len(centroids)):
        if np.any(assign == c):
            continue
        dists = ((pts - centroids[assign]) ** 2).sum(axis=1)
        far = int(np.argmax(dists))
        centroids[c] = pts[far]
        assign[far] = c


def _total_squared(pts, centroids, assign) -> float:
    return float(((pts - centroids[assign]) ** 2).sum())


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100,
           tol: float = 1e-6, ids=None) -> ClusterPartition:
    """Lloyd's algorithm; the objective is checked non-increasing every step.

    Initial centroids are k distinct points sampled by ``seed``; a cluster
    that empties out is re-seeded with the point farthest from its current
    centroid.  Iteration stops at ``max_iter`` or when the relative change
    of the total squared distance falls below ``tol``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise SelectiveError("points must be a 2-d array")
    n = len(pts)
    if k < 1:
        raise SelectiveError("k must be at least 1")
    if n < k:
        raise SelectiveError(f"k={k} clusters need at least {k} points, got {n}")
    if ids is None:
        ids = tuple(str(i) for i in range(n))
    else:
        ids = tuple(ids)
        if len(ids) != n:
            raise SelectiveError("ids must align with points")

    rng = np.random.default_rng(seed)
    uniq = np.unique(pts, axis=0)
    if len(uniq) >= k:
        centroids = uniq[rng.choice(len(uniq), size=k, replace=False)].copy()
    else:
        # degenerate input: fewer distinct points than clusters
        extra = pts[rng.choice(n, size=k - len(uniq))]
        centroids = np.concatenate([uniq, extra])

    assign = _assign_points(pts, centroids)
    _reseed_empty(pts, centroids, assign)
    history = [_total_squared(pts, centroids, assign)]
    for _ in range(max_iter):
        for c in range(k):
            centroids[c] = pts[assign == c].mean(axis=0)
        assign = _assign_points(pts, centroids)
        _reseed_empty(pts, centroids, assign)
        ts = _total_squared(pts, centroids, assign)
        prev = history[-1]
        if ts > prev + 1e-9 * max(1.0, prev):
            raise SelectiveError("clustering objective increased between iterations")
        history.append(ts)
        if prev <= 0.0 or (prev - ts) / prev < tol:
            break

    clusters = [ClusterStats(size=int(np.sum(assign == c))) for c in range(k)]
    assignment = {ids[i]: int(assign[i]) for i in range(n)}
    return ClusterPartition(k=k, centroids=centroids, ids=ids,
                            assignment=assignment, clusters=clusters,
                            ts_history=history)


def score_clusters(partition: ClusterPartition, labels) -> ClusterPartition:
    """Attach label purity stats to every cluster.

    ``labels`` must align with the point order the partition was built
    from (``partition.ids``).  Dominant-label ties go to 0.
    """
    if len(labels) != len(partition.ids):
        raise SelectiveError("labels must align with the clustered points")
    members = [[] for _ in range(partition.k)]
    for sid, label in zip(partition.ids, labels):
        if label not in (0, 1):
            raise SelectiveError(f"labels must be 0 or 1, got {label!r}")
        members[partition.assignment[sid]].append(label)

    scored = []
    for c, stats in enumerate(partition.clusters):
        if not members[c]:
            raise SelectiveError(f"cluster {c} has no members")
        f = sum(members[c]) / len(members[c])
        mfo = max(f, 1.0 - f)
        scored.append(replace(
            stats, size=len(members[c]), f=f, mfo=mfo,
            delta_mfo=delta_mfo(mfo), dominant_label=1 if f > 0.5 else 0,
        ))
    return replace(partition, clusters=scored)


def _bend_at(curve, window: int, slope_fraction: float):
    """Minibatch index of the first probe whose window slope collapses.

    The slope is taken over the trailing ``window`` probes and compared
    against the largest slope seen before it; None when no probe qualifies.
    """
    max_slope = None
    for i in range(window, len(curve)):
        mb0, acc0 = curve[i - window]
        mb1, acc1 = curve[i]
        if mb1 <= mb0:
            raise SelectiveError("curve minibatch counts must be increasing")
        slope = (acc1 - acc0) / (mb1 - mb0)
        if max_slope is not None and slope < slope_fraction * max_slope:
            return mb1
        max_slope = slope if max_slope is None else max(max_slope, slope)
    return None


def detect_pretrain_stop(curve, window: int = 5,
                         slope_fraction: float = 0.2) -> int:
    """Where a dev-accuracy curve stops climbing, as a minibatch index.

    A curve that never bends yields its last probe.
    """
    if len(curve) < 2 * window:
        raise SelectiveError(
            f"need at least {2 * window} probes, got {len(curve)}")
    counts = [mb for mb, _ in curve]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise SelectiveError("curve minibatch counts must be increasing")
    hit = _bend_at(curve, window, slope_fraction)
    return curve[-1][0] if hit is None else hit


def filter_dataset(partition: ClusterPartition, sentences,
                   delta_mfo_cutoff: float = 1.9, only_label=None):
    """Drop sentences in near-pure clusters; returns (kept, partition).

    Clusters at or above the cutoff are marked filtered with their
    dominant label frozen.  An infinite cutoff disables filtering even
    for perfectly pure clusters.  ``only_label`` restricts removal to
    clusters dominated by that label.
    """
    if delta_mfo_cutoff <= 0:
        raise SelectiveError("delta_mfo_cutoff must be positive")
    if any(st.delta_mfo is None for st in partition.clusters):
        raise SelectiveError("partition must be scored before filtering")

    drop = set()
    if not math.isinf(delta_mfo_cutoff):
        for c, st in enumerate(partition.clusters):
            if st.delta_mfo >= delta_mfo_cutoff and \
                    (only_label is None or st.dominant_label == only_label):
                drop.add(c)
    if len(drop) == partition.k:
        raise SelectiveError(
            "cutoff removed every cluster; raise delta_mfo_cutoff")

    kept = []
    for s in sentences:
        if s.id not in partition.assignment:
            raise SelectiveError(f"sentence {s.id} was never clustered")
        if partition.assignment[s.id] not in drop:
            kept.append(s)
    flagged = [replace(st, filtered=(c in drop))
               for c, st in enumerate(partition.clusters)]
    return kept, replace(partition, clusters=flagged)


@dataclass
class SelectiveReport:
    pretrain_minibatches: int
    resume_minibatches: int
    total_minibatches: int
    sentences_before: int
    sentences_after: int
    clusters_filtered: int
    pretrain_stop_reason: str


@dataclass
class SelectiveResult:
    model: object
    partition: ClusterPartition
    report: SelectiveReport
    curve: list = field(default_factory=list)   # pretrain (minibatch, dev_acc)
    resume: TrainResult | None = None


def selective_train(model, dataset, train_config, sel_config: SelectiveConfig,
                    embeddings) -> SelectiveResult:
    """Pretrain, cluster, filter, then resume training on the reduced set.

    The pretrain phase runs until the dev-accuracy curve bends (or until
    ``sel_config.pretrain_budget`` minibatches when set explicitly); the
    resume phase trains to objective convergence on the kept sentences.
    All phases use the first configured learning rate.
    """
    train_set, dev_set = list(dataset.train), list(dataset.dev)
    if not train_set or not dev_set:
        raise SelectiveError("train and dev splits must be non-empty")

    lr = train_config.learning_rates[0]
    auto = sel_config.pretrain_budget == "auto"
    rng = np.random.default_rng(train_config.seed)
    curve = []
    stop_reason = "max epochs during pretraining"
    stopped = False

    def probe(mb):
        nonlocal stopped, stop_reason
        if mb % train_config.probe_interval == 0:
            curve.append((mb, dev_accuracy(model, dev_set, embeddings)))
            if auto and len(curve) >= 2 * sel_config.window and _bend_at(
                    curve, sel_config.window, sel_config.slope_fraction) is not None:
                stopped, stop_reason = True, "accuracy curve bend detected"
                raise StopIteration
        if not auto and mb >= sel_config.pretrain_budget:
            stopped, stop_reason = True, "pretrain budget reached"
            raise StopIteration

    # probe every minibatch so budget stops land exactly; the closure
    # samples dev accuracy at the configured interval only
    every_mb = replace(train_config, probe_interval=1)
    pretrain_mb = 0
    for _ in range(train_config.max_epochs):
        pretrain_mb += _sgd_epoch(model, train_set, every_mb, embeddings, lr,
                                  rng, probe=probe, minibatch_offset=pretrain_mb)
        if stopped:
            break

    points = np.stack([embed(model, s.tree, embeddings) for s in train_set])
    partition = kmeans(points, sel_config.k, seed=sel_config.seed,
                       max_iter=sel_config.kmeans_max_iter,
                       tol=sel_config.kmeans_tol,
                       ids=[s.id for s in train_set])
    partition = score_clusters(partition, [s.label for s in train_set])
    kept, partition = filter_dataset(partition, train_set,
                                     sel_config.delta_mfo_cutoff,
                                     sel_config.filter_only_label)

    resume_cfg = replace(train_config, learning_rates=(lr,),
                         stop_mode="objective")
    reduced = Dataset(name=dataset.name + "-selective",
                      info_type=dataset.info_type, train=kept, dev=dev_set)
    resume = train(model, reduced, resume_cfg, embeddings)

    report = SelectiveReport(
        pretrain_minibatches=pretrain_mb,
        resume_minibatches=resume.total_minibatches,
        total_minibatches=pretrain_mb + resume.total_minibatches,
        sentences_before=len(train_set),
        sentences_after=len(kept),
        clusters_filtered=sum(st.filtered for st in partition.clusters),
        pretrain_stop_reason=stop_reason,
    )
    return SelectiveResult(model=resume.model, partition=partition,
                           report=report, curve=curve, resume=resume)


def route_predict(model, partition: ClusterPartition, tree, embeddings):
    """Predict through the partition: filtered clusters answer directly.

    The sentence is embedded and routed to its nearest centroid (ties to
    the lowest index).  Filtered clusters return their frozen dominant
    label with the cluster MFO as the confidence; anything else falls
    through to the network.
    """
    v = embed(model, tree, embeddings)
    d2 = ((partition.centroids - v) ** 2).sum(axis=1)
    stats = partition.clusters[int(np.argmin(d2))]
    if stats.filtered:
        return stats.dominant_label, stats.mfo
    return predict(model, tree, embeddings)
