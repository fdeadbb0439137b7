"""End-to-end behavior gates for the toolkit.

Each test pins one headline guarantee: an exact arithmetic identity, an
invariant that must hold on randomized inputs, or a scaled-down accuracy
trend the detectors must reproduce from scratch inside a time budget.
Everything runs on synthetic data; the one real-corpus check at the
bottom is optional and skips when the data is not on disk.
"""

import math
import os
import random
import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from taboo.container import ModelContainer, container_predict, load_container, save_container
from taboo.corpus import Dataset, LabeledSentence, leaf, node, right_branching_tree
from taboo.embeddings import from_vocabulary
from taboo.evalkit import (
    TRIGGER,
    accuracy,
    confusion,
    gen_context_synthetic,
    gen_keyword_synthetic,
)
from taboo.keyword import (
    cond_sensitivity,
    confidence,
    count_terms,
    csan_predict,
    fit_csan,
    information_content,
    infrule_predict,
    keyword_max_fit,
    mine_inference_rules,
    ngram_cond_prob,
    pmi,
    support,
)
from taboo.recnn import (
    PARAM_KEYS,
    TrainConfig,
    backward,
    embed,
    forward,
    init_params,
    loss,
    predict,
    train,
)
from taboo.selective import (
    SelectiveConfig,
    delta_mfo,
    kmeans,
    route_predict,
    score_clusters,
    selective_train,
)


def make_sentence(sid, tokens, label):
    return LabeledSentence(sid, "d0", "SYNTH", label, tuple(tokens),
                           right_branching_tree(list(tokens)))


def random_binary_tree(rng, n_leaves, vocab):
    nodes = [leaf(rng.choice(vocab)) for _ in range(n_leaves)]
    while len(nodes) > 1:
        i = rng.randrange(len(nodes) - 1)
        nodes[i:i + 2] = [node("X", nodes[i], nodes[i + 1])]
    return nodes[0]


def accuracy_of(model_predict, sentences):
    truths = [s.label for s in sentences]
    return accuracy(confusion([model_predict(s) for s in sentences], truths))


# ---------------------------------------------------------------- gradients
def numeric_grads(model, tree, label, w, emb, step=1e-5):
    grads = {}
    for key, arr in model.params.items():
        g = np.zeros_like(arr)
        flat, gf = arr.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss(forward(model, tree, emb), label, w)
            flat[i] = orig - step
            lm = loss(forward(model, tree, emb), label, w)
            flat[i] = orig
            gf[i] = (lp - lm) / (2 * step)
        grads[key] = g
    return grads


class TestGradientCorrectness:
    def test_analytic_matches_central_differences(self):
        t0 = time.monotonic()
        rng = random.Random(11)
        vocab = [f"w{i}" for i in range(10)]
        emb = from_vocabulary(vocab, dim=4, seed=3)
        model = init_params(4, 5, seed=17)
        for trial in range(4):
            tree = random_binary_tree(rng, rng.randint(3, 8), vocab)
            label = trial % 2
            w = 2.0 if trial == 3 else 1.0
            analytic = backward(model, tree, label, w, emb)
            numeric = numeric_grads(model, tree, label, w, emb)
            for key in PARAM_KEYS:
                ga, gn = analytic[key], numeric[key]
                denom = max(np.linalg.norm(ga), np.linalg.norm(gn), 1e-10)
                rel = np.linalg.norm(ga - gn) / denom
                assert rel < 1e-4, f"trial {trial} block {key}: {rel}"
        assert time.monotonic() - t0 < 5.0


# --------------------------------------------------- label-frequency optimum
class TestRepeatedLabelFit:
    def test_root_probability_tracks_weighted_label_frequency(self):
        # one sentence seen with labels 0, 1, 0: the squared-loss optimum
        # is the constant w/(w+2), so 1/3 unweighted and 1/2 at w=2
        t0 = time.monotonic()
        tokens = ["the", "payment", "cleared"]
        emb = from_vocabulary(tokens, dim=4, seed=1)
        base = [make_sentence(f"s{i}", tokens, lab)
                for i, lab in enumerate([0, 1, 0])]
        ds = Dataset("rep", "SYNTH", train=base * 20, dev=list(base))
        for w, lo, hi in ((1.0, 0.28, 0.38), (2.0, 0.45, 0.55)):
            cfg = TrainConfig(
                learning_rates=(0.3,), batch_size=10, class_weight=w,
                dropout=0.0, stop_mode="objective", epsilon=1e-7,
                probe_interval=12, max_epochs=300, seed=3,
            )
            result = train(init_params(4, 6, seed=9), ds, cfg, emb)
            _, prob = predict(result.model, base[0].tree, emb)
            assert lo <= prob <= hi, f"w={w}: root probability {prob}"
        assert time.monotonic() - t0 < 30.0


# ------------------------------------------------------------ purity scale
class TestPurityTransform:
    def test_decimal_landmarks(self):
        assert delta_mfo(0.9) == 1.0
        assert delta_mfo(0.99) == 2.0
        assert abs(delta_mfo(0.9867) - 1.88) <= 0.005


# ------------------------------------------------------- majority baseline
class TestConstantBaseline:
    def test_always_nonsensitive_accuracy(self):
        truths = [1] * 322 + [0] * 638
        preds = [0] * len(truths)
        assert abs(accuracy(confusion(preds, truths)) - 0.6646) <= 0.0001


# ------------------------------------------------- context vs keyword split
class TestContextSeparation:
    def test_tree_reader_beats_keyword_family_on_xor_corpus(self):
        t0 = time.monotonic()
        ds = gen_context_synthetic(seed=5, n=2000)
        store = count_terms(ds.train, n_max=1)

        keyword_accs = []
        rules = mine_inference_rules(store, 2, 0.6)
        keyword_accs.append(accuracy_of(
            lambda s: infrule_predict(rules, s.tokens), ds.test))
        for alpha in (1.0, 1.5, 2.0):
            cs = fit_csan(store, alpha)
            keyword_accs.append(accuracy_of(
                lambda s: csan_predict(cs, s.tokens), ds.test))
        km, _ = keyword_max_fit(store, ds.dev)
        keyword_accs.append(accuracy_of(
            lambda s: km.predict(s.tokens), ds.test))
        best_keyword = max(keyword_accs)
        assert best_keyword <= 0.65

        vocab = sorted({t for s in ds.all_sentences() for t in s.tokens})
        emb = from_vocabulary(vocab, dim=16, seed=0)
        cfg = TrainConfig(learning_rates=(0.03,), batch_size=10, dropout=0.1,
                          patience=10, max_epochs=60, probe_interval=10**9,
                          seed=11)
        result = train(init_params(16, 32, seed=7, activation="relu"),
                       ds, cfg, emb)
        net_acc = accuracy_of(
            lambda s: predict(result.model, s.tree, emb)[0], ds.test)
        assert net_acc >= 0.85
        assert net_acc - best_keyword >= 0.20
        assert time.monotonic() - t0 < 300.0


# ----------------------------------------------------------- keyword ceiling
class TestKeywordCeiling:
    def test_trigger_corpus_fully_solved(self):
        t0 = time.monotonic()
        ds = gen_keyword_synthetic(seed=3, n=400)
        store = count_terms(ds.train, n_max=1)
        km, _ = keyword_max_fit(store, ds.dev)
        assert accuracy_of(lambda s: km.predict(s.tokens), ds.test) == 1.0
        rules = mine_inference_rules(store, 2, 0.6)
        assert TRIGGER in rules.rules
        assert time.monotonic() - t0 < 10.0


# --------------------------------------------------------- selective speedup
def redundant_template_corpus():
    """100 training sentences, 80% of them in two pure template groups
    and the rest a single ambiguous template with alternating labels."""
    tr, dv = [], []
    for i in range(40):
        tr.append(make_sentence(
            f"a{i}", ["alpha", "beta", "gamma", "delta", f"pa{i % 5}"], 0))
        tr.append(make_sentence(
            f"b{i}", ["epsilon", "zeta", "eta", "theta", f"pb{i % 5}"], 1))
    for i in range(20):
        tr.append(make_sentence(f"m{i}", ["mu", "nu", "xi", "omega", "pi"],
                                i % 2))
    for i in range(8):
        dv.append(make_sentence(
            f"da{i}", ["alpha", "beta", "gamma", "delta", f"pa{i % 5}"], 0))
        dv.append(make_sentence(
            f"db{i}", ["epsilon", "zeta", "eta", "theta", f"pb{i % 5}"], 1))
    for i in range(4):
        dv.append(make_sentence(f"dm{i}", ["mu", "nu", "xi", "omega", "pi"],
                                i % 2))
    return Dataset("templates", "SYNTH", train=tr, dev=dv)


class TestSelectiveSpeedup:
    def test_filtered_resume_needs_far_fewer_minibatches(self):
        t0 = time.monotonic()
        ds = redundant_template_corpus()
        vocab = sorted({t for s in ds.all_sentences() for t in s.tokens})
        emb = from_vocabulary(vocab, dim=16, seed=2)
        cfg = TrainConfig(learning_rates=(0.03,), batch_size=10, dropout=0.0,
                          stop_mode="objective", epsilon=1e-3, max_epochs=60,
                          probe_interval=10**9, seed=11)

        full = train(init_params(16, 32, seed=7, activation="relu"),
                     ds, cfg, emb)
        full_acc = accuracy_of(
            lambda s: predict(full.model, s.tree, emb)[0], ds.dev)

        scfg = SelectiveConfig(k=3, delta_mfo_cutoff=1.9, pretrain_budget=20,
                               seed=1)
        sel = selective_train(init_params(16, 32, seed=7, activation="relu"),
                              ds, replace(cfg, probe_interval=5), scfg, emb)
        sel_acc = accuracy_of(
            lambda s: route_predict(sel.model, sel.partition, s.tree,
                                    emb)[0], ds.dev)

        filtered = [c for c in sel.partition.clusters if c.filtered]
        assert len(filtered) == 2
        assert all(c.mfo == 1.0 for c in filtered)
        assert sum(c.size for c in filtered) >= 0.6 * len(ds.train)

        assert sel.report.total_minibatches <= full.total_minibatches * 2 / 3
        assert abs(sel_acc - full_acc) <= 0.01
        assert time.monotonic() - t0 < 600.0


# --------------------------------------------------------- kmeans invariants
class TestKmeansInvariants:
    def test_objective_never_increases_across_random_instances(self):
        t0 = time.monotonic()
        rng = np.random.default_rng(7)
        for trial in range(100):
            k = int(rng.integers(2, 7))
            n = int(rng.integers(k + 1, 61))
            dim = int(rng.integers(1, 9))
            pts = rng.normal(size=(n, dim))
            part = kmeans(pts, k=k, seed=trial)
            hist = part.ts_history
            assert len(hist) >= 1
            for a, b in zip(hist, hist[1:]):
                assert b <= a + 1e-9 * max(1.0, abs(a))
        assert time.monotonic() - t0 < 10.0

    def test_two_blob_exact_recovery(self):
        rng = np.random.default_rng(3)
        blob_a = rng.normal(loc=0.0, scale=0.5, size=(20, 3))
        blob_b = rng.normal(loc=10.0, scale=0.5, size=(20, 3))
        pts = np.vstack([blob_a, blob_b])
        part = kmeans(pts, k=2, seed=0)
        assign = np.array([part.assignment[pid] for pid in part.ids])
        # every blob lands whole in one cluster
        assert len(set(assign[:20])) == 1
        assert len(set(assign[20:])) == 1
        assert assign[0] != assign[20]
        for c in (assign[0], assign[20]):
            np.testing.assert_array_equal(part.centroids[c],
                                          pts[assign == c].mean(axis=0))


# ------------------------------------------------------ count-store oracle
def brute_gram_sets(sentences, n_max):
    out = []
    for s in sentences:
        grams = set()
        toks = list(s.tokens)
        for n in range(1, n_max + 1):
            for i in range(len(toks) - n + 1):
                grams.add(tuple(toks[i:i + n]))
        out.append((grams, s.label))
    return out


class TestCountingOracle:
    def test_store_statistics_match_brute_force_recounts(self):
        t0 = time.monotonic()
        alphabet = [f"t{j}" for j in range(6)]
        for trial in range(100):
            rng = random.Random(trial)
            n = rng.randint(1, 50)
            sents = []
            for i in range(n):
                tokens = tuple(rng.choice(alphabet)
                               for _ in range(rng.randint(2, 9)))
                sents.append(SimpleNamespace(tokens=tokens,
                                             label=rng.randint(0, 1)))
            if not any(s.label == 1 for s in sents):
                sents[0].label = 1
            store = count_terms(sents, n_max=2)
            pres = brute_gram_sets(sents, 2)
            total = len(sents)
            positives = sum(1 for _, lab in pres if lab == 1)

            all_terms = set().union(*(g for g, _ in pres))
            for term in sorted(all_terms):
                c = sum(1 for g, _ in pres if term in g)
                j = sum(1 for g, lab in pres if term in g and lab == 1)
                assert store.count(term) == c
                assert store.joint(term) == j
                assert support(store, term) == c / total
                assert confidence(store, term) == j / c
                assert cond_sensitivity(store, term) == j / c

            assert information_content(store) == -math.log2(positives / total)

            base = positives / total
            words = sorted({t[0] for t in all_terms if len(t) == 1})
            conds, pmis = [], []
            for w in words:
                c = sum(1 for g, _ in pres if (w,) in g)
                j = sum(1 for g, lab in pres if (w,) in g and lab == 1)
                expected = -math.inf if j == 0 \
                    else math.log2(j / c) - math.log2(base)
                assert pmi(store, w) == expected
                conds.append(j / c)
                pmis.append(pmi(store, w))
            for x in range(len(words)):
                for y in range(len(words)):
                    assert (pmis[x] < pmis[y]) == (conds[x] < conds[y])

            contexts = sorted({t[0] for t in all_terms if len(t) == 2})
            for ctx in contexts[:3]:
                bucket = {t[1]: sum(1 for g, _ in pres if t in g)
                          for t in all_terms
                          if len(t) == 2 and t[0] == ctx}
                denom = sum(bucket.values())
                for w, c in bucket.items():
                    assert ngram_cond_prob(store, w, (ctx,)) == c / denom
        assert time.monotonic() - t0 < 30.0


# ------------------------------------------------------------- persistence
class TestPersistence:
    def test_every_kind_reproduces_predictions_bit_identically(self, tmp_path):
        ds = gen_keyword_synthetic(seed=9, n=40)
        sentences = ds.all_sentences()
        vocab = sorted({t for s in sentences for t in s.tokens})
        emb = from_vocabulary(vocab, dim=6, seed=4)
        store = count_terms(ds.train, n_max=1)
        net = init_params(6, 4, seed=1)

        roots = np.stack([embed(net, s.tree, emb) for s in ds.train])
        part = kmeans(roots, k=3, seed=0, ids=[s.id for s in ds.train])
        part = score_clusters(part, [s.label for s in ds.train])
        part.clusters[0] = replace(part.clusters[0], filtered=True)

        containers = {
            "infrule": ModelContainer(
                kind="infrule", info_type="SYNTH",
                model=mine_inference_rules(store, 2, 0.6)),
            "csan": ModelContainer(
                kind="csan", info_type="SYNTH", model=fit_csan(store, 1.5)),
            "keyword_max": ModelContainer(
                kind="keyword_max", info_type="SYNTH",
                model=keyword_max_fit(store, ds.dev)[0]),
            "recnn": ModelContainer(
                kind="recnn", info_type="SYNTH", model=net, embeddings=emb),
            "selective": ModelContainer(
                kind="selective", info_type="SYNTH", model=net,
                embeddings=emb, partition=part),
        }
        for kind, container in containers.items():
            path = tmp_path / f"{kind}.json"
            save_container(path, container)
            loaded = load_container(path)
            for s in sentences:
                before = container_predict(container, list(s.tokens), s.tree)
                after = container_predict(loaded, list(s.tokens), s.tree)
                assert before == after, (kind, s.id)


# ------------------------------------------------- optional real-data check
class TestEmailCorpusBenchmark:
    def test_rule_mining_accuracy_on_real_trees(self):
        root = os.environ.get("TABOO_EMAIL_TREES")
        if not root:
            pytest.skip("set TABOO_EMAIL_TREES to a directory with "
                        "train.tsv and test.tsv to run this check")
        from taboo.corpus import ingest_records, read_tree_file

        train_s, _ = ingest_records(read_tree_file(
            os.path.join(root, "train.tsv")), id_prefix="tr")
        test_s, _ = ingest_records(read_tree_file(
            os.path.join(root, "test.tsv")), id_prefix="te")
        store = count_terms(train_s, n_max=1)
        rules = mine_inference_rules(store, 2, 0.6)
        acc = accuracy_of(
            lambda s: infrule_predict(rules, s.tokens), test_s)
        assert abs(acc - 0.7104) <= 0.02
