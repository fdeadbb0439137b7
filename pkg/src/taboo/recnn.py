"""Recursive neural network over binarized parse trees.

Every internal node combines its two children through side-specific
transforms: a leaf child contributes W_side @ embedding + b_W, an
internal child contributes U_side @ rep + b_U.  The node representation
is the elementwise activation of the summed transforms, and every
internal node also emits a two-way softmax over (non-sensitive,
sensitive).  The sentence label is propagated to every node, so training
minimizes a weighted per-node cross-entropy summed over the whole tree;
each node's parameters therefore receive gradient from its own output
head and from the heads of all its ancestors.

Word embeddings are frozen; the leaf transforms absorb adaptation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

P_CLAMP = 1e-12
PARAM_KEYS = ("W_l", "W_r", "U_l", "U_r", "b_W", "b_U", "V", "b_p")


class TrainError(RuntimeError):
    pass


@dataclass
class RecnnModel:
    n_e: int
    n_h: int
    activation: str
    params: dict
    seed: int = 0

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def clone(self) -> "RecnnModel":
        return RecnnModel(self.n_e, self.n_h, self.activation, self.copy_params(), self.seed)


@dataclass
class TrainConfig:
    learning_rates: tuple = (0.3, 0.1, 0.03, 0.01)
    batch_size: int = 20
    class_weight: float = 1.0
    dropout: float = 0.1
    patience: int = 3
    max_epochs: int = 30
    epsilon: float = 1e-4
    probe_interval: int = 50
    line_search_epochs: int = 1
    stop_mode: str = "dev_patience"  # or "objective"
    trainable: tuple | None = None
    leaf_noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.class_weight < 1:
            raise ValueError(f"class weight must be >= 1, got {self.class_weight}")
        if not (0 <= self.dropout < 1):
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.stop_mode not in ("dev_patience", "objective"):
            raise ValueError(f"unknown stop_mode {self.stop_mode!r}")
        if not self.learning_rates:
            raise ValueError("need at least one learning rate")


def init_params(n_e: int, n_h: int, seed: int, activation: str = "tanh",
                init_range: float | None = None) -> RecnnModel:
    """Uniform [-r, r] init with r = 1/sqrt(fan-in) per matrix; biases zero.

    ``init_range`` overrides r for every matrix (0.0 gives the all-zero
    model whose outputs are (0.5, 0.5) everywhere).
    """
    if activation not in ("tanh", "sigmoid", "relu"):
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)

    def mat(rows, cols, fan_in):
        r = init_range if init_range is not None else 1.0 / math.sqrt(fan_in)
        return rng.uniform(-r, r, size=(rows, cols))

    params = {
        "W_l": mat(n_h, n_e, n_e),
        "W_r": mat(n_h, n_e, n_e),
        "U_l": mat(n_h, n_h, n_h),
        "U_r": mat(n_h, n_h, n_h),
        "b_W": np.zeros(n_h),
        "b_U": np.zeros(n_h),
        "V": mat(2, n_h, n_h),
        "b_p": np.zeros(2),
    }
    return RecnnModel(n_e=n_e, n_h=n_h, activation=activation, params=params, seed=seed)


def _activate(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    return np.maximum(x, 0.0)


def _activate_grad(name: str, pre: np.ndarray, rep: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - rep * rep
    if name == "sigmoid":
        return rep * (1.0 - rep)
    return (pre > 0).astype(float)


def _softmax2(z: np.ndarray) -> np.ndarray:
    m = z.max()
    e = np.exp(z - m)
    return e / e.sum()


LEAF, NODE = 0, 1


def _build_plan(tree) -> list:
    """Post-order list of internal nodes.

    Each entry is ((kind_l, ref_l), (kind_r, ref_r)) where a leaf ref is
    its token and a node ref is the child's index in the list.
    """
    plan: list = []

    def visit(node):
        if node.is_leaf():
            return (LEAF, node.token)
        if len(node.children) != 2:
            raise ValueError("tree is not binary; binarize before scoring")
        left = visit(node.children[0])
        right = visit(node.children[1])
        plan.append((left, right))
        return (NODE, len(plan) - 1)

    top = visit(tree)
    if top[0] == LEAF:
        raise ValueError("tree must have at least 2 leaves")
    return plan


class NodeStates:
    """Forward pass results: one row per internal node, post-order (root
    last).  ``rep_used`` differs from ``reps`` only under dropout."""

    def __init__(self, plan, n_h):
        n = len(plan)
        self.plan = plan
        self.pres = np.zeros((n, n_h))
        self.reps = np.zeros((n, n_h))
        self.rep_used = np.zeros((n, n_h))
        self.outputs = np.zeros((n, 2))
        self.leaf_vecs: dict = {}

    def __len__(self) -> int:
        return len(self.plan)

    @property
    def root_output(self) -> np.ndarray:
        return self.outputs[-1]

    @property
    def root_rep(self) -> np.ndarray:
        return self.reps[-1]


def _forward(model: RecnnModel, tree, embeddings, *, rng=None,
             dropout: float = 0.0, leaf_noise_std: float = 0.0) -> NodeStates:
    if embeddings.dim != model.n_e:
        raise ValueError(
            f"embedding dimension {embeddings.dim} does not match model n_e {model.n_e}"
        )
    p = model.params
    plan = _build_plan(tree)
    states = NodeStates(plan, model.n_h)

    def child_vec(idx, side, slot):
        kind, ref = side
        W = p["W_l"] if slot == 0 else p["W_r"]
        U = p["U_l"] if slot == 0 else p["U_r"]
        if kind == LEAF:
            vec = np.asarray(embeddings.lookup(ref), dtype=float)
            if leaf_noise_std > 0:
                vec = vec + rng.normal(0.0, leaf_noise_std, size=vec.shape)
            states.leaf_vecs[(idx, slot)] = vec
            return W @ vec + p["b_W"]
        return U @ states.rep_used[ref] + p["b_U"]

    keep = 1.0 - dropout
    for idx, (left, right) in enumerate(plan):
        pre = child_vec(idx, left, 0) + child_vec(idx, right, 1)
        rep = _activate(model.activation, pre)
        states.pres[idx] = pre
        states.reps[idx] = rep
        if dropout > 0.0:
            mask = (rng.random(model.n_h) < keep).astype(float) / keep
            states.rep_used[idx] = rep * mask
        else:
            states.rep_used[idx] = rep
        states.outputs[idx] = _softmax2(p["V"] @ states.rep_used[idx] + p["b_p"])
    return states


def forward(model: RecnnModel, tree, embeddings) -> NodeStates:
    """Deterministic forward pass (no dropout, no noise)."""
    return _forward(model, tree, embeddings)


def loss(states: NodeStates, root_label: int, w: float = 1.0) -> float:
    """Weighted cross-entropy summed over every internal node, with the
    root label as each node's target."""
    p1 = np.clip(states.outputs[:, 1], P_CLAMP, 1.0 - P_CLAMP)
    if root_label == 1:
        return float(-w * np.sum(np.log(p1)))
    return float(-np.sum(np.log(1.0 - p1)))


def _zero_grads(model: RecnnModel) -> dict:
    return {k: np.zeros_like(v) for k, v in model.params.items()}


def _backward_from_states(model: RecnnModel, states: NodeStates,
                          root_label: int, w: float) -> dict:
    p = model.params
    grads = _zero_grads(model)
    n = len(states)
    target = np.array([0.0, 1.0]) if root_label == 1 else np.array([1.0, 0.0])
    scale = w if root_label == 1 else 1.0
    delta_rep = np.zeros((n, model.n_h))

    for idx in range(n - 1, -1, -1):
        dz = scale * (states.outputs[idx] - target)
        grads["V"] += np.outer(dz, states.rep_used[idx])
        grads["b_p"] += dz
        d_used = p["V"].T @ dz + delta_rep[idx]
        # dropout rescaling folds into rep_used / reps ratio; recover the
        # multiplicative mask where rep is nonzero
        rep = states.reps[idx]
        mask = np.ones_like(rep)
        nz = rep != 0
        mask[nz] = states.rep_used[idx][nz] / rep[nz]
        d_rep = d_used * mask
        d_pre = d_rep * _activate_grad(model.activation, states.pres[idx], rep)
        for slot, side in enumerate(states.plan[idx]):
            kind, ref = side
            if kind == LEAF:
                grads["W_l" if slot == 0 else "W_r"] += np.outer(
                    d_pre, states.leaf_vecs[(idx, slot)]
                )
                grads["b_W"] += d_pre
            else:
                U_key = "U_l" if slot == 0 else "U_r"
                grads[U_key] += np.outer(d_pre, states.rep_used[ref])
                grads["b_U"] += d_pre
                delta_rep[ref] += p[U_key].T @ d_pre
    return grads


def backward(model: RecnnModel, tree, root_label: int, w: float, embeddings) -> dict:
    """Analytic gradients of ``loss`` for a deterministic forward pass."""
    states = _forward(model, tree, embeddings)
    return _backward_from_states(model, states, root_label, w)


def predict(model: RecnnModel, tree, embeddings) -> tuple[int, float]:
    """(label, sensitive probability) at the root; an exact tie goes to
    non-sensitive."""
    o = forward(model, tree, embeddings).root_output
    label = 1 if o[1] > o[0] else 0
    return label, float(o[1])


def embed(model: RecnnModel, tree, embeddings) -> np.ndarray:
    """Root representation used as the sentence embedding."""
    return forward(model, tree, embeddings).root_rep.copy()


@dataclass
class TrainResult:
    model: RecnnModel
    curve: list = field(default_factory=list)  # (minibatch_count, dev_accuracy)
    total_minibatches: int = 0
    chosen_lr: float = 0.0
    best_dev_accuracy: float = 0.0
    epochs_run: int = 0
    stop_reason: str = ""
    final_objective: float | None = None


def dev_accuracy(model: RecnnModel, dev, embeddings) -> float:
    if not dev:
        raise TrainError("empty dev split")
    correct = sum(1 for s in dev if predict(model, s.tree, embeddings)[0] == s.label)
    return correct / len(dev)


def _objective(model: RecnnModel, sentences, embeddings) -> float:
    """Mean squared error between labels and root sensitive probability."""
    total = 0.0
    for s in sentences:
        _, prob = predict(model, s.tree, embeddings)
        total += (s.label - prob) ** 2
    return total / len(sentences)


def _sgd_epoch(model: RecnnModel, train_set, config: TrainConfig, embeddings,
               lr: float, rng, *, probe=None, minibatch_offset: int = 0) -> int:
    """One shuffled epoch of minibatch SGD in place; returns minibatches run.

    ``probe`` is called as probe(minibatch_count) after every
    ``config.probe_interval`` minibatches; raising StopIteration from it
    ends the epoch early.
    """
    order = list(train_set)
    rng.shuffle(order)
    trainable = config.trainable or PARAM_KEYS
    count = 0
    for start in range(0, len(order), config.batch_size):
        batch = order[start : start + config.batch_size]
        acc = _zero_grads(model)
        batch_loss = 0.0
        for s in batch:
            states = _forward(
                model, s.tree, embeddings,
                rng=rng, dropout=config.dropout,
                leaf_noise_std=config.leaf_noise_std,
            )
            batch_loss += loss(states, s.label, config.class_weight)
            g = _backward_from_states(model, states, s.label, config.class_weight)
            for k in trainable:
                acc[k] += g[k]
        if not math.isfinite(batch_loss):
            raise TrainError(
                f"non-finite loss at minibatch {minibatch_offset + count + 1} "
                f"(lr={lr}); try a smaller learning rate"
            )
        inv = 1.0 / len(batch)
        for k in trainable:
            model.params[k] -= lr * inv * acc[k]
        count += 1
        if probe is not None and (minibatch_offset + count) % config.probe_interval == 0:
            try:
                probe(minibatch_offset + count)
            except StopIteration:
                break
    return count


def _run_training(model: RecnnModel, train_set, dev_set, config: TrainConfig,
                  embeddings, lr: float, *, max_epochs: int,
                  collect_curve: bool = True) -> TrainResult:
    rng = np.random.default_rng(config.seed)
    result = TrainResult(model=model, chosen_lr=lr)
    best_acc = -1.0
    best_params = model.copy_params()
    bad_epochs = 0
    prev_obj = None
    stop = False

    def probe(mb_count):
        nonlocal prev_obj, stop
        acc = dev_accuracy(model, dev_set, embeddings)
        if collect_curve:
            result.curve.append((mb_count, acc))
        if config.stop_mode == "objective":
            obj = _objective(model, train_set, embeddings)
            result.final_objective = obj
            if prev_obj is not None and prev_obj - obj < config.epsilon:
                stop = True
                raise StopIteration
            prev_obj = obj

    for epoch in range(max_epochs):
        ran = _sgd_epoch(
            model, train_set, config, embeddings, lr, rng,
            probe=probe, minibatch_offset=result.total_minibatches,
        )
        result.total_minibatches += ran
        result.epochs_run = epoch + 1
        if stop:
            result.stop_reason = "objective converged"
            break
        acc = dev_accuracy(model, dev_set, embeddings)
        if config.stop_mode == "dev_patience":
            if acc > best_acc:
                best_acc = acc
                best_params = model.copy_params()
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= config.patience:
                    result.stop_reason = f"no dev improvement for {config.patience} epochs"
                    break
    else:
        result.stop_reason = "max epochs reached"

    if config.stop_mode == "dev_patience":
        model.params = best_params
        result.best_dev_accuracy = best_acc
    else:
        result.best_dev_accuracy = dev_accuracy(model, dev_set, embeddings)
    result.model = model
    return result


def train(model: RecnnModel, dataset, config: TrainConfig, embeddings) -> TrainResult:
    """Line-search the learning rate, then train fully from the same init.

    Stopping is either dev-accuracy patience (default, returns the best
    dev snapshot) or training-objective convergence (returns the final
    parameters once the mean-squared-error improvement between probes
    falls below epsilon).
    """
    train_set, dev_set = list(dataset.train), list(dataset.dev)
    if not train_set or not dev_set:
        raise TrainError("train and dev splits must be non-empty")

    chosen = config.learning_rates[0]
    if len(config.learning_rates) > 1:
        best_score = -float("inf")
        for lr in config.learning_rates:
            trial = model.clone()
            try:
                res = _run_training(
                    trial, train_set, dev_set, config, embeddings, lr,
                    max_epochs=config.line_search_epochs, collect_curve=False,
                )
            except TrainError:
                continue
            score = res.best_dev_accuracy
            if score > best_score:
                best_score, chosen = score, lr
    final = model.clone()
    result = _run_training(
        final, train_set, dev_set, config, embeddings, chosen,
        max_epochs=config.max_epochs,
    )
    return result


def transfer_finetune(model: RecnnModel, golden_train, golden_dev,
                      config: TrainConfig, embeddings,
                      noise_std: float = 0.01) -> TrainResult:
    """Fine-tune only the output layer on golden labels.

    All composition parameters stay frozen; leaf embeddings get additive
    zero-mean Gaussian noise (std ``noise_std``) during training
    presentations only.
    """
    cfg = replace(config, trainable=("V", "b_p"), leaf_noise_std=noise_std)
    from .corpus import Dataset

    ds = Dataset(name="golden", info_type="golden", train=list(golden_train), dev=list(golden_dev))
    return train(model.clone(), ds, cfg, embeddings)
