"""Loss, Adam, the training loop, stratified k-fold cross-validation and grid search."""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .corpus import as_rng, stratified_split
from .embeddings import EmbeddingMatrix
from .exceptions import ConfigError, DivergenceError, ShapeError, SplitError
from .layers import l2_penalty
from .networks import HyperParams, Network, SparseRows, build_model, stack_docs
from .tensor import Rng

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
EVAL_BATCH = 256


# ---------------------------------------------------------------------------
# Loss and optimizer
# ---------------------------------------------------------------------------

def cross_entropy(probs, labels, sample_weights=None):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits.

    Accepts a single probability vector with a scalar label, or a batch.
    """
    probs = np.asarray(probs, dtype=np.float64)
    single = probs.ndim == 1
    P = np.atleast_2d(probs)
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != P.shape[0]:
        raise ShapeError(f'{P.shape[0]} predictions but {y.shape[0]} labels')
    B = P.shape[0]
    w = np.ones(B) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)

    picked = P[np.arange(B), y]
    loss = float(np.sum(w * -np.log(np.maximum(picked, PROB_FLOOR))) / B)
    grad = P.copy()
    grad[np.arange(B), y] -= 1.0
    grad *= (w / B)[:, None]
    return loss, (grad[0] if single else grad)


def class_weight_vector(labels):
    """Inverse-frequency weights, normalized so a balanced set gets 1.0 per class."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=2).astype(np.float64)
    weights = np.zeros(2)
    nonzero = counts > 0
    weights[nonzero] = labels.size / (2.0 * counts[nonzero])
    return weights


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float):
    """One bias-corrected Adam update, in place.

    ``SparseRows`` gradients update only the listed rows and their moments.
    """
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step

    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        if isinstance(g, SparseRows):
            rows, values = g
            if values.shape != (rows.size, *p.shape[1:]):
                raise ShapeError(f'{name}: row gradient {values.shape} does not fit {p.shape}')
            m[rows] = b1 * m[rows] + (1.0 - b1) * values
            v[rows] = b2 * v[rows] + (1.0 - b2) * values * values
            p[rows] -= lr * (m[rows] / bc1) / (np.sqrt(v[rows] / bc2) + state.eps)
            continue
        if g.shape != p.shape:
            raise ShapeError(f'{name}: gradient {g.shape} does not fit parameter {p.shape}')
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def regularize(model: Network, grads: dict, lam: float) -> float:
    """Add the L2 term to ``grads`` in place and return its loss contribution.

    Embedding rows are penalized only where the batch touched them; the PAD
    row never is.
    """
    if lam == 0:
        return 0.0
    params = model.parameters()
    stage = {k: v for k, v in params.items() if k != 'embedding'}
    loss, l2_grads = l2_penalty(stage, lam)
    for name, g in l2_grads.items():
        grads[name] = grads[name] + g
    sparse = grads.get('embedding')
    if sparse is not None:
        rows_loss, rows_grad = l2_penalty({'embedding': params['embedding'][sparse.rows]}, lam)
        loss += rows_loss
        grads['embedding'] = SparseRows(sparse.rows, sparse.values + rows_grad['embedding'])
    return loss


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float = None
    val_accuracy: float = None


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int = None
    stopped_early: bool = False

    def __len__(self):
        return len(self.epochs)

    def to_rows(self):
        return [
            {'epoch': e.epoch, 'train_loss': e.train_loss, 'train_accuracy': e.train_accuracy,
             'val_loss': e.val_loss, 'val_accuracy': e.val_accuracy}
            for e in self.epochs
        ]


def predict_scores(model: Network, docs, batch_size=EVAL_BATCH) -> np.ndarray:
    """P(class 1) for every document, eval mode."""
    out = []
    for start in range(0, len(docs), batch_size):
        out.append(model.predict_batch(docs[start:start + batch_size])[:, 1])
    return np.concatenate(out) if out else np.zeros(0)


def _eval_loss(model, docs):
    probs = np.concatenate([
        model.predict_batch(docs[s:s + EVAL_BATCH]) for s in range(0, len(docs), EVAL_BATCH)
    ])
    labels = np.array([d.label for d in docs])
    loss, _ = cross_entropy(probs, labels)
    return loss, float(np.mean(np.argmax(probs, axis=1) == labels))


def fit(model: Network, train_docs, val_docs, hp: HyperParams, rng: Rng) -> TrainHistory:
    """Mini-batch Adam training with early stopping on validation loss.

    Without validation documents every epoch runs and the final weights are kept.
    """
    train_docs = list(train_docs)
    val_docs = list(val_docs or [])
    if not train_docs:
        raise SplitError('training set is empty')
    if hp.batch_size < 1:
        raise ConfigError('batch_size must be at least 1')

    ids, lengths = stack_docs(train_docs)
    labels = np.array([d.label for d in train_docs], dtype=np.int64)
    weights = class_weight_vector(labels) if hp.class_weights else None
    params = model.parameters()
    state = OptimizerState()
    history = TrainHistory()
    best_loss, best_params, stale = np.inf, None, 0
    n = len(train_docs)

    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for batch_no, start in enumerate(range(0, n, hp.batch_size), start=1):
            idx = order[start:start + hp.batch_size]
            probs, cache = model.forward(ids[idx], lengths[idx], training=True, rng=rng)
            sample_w = None if weights is None else weights[labels[idx]]
            loss, dlogits = cross_entropy(probs, labels[idx], sample_w)
            grads = model.backward(cache, dlogits)
            loss += regularize(model, grads, hp.l2_lambda)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, batch_no, loss)
            adam_step(params, grads, state, hp.learning_rate)
            loss_sum += loss * idx.size
            correct += int(np.sum(np.argmax(probs, axis=1) == labels[idx]))
            logger.debug('epoch %d batch %d loss %.6f', epoch, batch_no, loss)

        record = EpochRecord(epoch, loss_sum / n, correct / n)
        if val_docs:
            record.val_loss, record.val_accuracy = _eval_loss(model, val_docs)
        history.epochs.append(record)
        logger.info(
            'epoch %d/%d train_loss=%.4f train_acc=%.4f%s', epoch, hp.epochs, record.train_loss,
            record.train_accuracy,
            '' if record.val_loss is None else f' val_loss={record.val_loss:.4f} val_acc={record.val_accuracy:.4f}',
        )

        if val_docs:
            if record.val_loss < best_loss:
                best_loss, stale = record.val_loss, 0
                best_params = {k: v.copy() for k, v in params.items()}
                history.best_epoch = epoch
            else:
                stale += 1
                if stale >= hp.patience:
                    history.stopped_early = True
                    logger.info('early stop after epoch %d (best %d)', epoch, history.best_epoch)
                    break

    if best_params is not None:
        for name, value in best_params.items():
            params[name][...] = value
    elif history.epochs:
        history.best_epoch = history.epochs[-1].epoch
    return history


def evaluate(model: Network, docs) -> metrics.Summary:
    scores = predict_scores(model, list(docs))
    labels = np.array([d.label for d in docs], dtype=np.int64)
    return metrics.summarize(scores, labels)


# ---------------------------------------------------------------------------
# Cross-validation and grid search
# ---------------------------------------------------------------------------

@dataclass
class FoldSplit:
    folds: list

    @property
    def k(self):
        return len(self.folds)

    def train_test(self, i):
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, self.folds[i]


def kfold_split(labels, k: int, seed) -> FoldSplit:
    """Stratified folds: shuffle each class, then deal its members round-robin.

    The dealing position carries over from one class to the next so fold
    sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise SplitError('k must be at least 2')
    rng = as_rng(seed)
    buckets = [[] for _ in range(k)]
    position = 0
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        if members.size < k:
            raise SplitError(f'class {c} has {members.size} members, fewer than k={k}')
        for index in members[rng.permutation(members.size)]:
            buckets[position % k].append(int(index))
            position += 1
    return FoldSplit([np.sort(np.array(b, dtype=np.int64)) for b in buckets])


@dataclass
class TrainingData:
    """Encoded documents plus the embedding matrix every trial starts from."""

    docs: list
    embedding: EmbeddingMatrix
    name: str = 'corpus'

    @property
    def labels(self):
        return np.array([d.label for d in self.docs], dtype=np.int64)


@dataclass
class FoldResult:
    fold: int
    summary: metrics.Summary
    epochs_run: int

    def row(self):
        s = self.summary
        return {'fold': self.fold, 'accuracy': s.accuracy, 'f1': s.f1, 'auc': s.auc,
                'precision': s.precision, 'recall': s.recall, 'epochs': self.epochs_run}


MEAN_FIELDS = ('accuracy', 'f1', 'auc', 'precision', 'recall')


@dataclass
class CrossValResult:
    arch: str
    hp: HyperParams
    folds: list

    @property
    def mean(self):
        return {f: float(np.mean([getattr(r.summary, f) for r in self.folds])) for f in MEAN_FIELDS}

    @property
    def confusion(self):
        total = metrics.ConfusionCounts()
        for r in self.folds:
            total = total + r.summary.confusion
        return total

    def rows(self):
        rows = [r.row() for r in self.folds]
        rows.append({'fold': 'mean', **self.mean,
                     'epochs': float(np.mean([r.epochs_run for r in self.folds]))})
        return rows


def holdout_validation(docs, fraction, rng: Rng):
    """Split training documents into (fit, validation) lists, stratified."""
    if fraction <= 0:
        return list(docs), []
    labels = np.array([d.label for d in docs])
    kept, held = stratified_split(labels, fraction, rng)
    if held.size == 0 or kept.size == 0:
        return list(docs), []
    return [docs[i] for i in kept], [docs[i] for i in held]


def run_trial(arch, hp, data: TrainingData, train_idx, test_idx, rng: Rng, validation_fraction):
    """Train a fresh model on ``train_idx`` and score it on ``test_idx``."""
    train_docs = [data.docs[i] for i in train_idx]
    test_docs = [data.docs[i] for i in test_idx]
    fit_docs, val_docs = holdout_validation(train_docs, validation_fraction, rng.child(0))
    model = build_model(arch, hp, data.embedding.copy(), rng.child(1))
    history = fit(model, fit_docs, val_docs, hp, rng.child(2))
    return model, history, evaluate(model, test_docs)


def _fold_job(args):
    arch, hp, data, split, fold, seed, validation_fraction = args
    train_idx, test_idx = split.train_test(fold)
    _, history, summary = run_trial(
        arch, hp, data, train_idx, test_idx, Rng(seed).child(fold), validation_fraction
    )
    return FoldResult(fold + 1, summary, len(history))


def _run_folds(arch, hps, data: TrainingData, seed, k, jobs, validation_fraction):
    """One ``CrossValResult`` per entry of ``hps``.

    Every (hyperparameters, fold) trial is an independent job, so a pool of
    ``jobs`` workers spreads across combinations as well as folds.
    """
    split = kfold_split(data.labels, k, seed)
    job_args = [(arch, hp, data, split, i, seed, validation_fraction) for hp in hps for i in range(k)]
    if jobs > 1 and len(job_args) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(job_args))) as pool:
            folds = list(pool.map(_fold_job, job_args))
    else:
        folds = [_fold_job(a) for a in job_args]
    results = [CrossValResult(arch, hp, folds[n * k:(n + 1) * k]) for n, hp in enumerate(hps)]
    for result in results:
        logger.info('%s %d-fold mean accuracy %.4f f1 %.4f auc %.4f', arch, k,
                    result.mean['accuracy'], result.mean['f1'], result.mean['auc'])
    return results


def cross_validate(arch, hp: HyperParams, data: TrainingData, seed, k=3, jobs=1,
                   validation_fraction=0.0) -> CrossValResult:
    """Stratified k-fold evaluation; trial i draws from stream (seed, i)."""
    return _run_folds(arch, [hp], data, seed, k, jobs, validation_fraction)[0]


@dataclass
class GridResult:
    best: HyperParams
    best_index: int
    keys: list
    trials: list

    def rows(self):
        rows = []
        for index, (combo, cv) in enumerate(self.trials):
            row = {'combination': index, **combo}
            for r in cv.folds:
                row[f'fold{r.fold}_accuracy'] = r.summary.accuracy
                row[f'fold{r.fold}_f1'] = r.summary.f1
                row[f'fold{r.fold}_auc'] = r.summary.auc
            row.update({f'mean_{k}': v for k, v in cv.mean.items()})
            row['best'] = index == self.best_index
            rows.append(row)
        return rows


def expand_grid(grid: dict):
    if not grid:
        raise ConfigError('grid is empty')
    known = set(HyperParams.__dataclass_fields__)
    for key, values in grid.items():
        if key not in known:
            raise ConfigError(f'unknown hyperparameter {key!r} in grid')
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f'grid entry {key!r} needs a non-empty list of candidates')
    keys = list(grid)
    return keys, [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(arch, grid: dict, data: TrainingData, seed, base: HyperParams = None, k=3, jobs=1,
                validation_fraction=0.0) -> GridResult:
    """Exhaustive search scored by mean CV accuracy, then mean F1, then earliest combination.

    Every combination sees the same folds and the same per-fold streams.
    """
    keys, combos = expand_grid(grid)
    base = base or HyperParams()
    hps = [replace(base, **combo).validate() for combo in combos]
    logger.info('grid: %d combinations x %d folds on %d worker(s)', len(combos), k, max(jobs, 1))
    trials = list(zip(combos, _run_folds(arch, hps, data, seed, k, jobs, validation_fraction)))
    best_index = min(
        range(len(trials)),
        key=lambda i: (-trials[i][1].mean['accuracy'], -trials[i][1].mean['f1'], i),
    )
    return GridResult(replace(base, **combos[best_index]), best_index, keys, trials)
