"""Classifier metrics, the Bernoulli naive Bayes baseline, exact
information-measure oracles used by the test suite, and synthetic corpus
generators with known ground truth.

The oracle functions (`exact_total_correlation`, `mutual_information_2x2`,
`auc_pairwise`) are deliberately written as direct enumerations so they stay
independent of the optimized production paths they are used to check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from .corpus import SparseBinaryMatrix


class UndefinedAUCError(ValueError):
    """Truth vector lacks a positive or a negative; AUC has no value."""


def f1(pred: np.ndarray, truth: np.ndarray) -> tuple[float, float, float]:
    """Precision, recall, F1 for binary vectors.

    Precision is 0 when nothing is predicted positive; F1 is 0 when P+R is 0.
    """
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    fn = int(np.sum(~pred & truth))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def auc(scores: np.ndarray, truth: np.ndarray) -> float:
    """Rank-based AUC: P(random positive outscores random negative), ties 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    if scores.shape != truth.shape:
        raise ValueError(f"length mismatch: {scores.shape} vs {truth.shape}")
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    r_pos = ranks[truth].sum()
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_pairwise(scores: np.ndarray, truth: np.ndarray) -> float:
    """Brute-force AUC oracle: count wins (+ half ties) over all pos-neg pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    pos = scores[truth]
    neg = scores[~truth]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative")
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (pos.size * neg.size)


def macro(values: dict[str, float | None]) -> tuple[float, list[str]]:
    """Unweighted mean over labels; None entries excluded and reported."""
    if not values:
        raise ValueError("macro average needs at least one label")
    excluded = sorted(k for k, v in values.items() if v is None)
    defined = [v for v in values.values() if v is not None]
    if not defined:
        raise ValueError("every label was excluded")
    return float(np.mean(defined)), excluded


@dataclass
class BernoulliNBModel:
    """Per-class Bernoulli presence/absence model with add-one smoothing."""

    log_prior: np.ndarray      # (2,)
    log_p1: np.ndarray         # (2, n): log p(x_i=1 | c)
    log_p0: np.ndarray         # (2, n): log p(x_i=0 | c)


def nb_fit(data: SparseBinaryMatrix, y: np.ndarray) -> BernoulliNBModel:
    y = np.asarray(y).astype(int)
    if y.shape[0] != data.n_rows:
        raise ValueError("label vector length does not match matrix rows")
    if not (np.any(y == 1) and np.any(y == 0)):
        raise ValueError("training data must contain both classes")
    X = data.to_csr()
    log_prior = np.empty(2)
    log_p1 = np.empty((2, data.n_cols))
    for c in (0, 1):
        mask = y == c
        n_c = int(mask.sum())
        log_prior[c] = np.log(n_c / data.n_rows)
        counts = np.asarray(X[mask].sum(axis=0)).ravel()
        p1 = (counts + 1.0) / (n_c + 2.0)
        log_p1[c] = np.log(p1)
    log_p0 = np.log1p(-np.exp(log_p1))
    return BernoulliNBModel(log_prior=log_prior, log_p1=log_p1, log_p0=log_p0)


def nb_predict(model: BernoulliNBModel, data: SparseBinaryMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Posterior p(c=1|x) per document plus 0.5-threshold labels.

    Absent words contribute their log p(x=0|c) terms via a constant per class,
    corrected per present word, so cost is O(nnz).
    """
    X = data.to_csr()
    base = model.log_prior + model.log_p0.sum(axis=1)          # (2,)
    corr = (model.log_p1 - model.log_p0).T                     # (n, 2)
    joint = X @ corr + base                                    # (N, 2)
    mx = joint.max(axis=1, keepdims=True)
    norm = mx.ravel() + np.log(np.exp(joint - mx).sum(axis=1))
    scores = np.exp(joint[:, 1] - norm)
    return scores, (scores >= 0.5).astype(int)


def entropy_nats(counts: np.ndarray) -> float:
    """Entropy of an empirical distribution given raw counts."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def mutual_information_2x2(joint_counts: np.ndarray) -> float:
    """MI in nats of a 2x2 joint count table; the brute-force oracle.

    Sums p*log(p/(p_v*p_y)) over the four cells, with 0*log(0/.) = 0.
    """
    c = np.asarray(joint_counts, dtype=np.float64)
    if c.shape != (2, 2):
        raise ValueError("expected a 2x2 table")
    p = c / c.sum()
    pv = p.sum(axis=1)
    py = p.sum(axis=0)
    total = 0.0
    for v in (0, 1):
        for y in (0, 1):
            if p[v, y] > 0:
                total += p[v, y] * np.log(p[v, y] / (pv[v] * py[y]))
    return total


def exact_total_correlation(samples: np.ndarray) -> float:
    """Total correlation (nats) of the empirical distribution of the columns.

    TC = sum_i H(X_i) - H(X_1..X_d), computed by enumerating the observed
    joint support. Only feasible for small discrete matrices; refuses more
    than 20 columns or joint supports beyond ~10^6 cells.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValueError("expected a 2-d sample matrix")
    n, d = samples.shape
    if d > 20:
        raise ValueError(f"support too large: {d} columns (max 20)")
    cells = 1
    for i in range(d):
        cells *= len(np.unique(samples[:, i]))
        if cells > 10**6:
            raise ValueError("support too large: joint cell count exceeds 10^6")
    h_marginals = 0.0
    for i in range(d):
        _, counts = np.unique(samples[:, i], return_counts=True)
        h_marginals += entropy_nats(counts)
    _, joint_counts = np.unique(samples, axis=0, return_counts=True)
    return h_marginals - entropy_nats(joint_counts)


@dataclass
class SyntheticCorpus:
    matrix: SparseBinaryMatrix
    word_block: np.ndarray        # (n_words,) block index each word copies
    factor_states: np.ndarray     # (N, n_blocks) latent block states per doc
    terms: list[str]


def generate_synthetic(
    n_factors: int,
    words_per_factor: int,
    noise: float,
    n_docs: int,
    seed: int,
) -> SyntheticCorpus:
    """Independent-block corpus: each latent factor is Bernoulli(0.5) per
    document, each word copies its factor's state and flips with prob noise."""
    if not 0.0 <= noise < 0.5:
        raise ValueError("noise must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    states = (rng.random((n_docs, n_factors)) < 0.5).astype(np.int8)
    return _emit_blocks(states, [words_per_factor] * n_factors, noise, rng)


def generate_correlated_blocks(
    words_per_block: int,
    noise: float,
    parent_flip: float,
    n_docs: int,
    seed: int,
    state_prior: float = 0.3,
) -> SyntheticCorpus:
    """Three-block corpus where blocks 1 and 2 share a latent parent.

    Block 0 is an independent Bernoulli(state_prior) factor; blocks 1 and 2
    are noisy copies of a common Bernoulli(state_prior) parent (each flipped
    with prob parent_flip), so their states correlate. The skewed default
    prior mimics topical text, where a topic is absent from most documents.
    """
    if not 0.0 <= noise < 0.5:
        raise ValueError("noise must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    a = (rng.random(n_docs) < state_prior).astype(np.int8)
    parent = (rng.random(n_docs) < state_prior).astype(np.int8)
    b = parent ^ (rng.random(n_docs) < parent_flip).astype(np.int8)
    c = parent ^ (rng.random(n_docs) < parent_flip).astype(np.int8)
    states = np.stack([a, b, c], axis=1)
    return _emit_blocks(states, [words_per_block] * 3, noise, rng)


def _emit_blocks(
    states: np.ndarray, block_sizes: list[int], noise: float, rng: np.random.Generator
) -> SyntheticCorpus:
    n_docs, n_blocks = states.shape
    word_block = np.concatenate(
        [np.full(size, b, dtype=np.int64) for b, size in enumerate(block_sizes)]
    )
    n_words = int(word_block.size)
    flips = (rng.random((n_docs, n_words)) < noise).astype(np.int8)
    dense = states[:, word_block] ^ flips
    terms = []
    for b, size in enumerate(block_sizes):
        terms.extend(f"blk{b}w{k}" for k in range(size))
    return SyntheticCorpus(
        matrix=SparseBinaryMatrix.from_dense(dense),
        word_block=word_block,
        factor_states=states,
        terms=terms,
    )


def word_partition(alpha: np.ndarray) -> np.ndarray:
    """Word -> factor assignment implied by the connection weights.

    Words whose strongest connection is below 0.5 count as unassigned (-1).
    """
    assign = np.argmax(alpha, axis=1)
    assign[alpha.max(axis=1) <= 0.5] = -1
    return assign


def partitions_match(assign: np.ndarray, truth: np.ndarray) -> bool:
    """True when the assignment equals the ground-truth blocks up to a
    relabeling of factor indices (and every word is assigned)."""
    assign = np.asarray(assign)
    truth = np.asarray(truth)
    if np.any(assign < 0):
        return False
    mapping: dict[int, int] = {}
    used: set[int] = set()
    for a, t in zip(assign, truth):
        if t not in mapping:
            if a in used:
                return False
            mapping[t] = a
            used.add(a)
        elif mapping[t] != a:
            return False
    return True


def metrics_report(
    per_label: dict[str, dict[str, float | None]],
    threshold: float,
    excluded_auc: list[str],
) -> dict:
    """Canonical metrics structure shared by the CLI and the HTTP service."""
    defined_f1 = {k: v["f1"] for k, v in per_label.items()}
    defined_auc = {k: v["auc"] for k, v in per_label.items()}
    macro_f1, _ = macro(defined_f1)
    macro_auc, excl = macro(defined_auc)
    return {
        "threshold": threshold,
        "labels": per_label,
        "macro": {"f1": macro_f1, "auc": macro_auc},
        "auc_excluded": sorted(set(excluded_auc) | set(excl)),
    }


def metrics_report_bytes(report: dict) -> bytes:
    """Byte-stable JSON serialization of a metrics report."""
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("utf-8")


def metrics_report_text(report: dict) -> str:
    """Plain-text table: one row per label plus the macro-average row."""
    rows = [("Label", "Precision", "Recall", "F1", "AUC")]
    for name in sorted(report["labels"]):
        vals = report["labels"][name]
        auc_s = "n/a" if vals["auc"] is None else f"{vals['auc']:.4f}"
        rows.append(
            (name, f"{vals['precision']:.4f}", f"{vals['recall']:.4f}",
             f"{vals['f1']:.4f}", auc_s)
        )
    rows.append(("macro", "", "", f"{report['macro']['f1']:.4f}",
                 f"{report['macro']['auc']:.4f}"))
    widths = [max(len(r[k]) for r in rows) for k in range(5)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    if report["auc_excluded"]:
        lines.append("excluded from macro-AUC: " + ", ".join(report["auc_excluded"]))
    return "\n".join(lines) + "\n"


def evaluate_factors(
    scores: np.ndarray,
    pairs: list[tuple[str, int]],
    truth_by_label: dict[str, np.ndarray],
    threshold: float = 0.5,
) -> dict:
    """Score (label, factor) pairs: per-label P/R/F1/AUC plus macro block."""
    per_label: dict[str, dict[str, float | None]] = {}
    excluded: list[str] = []
    for label, j in pairs:
        truth = truth_by_label[label]
        col = scores[:, j]
        pred = (col >= threshold).astype(int)
        p, r, f = f1(pred, truth)
        try:
            a: float | None = auc(col, truth)
        except UndefinedAUCError:
            a = None
            excluded.append(label)
        per_label[label] = {
            "factor": j, "precision": p, "recall": r, "f1": f, "auc": a,
        }
    return metrics_report(per_label, threshold, excluded)
