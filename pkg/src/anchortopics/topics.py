"""Human-readable views of a fitted model: oriented factors, ranked word
lists, document score matrices, and threshold classification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import SparseBinaryMatrix, Vocabulary
from .model import (
    LatentFactorModel,
    Posteriors,
    compute_posteriors,
    mutual_information,
    transform,
)


@dataclass
class TopicEntry:
    term: str
    weight: float
    sign: str           # "+" when the word is positively associated with y=1
    is_anchor: bool


@dataclass
class FactorTopic:
    factor: int
    anchors: list[str]
    entries: list[TopicEntry]
    empty: bool = False


@dataclass
class TopicReport:
    factors: list[FactorTopic] = field(default_factory=list)

    def to_json_obj(self) -> list[dict]:
        return [
            {
                "id": f.factor,
                "anchors": f.anchors,
                "empty": f.empty,
                "terms": [
                    {"term": e.term, "weight": e.weight, "sign": e.sign,
                     "anchor": e.is_anchor}
                    for e in f.entries
                ],
            }
            for f in self.factors
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        """One line per factor, anchors starred, mirroring the usual
        top-terms table presentation."""
        lines = []
        for f in self.factors:
            terms = ", ".join(
                e.term + ("*" if e.is_anchor else "") for e in f.entries
            )
            lines.append(f"topic_{f.factor}: {terms}")
        return "\n".join(lines) + "\n"


def _swap_factor_states(model: LatentFactorModel, j: int) -> None:
    model.log_prior[j] = model.log_prior[j, ::-1]
    model.log_cond[:, j, :, :] = model.log_cond[:, j, :, ::-1]
    model.orientation[j] = -model.orientation[j]


def orient_factors(
    model: LatentFactorModel,
    data: SparseBinaryMatrix,
    mi: np.ndarray | None = None,
) -> LatentFactorModel:
    """Relabel each factor's states so y=1 means topic presence.

    The reference word is the factor's highest alpha*MI connection, or for
    anchored factors the anchor with the largest strength (lowest word index
    on ties). States are swapped when that word is positively loaded on y=0.
    """
    if mi is None:
        posteriors = compute_posteriors(model, data)
        mi = mutual_information(model, data, posteriors)
    weight = model.alpha * mi
    for j in range(model.m):
        anchors = model.anchors.words_of(j)
        if anchors:
            best = max(anchors, key=lambda a: (a.strength, -a.word))
            istar = best.word
        else:
            if weight[:, j].max() <= 0.0:
                continue
            istar = int(np.argmax(weight[:, j]))
        p1_given_y1 = np.exp(model.log_cond[istar, j, 1, 1])
        p1_given_y0 = np.exp(model.log_cond[istar, j, 1, 0])
        if p1_given_y1 < p1_given_y0:
            _swap_factor_states(model, j)
    return model


def top_words(
    model: LatentFactorModel,
    mi: np.ndarray,
    vocab: Vocabulary,
    factor: int,
    top_t: int,
) -> FactorTopic:
    """Rank a factor's connected words (alpha > 0.5, plus its anchors) by
    alpha*MI descending, ties broken by lower word index."""
    anchor_words = {a.word for a in model.anchors.words_of(factor)}
    candidates = sorted(set(np.flatnonzero(model.alpha[:, factor] > 0.5)) | anchor_words)
    weights = model.alpha[:, factor] * mi[:, factor]
    ranked = sorted(candidates, key=lambda i: (-weights[i], i))[:top_t]
    entries = []
    for i in ranked:
        positively = model.log_cond[i, factor, 1, 1] > model.log_cond[i, factor, 1, 0]
        entries.append(
            TopicEntry(
                term=vocab.terms[i],
                weight=float(weights[i]),
                sign="+" if positively else "-",
                is_anchor=i in anchor_words,
            )
        )
    return FactorTopic(
        factor=factor,
        anchors=[vocab.terms[a.word] for a in model.anchors.words_of(factor)],
        entries=entries,
        empty=len(candidates) == 0,
    )


def topic_report(
    model: LatentFactorModel,
    mi: np.ndarray,
    vocab: Vocabulary,
    top_t: int = 10,
) -> TopicReport:
    return TopicReport(
        factors=[top_words(model, mi, vocab, j, top_t) for j in range(model.m)]
    )


def score_documents(model: LatentFactorModel, data: SparseBinaryMatrix) -> np.ndarray:
    """N x m matrix of p(y_j=1 | x^l) under the oriented model."""
    return transform(model, data).q[:, :, 1]


def classify(scores: np.ndarray, threshold: float, factor: int) -> np.ndarray:
    """Binary labels for one factor's scores; the threshold is inclusive."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    return (np.asarray(scores)[:, factor] >= threshold).astype(int)


def posteriors_scores(posteriors: Posteriors) -> np.ndarray:
    return posteriors.q[:, :, 1]
