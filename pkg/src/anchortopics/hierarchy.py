"""Stacked factor layers and the exported topic tree.

Each layer is fit on hard 0/1 labels derived from the layer below: factor
posteriors thresholded at 0.5. Anchors are a layer-0 concept only, since
they name words.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import SparseBinaryMatrix, Vocabulary
from .model import FitConfig, FitReport, LatentFactorModel, Posteriors, fit, transform


@dataclass
class LayerStack:
    models: list[LatentFactorModel]
    reports: list[FitReport]
    layer_sizes: list[int]
    input_desc: list[str]


@dataclass
class TreeNode:
    id: str
    kind: str            # "word" | "factor"
    layer: int           # -1 for words
    label: str
    anchored: bool = False


@dataclass
class TreeEdge:
    parent: str
    child: str
    weight: float


@dataclass
class TopicTree:
    nodes: list[TreeNode] = field(default_factory=list)
    edges: list[TreeEdge] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "nodes": [dataclasses.asdict(n) for n in self.nodes],
            "edges": [dataclasses.asdict(e) for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TopicTree":
        obj = json.loads(text)
        return cls(
            nodes=[TreeNode(**n) for n in obj["nodes"]],
            edges=[TreeEdge(**e) for e in obj["edges"]],
        )

    def to_dot(self) -> str:
        lines = ["digraph topics {", "  rankdir=TB;"]
        for n in self.nodes:
            shape = "box" if n.kind == "factor" else "ellipse"
            color = ' color=red' if n.anchored else ""
            lines.append(f'  "{n.id}" [label="{_dot_escape(n.label)}" shape={shape}{color}];')
        for e in self.edges:
            lines.append(f'  "{e.parent}" -> "{e.child}" [weight={e.weight:.6f}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def hard_labels(posteriors: Posteriors) -> SparseBinaryMatrix:
    """MAP factor states as a binary matrix: present iff p(y=1|x) >= 0.5."""
    on = posteriors.q[:, :, 1] >= 0.5
    return SparseBinaryMatrix.from_dense(on.astype(np.int8))


def fit_hierarchy(
    data: SparseBinaryMatrix,
    layer_sizes: list[int],
    config: FitConfig,
) -> LayerStack:
    """Fit layer 0 on the data, each higher layer on the hard labels of the
    previous one. Per-layer seeds are derived from the base seed."""
    if not layer_sizes:
        raise ValueError("layer_sizes must be nonempty")
    models: list[LatentFactorModel] = []
    reports: list[FitReport] = []
    input_desc = []
    current = data
    for k, size in enumerate(layer_sizes):
        layer_config = dataclasses.replace(
            config,
            n_factors=size,
            seed=config.seed + k,
            anchors=config.anchors if k == 0 else type(config.anchors)(),
        )
        model, report = fit(current, layer_config)
        models.append(model)
        reports.append(report)
        input_desc.append(
            f"vocabulary ({data.n_cols} terms)" if k == 0
            else f"layer {k - 1} hard labels ({layer_sizes[k - 1]} factors)"
        )
        if k + 1 < len(layer_sizes):
            current = hard_labels(transform(model, current))
    return LayerStack(
        models=models, reports=reports, layer_sizes=list(layer_sizes),
        input_desc=input_desc,
    )


def export_tree(stack: LayerStack, vocab: Vocabulary, top_t: int = 10) -> TopicTree:
    """Topic tree: layer-0 factors connect to their top words (anchor words
    starred), upper-layer factors connect to lower factors; edge weights are
    alpha*MI."""
    from .topics import top_words

    tree = TopicTree()
    anchored_factors = {a.factor for a in stack.models[0].anchors.entries}
    for k, model in enumerate(stack.models):
        for j in range(model.m):
            tree.nodes.append(
                TreeNode(
                    id=f"f{k}_{j}",
                    kind="factor",
                    layer=k,
                    label=f"topic_{k}_{j}",
                    anchored=k == 0 and j in anchored_factors,
                )
            )

    model0, report0 = stack.models[0], stack.reports[0]
    anchor_words = {a.word for a in model0.anchors.entries}
    seen_words: set[str] = set()
    for j in range(model0.m):
        topic = top_words(model0, report0.mi, vocab, j, top_t)
        for entry in topic.entries:
            i = vocab.index[entry.term]
            node_id = f"w{i}"
            if node_id not in seen_words:
                seen_words.add(node_id)
                label = entry.term + ("*" if i in anchor_words else "")
                tree.nodes.append(
                    TreeNode(id=node_id, kind="word", layer=-1, label=label,
                             anchored=i in anchor_words)
                )
            tree.edges.append(TreeEdge(parent=f"f0_{j}", child=node_id,
                                       weight=entry.weight))

    for k in range(1, len(stack.models)):
        model, report = stack.models[k], stack.reports[k]
        weight = model.alpha * report.mi
        for j in range(model.m):
            for i in np.flatnonzero(model.alpha[:, j] > 0.5):
                tree.edges.append(
                    TreeEdge(parent=f"f{k}_{j}", child=f"f{k - 1}_{i}",
                             weight=float(weight[i, j]))
                )
    return tree
