import numpy as np
import pytest

from anchortopics.corpus import SparseBinaryMatrix, Vocabulary
from anchortopics.evaluation import generate_synthetic, word_partition
from anchortopics.hierarchy import (
    TopicTree,
    export_tree,
    fit_hierarchy,
    hard_labels,
)
from anchortopics.model import Anchor, AnchorSet, FitConfig, Posteriors, fit, transform


class TestHardLabels:
    def _post(self, q1):
        q1 = np.asarray(q1, dtype=float)
        q = np.stack([1 - q1, q1], axis=2)
        return Posteriors(q=q, log_z=np.zeros(q1.shape))

    def test_inclusive_at_half(self):
        mat = hard_labels(self._post([[0.5, 0.49]]))
        assert mat.rows[0].tolist() == [0]

    def test_all_below_half_empty(self):
        mat = hard_labels(self._post([[0.2, 0.3], [0.1, 0.4]]))
        assert all(r.size == 0 for r in mat.rows)

    def test_bayes_oracle_value_present(self):
        mat = hard_labels(self._post([[0.9]]))
        assert mat.rows[0].tolist() == [0]


class TestFitHierarchy:
    def test_single_layer_is_ordinary_fit(self, two_block_corpus):
        config = FitConfig(n_factors=2, seed=3)
        stack = fit_hierarchy(two_block_corpus.matrix, [2], config)
        model, report = fit(two_block_corpus.matrix, config)
        assert len(stack.models) == 1
        assert np.array_equal(stack.models[0].alpha, model.alpha)
        assert stack.reports[0].tc_history == report.tc_history

    def test_two_layer_top_connects_both_factors(self, two_block_corpus):
        config = FitConfig(n_factors=2, seed=1)
        stack = fit_hierarchy(two_block_corpus.matrix, [2, 1], config)
        top = stack.models[1]
        assert top.n == 2 and top.m == 1
        # both layer-0 factors carry signal, so the single top factor
        # should connect to both
        assert np.all(top.alpha[:, 0] > 0.5)

    def test_same_seed_identical_stack(self, two_block_corpus):
        config = FitConfig(n_factors=2, seed=7)
        s1 = fit_hierarchy(two_block_corpus.matrix, [2, 1], config)
        s2 = fit_hierarchy(two_block_corpus.matrix, [2, 1], config)
        for m1, m2 in zip(s1.models, s2.models):
            assert np.array_equal(m1.alpha, m2.alpha)
            assert np.array_equal(m1.log_cond, m2.log_cond)

    def test_layer_sizes_recorded_and_inputs_described(self, two_block_corpus):
        config = FitConfig(n_factors=2, seed=0)
        stack = fit_hierarchy(two_block_corpus.matrix, [2, 1], config)
        assert stack.layer_sizes == [2, 1]
        assert "vocabulary" in stack.input_desc[0]
        assert "layer 0" in stack.input_desc[1]

    def test_upper_layers_have_no_anchors(self, two_block_corpus):
        anchors = AnchorSet(entries=[Anchor(0, 0, 1.0)])
        config = FitConfig(n_factors=2, seed=0, anchors=anchors)
        stack = fit_hierarchy(two_block_corpus.matrix, [2, 1], config)
        assert len(stack.models[0].anchors) == 1
        assert len(stack.models[1].anchors) == 0

    def test_empty_layer_sizes_rejected(self, two_block_corpus):
        with pytest.raises(ValueError):
            fit_hierarchy(two_block_corpus.matrix, [], FitConfig(n_factors=2))


@pytest.fixture(scope="module")
def stack_and_vocab(two_block_corpus):
    anchors = AnchorSet(entries=[Anchor(0, 0, 1.0)])
    config = FitConfig(n_factors=2, seed=1, anchors=anchors)
    stack = fit_hierarchy(two_block_corpus.matrix, [2, 1], config)
    vocab = Vocabulary.from_terms(two_block_corpus.terms)
    return stack, vocab


class TestExportTree:
    def test_single_layer_star_graphs(self, two_block_corpus):
        config = FitConfig(n_factors=2, seed=1)
        stack = fit_hierarchy(two_block_corpus.matrix, [2], config)
        vocab = Vocabulary.from_terms(two_block_corpus.terms)
        tree = export_tree(stack, vocab, top_t=5)
        factor_children = {n.id: 0 for n in tree.nodes if n.kind == "factor"}
        for e in tree.edges:
            assert e.parent in factor_children
            factor_children[e.parent] += 1
        assert all(c == 5 for c in factor_children.values())

    def test_anchor_word_label_starred(self, stack_and_vocab):
        stack, vocab = stack_and_vocab
        tree = export_tree(stack, vocab, top_t=10)
        anchored = [n for n in tree.nodes if n.kind == "word" and n.anchored]
        assert anchored and all(n.label.endswith("*") for n in anchored)
        assert any(n.kind == "factor" and n.anchored for n in tree.nodes)

    def test_two_block_tree_matches_generator_hierarchy(
        self, two_block_corpus, stack_and_vocab
    ):
        stack, vocab = stack_and_vocab
        tree = export_tree(stack, vocab, top_t=10)
        blocks = dict(zip(two_block_corpus.terms, two_block_corpus.word_block))
        children = {}
        for e in tree.edges:
            if e.child.startswith("w"):
                children.setdefault(e.parent, set()).add(
                    blocks[next(n.label.rstrip("*") for n in tree.nodes if n.id == e.child)]
                )
        # each layer-0 factor holds words of exactly one block
        assert sorted(len(v) for v in children.values()) == [1, 1]
        # the top factor connects to both layer-0 factors
        top_edges = [e for e in tree.edges if e.parent == "f1_0"]
        assert {e.child for e in top_edges} == {"f0_0", "f0_1"}

    def test_words_have_at_most_one_parent(self, stack_and_vocab):
        # sparsity surfaces structurally for non-anchored words; a word
        # anchored to several factors may legitimately repeat
        stack, vocab = stack_and_vocab
        tree = export_tree(stack, vocab, top_t=10)
        anchored_ids = {n.id for n in tree.nodes if n.kind == "word" and n.anchored}
        parents = {}
        for e in tree.edges:
            if e.child.startswith("w") and e.child not in anchored_ids:
                parents.setdefault(e.child, []).append(e.parent)
        assert all(len(v) == 1 for v in parents.values())

    def test_json_round_trip(self, stack_and_vocab):
        stack, vocab = stack_and_vocab
        tree = export_tree(stack, vocab, top_t=6)
        parsed = TopicTree.from_json(tree.to_json())
        assert parsed == tree

    def test_dot_output_shape(self, stack_and_vocab):
        stack, vocab = stack_and_vocab
        dot = export_tree(stack, vocab, top_t=4).to_dot()
        assert dot.startswith("digraph")
        assert '"f0_0"' in dot and "->" in dot

    def test_edges_reference_existing_nodes(self, stack_and_vocab):
        stack, vocab = stack_and_vocab
        tree = export_tree(stack, vocab, top_t=10)
        ids = {n.id for n in tree.nodes}
        for e in tree.edges:
            assert e.parent in ids and e.child in ids
