"""Property-based checks of the structural invariants."""
import string

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rstparse.augment import DictionaryTranslator, cross_translate
from rstparse.autodiff import tensor as T
from rstparse.autodiff.tensor import Tensor
from rstparse.metrics import parseval, segmentation_counts
from rstparse.model import decode_segments, gold_tags
from rstparse.synthetic import default_composite_labels
from rstparse.training import dynamic_weights_from_losses
from rstparse.tree import (
    ORIGINAL,
    RST_PARSEVAL,
    Document,
    Internal,
    Leaf,
    build_from_splits,
    constituents,
    same_shape,
    spans_from_breaks,
    split_sequence,
    tree_labels,
    validate_tree,
)
from rstparse.treebank import (
    Corpus,
    HarmonizationMap,
    harmonize,
    parse_bracket,
    read_corpus,
    tree_from_nested,
    tree_to_bracket,
    tree_to_nested,
    write_corpus,
)

LABELS = default_composite_labels()


@st.composite
def trees(draw, max_m=12):
    m = draw(st.integers(1, max_m))

    def grow(i, j):
        if i == j:
            return Leaf(i)
        k = draw(st.integers(i, j - 1))
        label = draw(st.sampled_from(LABELS))
        return Internal(grow(i, k), grow(k + 1, j), label)

    return grow(1, m), m


@st.composite
def segmentations(draw, m=None, max_tokens=30):
    m = m if m is not None else draw(st.integers(1, 8))
    n = draw(st.integers(m, max(m, max_tokens)))
    inner = draw(st.lists(st.integers(0, n - 2), min_size=m - 1, max_size=m - 1, unique=True)) if m > 1 else []
    return spans_from_breaks(sorted(inner) + [n - 1])


@st.composite
def documents(draw):
    tree, m = draw(trees(max_m=6))
    spans = draw(segmentations(m=m, max_tokens=15))
    lang = draw(st.sampled_from(["en", "es", "de"]))
    word = st.text(string.ascii_letters + string.digits + "_-.,'", min_size=1, max_size=6)
    tokens = draw(st.lists(word, min_size=spans[-1].end + 1, max_size=spans[-1].end + 1))
    return Document(draw(st.text(string.ascii_lowercase, min_size=1, max_size=8)), lang, tokens, spans, tree)


@given(trees())
def test_split_sequence_inverse(tm):
    tree, m = tm
    splits = split_sequence(tree)
    assert validate_tree(tree, m).ok
    assert all(i <= k < j for i, j, k in splits)
    assert build_from_splits(splits, tree_labels(tree), m) == tree


@given(trees())
def test_constituent_counts(tm):
    tree, m = tm
    spans = spans_from_breaks(list(range(m)))
    assert len(constituents(tree, ORIGINAL, spans)) == m - 1
    assert len(constituents(tree, RST_PARSEVAL, spans)) == 2 * m - 2


@given(trees())
def test_constituents_survive_reserialization(tm):
    tree, m = tm
    spans = spans_from_breaks(list(range(m)))
    for again in (tree_from_nested(tree_to_nested(tree)), parse_bracket(tree_to_bracket(tree))):
        for conv in (ORIGINAL, RST_PARSEVAL):
            assert constituents(again, conv, spans) == constituents(tree, conv, spans)


@given(trees(max_m=8), trees(max_m=8))
def test_parseval_bounds(a, b):
    (ta, ma), (tb, mb) = a, b
    spans_a = spans_from_breaks(list(range(ma)))
    assert all(v == 1.0 for v in parseval([(ta, spans_a)], [(ta, spans_a)]).flat().values())
    if ma != mb:
        return
    report = parseval([(ta, spans_a)], [(tb, spans_a)])
    for conv in (ORIGINAL, RST_PARSEVAL):
        full = report.trees[("full", conv)].matched
        assert full <= min(report.trees[(f, conv)].matched for f in ("span", "nuc", "rel"))
    assert report.score("span", RST_PARSEVAL) >= report.score("span", ORIGINAL) - 1e-12


@given(segmentations(), st.data())
def test_segmentation_counts_bounded(gold, data):
    n = gold[-1].end + 1
    pred = data.draw(segmentations(m=data.draw(st.integers(1, n)), max_tokens=n).filter(lambda s: s[-1].end == n - 1))
    c = segmentation_counts([pred], [gold])
    assert c.matched <= min(c.predicted, c.gold)
    assert c.gold == len(gold) - 1


@given(st.lists(st.sampled_from("BIE"), min_size=1, max_size=40))
def test_decode_segments_total(tags):
    spans = decode_segments(tags)
    assert spans[0].start == 0 and spans[-1].end == len(tags) - 1
    assert all(a.end + 1 == b.start for a, b in zip(spans, spans[1:]))


@given(segmentations())
def test_gold_tags_round_trip(spans):
    assert decode_segments(gold_tags(spans)) == list(spans)


@given(st.lists(st.floats(0.01, 100), min_size=3, max_size=3),
       st.lists(st.floats(0.01, 100), min_size=3, max_size=3),
       st.floats(0.05, 10))
def test_dynamic_weights_sum(prev, prev2, temp):
    lam = dynamic_weights_from_losses(prev, prev2, temp)
    assert abs(sum(lam) - 3.0) < 1e-9
    assert all(np.isfinite(x) and x >= 0 for x in lam)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12), st.integers(0, 1000))
def test_softmax_normalized_and_equivariant(xs, seed):
    x = np.array(xs)
    p = T.softmax(Tensor(x)).data
    assert abs(p.sum() - 1.0) < 1e-9
    perm = np.random.default_rng(seed).permutation(len(x))
    np.testing.assert_allclose(T.softmax(Tensor(x[perm])).data, p[perm], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(documents(), min_size=1, max_size=4, unique_by=lambda d: d.doc_id))
def test_corpus_round_trip(tmp_path_factory, docs):
    corpus = Corpus.from_documents(docs)
    base = tmp_path_factory.mktemp("rt")
    for fmt in ("jsonl", "bracket"):
        path = base / f"c.{fmt}"
        write_corpus(corpus, path, fmt)
        assert read_corpus(path, fmt) == corpus


@settings(deadline=None)
@given(st.lists(documents(), min_size=1, max_size=4, unique_by=lambda d: d.doc_id),
       st.sets(st.sampled_from(["en", "es", "de", "pt"]), min_size=1))
def test_augmentation_size_and_trees(docs, targets):
    corpus = Corpus.from_documents(docs)
    out = cross_translate(corpus, DictionaryTranslator(), targets)
    assert len(out) == sum(1 + len(targets - {d.lang}) for d in corpus)
    source = {d.doc_id: d for d in corpus}
    for doc in out:
        src = source[doc.doc_id.rsplit("@", 1)[0]] if doc.doc_id not in source else source[doc.doc_id]
        assert doc.gold_tree == src.gold_tree
        assert validate_tree(doc.gold_tree, doc.n_edus).ok


@given(trees())
def test_harmonize_preserves_structure(tm):
    tree, _ = tm
    doc = Document("d", "en", tuple("x" * (tree.span[1])), spans_from_breaks(list(range(tree.span[1]))), tree)
    corpus = Corpus.from_documents([doc])
    upper = {lab.relation: lab.relation for lab in LABELS}
    upper["Elaboration"] = "Explanation"
    out = harmonize(corpus, HarmonizationMap(upper)).documents[0].gold_tree
    assert same_shape(out, tree)
    assert [x.nuclearity for x in tree_labels(out)] == [x.nuclearity for x in tree_labels(tree)]
