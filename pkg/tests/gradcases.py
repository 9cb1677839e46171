"""Random gradient-check problems, one builder per layer.

Each builder takes a generator and returns ``(f, params)`` for
:func:`rstparse.autodiff.grad_check`. Outputs are reduced with a fixed random
projection so that no gradient is trivially symmetric.
"""
import numpy as np

from rstparse.autodiff import tensor as T
from rstparse.autodiff.layers import GRU, BiGRU, Biaffine, Dense, Embedding, GRUCell, ModelParams
from rstparse.autodiff.tensor import Tensor
from rstparse.model import JointParser, ParserConfig, TokenVocab
from rstparse.training import total_loss
from rstparse.tree import Document, Internal, Leaf, RelationLabel, spans_from_breaks
from rstparse.treebank import Corpus


def _dim(rng, lo=1, hi=5):
    return int(rng.integers(lo, hi + 1))


def _param(rng, *shape, scale=1.0):
    return Tensor(rng.normal(0, scale, size=shape), requires_grad=True)


def _project(out: Tensor, rng) -> Tensor:
    w = Tensor(rng.normal(size=out.shape))
    return T.sum(T.mul(out, w))


def case_elementwise(rng):
    n, d = _dim(rng), _dim(rng)
    a = _param(rng, n, d)
    b = Tensor(rng.uniform(0.5, 2.0, size=(n, d)), requires_grad=True)
    w = rng.normal(size=(n, d))

    def f():
        out = T.tanh(a) + T.sigmoid(a) * T.exp(T.mul(a, 0.3)) + T.log(b) - T.elu(a) * b
        return T.sum(T.mul(out, Tensor(w)))

    return f, {"a": a, "b": b}


def case_matmul(rng):
    n, k, m = _dim(rng), _dim(rng), _dim(rng)
    a, b, v = _param(rng, n, k), _param(rng, k, m), _param(rng, m)
    w = Tensor(rng.normal(size=n))
    return (lambda: T.sum(T.mul(T.matmul(T.matmul(a, b), v), w))), {"a": a, "b": b, "v": v}


def case_shape_ops(rng):
    n, d = _dim(rng, 2, 5), _dim(rng)
    a, b = _param(rng, n, d), _param(rng, n, d)
    rows = rng.integers(0, n, size=_dim(rng))
    w1 = Tensor(rng.normal(size=(len(rows), 2 * d)))
    w2 = Tensor(rng.normal(size=(2, n, d)))
    w3 = Tensor(rng.normal(size=d))

    def f():
        cat = T.concat([a, b], axis=1)
        picked = T.take_rows(cat, rows)
        st = T.stack([a, T.transpose(T.transpose(b))])
        tail = T.mean(a[1:], axis=0) + T.reshape(b, (n * d,))[:d] + T.sum(a, axis=0)
        return T.sum(picked * w1) + T.sum(st * w2) + T.sum(tail * w3) + T.mean(a[0])

    return f, {"a": a, "b": b}


def case_softmax(rng):
    n, c = _dim(rng), _dim(rng, 2, 6)
    a = _param(rng, n, c)
    mask = rng.random((n, c)) < 0.7
    mask[:, 0] = True
    w = rng.normal(size=(n, c))

    def f():
        p = T.softmax(a, mask)
        lp = T.log_softmax(a, mask)
        allowed = np.nonzero(mask)
        return T.sum(p * Tensor(w)) + T.sum(lp[allowed] * Tensor(w[allowed]))

    return f, {"a": a}


def case_cross_entropy(rng):
    n, c = _dim(rng), _dim(rng, 2, 6)
    a = _param(rng, n, c)
    mask = rng.random((n, c)) < 0.7
    targets = rng.integers(0, c, size=n)
    mask[np.arange(n), targets] = True
    return (lambda: T.cross_entropy(a, targets, mask)), {"a": a}


def case_bilinear(rng):
    n, dl, dr, r = _dim(rng), _dim(rng), _dim(rng), _dim(rng)
    x, y, W = _param(rng, n, dl), _param(rng, n, dr), _param(rng, r, dl, dr)
    w = Tensor(rng.normal(size=(n, r)))
    return (lambda: T.sum(T.bilinear(x, W, y) * w)), {"x": x, "W": W, "y": y}


def case_gru_cell(rng):
    n, dx, h = _dim(rng), _dim(rng), _dim(rng)
    x, hp = _param(rng, n, dx), _param(rng, n, h)
    W, U, b = _param(rng, 3 * h, dx), _param(rng, 3 * h, h), _param(rng, 3 * h)
    w = Tensor(rng.normal(size=(n, h)))
    return (lambda: T.sum(T.gru_cell(x, hp, W, U, b) * w)), {"x": x, "h": hp, "W": W, "U": U, "b": b}


def _layer_case(rng, build, inputs, reduce_first=False):
    params = ModelParams()
    layer = build(params)
    proj = {}

    def f():
        out = layer(*inputs)
        if reduce_first:
            out = out[0]
        if "w" not in proj:
            proj["w"] = Tensor(rng.normal(size=out.shape))
        return T.sum(out * proj["w"])

    f()
    return f, dict(params.items())


def case_dense(rng):
    n, a, b = _dim(rng), _dim(rng), _dim(rng)
    x = _param(rng, n, a)
    f, params = _layer_case(rng, lambda p: Dense(p, "d", a, b, "e", rng), [x])
    return f, {**params, "x": x}


def case_embedding(rng):
    v, d = _dim(rng, 2, 6), _dim(rng)
    ids = rng.integers(0, v, size=_dim(rng, 1, 8))
    return _layer_case(rng, lambda p: Embedding(p, "emb", v, d, "e", rng), [ids])


def case_gru_layer(rng):
    m, dx, h = _dim(rng), _dim(rng), _dim(rng)
    xs = _param(rng, m, dx)
    reverse = bool(rng.integers(2))
    params = ModelParams()
    gru = GRU(params, "g", dx, h, "s", rng)
    w = Tensor(rng.normal(size=(m, h)))
    wl = Tensor(rng.normal(size=h))

    def f():
        out, last = gru(xs, reverse=reverse)
        return T.sum(out * w) + T.sum(last * wl)

    return f, {**dict(params.items()), "xs": xs}


def case_gru_cell_layer(rng):
    dx, h = _dim(rng), _dim(rng)
    x, hp = _param(rng, dx), _param(rng, h)
    f, params = _layer_case(rng, lambda p: GRUCell(p, "c", dx, h, "s", rng), [x, hp])
    return f, {**params, "x": x, "h": hp}


def case_bigru(rng):
    m, dx, h = _dim(rng), _dim(rng), _dim(rng)
    xs = _param(rng, m, dx)
    f, params = _layer_case(rng, lambda p: BiGRU(p, "bi", dx, h, "s", rng), [xs], reduce_first=True)
    return f, {**params, "xs": xs}


def case_biaffine(rng):
    n, dl, dr, r = _dim(rng), _dim(rng), _dim(rng), _dim(rng)
    a, b = _param(rng, n, dl), _param(rng, n, dr)
    f, params = _layer_case(rng, lambda p: Biaffine(p, "ba", dl, dr, r, "l", rng), [a, b])
    # the stock init draws W at 0.01 scale; widen it so every term matters
    params["ba.W"].data = rng.normal(size=params["ba.W"].shape)
    return f, {**params, "a": a, "b": b}


LAYER_CASES = {
    "elementwise": case_elementwise,
    "matmul": case_matmul,
    "shape_ops": case_shape_ops,
    "softmax": case_softmax,
    "cross_entropy": case_cross_entropy,
    "bilinear": case_bilinear,
    "gru_cell": case_gru_cell,
    "Dense": case_dense,
    "Embedding": case_embedding,
    "GRUCell": case_gru_cell_layer,
    "GRU": case_gru_layer,
    "BiGRU": case_bigru,
    "Biaffine": case_biaffine,
}


def three_edu_document():
    tokens = ("a", "b", "c", "d", "e", "f", "g")
    tree = Internal(Leaf(1), Internal(Leaf(2), Leaf(3), RelationLabel.parse("NN-Joint")),
                    RelationLabel.parse("NS-Elaboration"))
    return Document("toy", "en", tokens, spans_from_breaks([2, 3, 6]), tree)


def joint_loss_case(seed=0, weights=(0.7, 1.3, 0.9), classifier_uses_state=False):
    """Weighted total loss of a tiny parser on a 3-EDU document."""
    doc = three_edu_document()
    corpus = Corpus.from_documents([doc])
    cfg = ParserConfig(d_tok=3, enc_hidden=3, cls_hidden=3, dropout=0.0, embed_dropout=0.0,
                       classifier_uses_state=classifier_uses_state)
    parser = JointParser(cfg, TokenVocab.from_documents([doc]), corpus.label_vocab, np.random.default_rng(seed))

    def f():
        return total_loss(*parser.losses(doc), weights)

    return f, dict(parser.params.items()), parser, doc
