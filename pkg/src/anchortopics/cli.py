"""Batch command-line entry points for the full pipeline.

Every subcommand is a thin deterministic wrapper over the library: exit 0 on
success, 1 on validation errors (bad flags, bad anchor/label specs), 2 on
data errors (missing or unparseable files, dimension mismatches). Each run
writes a metadata record (command, config, seed, versions) beside its
outputs; outputs are byte-identical across reruns of the same command line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


class ValidationError(ValueError):
    """User-supplied configuration is wrong (exit 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anchortopics", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def tokenize_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--min-token-len", type=int, default=2)
        p.add_argument("--no-lowercase", action="store_true")
        p.add_argument("--stopwords", help="file with one stopword per line")
        p.add_argument("--negation", action="store_true",
                       help="fold 'no'/'not' into the following token")
        p.add_argument("--strip-newsgroup", action="store_true",
                       help="drop newsgroup headers/quotes/signatures first")

    p = sub.add_parser("vocab", help="build a vocabulary from a JSONL corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cap", type=int, default=20000)
    p.add_argument("--min-df", type=int, default=1)
    tokenize_flags(p)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("vectorize", help="vectorize a corpus against a vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    tokenize_flags(p)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("fit", help="fit the latent factor model")
    p.add_argument("--matrix", required=True)
    p.add_argument("--factors", type=int, required=True)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--out", help="output fit report JSON")
    p.add_argument("--vocab", help="needed when --anchors names terms")
    p.add_argument("--anchors", help="term:factor[:strength], comma separated, or @file")
    p.add_argument("--beta", type=float, default=1.0, help="default anchor strength")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("topics", help="extract ranked topic terms from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", required=True, help="topics JSON; a .txt twin is written too")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("score", help="score documents against a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--corpus", help="JSONL corpus supplying document ids")
    p.add_argument("--out", required=True, help="TSV of per-factor scores")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="evaluate factor classifiers against labels")
    p.add_argument("--scores", required=True, help="TSV from the score command")
    p.add_argument("--corpus", required=True, help="JSONL corpus with labels")
    p.add_argument("--labels", required=True,
                   help="label:factor pairs, comma separated")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="metrics JSON; a .txt twin is written too")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tree", help="fit a layer stack and export the topic tree")
    p.add_argument("--matrix", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--layers", required=True, help="comma separated factor counts")
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--anchors")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True, help="tree JSON; a .dot twin is written too")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("synth", help="generate a synthetic block corpus")
    p.add_argument("--factors", type=int, default=2)
    p.add_argument("--words-per-factor", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--docs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--correlated", action="store_true",
                   help="three blocks with blocks 1 and 2 sharing a parent")
    p.add_argument("--parent-flip", type=float, default=0.1)
    p.add_argument("--state-prior", type=float, default=0.3,
                   help="per-document block ON probability (correlated mode)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render figures from fit/topics/metrics outputs")
    p.add_argument("--fit-report")
    p.add_argument("--topics")
    p.add_argument("--metrics")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the interactive anchor-refinement service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--session-cap", type=int, default=16)
    p.add_argument("--corpus-cap-mb", type=float, default=64.0)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        _cap_threads(args.threads)

    from .corpus import CorpusError
    from .model import DimensionError

    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CorpusError, DimensionError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def _cap_threads(n: int) -> None:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def _write_meta(out_path: str, command: str, settings: dict) -> None:
    import numpy
    import scipy

    from . import __version__

    meta = {
        "command": command,
        "settings": settings,
        "versions": {
            "anchortopics": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
    }
    meta_path = (
        os.path.join(out_path, "run_meta.json")
        if os.path.isdir(out_path)
        else out_path + ".meta.json"
    )
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tokenize_options(args):
    from .corpus import TokenizeOptions

    stopwords = frozenset()
    if args.stopwords:
        with open(args.stopwords, encoding="utf-8") as fh:
            stopwords = frozenset(w.strip() for w in fh if w.strip())
    return TokenizeOptions(
        lowercase=not args.no_lowercase,
        min_token_length=args.min_token_len,
        stopwords=stopwords,
        mark_negation=args.negation,
        strip_newsgroup=args.strip_newsgroup,
    )


def _tokenize_settings(args) -> dict:
    return {
        "min_token_len": args.min_token_len,
        "lowercase": not args.no_lowercase,
        "stopwords_file": args.stopwords,
        "negation": args.negation,
        "strip_newsgroup": args.strip_newsgroup,
    }


def cmd_vocab(args) -> int:
    from .corpus import build_vocabulary, read_corpus

    docs = read_corpus(args.corpus)
    vocab = build_vocabulary(docs, cap=args.cap, min_df=args.min_df,
                             opts=_tokenize_options(args))
    vocab.save(args.out)
    _write_meta(args.out, "vocab", {
        "corpus": args.corpus, "cap": args.cap, "min_df": args.min_df,
        **_tokenize_settings(args),
    })
    return 0


def cmd_vectorize(args) -> int:
    from .corpus import Vocabulary, read_corpus, vectorize

    docs = read_corpus(args.corpus)
    vocab = Vocabulary.load(args.vocab)
    matrix = vectorize(docs, vocab, opts=_tokenize_options(args))
    matrix.save(args.out)
    _write_meta(args.out, "vectorize", {
        "corpus": args.corpus, "vocab": args.vocab, **_tokenize_settings(args),
    })
    return 0


def _load_anchors(args, n_factors: int):
    from .corpus import Vocabulary
    from .model import AnchorSet, parse_anchor_spec, resolve_anchor_spec

    if not args.anchors:
        return AnchorSet(default_strength=args.beta)
    spec_text = args.anchors
    if spec_text.startswith("@"):
        with open(spec_text[1:], encoding="utf-8") as fh:
            spec_text = fh.read()
    try:
        entries = parse_anchor_spec(spec_text)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    if not args.vocab:
        raise ValidationError("--anchors requires --vocab to resolve terms")
    vocab = Vocabulary.load(args.vocab)
    try:
        anchors = resolve_anchor_spec(entries, vocab.index, default_strength=args.beta)
    except KeyError as exc:
        raise ValidationError(exc.args[0]) from exc
    bad = [a.factor for a in anchors.entries if a.factor >= n_factors]
    if bad:
        raise ValidationError(f"anchor factor index out of range: {bad}")
    return anchors


def _fit_config(args, n_factors: int):
    from .model import FitConfig

    return FitConfig(
        n_factors=n_factors,
        max_iter=args.max_iter,
        tol=args.tol,
        patience=args.patience,
        seed=args.seed,
        gamma=args.gamma,
        lam=args.lam,
        anchors=_load_anchors(args, n_factors),
        n_restarts=args.restarts,
    )


def _config_settings(config) -> dict:
    from .model import _config_to_obj

    return _config_to_obj(config)


def cmd_fit(args) -> int:
    from .corpus import SparseBinaryMatrix
    from .model import fit, save_model

    data = SparseBinaryMatrix.load(args.matrix)
    config = _fit_config(args, args.factors)
    model, report = fit(data, config)
    save_model(model, args.model)
    _write_meta(args.model, "fit", {
        "matrix": args.matrix, "config": _config_settings(config),
    })
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if not report.converged:
        print(f"warning: not converged after {report.iterations_run} iterations",
              file=sys.stderr)
    return 0


def cmd_topics(args) -> int:
    from .corpus import SparseBinaryMatrix, Vocabulary
    from .model import compute_posteriors, load_model, mutual_information
    from .topics import topic_report

    model = load_model(args.model)
    data = SparseBinaryMatrix.load(args.matrix)
    vocab = Vocabulary.load(args.vocab)
    if len(vocab) != model.n:
        raise ValidationError(
            f"vocabulary size {len(vocab)} does not match model width {model.n}"
        )
    posteriors = compute_posteriors(model, data)
    mi = mutual_information(model, data, posteriors)
    rep = topic_report(model, mi, vocab, top_t=args.top)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(rep.to_json())
    with open(_twin(args.out, ".txt"), "w", encoding="utf-8") as fh:
        fh.write(rep.to_text())
    _write_meta(args.out, "topics", {
        "model": args.model, "matrix": args.matrix, "vocab": args.vocab,
        "top": args.top,
    })
    return 0


def _twin(path: str, ext: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ext


def _format_score(x: float) -> str:
    return repr(float(x))


def cmd_score(args) -> int:
    from .corpus import SparseBinaryMatrix, read_corpus
    from .model import load_model
    from .topics import score_documents

    model = load_model(args.model)
    data = SparseBinaryMatrix.load(args.matrix)
    ids = None
    if args.corpus:
        docs = read_corpus(args.corpus)
        if len(docs) != data.n_rows:
            raise ValidationError(
                f"corpus has {len(docs)} documents, matrix has {data.n_rows} rows"
            )
        ids = [d.id for d in docs]
    scores = score_documents(model, data)
    with open(args.out, "w", encoding="utf-8") as fh:
        header = ["doc_id"] + [f"factor_{j}" for j in range(model.m)]
        fh.write("\t".join(header) + "\n")
        for l in range(data.n_rows):
            row_id = ids[l] if ids else str(l)
            fh.write("\t".join([row_id] + [_format_score(v) for v in scores[l]]) + "\n")
    _write_meta(args.out, "score", {
        "model": args.model, "matrix": args.matrix, "corpus": args.corpus,
    })
    return 0


def _parse_label_pairs(text: str) -> list[tuple[str, int]]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ValidationError(
                f"bad label entry {chunk!r}; expected label:factor"
            )
        name, _, factor = chunk.rpartition(":")
        try:
            pairs.append((name, int(factor)))
        except ValueError as exc:
            raise ValidationError(f"bad factor index in {chunk!r}") from exc
    if not pairs:
        raise ValidationError("no label:factor pairs given")
    return pairs


def read_scores_tsv(path: str):
    """Parse a scores TSV back into (doc ids, N x m float array)."""
    import numpy as np

    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != "doc_id":
            raise ValidationError(f"bad scores header in {path}")
        m = len(header) - 1
        ids, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) != m + 1:
                raise ValidationError(f"ragged scores row in {path}")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return ids, np.asarray(rows, dtype=np.float64)


def cmd_eval(args) -> int:
    import numpy as np

    from .corpus import read_corpus
    from .evaluation import evaluate_factors, metrics_report_bytes, metrics_report_text

    pairs = _parse_label_pairs(args.labels)
    ids, scores = read_scores_tsv(args.scores)
    docs = read_corpus(args.corpus)
    labels_by_doc = {d.id: d.labels for d in docs}
    missing = [i for i in ids if i not in labels_by_doc]
    if missing:
        raise ValidationError(f"scored documents missing from corpus: {missing[:5]}")
    bad = [j for _, j in pairs if j >= scores.shape[1]]
    if bad:
        raise ValidationError(f"factor index out of range: {bad}")
    truth_by_label = {
        name: np.array([1 if name in labels_by_doc[i] else 0 for i in ids])
        for name, _ in pairs
    }
    report = evaluate_factors(scores, pairs, truth_by_label, threshold=args.threshold)
    with open(args.out, "wb") as fh:
        fh.write(metrics_report_bytes(report))
    with open(_twin(args.out, ".txt"), "w", encoding="utf-8") as fh:
        fh.write(metrics_report_text(report))
    _write_meta(args.out, "eval", {
        "scores": args.scores, "corpus": args.corpus, "labels": args.labels,
        "threshold": args.threshold,
    })
    return 0


def cmd_tree(args) -> int:
    from .corpus import SparseBinaryMatrix, Vocabulary
    from .hierarchy import export_tree, fit_hierarchy

    try:
        layer_sizes = [int(x) for x in args.layers.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad --layers value {args.layers!r}") from exc
    if not layer_sizes:
        raise ValidationError("--layers must name at least one layer size")
    data = SparseBinaryMatrix.load(args.matrix)
    vocab = Vocabulary.load(args.vocab)
    config = _fit_config(args, layer_sizes[0])
    stack = fit_hierarchy(data, layer_sizes, config)
    tree = export_tree(stack, vocab, top_t=args.top)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(tree.to_json())
    with open(_twin(args.out, ".dot"), "w", encoding="utf-8") as fh:
        fh.write(tree.to_dot())
    _write_meta(args.out, "tree", {
        "matrix": args.matrix, "vocab": args.vocab, "layers": layer_sizes,
        "top": args.top, "config": _config_settings(config),
    })
    return 0


def cmd_synth(args) -> int:
    from .corpus import Document, write_corpus
    from .evaluation import generate_correlated_blocks, generate_synthetic

    os.makedirs(args.out, exist_ok=True)
    if args.correlated:
        corpus = generate_correlated_blocks(
            words_per_block=args.words_per_factor,
            noise=args.noise,
            parent_flip=args.parent_flip,
            n_docs=args.docs,
            seed=args.seed,
            state_prior=args.state_prior,
        )
    else:
        corpus = generate_synthetic(
            n_factors=args.factors,
            words_per_factor=args.words_per_factor,
            noise=args.noise,
            n_docs=args.docs,
            seed=args.seed,
        )
    docs = []
    for l in range(corpus.matrix.n_rows):
        text = " ".join(corpus.terms[i] for i in corpus.matrix.rows[l])
        labels = {
            f"factor{b}" for b in range(corpus.factor_states.shape[1])
            if corpus.factor_states[l, b]
        }
        docs.append(Document(id=f"doc{l}", text=text, labels=labels))
    write_corpus(docs, os.path.join(args.out, "corpus.jsonl"))
    corpus.matrix.save(os.path.join(args.out, "matrix.txt"))
    with open(os.path.join(args.out, "vocab.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"#n={len(corpus.terms)}\n")
        for t in corpus.terms:
            fh.write(t + "\n")
    with open(os.path.join(args.out, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump({
            "word_block": corpus.word_block.tolist(),
            "factor_states": corpus.factor_states.tolist(),
        }, fh, sort_keys=True)
        fh.write("\n")
    _write_meta(args.out, "synth", {
        "factors": args.factors, "words_per_factor": args.words_per_factor,
        "noise": args.noise, "docs": args.docs, "seed": args.seed,
        "correlated": args.correlated, "parent_flip": args.parent_flip,
        "state_prior": args.state_prior,
    })
    return 0


def cmd_report(args) -> int:
    from . import report as figures

    if not (args.fit_report or args.topics or args.metrics):
        raise ValidationError("give at least one of --fit-report, --topics, --metrics")
    os.makedirs(args.out, exist_ok=True)
    rendered = []
    if args.fit_report:
        with open(args.fit_report, encoding="utf-8") as fh:
            fit_rep = json.load(fh)
        figures.render_tc_trace(fit_rep, os.path.join(args.out, "tc_trace.png"))
        figures.render_tc_per_factor(
            fit_rep, os.path.join(args.out, "tc_per_factor.png")
        )
        rendered += ["tc_trace.png", "tc_per_factor.png"]
    if args.topics:
        with open(args.topics, encoding="utf-8") as fh:
            topics = json.load(fh)
        figures.render_topic_weights(topics, os.path.join(args.out, "topic_weights.png"))
        rendered.append("topic_weights.png")
    if args.metrics:
        with open(args.metrics, encoding="utf-8") as fh:
            metrics = json.load(fh)
        figures.render_metrics(metrics, os.path.join(args.out, "metrics.png"))
        rendered.append("metrics.png")
    _write_meta(args.out, "report", {
        "fit_report": args.fit_report, "topics": args.topics,
        "metrics": args.metrics, "rendered": rendered,
    })
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    app = create_app(ServiceSettings(
        session_cap=args.session_cap,
        corpus_cap_bytes=int(args.corpus_cap_mb * 1024 * 1024),
        fit_workers=args.threads or 2,
    ))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
