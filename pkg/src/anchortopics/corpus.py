"""Raw text -> binary bag-of-words ingestion.

Covers tokenization, newsgroup boilerplate stripping, document-frequency
vocabulary construction, and vectorization into a sparse presence/absence
matrix. Everything here is deterministic: the same corpus and options always
produce byte-identical vocabulary and matrix files.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Maximal alphanumeric runs; apostrophes survive only word-internally.
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z0-9]+)*")
_HEADER_LINE_RE = re.compile(r"^[A-Za-z][A-Za-z0-9-]*: ")
_NEGATION_TRIGGERS = ("no", "not")


class CorpusError(ValueError):
    """Malformed corpus input (duplicate ids, empty vocabulary, bad files)."""


@dataclass
class Document:
    id: str
    text: str
    labels: set[str] = field(default_factory=set)


@dataclass
class TokenizeOptions:
    lowercase: bool = True
    min_token_length: int = 2
    stopwords: frozenset[str] = frozenset()
    mark_negation: bool = False
    strip_newsgroup: bool = False


def tokenize(
    text: str,
    lowercase: bool = True,
    min_token_length: int = 2,
    stopwords: frozenset[str] | set[str] = frozenset(),
    mark_negation: bool = False,
) -> list[str]:
    """Split text into alphanumeric tokens, optionally folding negations.

    Tokens shorter than ``min_token_length`` and stopwords are dropped before
    the negation pass, so a stopworded "not" cannot act as a trigger. With
    ``mark_negation`` on, a trigger token ("no"/"not") is consumed and the
    following token is emitted as ``not_<token>`` instead (single-token scope).
    """
    tokens = _TOKEN_RE.findall(text)
    if lowercase:
        tokens = [t.lower() for t in tokens]
    tokens = [t for t in tokens if len(t) >= min_token_length and t not in stopwords]
    if not mark_negation:
        return tokens
    out: list[str] = []
    k = 0
    while k < len(tokens):
        tok = tokens[k]
        if tok in _NEGATION_TRIGGERS and k + 1 < len(tokens):
            out.append("not_" + tokens[k + 1])
            k += 2
        else:
            out.append(tok)
            k += 1
    return out


def tokenize_with(text: str, opts: TokenizeOptions) -> list[str]:
    if opts.strip_newsgroup:
        text = strip_newsgroup_boilerplate(text)
    return tokenize(
        text,
        lowercase=opts.lowercase,
        min_token_length=opts.min_token_length,
        stopwords=opts.stopwords,
        mark_negation=opts.mark_negation,
    )


def strip_newsgroup_boilerplate(text: str) -> str:
    """Remove header block, quoted lines, and a trailing signature block.

    The header block is everything up to and including the first blank line,
    dropped only when the block contains a "Key: value"-shaped line. Quoted
    lines are those whose first non-space character is ">". A signature is
    dropped from the last "--" line onward when that line sits within the
    final 10 lines.
    """
    lines = text.split("\n")

    blank = next((k for k, ln in enumerate(lines) if ln.strip() == ""), None)
    if blank is not None and any(_HEADER_LINE_RE.match(ln) for ln in lines[:blank]):
        lines = lines[blank + 1 :]

    lines = [ln for ln in lines if not ln.lstrip().startswith(">")]

    sig = None
    for k, ln in enumerate(lines):
        if ln.strip() == "--":
            sig = k
    if sig is not None and sig >= len(lines) - 10:
        lines = lines[:sig]

    return "\n".join(lines)


@dataclass
class Vocabulary:
    terms: list[str]
    index: dict[str, int]
    doc_freq: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    @classmethod
    def from_terms(cls, terms: list[str], doc_freq: np.ndarray | None = None) -> "Vocabulary":
        index = {t: i for i, t in enumerate(terms)}
        if len(index) != len(terms):
            raise CorpusError("vocabulary terms must be distinct")
        return cls(terms=list(terms), index=index, doc_freq=doc_freq)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#n={len(self.terms)}\n")
            for term in self.terms:
                fh.write(term + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if not header.startswith("#n="):
                raise CorpusError(f"bad vocabulary header: {header!r}")
            n = int(header[3:])
            terms = [fh.readline().rstrip("\n") for _ in range(n)]
        if any(t == "" for t in terms):
            raise CorpusError("vocabulary file truncated")
        return cls.from_terms(terms)


@dataclass
class SparseBinaryMatrix:
    """Presence/absence document-term matrix; rows hold sorted column indices."""

    n_rows: int
    n_cols: int
    rows: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.rows) != self.n_rows:
            raise CorpusError("row count mismatch")
        norm = []
        for r in self.rows:
            arr = np.asarray(r, dtype=np.int64)
            if arr.size and (arr[0] < 0 or arr[-1] >= self.n_cols):
                raise CorpusError("column index out of range")
            if arr.size > 1 and not np.all(np.diff(arr) > 0):
                raise CorpusError("row indices must be strictly increasing")
            norm.append(arr)
        self.rows = norm
        self._csr: sp.csr_matrix | None = None

    @property
    def nnz(self) -> int:
        return int(sum(r.size for r in self.rows))

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            indptr = np.zeros(self.n_rows + 1, dtype=np.int64)
            np.cumsum([r.size for r in self.rows], out=indptr[1:])
            indices = (
                np.concatenate(self.rows) if self.rows else np.empty(0, dtype=np.int64)
            )
            data = np.ones(indices.size, dtype=np.float64)
            self._csr = sp.csr_matrix(
                (data, indices, indptr), shape=(self.n_rows, self.n_cols)
            )
        return self._csr

    def doc_freq(self) -> np.ndarray:
        """Per-column document counts."""
        counts = np.zeros(self.n_cols, dtype=np.int64)
        for r in self.rows:
            counts[r] += 1
        return counts

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols), dtype=np.int8)
        for l, r in enumerate(self.rows):
            dense[l, r] = 1
        return dense

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseBinaryMatrix":
        dense = np.asarray(dense)
        rows = [np.flatnonzero(dense[l]).astype(np.int64) for l in range(dense.shape[0])]
        return cls(n_rows=dense.shape[0], n_cols=dense.shape[1], rows=rows)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#rows={self.n_rows} cols={self.n_cols}\n")
            for r in self.rows:
                fh.write(" ".join(str(int(i)) for i in r) + "\n")

    @classmethod
    def load(cls, path: str) -> "SparseBinaryMatrix":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            m = re.fullmatch(r"#rows=(\d+) cols=(\d+)", header)
            if not m:
                raise CorpusError(f"bad matrix header: {header!r}")
            n_rows, n_cols = int(m.group(1)), int(m.group(2))
            rows = []
            for _ in range(n_rows):
                line = fh.readline()
                if line == "":
                    raise CorpusError("matrix file truncated")
                line = line.rstrip("\n")
                rows.append(
                    np.array([int(x) for x in line.split()] if line else [], dtype=np.int64)
                )
        return cls(n_rows=n_rows, n_cols=n_cols, rows=rows)


def build_vocabulary(
    docs: list[Document],
    cap: int = 20000,
    min_df: int = 1,
    opts: TokenizeOptions | None = None,
    token_sets: list[set[str]] | None = None,
) -> Vocabulary:
    """Rank terms by document frequency (desc, ties lexicographic asc), cap size.

    ``token_sets`` lets callers reuse per-document token sets they already
    computed; otherwise documents are tokenized here with ``opts``.
    """
    if not docs:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    if token_sets is None:
        opts = opts or TokenizeOptions()
        token_sets = [set(tokenize_with(d.text, opts)) for d in docs]
    df: dict[str, int] = {}
    for toks in token_sets:
        for t in toks:
            df[t] = df.get(t, 0) + 1
    kept = [(term, count) for term, count in df.items() if count >= min_df]
    if not kept:
        raise CorpusError("every term was filtered out")
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    kept = kept[:cap]
    terms = [t for t, _ in kept]
    freqs = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary.from_terms(terms, doc_freq=freqs)


def vectorize(
    docs: list[Document],
    vocab: Vocabulary,
    opts: TokenizeOptions | None = None,
    token_sets: list[set[str]] | None = None,
) -> SparseBinaryMatrix:
    """Map each document to the sorted set of vocabulary columns present in it."""
    if len(vocab) == 0:
        raise CorpusError("vocabulary is empty")
    if token_sets is None:
        opts = opts or TokenizeOptions()
        token_sets = [set(tokenize_with(d.text, opts)) for d in docs]
    rows = []
    for toks in token_sets:
        cols = sorted(vocab.index[t] for t in toks if t in vocab.index)
        rows.append(np.array(cols, dtype=np.int64))
    return SparseBinaryMatrix(n_rows=len(docs), n_cols=len(vocab), rows=rows)


def read_corpus(path: str) -> list[Document]:
    """Read a JSON-lines corpus: one object per line with id/text/labels."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc})") from exc
            docs.append(_document_from_obj(obj, lineno, seen))
    return docs


def documents_from_records(records: list[dict]) -> list[Document]:
    """Build documents from already-parsed JSON records (service upload path)."""
    seen: set[str] = set()
    return [_document_from_obj(obj, k + 1, seen) for k, obj in enumerate(records)]


def _document_from_obj(obj: object, lineno: int, seen: set[str]) -> Document:
    if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
        raise CorpusError(f"record {lineno}: expected an object with id and text")
    doc_id = obj["id"]
    if not isinstance(doc_id, str) or not isinstance(obj["text"], str):
        raise CorpusError(f"record {lineno}: id and text must be strings")
    if doc_id in seen:
        raise CorpusError(f"duplicate document id: {doc_id}")
    seen.add(doc_id)
    labels = obj.get("labels") or []
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise CorpusError(f"record {lineno}: labels must be an array of strings")
    return Document(id=doc_id, text=obj["text"], labels=set(labels))


def write_corpus(docs: list[Document], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            rec = {"id": d.id, "text": d.text}
            if d.labels:
                rec["labels"] = sorted(d.labels)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
