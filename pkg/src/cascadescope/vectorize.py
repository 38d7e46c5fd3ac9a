"""Vocabulary, count matrices and TF-IDF weighting.

TF-IDF follows ``w[j, i] = tf[j, i] * ln(N / df[i])`` where ``tf`` is the
count of term ``i`` in document ``j`` divided by the number of in-vocabulary
terms of ``j``. No idf smoothing and no row normalization are applied.
"""
from __future__ import annotations

import hashlib
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
import scipy.sparse as sp

Semantics = Literal["count", "tfidf"]


class EmptyCorpusError(ValueError):
    pass


def ngrams(tokens: Sequence[str], ngram_range: tuple[int, int] = (1, 1)) -> list[str]:
    lo, hi = ngram_range
    out = []
    for n in range(lo, hi + 1):
        out.extend(" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
    return out


@dataclass
class Vocabulary:
    terms: list[str]
    df: np.ndarray
    n_docs: int
    ngram_range: tuple[int, int] = (1, 1)
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}
        self.df = np.asarray(self.df, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.terms)

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.terms).encode("utf-8")).hexdigest()

    def write(self, path: str | Path) -> None:
        lo, hi = self.ngram_range
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#n_docs\t{self.n_docs}\tngram\t{lo}\t{hi}\n")
            for term, df in zip(self.terms, self.df):
                fh.write(f"{term}\t{int(df)}\n")

    @classmethod
    def read(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        head = lines[0].split("\t")
        n_docs, ngram_range = int(head[1]), (int(head[3]), int(head[4]))
        terms, dfs = [], []
        for line in lines[1:]:
            if not line:
                continue
            term, df = line.rsplit("\t", 1)
            terms.append(term)
            dfs.append(int(df))
        return cls(terms, np.array(dfs, dtype=np.int64), n_docs, ngram_range)


@dataclass
class SparseMatrix:
    matrix: sp.csr_matrix
    semantics: Semantics

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def write(self, path: str | Path) -> None:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        n_rows, n_cols = self.shape
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{n_rows} {n_cols} {coo.nnz} {self.semantics}\n")
            fmt = "{} {} {}\n" if self.semantics == "count" else "{} {} {!r}\n"
            for k in order:
                w = int(coo.data[k]) if self.semantics == "count" else float(coo.data[k])
                fh.write(fmt.format(int(coo.row[k]), int(coo.col[k]), w))

    @classmethod
    def read(cls, path: str | Path) -> "SparseMatrix":
        with open(path, encoding="utf-8") as fh:
            n_rows, n_cols, nnz, semantics = fh.readline().split()
            body = np.loadtxt(fh, ndmin=2) if int(nnz) else np.zeros((0, 3))
        rows, cols = body[:, 0].astype(np.int64), body[:, 1].astype(np.int64)
        m = sp.csr_matrix((body[:, 2], (rows, cols)), shape=(int(n_rows), int(n_cols)))
        return cls(m, semantics)  # type: ignore[arg-type]


def build_vocab(
    documents: Iterable[Sequence[str]],
    max_features: int | None = 10_000,
    ngram_range: tuple[int, int] = (1, 1),
) -> Vocabulary:
    """Keep the ``max_features`` n-grams with the largest corpus counts.

    Ties are broken lexicographically; columns are ordered lexicographically.
    """
    lo, hi = ngram_range
    if not 1 <= lo <= hi <= 2:
        raise ValueError("ngram_range must satisfy 1 <= lo <= hi <= 2")
    totals: Counter[str] = Counter()
    dfs: Counter[str] = Counter()
    n_docs = 0
    for tokens in documents:
        n_docs += 1
        grams = ngrams(tokens, ngram_range)
        totals.update(grams)
        dfs.update(set(grams))
    if not totals:
        raise EmptyCorpusError("no terms in corpus")
    ranked = sorted(totals, key=lambda t: (-totals[t], t))
    if max_features is not None:
        ranked = ranked[:max_features]
    terms = sorted(ranked)
    return Vocabulary(terms, np.array([dfs[t] for t in terms], dtype=np.int64), n_docs, ngram_range)


def count_matrix(documents: Iterable[Sequence[str]], vocab: Vocabulary) -> SparseMatrix:
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for tokens in documents:
        row = Counter(g for g in ngrams(tokens, vocab.ngram_range) if g in vocab.index)
        for term in sorted(row, key=vocab.index.__getitem__):
            indices.append(vocab.index[term])
            data.append(row[term])
        indptr.append(len(indices))
    m = sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indptr) - 1, len(vocab)),
    )
    return SparseMatrix(m, "count")


def tfidf(counts: SparseMatrix, vocab: Vocabulary) -> SparseMatrix:
    if counts.semantics != "count":
        raise ValueError("tfidf expects a count matrix")
    m = counts.matrix.tocsr(copy=True)
    m.sort_indices()
    row_tot = np.asarray(m.sum(axis=1)).ravel()
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    idf = np.log(vocab.n_docs / vocab.df.astype(np.float64))
    m.data = (m.data / row_tot[rows]) * idf[m.indices]
    m.eliminate_zeros()
    return SparseMatrix(m, "tfidf")


def top_features(matrix: SparseMatrix, vocab: Vocabulary, k: int = 50) -> list[tuple[str, float]]:
    scores = np.asarray(matrix.matrix.sum(axis=0)).ravel()
    if k > len(vocab):
        warnings.warn(f"k={k} exceeds vocabulary size {len(vocab)}; returning all terms", stacklevel=2)
    order = sorted(range(len(vocab)), key=lambda i: (-scores[i], vocab.terms[i]))
    return [(vocab.terms[i], float(scores[i])) for i in order[:k]]
