"""Premise retrieval: TF-IDF nearest neighbours reranked with BM25."""

from __future__ import annotations

import enum
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer

BM25_K1 = 1.5
BM25_B = 0.75
# Scores closer than this are ties and fall back to the name order.
SCORE_DECIMALS = 9

_WORD_RE = re.compile(r"[A-Za-z0-9]+")
_CAMEL_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


class DuplicateName(ValueError):
    pass


class PremiseKind(enum.Enum):
    THEOREM = "Theorem"
    DEFINITION = "Definition"
    INDUCTIVE = "Inductive"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: Optional[str]) -> "PremiseKind":
        if not text:
            return cls.OTHER
        text = text.capitalize()
        if text in ("Lemma", "Corollary", "Fact", "Remark", "Proposition"):
            return cls.THEOREM
        if text in ("Fixpoint", "Function"):
            return cls.DEFINITION
        try:
            return cls(text)
        except ValueError:
            return cls.OTHER


def tokenize(text: str) -> List[str]:
    tokens = []
    for word in _WORD_RE.findall(text):
        for part in _CAMEL_RE.findall(word):
            if len(part) >= 2:
                tokens.append(part.lower())
    return tokens


@dataclass(frozen=True)
class PremiseDoc:
    name: str
    statement: str
    kind: PremiseKind = PremiseKind.THEOREM
    proof: Optional[str] = None
    tokens: Tuple[str, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.tokens:
            object.__setattr__(self, "tokens", tuple(tokenize(self.statement)))

    @classmethod
    def from_dict(cls, data: dict) -> "PremiseDoc":
        return cls(
            name=data["name"],
            statement=data["statement"],
            kind=PremiseKind.parse(data.get("kind")),
            proof=data.get("proof"),
        )


@dataclass(frozen=True)
class RankedPremise:
    doc: PremiseDoc
    knn_score: float
    bm25_score: float = 0.0

    @property
    def name(self) -> str:
        return self.doc.name


class Corpus:
    """Immutable TF-IDF index over premise statements.

    idf(t) = ln((N + 1) / (df(t) + 1)) + 1, tf is the raw count and
    document vectors are L2-normalized.
    """

    def __init__(self, docs: Sequence[PremiseDoc]) -> None:
        seen = set()
        for d in docs:
            if d.name in seen:
                raise DuplicateName(d.name)
            seen.add(d.name)
        self.docs: Tuple[PremiseDoc, ...] = tuple(docs)
        self.by_name: Dict[str, PremiseDoc] = {d.name: d for d in self.docs}
        self.N = len(self.docs)
        self.df: Dict[str, int] = dict(Counter(t for d in self.docs for t in set(d.tokens)))
        self.preamble: List[str] = []
        self._vectorizer: Optional[TfidfVectorizer] = None
        self._matrix = None
        if self.df:
            self._vectorizer = TfidfVectorizer(
                analyzer=_identity, lowercase=False, norm="l2", smooth_idf=True, sublinear_tf=False
            )
            self._matrix = self._vectorizer.fit_transform([list(d.tokens) for d in self.docs])

    def __len__(self) -> int:
        return self.N

    def __contains__(self, name: str) -> bool:
        return name in self.by_name

    def idf(self, token: str) -> float:
        return math.log((self.N + 1) / (self.df.get(token, 0) + 1)) + 1

    def similarities(self, text: str) -> np.ndarray:
        """Cosine similarity of ``text`` against every document."""
        if self._vectorizer is None:
            return np.zeros(self.N)
        q = self._vectorizer.transform([tokenize(text)])
        return np.asarray((self._matrix @ q.T).todense()).ravel()

    @classmethod
    def load(cls, path) -> "Corpus":
        docs = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    docs.append(PremiseDoc.from_dict(json.loads(line)))
        return cls(docs)


def _identity(tokens):
    return tokens


def build_index(docs: Iterable[PremiseDoc]) -> Corpus:
    return Corpus(list(docs))


def _key(score: float) -> float:
    return -round(score, SCORE_DECIMALS)


def knn_premises(corpus: Corpus, statement: str, k: int) -> List[RankedPremise]:
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0 or corpus.N == 0:
        return []
    sims = corpus.similarities(statement)
    order = sorted(range(corpus.N), key=lambda i: (_key(sims[i]), corpus.docs[i].name))
    return [RankedPremise(corpus.docs[i], float(sims[i])) for i in order[:k]]


def knn_premises_by_usage(corpus: Corpus, statement: str, k: int, neighbors: int = 20) -> List[RankedPremise]:
    """Premises used in the proofs of the theorems most similar to ``statement``.

    Each premise scores the highest similarity among the neighbour
    theorems whose proof mentions it.
    """
    if k <= 0:
        return []
    sims = corpus.similarities(statement)
    proved = [i for i, d in enumerate(corpus.docs) if d.proof]
    proved.sort(key=lambda i: (_key(sims[i]), corpus.docs[i].name))
    scores: Dict[str, float] = {}
    for i in proved[:neighbors]:
        for ident in set(re.findall(r"[A-Za-z_][\w'.]*[\w']|[A-Za-z_]", corpus.docs[i].proof)):
            if ident in corpus.by_name and ident != corpus.docs[i].name:
                scores[ident] = max(scores.get(ident, 0.0), float(sims[i]))
    ranked = sorted(scores.items(), key=lambda kv: (_key(kv[1]), kv[0]))
    return [RankedPremise(corpus.by_name[n], s) for n, s in ranked[:k]]


def bm25_scores(docs: Sequence[Sequence[str]], query: Sequence[str],
                k1: float = BM25_K1, b: float = BM25_B) -> List[float]:
    """Okapi BM25 of each token list against ``query``.

    idf(t) = ln(1 + (N - n(t) + 0.5) / (n(t) + 0.5)) over ``docs``; every
    query token occurrence contributes.
    """
    n = len(docs)
    if n == 0:
        return []
    lengths = [len(d) for d in docs]
    avgdl = sum(lengths) / n
    counts = [Counter(d) for d in docs]
    df = Counter(t for d in docs for t in set(d))
    idf = {t: math.log(1 + (n - df[t] + 0.5) / (df[t] + 0.5)) for t in set(query)}
    scores = []
    for tf, dl in zip(counts, lengths):
        norm = k1 * (1 - b + b * dl / avgdl) if avgdl else k1
        s = 0.0
        for t in query:
            f = tf.get(t, 0)
            if f:
                s += idf[t] * f * (k1 + 1) / (f + norm)
        scores.append(s)
    return scores


def bm25_rerank(candidates: Sequence[RankedPremise], query: str) -> List[RankedPremise]:
    scores = bm25_scores([c.doc.tokens for c in candidates], tokenize(query))
    rescored = [RankedPremise(c.doc, c.knn_score, s) for c, s in zip(candidates, scores)]
    rescored.sort(key=lambda r: (_key(r.bm25_score), _key(r.knn_score), r.name))
    return rescored


def rank_names(candidates: Sequence[str], bad: str) -> List[str]:
    """Order candidate identifiers by name similarity to ``bad``."""
    unique = list(dict.fromkeys(candidates))
    scores = bm25_scores([tokenize(c) for c in unique], tokenize(bad))
    ranked = sorted(zip(unique, scores), key=lambda cs: (cs[0] != bad, _key(cs[1]), cs[0]))
    return [c for c, _ in ranked]


def retrieve_premises(corpus: Corpus, statement: str, k: int = 50, budget: int = 10,
                      mode: str = "statement") -> List[RankedPremise]:
    if mode == "usage":
        candidates = knn_premises_by_usage(corpus, statement, k)
    elif mode == "statement":
        candidates = knn_premises(corpus, statement, k)
    else:
        raise ValueError(f"unknown retrieval mode {mode!r}")
    return bm25_rerank(candidates, statement)[:budget]
