"""Bag-of-words and tf-idf featurization of press-release text.

The dictionary is an ordered list of lowercase stems ("acqui",
"integrat", ...). A token counts toward stem j when its lowercase,
punctuation-stripped form begins with the stem, so "Acquired" and
"ACQUISITION" both hit "acqui". tf-idf weighting:

    TFIDF(i, j) = (count of stem i in doc j / tokens in doc j) * log(N / DF(i))

with DF fit on the training corpus only and IDF defined as 0 for stems
that never occur (DF = 0).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources

import numpy as np

_CLEAN = re.compile(r"[^a-z0-9]+")


class TextError(ValueError):
    """Malformed dictionary, document, or featurization input."""


@dataclass(frozen=True)
class Dictionary:
    """Ordered, unique, lowercase stems."""

    stems: tuple[str, ...]

    def __post_init__(self):
        stems = tuple(self.stems)
        if not stems:
            raise TextError("dictionary is empty")
        seen = set()
        for s in stems:
            if not s or s != s.lower() or any(c.isspace() for c in s):
                raise TextError(f"invalid stem {s!r}: stems are nonempty, lowercase, no whitespace")
            if s in seen:
                raise TextError(f"duplicate stem {s!r}")
            seen.add(s)
        object.__setattr__(self, "stems", stems)

    @property
    def size(self) -> int:
        return len(self.stems)

    def _buckets(self) -> dict[str, list[tuple[str, int]]]:
        by_first: dict[str, list[tuple[str, int]]] = {}
        for idx, s in enumerate(self.stems):
            by_first.setdefault(s[0], []).append((s, idx))
        return by_first


@dataclass(frozen=True)
class Document:
    id: str
    timestamp: datetime
    ticker: str
    text: str

    def __post_init__(self):
        if not self.ticker:
            raise TextError(f"document {self.id!r} has an empty ticker")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))


def tokenize(text: str) -> list[str]:
    """Whitespace-split tokens, lowercased, stripped of non-alphanumerics."""
    out = []
    for tok in text.split():
        clean = _CLEAN.sub("", tok.lower())
        if clean:
            out.append(clean)
    return out


def token_count(text: str) -> int:
    """Document length used as the TF denominator (all tokens, not just dictionary hits)."""
    return len(tokenize(text))


def bag_of_words(doc: Document | str, dictionary: Dictionary) -> np.ndarray:
    """Count tokens whose cleaned form starts with each stem."""
    text = doc.text if isinstance(doc, Document) else doc
    counts = np.zeros(dictionary.size, dtype=np.int64)
    buckets = dictionary._buckets()
    for tok in tokenize(text):
        for stem, idx in buckets.get(tok[0], ()):
            if tok.startswith(stem):
                counts[idx] += 1
    return counts


@dataclass(frozen=True)
class TfidfModel:
    """Per-stem document frequencies fit on a (training) corpus."""

    doc_frequency: np.ndarray
    n_docs: int
    n_stems: int

    def __post_init__(self):
        df = np.asarray(self.doc_frequency, dtype=np.int64)
        if np.any(df < 0) or np.any(df > self.n_docs):
            raise TextError("document frequencies must lie in [0, n_docs]")
        df.flags.writeable = False
        object.__setattr__(self, "doc_frequency", df)

    @property
    def idf(self) -> np.ndarray:
        """log(N / DF), with 0 where DF = 0 (absent stems contribute nothing)."""
        df = self.doc_frequency
        out = np.zeros(self.n_stems, dtype=np.float64)
        present = df > 0
        out[present] = np.log(self.n_docs / df[present])
        return out


def fit_tfidf(corpus) -> TfidfModel:
    """Fit document frequencies from a corpus of count vectors."""
    X = np.asarray(corpus)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TextError("corpus must be a nonempty (n_docs, n_stems) count array")
    df = (X > 0).sum(axis=0).astype(np.int64)
    return TfidfModel(doc_frequency=df, n_docs=X.shape[0], n_stems=X.shape[1])


def transform_tfidf(model: TfidfModel, counts, doc_length: int) -> np.ndarray:
    """TF-IDF vector for one document's counts and total token count."""
    c = np.asarray(counts, dtype=np.float64).ravel()
    if c.shape[0] != model.n_stems:
        raise TextError(f"count vector length {c.shape[0]} != {model.n_stems} stems")
    if doc_length <= 0:
        if np.any(c > 0):
            raise TextError("zero doc_length with nonzero counts")
        return np.zeros(model.n_stems)
    return (c / float(doc_length)) * model.idf


def transform_tfidf_many(model: TfidfModel, counts: np.ndarray, doc_lengths: np.ndarray) -> np.ndarray:
    """Row-wise transform_tfidf over a count matrix."""
    C = np.asarray(counts, dtype=np.float64)
    L = np.asarray(doc_lengths, dtype=np.float64).ravel()
    if np.any((L <= 0) & (C.sum(axis=1) > 0)):
        raise TextError("zero doc_length with nonzero counts")
    safe = np.maximum(L, 1.0)
    return (C / safe[:, None]) * model.idf[None, :]


# ---------------------------------------------------------------------------
# File formats: dictionary (newline stems, '#' comments), documents (JSONL),
# features (CSV: id column then one column per stem)
# ---------------------------------------------------------------------------


def load_dictionary(path) -> Dictionary:
    with open(path, encoding="utf-8") as fh:
        return parse_dictionary(fh.read())


def parse_dictionary(content: str) -> Dictionary:
    stems = []
    for line in content.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        stems.append(line.lower())
    return Dictionary(stems=tuple(stems))


def default_dictionary() -> Dictionary:
    """Starter dictionary of finance stems shipped with the package."""
    content = resources.files("newsmkl").joinpath("data/default_stems.txt").read_text("utf-8")
    return parse_dictionary(content)


def _parse_timestamp(raw: str) -> datetime:
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def read_documents(path) -> list[Document]:
    """Read a JSON-lines document file (fields: id, timestamp, ticker, text)."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                docs.append(Document(id=str(rec["id"]), timestamp=_parse_timestamp(rec["timestamp"]),
                                     ticker=str(rec["ticker"]), text=str(rec["text"])))
            except (KeyError, ValueError) as exc:
                raise TextError(f"{path}:{ln}: bad document record: {exc}") from exc
    return docs


def write_documents(path, docs: list[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            rec = {"id": d.id, "timestamp": d.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                   "ticker": d.ticker, "text": d.text}
            fh.write(json.dumps(rec) + "\n")


def write_features_csv(path, ids: list[str], counts: np.ndarray, dictionary: Dictionary) -> None:
    counts = np.asarray(counts)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("id," + ",".join(dictionary.stems) + "\n")
        for doc_id, row in zip(ids, counts):
            fh.write(doc_id + "," + ",".join(str(int(v)) for v in row) + "\n")
