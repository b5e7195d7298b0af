"""Controlled pictogram vocabulary: loading, indexing, and term lookup.

The vocabulary is a fixed set of communication cards. Each entry carries a
numeric id, one or more keywords (word or multiword expression, optionally
with a glossary definition), and an optional image reference. Entries are
immutable after load, so a loaded vocabulary is safe to share across
threads and worker processes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateIdError, EmptyVocabularyError, MalformedDumpError


@dataclass(frozen=True)
class Keyword:
    """A lowercase term attached to a pictogram, with optional definition."""

    term: str
    definition: str | None = None
    lemma: str = ""

    def __post_init__(self):
        if not self.term or self.term != self.term.strip():
            raise ValueError(f"keyword term must be non-empty and trimmed: {self.term!r}")
        if not self.lemma:
            # Source dumps use lemmas as keywords, so the term doubles as lemma.
            object.__setattr__(self, "lemma", self.term)


@dataclass(frozen=True)
class PictogramEntry:
    """One communication card: id, keywords, and an optional image."""

    id: int
    keywords: tuple[Keyword, ...]
    image_ref: str | None = None

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"pictogram id must be positive: {self.id}")
        if not self.keywords:
            raise ValueError(f"entry {self.id} has no keywords")

    @property
    def caption(self) -> str:
        """Display caption: the first keyword's term."""
        return self.keywords[0].term


class Vocabulary:
    """Indexed, immutable collection of pictogram entries.

    ``term_index`` maps every keyword lemma to the ascending list of
    pictogram ids that carry it; lemmas shared by several entries are how
    polysemy surfaces. ``mwe_lexicon`` is the set of lemmas containing
    whitespace, consumed by the multiword-expression tokenizer.
    """

    def __init__(self, entries: dict[int, PictogramEntry]):
        if not entries:
            raise EmptyVocabularyError("vocabulary has zero entries")
        self.entries: dict[int, PictogramEntry] = dict(sorted(entries.items()))
        index: dict[int, list[str]] = {}
        term_index: dict[str, list[int]] = {}
        for pid, entry in self.entries.items():
            for kw in entry.keywords:
                ids = term_index.setdefault(kw.lemma, [])
                if pid not in ids:
                    ids.append(pid)
        for ids in term_index.values():
            ids.sort()
        self.term_index: dict[str, list[int]] = term_index
        self.mwe_lexicon: frozenset[str] = frozenset(
            lemma for lemma in term_index if " " in lemma
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.entries == other.entries

    @property
    def ids(self) -> list[int]:
        return list(self.entries)

    @property
    def term_count(self) -> int:
        """Number of unique terms (lemmas) across all entries."""
        return len(self.term_index)

    def lookup_term(self, lemma: str) -> list[int]:
        """All candidate pictogram ids for a lemma, ascending; empty if OOV."""
        return list(self.term_index.get(lemma, ()))

    def content_hash(self) -> str:
        """Stable sha256 over ids and keyword data; used for checkpoint pinning."""
        digest = hashlib.sha256()
        for pid, entry in self.entries.items():
            digest.update(str(pid).encode())
            for kw in entry.keywords:
                digest.update(b"\x00" + kw.term.encode("utf-8"))
                digest.update(b"\x01" + (kw.definition or "").encode("utf-8"))
                digest.update(b"\x02" + kw.lemma.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()


def _normalize_term(raw) -> str | None:
    if not isinstance(raw, str):
        return None
    term = raw.strip().lower()
    return term or None


def _parse_arasaac(data, image_base_url=None, image_dir=None) -> dict[int, PictogramEntry]:
    if not isinstance(data, list):
        raise MalformedDumpError("dump root must be a JSON array of entries")
    entries: dict[int, PictogramEntry] = {}
    for item in data:
        if not isinstance(item, dict) or "_id" not in item:
            raise MalformedDumpError(f"entry without _id field: {item!r:.120}")
        pid = item["_id"]
        if not isinstance(pid, int) or pid <= 0:
            raise MalformedDumpError(f"invalid pictogram id: {pid!r}")
        if pid in entries:
            raise DuplicateIdError(f"duplicate pictogram id {pid}")
        keywords = []
        seen_lemmas = set()
        for kw in item.get("keywords", ()):
            if not isinstance(kw, dict):
                raise MalformedDumpError(f"keyword is not an object in entry {pid}")
            term = _normalize_term(kw.get("keyword"))
            if term is None:
                continue
            if term in seen_lemmas:
                # Duplicate (lemma, id) pairs are dump artifacts; keep the first.
                continue
            seen_lemmas.add(term)
            meaning = kw.get("meaning")
            definition = meaning.strip() if isinstance(meaning, str) and meaning.strip() else None
            keywords.append(Keyword(term=term, definition=definition))
        if not keywords:
            # Keyword-less dump rows carry no usable caption; skip them.
            continue
        image_ref = None
        if image_dir is not None:
            image_ref = str(Path(image_dir) / f"{pid}.png")
        elif image_base_url is not None:
            image_ref = f"{image_base_url.rstrip('/')}/{pid}"
        entries[pid] = PictogramEntry(id=pid, keywords=tuple(keywords), image_ref=image_ref)
    return entries


def _parse_jsonl(lines, image_base_url=None, image_dir=None) -> dict[int, PictogramEntry]:
    entries: dict[int, PictogramEntry] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            item = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedDumpError(f"line {lineno}: invalid JSON ({exc})") from exc
        if not isinstance(item, dict) or "id" not in item:
            raise MalformedDumpError(f"line {lineno}: entry without id")
        pid = item["id"]
        if not isinstance(pid, int) or pid <= 0:
            raise MalformedDumpError(f"line {lineno}: invalid id {pid!r}")
        if pid in entries:
            raise DuplicateIdError(f"duplicate pictogram id {pid}")
        keywords = []
        seen = set()
        for kw in item.get("keywords", ()):
            term = _normalize_term(kw.get("term"))
            if term is None:
                continue
            lemma = _normalize_term(kw.get("lemma")) or term
            if lemma in seen:
                continue
            seen.add(lemma)
            keywords.append(Keyword(term=term, definition=kw.get("definition"), lemma=lemma))
        if not keywords:
            continue
        image_ref = item.get("image_ref")
        if image_ref is None:
            if image_dir is not None:
                image_ref = str(Path(image_dir) / f"{pid}.png")
            elif image_base_url is not None:
                image_ref = f"{image_base_url.rstrip('/')}/{pid}"
        entries[pid] = PictogramEntry(id=pid, keywords=tuple(keywords), image_ref=image_ref)
    return entries


def load_vocabulary(
    source,
    fmt: str = "arasaac",
    image_base_url: str | None = None,
    image_dir: str | None = None,
) -> Vocabulary:
    """Load a vocabulary dump.

    Args:
        source: path to the dump file.
        fmt: ``"arasaac"`` for the public API response shape
            (JSON array of ``{"_id", "keywords": [{"keyword", "meaning"}]}``),
            or ``"jsonl"`` for the normalized one-entry-per-line format
            written by :func:`save_vocabulary`.
        image_base_url: if given, entries get ``<base-url>/<id>`` image refs.
        image_dir: if given, entries get ``<dir>/<id>.png`` image refs
            (takes precedence over ``image_base_url``).

    Raises:
        MalformedDumpError: the file does not parse as the requested format.
        DuplicateIdError: two entries share an id.
        EmptyVocabularyError: no usable entries were found.
    """
    path = Path(source)
    if fmt == "arasaac":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedDumpError(f"cannot parse {path}: {exc}") from exc
        entries = _parse_arasaac(data, image_base_url, image_dir)
    elif fmt == "jsonl":
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise MalformedDumpError(f"cannot read {path}: {exc}") from exc
        entries = _parse_jsonl(lines, image_base_url, image_dir)
    else:
        raise ValueError(f"unknown vocabulary format: {fmt!r}")
    return Vocabulary(entries)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    """Write the normalized JSONL form (round-trips via ``fmt="jsonl"``)."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in vocab.entries.values():
            record = {
                "id": entry.id,
                "keywords": [
                    {"term": kw.term, "definition": kw.definition, "lemma": kw.lemma}
                    for kw in entry.keywords
                ],
                "image_ref": entry.image_ref,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
