"""
ArnetMiner citation corpus: parsing, indexing and time-sliced citation counts.

Record format (one record per blank-line separated block)::

    #*<title>
    #@<author>;<author>;...
    #t<year>
    #c<venue>
    #index<paper id>
    #%<referenced paper id>      (repeated, one per line)
    #!<abstract>

Papers without a year are dropped, references to ids that are not in the
dump are counted as dangling and kept out of the citation graph.
"""

import hashlib
import io
import json
import logging
import re
import threading
from dataclasses import dataclass, field, asdict
from importlib import resources
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .errors import DataError, UnknownIdError

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "impactlab-snapshot"
SNAPSHOT_VERSION = 1


def _load_stopwords() -> frozenset:
    text = resources.files("impactlab").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


STOPWORDS = _load_stopwords()
_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(title: str, abstract: str = "") -> List[str]:
    """Lowercase, split on non-alphanumerics, drop short tokens and stop words."""
    text = f"{title or ''} {abstract or ''}".lower()
    return [
        tok for tok in _TOKEN_SPLIT.split(text)
        if len(tok) >= 2 and tok not in STOPWORDS
    ]


def normalize_venue(venue: Optional[str]) -> Optional[str]:
    if venue is None:
        return None
    venue = venue.strip().lower()
    return venue or None


@dataclass(frozen=True)
class Paper:
    id: str
    title: str
    authors: Tuple[str, ...]
    year: int
    venue: Optional[str] = None
    abstract: str = ""
    references: Tuple[str, ...] = ()

    def tokens(self) -> List[str]:
        return tokenize(self.title, self.abstract)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["authors"] = list(self.authors)
        d["references"] = list(self.references)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Paper":
        return cls(
            id=str(d["id"]),
            title=d.get("title", ""),
            authors=tuple(d.get("authors", ())),
            year=int(d["year"]),
            venue=normalize_venue(d.get("venue")),
            abstract=d.get("abstract", "") or "",
            references=tuple(d.get("references", ())),
        )


@dataclass
class IngestReport:
    papers_loaded: int = 0
    citation_edges: int = 0
    dangling_references: int = 0
    authors: int = 0
    collaboration_pairs: int = 0
    skipped_records: int = 0
    missing_year: int = 0
    duplicate_ids: int = 0
    self_references: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class Corpus:
    """Immutable, indexed snapshot of papers and their citation/authorship edges.

    Public mappings are read-only views.  Numeric arrays (``years``, edge
    lists) are aligned with ``paper_ids`` and used by the vectorised queries
    in the other modules.
    """

    def __init__(self, papers: Iterable[Paper]):
        plist: List[Paper] = []
        pos: Dict[str, int] = {}
        for p in papers:
            if p.id in pos:
                raise DataError(f"duplicate paper id {p.id!r}")
            pos[p.id] = len(plist)
            plist.append(p)

        self.paper_ids: Tuple[str, ...] = tuple(p.id for p in plist)
        self._pos = pos
        self.years = np.array([p.year for p in plist], dtype=np.int64)
        self.years.setflags(write=False)

        src, dst = [], []
        cited_by: Dict[str, List[str]] = {pid: [] for pid in self.paper_ids}
        dangling = 0
        for i, p in enumerate(plist):
            for r in p.references:
                j = pos.get(r)
                if j is None:
                    dangling += 1
                    continue
                src.append(i)
                dst.append(j)
                cited_by[r].append(p.id)
        self.dangling_references = dangling
        self.edge_src = np.array(src, dtype=np.int64)
        self.edge_dst = np.array(dst, dtype=np.int64)

        author_pos: Dict[str, int] = {}
        author_papers: Dict[str, List[str]] = {}
        venue_papers: Dict[str, List[str]] = {}
        year_index: Dict[int, List[str]] = {}
        ap_author, ap_paper = [], []
        for i, p in enumerate(plist):
            for a in p.authors:
                if a not in author_pos:
                    author_pos[a] = len(author_pos)
                    author_papers[a] = []
                author_papers[a].append(p.id)
                ap_author.append(author_pos[a])
                ap_paper.append(i)
            if p.venue is not None:
                venue_papers.setdefault(p.venue, []).append(p.id)
            year_index.setdefault(p.year, []).append(p.id)

        self.author_ids: Tuple[str, ...] = tuple(author_pos)
        self._author_pos = author_pos
        self.authorship_author = np.array(ap_author, dtype=np.int64)
        self.authorship_paper = np.array(ap_paper, dtype=np.int64)

        self.papers = MappingProxyType({p.id: p for p in plist})
        self.cited_by = MappingProxyType({k: tuple(v) for k, v in cited_by.items()})
        self.author_papers = MappingProxyType({k: tuple(v) for k, v in author_papers.items()})
        self.venue_papers = MappingProxyType({k: tuple(v) for k, v in venue_papers.items()})
        self.year_index = MappingProxyType({k: tuple(v) for k, v in sorted(year_index.items())})

        for arr in (self.edge_src, self.edge_dst, self.authorship_author, self.authorship_paper):
            arr.setflags(write=False)

        self._count_cache: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self._fingerprint: Optional[str] = None

    def __len__(self):
        return len(self.paper_ids)

    def __contains__(self, paper_id):
        return paper_id in self._pos

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return dict(self.papers) == dict(other.papers)

    __hash__ = object.__hash__

    def paper(self, paper_id: str) -> Paper:
        try:
            return self.papers[paper_id]
        except KeyError:
            raise UnknownIdError(f"unknown paper id {paper_id!r}") from None

    def paper_index(self, paper_id: str) -> int:
        try:
            return self._pos[paper_id]
        except KeyError:
            raise UnknownIdError(f"unknown paper id {paper_id!r}") from None

    def author_index(self, author: str) -> int:
        try:
            return self._author_pos[author]
        except KeyError:
            raise UnknownIdError(f"unknown author {author!r}") from None

    def has_author(self, author: str) -> bool:
        return author in self._author_pos

    @property
    def year_range(self) -> Tuple[int, int]:
        if not len(self):
            raise DataError("empty corpus has no year range")
        return int(self.years.min()), int(self.years.max())

    def citation_counts(self, y: int) -> np.ndarray:
        """Citations received by every paper from papers published in or before ``y``.

        Result is aligned with ``paper_ids`` and cached per year; treat it as
        read-only.
        """
        y = int(y)
        with self._lock:
            cached = self._count_cache.get(y)
        if cached is not None:
            return cached
        mask = self.years[self.edge_src] <= y
        counts = np.bincount(self.edge_dst[mask], minlength=len(self)).astype(np.int64)
        counts.setflags(write=False)
        with self._lock:
            self._count_cache.setdefault(y, counts)
        return counts

    @property
    def fingerprint(self) -> str:
        """Order-independent sha256 over the canonical paper records."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            for pid in sorted(self.paper_ids):
                h.update(json.dumps(self.papers[pid].to_dict(), sort_keys=True,
                                    ensure_ascii=False).encode("utf-8"))
                h.update(b"\n")
            self._fingerprint = h.hexdigest()
        return self._fingerprint

    def collaboration_pairs(self) -> int:
        pairs = set()
        for p in self.papers.values():
            idx = sorted(self._author_pos[a] for a in p.authors)
            for i in range(len(idx)):
                for j in range(i + 1, len(idx)):
                    pairs.add((idx[i], idx[j]))
        return len(pairs)


def citations_until(corpus: Corpus, paper_id: str, y: int) -> int:
    """Number of papers citing ``paper_id`` that were published in or before ``y``."""
    corpus.paper(paper_id)
    return sum(1 for c in corpus.cited_by[paper_id] if corpus.papers[c].year <= y)


# --- ArnetMiner text format -------------------------------------------------

def _iter_records(lines: Iterable[str]) -> Iterator[List[str]]:
    record: List[str] = []
    for line in lines:
        line = line.rstrip("\r\n")
        if not line.strip():
            if record:
                yield record
                record = []
            continue
        if line.startswith("#"):
            record.append(line)
        elif record:
            # continuation of a wrapped field
            record[-1] += " " + line.strip()
    if record:
        yield record


def _parse_record(lines: List[str]) -> dict:
    rec = {"title": "", "authors": [], "year": None, "venue": None,
           "id": None, "references": [], "abstract": ""}
    for line in lines:
        if line.startswith("#index"):
            rec["id"] = line[6:].strip()
        elif line.startswith("#*"):
            rec["title"] = line[2:].strip()
        elif line.startswith("#@"):
            rec["authors"] = [a.strip() for a in line[2:].split(";") if a.strip()]
        elif line.startswith("#t"):
            rec["year"] = line[2:].strip()
        elif line.startswith("#citation"):
            continue
        elif line.startswith("#c"):
            rec["venue"] = line[2:]
        elif line.startswith("#%"):
            ref = line[2:].strip()
            if ref:
                rec["references"].append(ref)
        elif line.startswith("#!"):
            rec["abstract"] = line[2:].strip()
    return rec


def parse_corpus(source: Union[io.TextIOBase, Iterable[str], str]) -> Tuple[Corpus, IngestReport]:
    """Parse an ArnetMiner record stream into a corpus plus ingest statistics.

    ``source`` may be an open text stream, any iterable of lines, or a
    string holding the whole dump.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    report = IngestReport()
    papers: Dict[str, Paper] = {}
    try:
        for lines in _iter_records(source):
            rec = _parse_record(lines)
            pid = rec["id"]
            if not pid:
                report.skipped_records += 1
                continue
            if rec["year"] in (None, ""):
                report.missing_year += 1
                continue
            try:
                year = int(rec["year"])
            except ValueError:
                report.skipped_records += 1
                logger.debug("record %s: malformed year %r", pid, rec["year"])
                continue
            if pid in papers:
                report.duplicate_ids += 1
                logger.error("duplicate #index %s: later record rejected", pid)
                continue
            seen = set()
            refs = []
            for r in rec["references"]:
                if r == pid:
                    report.self_references += 1
                    continue
                if r not in seen:
                    seen.add(r)
                    refs.append(r)
            authors = tuple(dict.fromkeys(rec["authors"]))
            papers[pid] = Paper(
                id=pid, title=rec["title"], authors=authors, year=year,
                venue=normalize_venue(rec["venue"]), abstract=rec["abstract"],
                references=tuple(refs),
            )
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read corpus stream: {exc}") from exc

    corpus = Corpus(papers.values())
    report.papers_loaded = len(corpus)
    report.citation_edges = int(corpus.edge_src.size)
    report.dangling_references = corpus.dangling_references
    report.authors = len(corpus.author_ids)
    report.collaboration_pairs = corpus.collaboration_pairs()
    return corpus, report


def load_arnetminer(path) -> Tuple[Corpus, IngestReport]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_corpus(fh)
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc


def format_record(p: Paper) -> str:
    lines = [f"#*{p.title}", f"#@{';'.join(p.authors)}", f"#t{p.year}",
             f"#c{p.venue or ''}", f"#index{p.id}"]
    lines += [f"#%{r}" for r in p.references]
    if p.abstract:
        lines.append(f"#!{p.abstract}")
    return "\n".join(lines) + "\n"


def write_arnetminer(papers: Iterable[Paper], stream) -> None:
    for p in papers:
        stream.write(format_record(p))
        stream.write("\n")


# --- snapshots ----------------------------------------------------------------

def save_snapshot(corpus: Corpus, report: IngestReport, path) -> None:
    """Write newline-delimited JSON: one header line, then one paper per line."""
    header = {"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION,
              "fingerprint": corpus.fingerprint, "report": report.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for pid in corpus.paper_ids:
            fh.write(json.dumps(corpus.papers[pid].to_dict(), sort_keys=True,
                                ensure_ascii=False) + "\n")


def load_snapshot(path) -> Tuple[Corpus, IngestReport]:
    try:
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline() or "{}")
            if header.get("format") != SNAPSHOT_FORMAT:
                raise DataError(f"{path} is not an impactlab snapshot")
            papers = [Paper.from_dict(json.loads(line)) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read snapshot {path}: {exc}") from exc
    corpus = Corpus(papers)
    if corpus.fingerprint != header.get("fingerprint"):
        raise DataError(f"snapshot {path} is corrupt: fingerprint mismatch")
    return corpus, IngestReport(**header.get("report", {}))
