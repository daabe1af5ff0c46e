"""Structured manuscript model and interchange-format parser.

The interchange format is a constrained markdown subset with YAML front
matter (see docs/interchange.md). Upstream PDF/LaTeX extractors are expected
to emit this format; the engine never parses PDFs itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

import yaml

from .errors import DanglingLocation, EmptyDocument, MalformedSource

_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)(?:\s+\{#([A-Za-z0-9_.:-]+)\})?\s*$")
_TABLE_MARKER_RE = re.compile(r"^\[table:([A-Za-z0-9_.:-]+)\]\s*(.*)$")
_NUMBER_RE = re.compile(r"[-+]?\d+(?:\.\d+)?%?")


def normalize_token(text: str) -> str:
    """Canonical form used to match tasks/datasets/metrics across sources."""
    return " ".join(text.lower().replace("-", " ").replace("_", " ").split())


@dataclass(frozen=True)
class Span:
    id: str
    text: str


@dataclass(frozen=True)
class Section:
    id: str
    heading: str
    depth: int
    spans: tuple[Span, ...] = ()


@dataclass(frozen=True)
class TableBlock:
    id: str
    caption: str
    cells: tuple[tuple[str, ...], ...]
    section_id: str

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0


@dataclass(frozen=True)
class CitationEntry:
    key: str
    title: str
    year: int | None = None
    venue: str | None = None


@dataclass(frozen=True)
class ResultMention:
    """A numeric result located in the manuscript.

    ``raw`` retains the exact decimal string from the source so report
    rendering and tolerance arithmetic never reformat paper values.
    ``subject`` is the row header for table-derived mentions (typically the
    method or baseline name).
    """

    location: str
    metric_name: str
    value: Decimal
    raw: str
    unit: str | None = None
    dataset: str | None = None
    task: str | None = None
    subject: str | None = None


@dataclass(frozen=True)
class Manuscript:
    id: str
    title: str
    sections: tuple[Section, ...]
    tables: tuple[TableBlock, ...] = ()
    biblio: tuple[CitationEntry, ...] = ()
    method: str | None = None

    def section(self, section_id: str) -> Section | None:
        for s in self.sections:
            if s.id == section_id:
                return s
        return None

    def table(self, table_id: str) -> TableBlock | None:
        for t in self.tables:
            if t.id == table_id:
                return t
        return None

    def spans(self) -> dict[str, Span]:
        return {sp.id: sp for sec in self.sections for sp in sec.spans}

    def full_text(self) -> str:
        parts = [self.title]
        for sec in self.sections:
            parts.append(sec.heading)
            parts.extend(sp.text for sp in sec.spans)
        for t in self.tables:
            parts.append(t.caption)
        return "\n".join(parts)


def _validate(m: Manuscript) -> None:
    sec_ids = [s.id for s in m.sections]
    if len(set(sec_ids)) != len(sec_ids):
        raise MalformedSource("duplicate section id")
    span_ids = [sp.id for sec in m.sections for sp in sec.spans]
    if len(set(span_ids)) != len(span_ids):
        raise MalformedSource("duplicate span id")
    known = set(sec_ids)
    for t in m.tables:
        if t.section_id not in known:
            raise MalformedSource(f"table {t.id} references unknown section {t.section_id}")
        widths = {len(row) for row in t.cells}
        if len(widths) > 1:
            raise MalformedSource(f"table {t.id} has ragged rows")
    tab_ids = [t.id for t in m.tables]
    if len(set(tab_ids)) != len(tab_ids):
        raise MalformedSource("duplicate table id")
    keys = [c.key for c in m.biblio]
    if len(set(keys)) != len(keys):
        raise MalformedSource("duplicate citation key")


def parse_document(source: str) -> Manuscript:
    """Parse an interchange document into a Manuscript.

    Raises MalformedSource on grammar violations and EmptyDocument when the
    body contains no sections.
    """
    if not source.strip():
        raise EmptyDocument("document is empty")

    lines = source.splitlines()
    meta, body_start = _parse_front_matter(lines)

    sections: list[dict] = []
    tables: list[TableBlock] = []
    auto_sec = 0
    para: list[str] = []

    def flush_para():
        nonlocal para
        if para and sections:
            sec = sections[-1]
            sec["paras"].append("\n".join(para))
        elif para and not sections:
            raise MalformedSource("text before first section heading")
        para = []

    i = body_start
    while i < len(lines):
        line = lines[i]
        h = _HEADING_RE.match(line)
        tm = _TABLE_MARKER_RE.match(line)
        if h:
            flush_para()
            depth = len(h.group(1))
            prev_depth = sections[-1]["depth"] if sections else 0
            if depth > prev_depth + 1:
                raise MalformedSource(
                    f"heading depth jump from {prev_depth} to {depth}: {line!r}")
            auto_sec += 1
            sec_id = h.group(3) or f"sec-{auto_sec}"
            sections.append({"id": sec_id, "heading": h.group(2), "depth": depth, "paras": []})
            i += 1
        elif tm:
            flush_para()
            if not sections:
                raise MalformedSource("table before first section heading")
            rows: list[tuple[str, ...]] = []
            i += 1
            while i < len(lines) and lines[i].lstrip().startswith("|"):
                cells = [c.strip() for c in lines[i].strip().strip("|").split("|")]
                rows.append(tuple(cells))
                i += 1
            if not rows:
                raise MalformedSource(f"table {tm.group(1)} has no rows")
            tables.append(TableBlock(
                id=tm.group(1), caption=tm.group(2),
                cells=tuple(rows), section_id=sections[-1]["id"]))
        elif not line.strip():
            flush_para()
            i += 1
        else:
            para.append(line.rstrip())
            i += 1
    flush_para()

    if not sections:
        raise EmptyDocument("no sections found")

    built: list[Section] = []
    for sec in sections:
        spans = tuple(
            Span(id=f"{sec['id']}.s{k}", text=text)
            for k, text in enumerate(sec["paras"], start=1))
        built.append(Section(id=sec["id"], heading=sec["heading"],
                             depth=sec["depth"], spans=spans))

    biblio = tuple(
        CitationEntry(key=str(c["key"]), title=str(c.get("title", "")),
                      year=c.get("year"), venue=c.get("venue"))
        for c in meta.get("citations", []) or [])

    m = Manuscript(
        id=str(meta.get("id", "")),
        title=str(meta.get("title", "")),
        sections=tuple(built),
        tables=tuple(tables),
        biblio=biblio,
        method=meta.get("method"),
    )
    if not m.id or not m.title:
        raise MalformedSource("front matter must declare id and title")
    _validate(m)
    return m


def _parse_front_matter(lines: list[str]) -> tuple[dict, int]:
    if not lines or lines[0].strip() != "---":
        raise MalformedSource("missing front matter delimiter")
    for j in range(1, len(lines)):
        if lines[j].strip() == "---":
            try:
                meta = yaml.safe_load("\n".join(lines[1:j])) or {}
            except yaml.YAMLError as e:
                raise MalformedSource(f"front matter is not valid YAML: {e}") from e
            if not isinstance(meta, dict):
                raise MalformedSource("front matter must be a mapping")
            return meta, j + 1
    raise MalformedSource("unterminated front matter")


def serialize_document(m: Manuscript) -> str:
    """Inverse of parse_document: parse(serialize(m)) is structurally equal to m."""
    meta: dict = {"id": m.id, "title": m.title}
    if m.method is not None:
        meta["method"] = m.method
    if m.biblio:
        meta["citations"] = [
            {k: v for k, v in
             (("key", c.key), ("title", c.title), ("year", c.year), ("venue", c.venue))
             if v is not None}
            for c in m.biblio]
    out = ["---", yaml.safe_dump(meta, sort_keys=False).rstrip(), "---", ""]
    tables_by_sec: dict[str, list[TableBlock]] = {}
    for t in m.tables:
        tables_by_sec.setdefault(t.section_id, []).append(t)
    for sec in m.sections:
        out.append(f"{'#' * sec.depth} {sec.heading} {{#{sec.id}}}")
        out.append("")
        for sp in sec.spans:
            out.append(sp.text)
            out.append("")
        for t in tables_by_sec.get(sec.id, []):
            out.append(f"[table:{t.id}] {t.caption}")
            for row in t.cells:
                out.append("| " + " | ".join(row) + " |")
            out.append("")
    return "\n".join(out)


# --- locations ---------------------------------------------------------------

def resolve_location(m: Manuscript, loc: str) -> str:
    """Return the exact text at a span or cell reference.

    Locations: ``span:<span-id>`` or ``cell:<table-id>:<row>:<col>``
    (zero-based row/col).
    """
    if loc.startswith("span:"):
        span = m.spans().get(loc[len("span:"):])
        if span is None:
            raise DanglingLocation(loc)
        return span.text
    if loc.startswith("cell:"):
        parts = loc.split(":")
        if len(parts) != 4:
            raise DanglingLocation(loc)
        _, tid, r, c = parts
        t = m.table(tid)
        try:
            row, col = int(r), int(c)
        except ValueError:
            raise DanglingLocation(loc) from None
        if t is None or not (0 <= row < t.n_rows and 0 <= col < t.n_cols):
            raise DanglingLocation(loc)
        return t.cells[row][col]
    raise DanglingLocation(loc)


# --- result mention extraction -------------------------------------------------

@dataclass(frozen=True)
class MentionVocabulary:
    """Keyword lists driving the numeric-result scan; extendable via config."""

    metrics: tuple[str, ...] = ("MRR", "Hits@1", "Hits@3", "Hits@10",
                                "Accuracy", "F1", "AUC", "Loss")
    tasks: tuple[str, ...] = ()
    datasets: tuple[str, ...] = ()


def _find_vocab_hit(text: str, vocab: tuple[str, ...]) -> str | None:
    norm = normalize_token(text)
    for name in vocab:
        if normalize_token(name) in norm:
            return name
    return None


def _parse_number(raw: str) -> tuple[Decimal, str | None] | None:
    unit = "percent" if raw.endswith("%") else None
    body = raw.rstrip("%")
    try:
        return Decimal(body), unit
    except InvalidOperation:
        return None


def extract_result_mentions(m: Manuscript,
                            vocab: MentionVocabulary | None = None) -> tuple[ResultMention, ...]:
    """Scan tables and spans for numbers adjacent to recognized metric keywords."""
    vocab = vocab or MentionVocabulary()
    mentions: list[ResultMention] = []
    seen: set[tuple[str, str]] = set()

    def add(mention: ResultMention) -> None:
        key = (mention.location, normalize_token(mention.metric_name))
        if key not in seen:
            seen.add(key)
            mentions.append(mention)

    for t in m.tables:
        task = _find_vocab_hit(t.caption + " " + t.id, vocab.tasks)
        dataset = _find_vocab_hit(t.caption + " " + t.id, vocab.datasets)
        header = t.cells[0] if t.cells else ()
        col_metric: dict[int, tuple[str, bool]] = {}
        for j, cell in enumerate(header):
            for kw in vocab.metrics:
                if normalize_token(kw) == normalize_token(cell.replace("(%)", "").replace("%", "")):
                    col_metric[j] = (kw, "%" in cell)
                    break
        for i, row in enumerate(t.cells):
            subject = row[0] if row else None
            for j, cell in enumerate(row):
                loc = f"cell:{t.id}:{i}:{j}"
                if i > 0 and j in col_metric:
                    parsed = _parse_number(cell)
                    if parsed:
                        value, unit = parsed
                        kw, pct_header = col_metric[j]
                        add(ResultMention(
                            location=loc, metric_name=kw, value=value,
                            raw=cell, unit=unit or ("percent" if pct_header else None),
                            dataset=dataset, task=task, subject=subject))
                        continue
                for kw in vocab.metrics:
                    pat = re.compile(
                        re.escape(kw) + r"\s*[:=]?\s*(" + _NUMBER_RE.pattern + ")",
                        re.IGNORECASE)
                    hit = pat.search(cell)
                    if hit:
                        parsed = _parse_number(hit.group(1))
                        if parsed:
                            value, unit = parsed
                            add(ResultMention(
                                location=loc, metric_name=kw, value=value,
                                raw=hit.group(1), unit=unit,
                                dataset=dataset, task=task, subject=subject))

    for sec in m.sections:
        for sp in sec.spans:
            task = _find_vocab_hit(sp.text, vocab.tasks)
            dataset = _find_vocab_hit(sp.text, vocab.datasets)
            for kw in vocab.metrics:
                pat = re.compile(
                    re.escape(kw) + r"\s*(?:is|was|of|[:=])?\s*(" + _NUMBER_RE.pattern + ")",
                    re.IGNORECASE)
                for hit in pat.finditer(sp.text):
                    parsed = _parse_number(hit.group(1))
                    if parsed:
                        value, unit = parsed
                        add(ResultMention(
                            location=f"span:{sp.id}", metric_name=kw, value=value,
                            raw=hit.group(1), unit=unit, dataset=dataset, task=task))
    return tuple(mentions)
