"""Prevalence tables, security adoption figures and per-response findings.

Percentages are integers rounded half up.  Group denominators count every
probed URL of the group, including those that never answered.

Grade rubric (v1, this package's own, not a published scale): start at A
when at most two of the twelve mitigation fields are missing, drop one
letter for every further two missing fields, and one more letter if any
version-leaking field is present.  Letters run A B C D E F; F is the floor.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .catalog import (
    MITIGATION_FIELDS,
    Catalog,
    HeaderName,
    Purpose,
    Relevance,
    ThreatClass,
    default_catalog,
)
from .parse import VersionLeak
from .policy import LeakMode, evaluate_version_leaks
from .scanner import Group, ProbeRecord, ScanCorpus

GRADE_RUBRIC_VERSION = 1
GRADES = "ABCDEF"
FORMATS = ("markdown", "csv", "json")
EXTENSIONS = {"markdown": "md", "csv": "csv", "json": "json"}


class UnsupportedFormatError(ValueError):
    pass


class MissingFieldError(KeyError):
    pass


class NoResponseError(ValueError):
    pass


def round_half_up(value: Union[Fraction, int]) -> int:
    value = Fraction(value)
    return (value.numerator * 2 + value.denominator) // (value.denominator * 2)


def percent(count: int, total: int) -> int:
    if total <= 0:
        raise ZeroDivisionError("percentage of an empty group")
    return round_half_up(Fraction(100 * count, total))


@dataclass(frozen=True)
class PrevalenceRow:
    rank: int
    occurrences: int
    name: str
    purpose: Optional[Purpose] = None
    relevance: Optional[Relevance] = None
    note: str = ""


@dataclass(frozen=True)
class GroupCounts:
    total: int
    open: int
    closed: int

    def __post_init__(self):
        if self.open + self.closed != self.total:
            raise ValueError("open + closed must equal total")


@dataclass(frozen=True)
class GroupPercents:
    total: int
    open: int
    closed: int


@dataclass(frozen=True)
class SecurityPrevalenceRow:
    name: str
    threat: ThreatClass
    counts: GroupCounts
    pct: GroupPercents


@dataclass(frozen=True)
class PrevalenceTable:
    rows: tuple[PrevalenceRow, ...]


@dataclass(frozen=True)
class SecurityTable:
    rows: tuple[SecurityPrevalenceRow, ...]


@dataclass(frozen=True)
class ResponseFindings:
    url: str
    leaks: tuple[VersionLeak, ...]
    mitigations_present: frozenset
    mitigations_absent: frozenset
    grade: str

    def to_json(self) -> dict:
        order = [h.text for h in MITIGATION_FIELDS]
        return {
            "url": self.url,
            "leaks": [{"header": l.header.text, "product": l.product, "version": l.version,
                       "comment": l.comment} for l in self.leaks],
            "mitigations_present": [n for n in order if HeaderName(n) in self.mitigations_present],
            "mitigations_absent": [n for n in order if HeaderName(n) in self.mitigations_absent],
            "grade": self.grade,
        }


def _present_names(record: ProbeRecord) -> dict[str, str]:
    """Folded name -> first-seen spelling, one entry per field in the response."""
    names: dict[str, str] = {}
    for h in record.headers:
        names.setdefault(h.name.key, h.name.text)
    return names


def prevalence(corpus: Union[ScanCorpus, Iterable[ProbeRecord]],
               catalog: Optional[Catalog] = None) -> PrevalenceTable:
    """Count, per field, the responses that carry it; rank with ties sharing a rank."""
    catalog = catalog or default_catalog()
    records = corpus.records if isinstance(corpus, ScanCorpus) else tuple(corpus)
    counts: dict[str, int] = {}
    spelling: dict[str, str] = {}
    for record in records:
        for key, text in _present_names(record).items():
            counts[key] = counts.get(key, 0) + 1
            spelling.setdefault(key, text)
    rows = []
    rank = 0
    previous = None
    for key in sorted(counts, key=lambda k: (-counts[k], k)):
        if counts[key] != previous:
            rank += 1
            previous = counts[key]
        entry = catalog.classify(key)
        if entry is not None:
            rows.append(PrevalenceRow(rank, counts[key], entry.name.text, entry.purpose,
                                      entry.relevance, entry.note))
        else:
            rows.append(PrevalenceRow(rank, counts[key], spelling[key]))
    return PrevalenceTable(tuple(rows))


def security_row(name: str, threat: ThreatClass, counts: GroupCounts, open_total: int,
                 closed_total: int, total_pct: Optional[int] = None) -> SecurityPrevalenceRow:
    """Build a row; ``total_pct`` overrides the computed overall percentage."""
    if total_pct is None:
        total_pct = percent(counts.total, open_total + closed_total)
    open_pct = percent(counts.open, open_total) if open_total else 0
    closed_pct = percent(counts.closed, closed_total) if closed_total else 0
    return SecurityPrevalenceRow(name, threat, counts, GroupPercents(total_pct, open_pct, closed_pct))


def security_prevalence(corpus: ScanCorpus, catalog: Optional[Catalog] = None) -> SecurityTable:
    catalog = catalog or default_catalog()
    totals = corpus.group_totals()
    found: dict[str, dict[Group, int]] = {}
    for record in corpus.records:
        for key in _present_names(record):
            entry = catalog.classify(key)
            if entry is None or not entry.is_security:
                continue
            found.setdefault(key, {g: 0 for g in Group})[record.group] += 1
    order = {e.name.key: i for i, e in enumerate(catalog.security_entries)}
    rows = []
    for key, by_group in found.items():
        entry = catalog.classify(key)
        counts = GroupCounts(by_group[Group.OPEN] + by_group[Group.CLOSED],
                             by_group[Group.OPEN], by_group[Group.CLOSED])
        rows.append(security_row(entry.name.text, entry.threat, counts,
                                 totals[Group.OPEN], totals[Group.CLOSED]))
    rows.sort(key=lambda r: (-r.counts.total, order[HeaderName(r.name).key]))
    return SecurityTable(tuple(rows))


def catalog_security_table(catalog: Optional[Catalog] = None, open_total: int = 1230,
                           closed_total: int = 8486) -> SecurityTable:
    """Rows rebuilt from the catalog's printed counts.

    Group percentages are recomputed; the overall percentage is taken as
    printed because the printed overall column does not follow from its counts.
    """
    catalog = catalog or default_catalog()
    rows = []
    for e in catalog.security_entries:
        c = e.security_counts
        rows.append(security_row(e.name.text, e.threat, GroupCounts(c.total, c.open, c.closed),
                                 open_total, closed_total, total_pct=c.total_pct))
    rows.sort(key=lambda r: -r.counts.total)
    return SecurityTable(tuple(rows))


def non_adoption_average(rows: Union[SecurityTable, Sequence[SecurityPrevalenceRow]]) -> int:
    """Mean share of responses lacking each mitigation field, in integer percent."""
    rows = rows.rows if isinstance(rows, SecurityTable) else rows
    by_key = {HeaderName(r.name).key: r for r in rows}
    missing = [h.text for h in MITIGATION_FIELDS if h.key not in by_key]
    if missing:
        raise MissingFieldError(f"rows lack mitigation fields: {', '.join(missing)}")
    gaps = sum(100 - by_key[h.key].pct.total for h in MITIGATION_FIELDS)
    return round_half_up(Fraction(gaps, len(MITIGATION_FIELDS)))


def grade(present: int, leaks: int) -> str:
    missing = len(MITIGATION_FIELDS) - present
    step = (max(0, missing - 2) + 1) // 2
    if leaks:
        step += 1
    return GRADES[min(step, len(GRADES) - 1)]


def findings(record: ProbeRecord, leak_mode: LeakMode = LeakMode.AUDIT) -> ResponseFindings:
    """Leaks and mitigation coverage of one response.

    Raises :class:`NoResponseError` for records without a response and
    ``VersionLeakError`` in strict mode when a leak is present.
    """
    if not record.responded:
        raise NoResponseError(f"{record.url}: no response to assess")
    leaks = tuple(evaluate_version_leaks(record.headers, leak_mode))
    names = {h.name for h in record.headers}
    present = frozenset(h for h in MITIGATION_FIELDS if h in names)
    absent = frozenset(MITIGATION_FIELDS) - present
    return ResponseFindings(record.url, leaks, present, absent, grade(len(present), len(leaks)))


def corpus_findings(corpus: ScanCorpus, leak_mode: LeakMode = LeakMode.AUDIT) -> list[ResponseFindings]:
    return [findings(r, leak_mode) for r in corpus.records if r.responded]


# --- rendering ---------------------------------------------------------------------

PREVALENCE_COLUMNS = ("rank", "occurrences", "name", "purpose", "relevance", "note")
SECURITY_COLUMNS = ("name", "threat", "total", "open", "closed", "total_pct", "open_pct", "closed_pct")


def _prevalence_dict(row: PrevalenceRow) -> dict:
    return {
        "rank": row.rank,
        "occurrences": row.occurrences,
        "name": row.name,
        "purpose": row.purpose.value if row.purpose else "",
        "relevance": row.relevance.value if row.relevance else "",
        "note": row.note,
    }


def _security_dict(row: SecurityPrevalenceRow) -> dict:
    return {
        "name": row.name, "threat": row.threat.value,
        "total": row.counts.total, "open": row.counts.open, "closed": row.counts.closed,
        "total_pct": row.pct.total, "open_pct": row.pct.open, "closed_pct": row.pct.closed,
    }


def _md_escape(text: str) -> str:
    return text.replace("|", "\\|")


def _markdown(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(_md_escape(str(c)) for c in row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _prevalence_markdown(table: PrevalenceTable) -> str:
    rows = []
    for r in table.rows:
        purpose = r.purpose.value.replace("-", " ") if r.purpose else ""
        relevance = f"{r.relevance.value}: {r.note}" if r.relevance else ""
        rows.append((f"{r.rank:02d}", r.occurrences, r.name, purpose, relevance))
    return _markdown(("Rank", "# Occ.", "Header field", "Purpose", "Relevant to security"), rows)


def _security_markdown(table: SecurityTable) -> str:
    rows = []
    for r in table.rows:
        rows.append((
            r.name,
            r.threat.value.replace("-", " "),
            f"{r.counts.total} ({r.counts.open} / {r.counts.closed})",
            f"{r.pct.total}% ({r.pct.open}% / {r.pct.closed}%)",
        ))
    return _markdown(("Header", "Threat", "# Responses", "% URLs"), rows)


def _csv(columns: Sequence[str], dicts: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(dicts)
    return buf.getvalue()


def render(report, fmt: str) -> bytes:
    """Serialize a table or a list of findings.  Output is byte-stable for equal input."""
    if fmt == "md":
        fmt = "markdown"
    if fmt not in FORMATS:
        raise UnsupportedFormatError(f"unsupported format {fmt!r}; choose from {', '.join(FORMATS)}")
    if isinstance(report, PrevalenceTable):
        dicts = [_prevalence_dict(r) for r in report.rows]
        columns = PREVALENCE_COLUMNS
        markdown = _prevalence_markdown
    elif isinstance(report, SecurityTable):
        dicts = [_security_dict(r) for r in report.rows]
        columns = SECURITY_COLUMNS
        markdown = _security_markdown
    elif isinstance(report, (list, tuple)) and all(isinstance(f, ResponseFindings) for f in report):
        if fmt != "json":
            raise UnsupportedFormatError("findings are rendered as JSON lines only")
        return "".join(json.dumps(f.to_json(), sort_keys=False) + "\n" for f in report).encode("utf-8")
    else:
        raise TypeError(f"cannot render {type(report).__name__}")
    if fmt == "markdown":
        text = markdown(report)
    elif fmt == "csv":
        text = _csv(columns, dicts)
    else:
        text = json.dumps(dicts, indent=2) + "\n"
    return text.encode("utf-8")


__all__ = [
    "GroupCounts", "GroupPercents", "PrevalenceRow", "PrevalenceTable", "ResponseFindings", "SecurityPrevalenceRow",
    "SecurityTable", "catalog_security_table", "corpus_findings", "findings", "grade",
    "non_adoption_average", "percent", "prevalence", "render", "round_half_up",
    "security_prevalence", "security_row",
]
