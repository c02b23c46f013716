"""Header-field taxonomy: prevalence ranking, threat classes and client support.

The tables are shipped as CSV files under ``secheader/data`` and loaded once.
A different catalog file can be supplied with :func:`load_catalog`.
"""

from __future__ import annotations

import csv
import enum
import functools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Optional, Union

# RFC 7230 tchar
TOKEN_CHARS = frozenset(
    "!#$%&'*+-.^_`|~0123456789"
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
)


def is_token(text: str) -> bool:
    return bool(text) and all(c in TOKEN_CHARS for c in text)


def fold(text: str) -> str:
    """ASCII-only lower-casing (``str.lower`` also folds non-ASCII letters)."""
    return text.translate(_ASCII_LOWER)


_ASCII_LOWER = {ord(c): ord(c) + 32 for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ"}


class UnknownHeaderError(KeyError):
    """Raised when an operation needs one of a fixed set of header fields."""


@dataclass(frozen=True)
class HeaderName:
    """A header field name.  Equality and hashing ignore ASCII case."""

    text: str = field(compare=False)
    key: str = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.text, str) or not is_token(self.text):
            raise ValueError(f"invalid header field name: {self.text!r}")
        object.__setattr__(self, "key", fold(self.text))

    def __str__(self) -> str:
        return self.text

    @classmethod
    def of(cls, name: NameLike) -> HeaderName:
        return name if isinstance(name, HeaderName) else cls(name)


NameLike = Union[str, HeaderName]


class Purpose(str, enum.Enum):
    PERFORMANCE_OPTIMIZATION = "performance-optimization"
    DEBUGGING = "debugging"
    SECURITY = "security"
    ADVERTISEMENT = "advertisement"
    DATA_PRESENTATION = "data-presentation"
    COOKIE_MANAGEMENT = "cookie-management"
    CONTENT_REDIRECTION = "content-redirection"
    PRIVACY = "privacy"


class ThreatClass(str, enum.Enum):
    VERSION_LEAK = "version-leak"
    CODE_EXECUTION = "code-execution"
    CLICK_JACKING = "click-jacking"
    DATA_LEAK = "data-leak"


class Relevance(str, enum.Enum):
    MINOR = "Minor"
    MAJOR = "Major"


class SupportLevel(str, enum.Enum):
    FULL = "Full"
    LIMITED = "Limited"
    UNSUPPORTED = "Unsupported"

    @property
    def symbol(self) -> str:
        return _SUPPORT_SYMBOLS[self]

    @classmethod
    def from_symbol(cls, symbol: str) -> SupportLevel:
        for level, sym in _SUPPORT_SYMBOLS.items():
            if sym == symbol.strip():
                return level
        raise ValueError(f"unknown support symbol {symbol!r}")


_SUPPORT_SYMBOLS = {
    SupportLevel.FULL: "✓",
    SupportLevel.LIMITED: "(✓)",
    SupportLevel.UNSUPPORTED: "✖",
}


class ClientId(str, enum.Enum):
    GLIDE = "Glide"
    HTTP_COMPONENTS = "HttpComponents"
    ION = "Ion"
    LOOPJ = "LoopJ"
    OKHTTP = "OkHttp"
    RETROFIT = "RetroFit"
    VOLLEY = "Volley"
    HTTPS_URL_CONNECTION = "HttpsURLConnection"
    HTTP_URL_CONNECTION = "HttpURLConnection"
    SOCKET = "Socket"
    URL_CONNECTION = "URLConnection"
    ANDROID_WEBVIEW = "Android WebView"
    GOOGLE_CHROME = "Google Chrome"
    MICROSOFT_EDGE = "Microsoft Edge"
    MOZILLA_FIREFOX = "Mozilla Firefox"

    @classmethod
    def parse(cls, text: str) -> ClientId:
        wanted = fold(text.replace(" ", ""))
        for client in cls:
            if fold(client.value.replace(" ", "")) == wanted or fold(client.name) == wanted:
                return client
        raise ValueError(f"unknown client {text!r}")


BROWSERS = frozenset({
    ClientId.ANDROID_WEBVIEW,
    ClientId.GOOGLE_CHROME,
    ClientId.MICROSOFT_EDGE,
    ClientId.MOZILLA_FIREFOX,
})


@dataclass(frozen=True)
class SecurityCounts:
    """Responses carrying a field, overall and per URL group, with printed percents."""

    total: int
    open: int
    closed: int
    total_pct: int
    open_pct: int
    closed_pct: int


@dataclass(frozen=True)
class CatalogEntry:
    name: HeaderName
    rank: int
    occurrences: int
    purpose: Purpose
    relevance: Relevance
    note: str
    threat: Optional[ThreatClass] = None
    security_counts: Optional[SecurityCounts] = None

    def __post_init__(self):
        if self.rank < 1 or self.occurrences < 0:
            raise ValueError(f"bad rank/occurrences for {self.name}")
        if (self.threat is None) != (self.security_counts is None):
            raise ValueError(f"{self.name}: threat and security counts go together")
        c = self.security_counts
        if c is not None and c.open + c.closed != c.total:
            raise ValueError(f"{self.name}: open + closed != total")

    @property
    def is_security(self) -> bool:
        return self.threat is not None


CATALOG_COLUMNS = (
    "rank", "occurrences", "name", "purpose", "relevance", "note", "threat",
    "total", "open", "closed", "total_pct", "open_pct", "closed_pct",
)


class Catalog:
    """Immutable lookup over the ranked header fields and the support matrix."""

    def __init__(self, entries, support):
        self._entries: tuple[CatalogEntry, ...] = tuple(entries)
        self._by_key = {}
        for entry in self._entries:
            if entry.name.key in self._by_key:
                raise ValueError(f"duplicate catalog entry {entry.name}")
            self._by_key[entry.name.key] = entry
        self._support: dict[tuple[ClientId, str], SupportLevel] = dict(support)

    def __iter__(self) -> Iterator[CatalogEntry]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[CatalogEntry, ...]:
        return self._entries

    @property
    def security_entries(self) -> tuple[CatalogEntry, ...]:
        return tuple(e for e in self._entries if e.is_security)

    @property
    def mitigation_entries(self) -> tuple[CatalogEntry, ...]:
        return tuple(e for e in self.security_entries if e.threat is not ThreatClass.VERSION_LEAK)

    @property
    def version_leak_entries(self) -> tuple[CatalogEntry, ...]:
        return tuple(e for e in self.security_entries if e.threat is ThreatClass.VERSION_LEAK)

    def classify(self, name: NameLike) -> Optional[CatalogEntry]:
        try:
            key = HeaderName.of(name).key
        except ValueError:
            return None
        return self._by_key.get(key)

    def threat_of(self, name: NameLike) -> Optional[ThreatClass]:
        entry = self.classify(name)
        return entry.threat if entry else None

    def client_support(self, client: Union[ClientId, str], name: NameLike) -> SupportLevel:
        if not isinstance(client, ClientId):
            client = ClientId.parse(client)
        entry = self.classify(name)
        if entry is None or not entry.is_security:
            raise UnknownHeaderError(f"{name} is not a security-related header field")
        return self._support[(client, entry.name.key)]

    def support_matrix(self) -> dict[tuple[ClientId, str], SupportLevel]:
        return dict(self._support)


def _open_default(filename: str):
    return resources.files("secheader").joinpath("data", filename).open(encoding="utf-8", newline="")


def _read_entries(fh) -> list[CatalogEntry]:
    reader = csv.DictReader(fh)
    missing = set(CATALOG_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"catalog file lacks columns: {sorted(missing)}")
    entries = []
    for row in reader:
        threat = ThreatClass(row["threat"]) if row["threat"] else None
        counts = None
        if threat is not None:
            counts = SecurityCounts(*(int(row[c]) for c in CATALOG_COLUMNS[7:]))
        entries.append(CatalogEntry(
            name=HeaderName(row["name"]),
            rank=int(row["rank"]),
            occurrences=int(row["occurrences"]),
            purpose=Purpose(row["purpose"]),
            relevance=Relevance(row["relevance"]),
            note=row["note"],
            threat=threat,
            security_counts=counts,
        ))
    return entries


def _read_support(fh) -> dict[tuple[ClientId, str], SupportLevel]:
    reader = csv.reader(fh)
    header = next(reader)
    clients = [ClientId.parse(c) for c in header[1:]]
    cells = {}
    for row in reader:
        if not row:
            continue
        key = HeaderName(row[0]).key
        for client, symbol in zip(clients, row[1:], strict=True):
            cells[(client, key)] = SupportLevel.from_symbol(symbol)
    return cells


def load_catalog(path: Union[str, Path, None] = None,
                 support_path: Union[str, Path, None] = None) -> Catalog:
    """Load the catalog; ``None`` paths select the bundled tables."""
    if path is None:
        with _open_default("catalog.csv") as fh:
            entries = _read_entries(fh)
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            entries = _read_entries(fh)
    if support_path is None:
        with _open_default("support.csv") as fh:
            support = _read_support(fh)
    else:
        with open(support_path, encoding="utf-8", newline="") as fh:
            support = _read_support(fh)
    return Catalog(entries, support)


def write_catalog(catalog: Catalog, fh) -> None:
    """Write ``catalog`` in the same CSV layout it is loaded from."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CATALOG_COLUMNS)
    for e in catalog:
        c = e.security_counts
        counts = [c.total, c.open, c.closed, c.total_pct, c.open_pct, c.closed_pct] if c else [""] * 6
        writer.writerow([e.rank, e.occurrences, e.name.text, e.purpose.value, e.relevance.value,
                         e.note, e.threat.value if e.threat else "", *counts])


@functools.lru_cache(maxsize=1)
def default_catalog() -> Catalog:
    return load_catalog()


def classify(name: NameLike) -> Optional[CatalogEntry]:
    return default_catalog().classify(name)


def threat_of(name: NameLike) -> Optional[ThreatClass]:
    return default_catalog().threat_of(name)


def client_support(client: Union[ClientId, str], name: NameLike) -> SupportLevel:
    return default_catalog().client_support(client, name)


VERSION_LEAK_FIELDS = tuple(HeaderName(n) for n in (
    "Server", "X-Powered-By", "X-AspNet-Version", "X-Powered-By-Plesk",
))

MITIGATION_FIELDS = tuple(HeaderName(n) for n in (
    "X-Content-Type-Options",
    "X-XSS-Protection",
    "X-Frame-Options",
    "Access-Control-Allow-Origin",
    "Strict-Transport-Security",
    "Upgrade",
    "Content-Security-Policy",
    "Access-Control-Expose-Headers",
    "Expect-CT",
    "Access-Control-Allow-Credentials",
    "Timing-Allow-Origin",
    "Referrer-Policy",
))

SECURITY_FIELDS = VERSION_LEAK_FIELDS + MITIGATION_FIELDS

# Proposed fields for client-side payload policies; not part of the measured tables.
ALLOWED_INTERPRETATION = HeaderName("X-Allowed-Interpretation")
ALLOWED_PERSISTENCE = HeaderName("X-Allowed-Persistence")
