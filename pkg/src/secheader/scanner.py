"""URL list ingestion and concurrent GET probing.

Every input URL yields exactly one :class:`ProbeRecord`.  Failures are kept as
``NoResponse`` records with one of five reasons instead of being dropped.
"""

from __future__ import annotations

import enum
import hashlib
import http.client
import json
import logging
import socket
import ssl
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Union
from urllib.parse import urljoin, urlsplit

from . import __version__
from .parse import RawHeader

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = f"secheader-scanner/{__version__}"
REDIRECT_STATUSES = frozenset({301, 302, 303, 307, 308})


class Group(str, enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


class NoResponseReason(str, enum.Enum):
    TIMEOUT = "timeout"
    DNS = "dns"
    CONNECT = "connect"
    TLS = "tls"
    PROTOCOL = "protocol"


class EmptyUrlListError(ValueError):
    pass


@dataclass(frozen=True)
class UrlEntry:
    url: str
    group: Group

    def __post_init__(self):
        if not is_http_url(self.url):
            raise ValueError(f"not an absolute http(s) URL: {self.url!r}")
        object.__setattr__(self, "group", Group(self.group))


def is_http_url(url: str) -> bool:
    try:
        parts = urlsplit(url)
        parts.port
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.hostname)


@dataclass(frozen=True)
class ProbeConfig:
    timeout: float = 30.0
    max_concurrency: int = 8
    user_agent: str = DEFAULT_USER_AGENT
    follow_redirects: bool = False
    max_redirects: int = 5
    tls_verify: bool = True
    clock: Callable[[], float] = field(default=time.time, compare=False, repr=False)

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be at least 1")
        if self.max_redirects < 0:
            raise ValueError("max_redirects must not be negative")

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("clock")
        return d


@dataclass(frozen=True)
class Response:
    status: int
    headers: tuple[RawHeader, ...]
    latency_ms: int = 0

    def __post_init__(self):
        if not 100 <= self.status <= 599:
            raise ValueError(f"status out of range: {self.status}")
        object.__setattr__(self, "headers", tuple(self.headers))


@dataclass(frozen=True)
class NoResponse:
    reason: NoResponseReason


@dataclass(frozen=True)
class ProbeRecord:
    url: str
    group: Group
    outcome: Union[Response, NoResponse]
    fetched_at: float = 0.0

    @property
    def responded(self) -> bool:
        return isinstance(self.outcome, Response)

    @property
    def headers(self) -> tuple[RawHeader, ...]:
        return self.outcome.headers if self.responded else ()

    def to_json(self) -> dict:
        if isinstance(self.outcome, Response):
            outcome = {
                "status": self.outcome.status,
                "headers": [[h.name.text, h.text] for h in self.outcome.headers],
                "latency_ms": self.outcome.latency_ms,
            }
        else:
            outcome = {"no_response": self.outcome.reason.value}
        fetched = int(self.fetched_at) if float(self.fetched_at).is_integer() else self.fetched_at
        return {"url": self.url, "group": self.group.value, "outcome": outcome, "fetched_at": fetched}

    @classmethod
    def from_json(cls, obj: dict) -> ProbeRecord:
        out = obj["outcome"]
        if "no_response" in out:
            outcome = NoResponse(NoResponseReason(out["no_response"]))
        else:
            outcome = Response(int(out["status"]),
                               tuple(RawHeader(n, v) for n, v in out["headers"]),
                               int(out.get("latency_ms", 0)))
        return cls(obj["url"], Group(obj["group"]), outcome, obj.get("fetched_at", 0))


@dataclass(frozen=True)
class ScanCorpus:
    records: tuple[ProbeRecord, ...]
    started_at: float = 0.0
    finished_at: float = 0.0
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def group_totals(self) -> dict[Group, int]:
        totals = {g: 0 for g in Group}
        for r in self.records:
            totals[r.group] += 1
        return totals

    @property
    def responses(self) -> int:
        return sum(r.responded for r in self.records)


# --- URL lists ------------------------------------------------------------------

def load_url_list(path: Union[str, Path], diagnostics: Optional[list] = None) -> list[UrlEntry]:
    """Read ``group,url`` lines.  Bad rows are skipped and described in ``diagnostics``."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            group, sep, url = line.partition(",")
            problem = None
            if not sep:
                problem = "expected 'group,url'"
            elif group.strip() not in ("open", "closed"):
                problem = f"unknown group {group.strip()!r}"
            elif not is_http_url(url.strip()):
                problem = f"not an absolute http(s) URL: {url.strip()!r}"
            if problem:
                msg = f"{path}:{lineno}: {problem}"
                log.warning(msg)
                if diagnostics is not None:
                    diagnostics.append(msg)
                continue
            entries.append(UrlEntry(url.strip(), Group(group.strip())))
    if not entries:
        raise EmptyUrlListError(f"{path}: no URLs")
    return entries


def dedupe_urls(entries: Iterable[UrlEntry]) -> list[UrlEntry]:
    """Drop exact repeats of a URL string, keeping the first.  Paths and queries still differ."""
    seen = set()
    out = []
    for e in entries:
        if e.url not in seen:
            seen.add(e.url)
            out.append(e)
    return out


# --- probing ----------------------------------------------------------------------

def _classify(exc: BaseException) -> NoResponseReason:
    if isinstance(exc, (socket.timeout, TimeoutError)):
        return NoResponseReason.TIMEOUT
    if isinstance(exc, socket.gaierror):
        return NoResponseReason.DNS
    if isinstance(exc, (ssl.SSLError, ssl.CertificateError)):
        return NoResponseReason.TLS
    if isinstance(exc, http.client.HTTPException):
        return NoResponseReason.PROTOCOL
    if isinstance(exc, OSError):
        return NoResponseReason.CONNECT
    return NoResponseReason.PROTOCOL


def _ssl_context(verify: bool) -> ssl.SSLContext:
    if verify:
        return ssl.create_default_context()
    ctx = ssl.create_default_context()
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    return ctx


def _get(url: str, config: ProbeConfig, deadline: float) -> tuple[int, list[RawHeader]]:
    parts = urlsplit(url)
    remaining = max(deadline - time.monotonic(), 0.001)
    if parts.scheme == "https":
        conn = http.client.HTTPSConnection(parts.hostname, parts.port, timeout=remaining,
                                           context=_ssl_context(config.tls_verify))
    else:
        conn = http.client.HTTPConnection(parts.hostname, parts.port, timeout=remaining)
    target = parts.path or "/"
    if parts.query:
        target += "?" + parts.query
    try:
        conn.putrequest("GET", target, skip_accept_encoding=True)
        conn.putheader("User-Agent", config.user_agent)
        conn.putheader("Accept", "*/*")
        conn.endheaders()
        resp = conn.getresponse()
        headers = []
        for name, value in resp.getheaders():
            try:
                headers.append(RawHeader(name, value.encode("latin-1", "replace")))
            except ValueError:
                log.warning("%s: dropping header with invalid name %r", url, name)
        status = resp.status
        try:
            if conn.sock is not None:
                conn.sock.settimeout(max(deadline - time.monotonic(), 0.001))
            resp.read()
        except (http.client.IncompleteRead, OSError):
            # only the header block is recorded
            pass
        return status, headers
    finally:
        conn.close()


def probe(entry: UrlEntry, config: ProbeConfig = ProbeConfig()) -> ProbeRecord:
    """Issue one GET (plus redirects if enabled) and record the outcome."""
    fetched_at = config.clock()
    start = time.monotonic()
    deadline = start + config.timeout
    url = entry.url
    try:
        for hop in range(config.max_redirects + 1):
            status, headers = _get(url, config, deadline)
            if not (config.follow_redirects and status in REDIRECT_STATUSES) or hop == config.max_redirects:
                break
            location = next((h.text for h in headers if h.name.key == "location"), None)
            if not location:
                break
            url = urljoin(url, location.strip())
            if not is_http_url(url):
                break
        outcome = Response(status, tuple(headers), int((time.monotonic() - start) * 1000))
    except Exception as exc:  # noqa: BLE001 - every failure becomes a record
        reason = _classify(exc)
        log.debug("%s: no response (%s): %r", entry.url, reason.value, exc)
        outcome = NoResponse(reason)
    return ProbeRecord(entry.url, entry.group, outcome, fetched_at)


def scan(entries: Iterable[UrlEntry], config: ProbeConfig = ProbeConfig(),
         probe_fn: Callable[[UrlEntry, ProbeConfig], ProbeRecord] = probe) -> ScanCorpus:
    """Probe every distinct URL with at most ``config.max_concurrency`` requests in flight."""
    unique = dedupe_urls(entries)
    if not unique:
        raise EmptyUrlListError("nothing to scan")
    started = config.clock()
    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        records = tuple(pool.map(lambda e: probe_fn(e, config), unique))
    return ScanCorpus(records, started, config.clock(), config.snapshot())


# --- persistence ------------------------------------------------------------------

def write_corpus(corpus: ScanCorpus, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus.records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")


def read_corpus(path: Union[str, Path]) -> ScanCorpus:
    """Read a JSON Lines corpus.  Raises ``ValueError`` on malformed or empty input."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(ProbeRecord.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
    if not records:
        raise ValueError(f"{path}: empty corpus")
    stamps = [r.fetched_at for r in records]
    return ScanCorpus(tuple(records), min(stamps), max(stamps))


def dump_filename(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()


def write_dump_dir(corpus: ScanCorpus, directory: Union[str, Path]) -> None:
    """One file per URL; NoResponse URLs get an empty file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for record in corpus.records:
        target = directory / dump_filename(record.url)
        if not record.responded:
            target.write_bytes(b"")
            continue
        lines = [f"HTTP {record.outcome.status}".encode()]
        lines += [h.name.text.encode("ascii") + b": " + h.value for h in record.outcome.headers]
        target.write_bytes(b"\r\n".join(lines) + b"\r\n")
