"""Client-side enforcement: HSTS store, version-leak modes, Upgrade and CORS decisions.

Nothing here reads the wall clock; callers pass ``now`` in epoch seconds.
"""

from __future__ import annotations

import contextlib
import enum
import ipaddress
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union
from urllib.parse import urlsplit, urlunsplit

from .catalog import VERSION_LEAK_FIELDS, fold
from .parse import (
    CorsCredentials,
    CorsOrigin,
    ExposedHeaders,
    HstsDirectives,
    OriginKind,
    RawHeader,
    UpgradeTargets,
    VersionLeak,
    extract_version_leak,
    parse_security_header,
)

try:
    import fcntl
except ImportError:  # pragma: no cover - non-POSIX
    fcntl = None

log = logging.getLogger(__name__)

STORE_ENV = "SECHEADER_HSTS_STORE"
PRELOAD_MAX_AGE = 31536000


def default_store_path() -> Path:
    """Per-user shared store location, overridable through ``SECHEADER_HSTS_STORE``."""
    env = os.environ.get(STORE_ENV)
    if env:
        return Path(env)
    base = os.environ.get("XDG_DATA_HOME") or os.path.join(os.path.expanduser("~"), ".local", "share")
    return Path(base) / "secheader" / "hsts.tsv"


def normalize_host(host: str) -> str:
    return fold(host.strip()).rstrip(".")


def is_ip_literal(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class HstsEntry:
    host: str
    expires_at: int
    include_subdomains: bool = False

    def __post_init__(self):
        if not self.host or "/" in self.host or ":" in self.host:
            raise ValueError(f"invalid HSTS host {self.host!r}")

    def to_line(self) -> str:
        return f"{self.host}\t{self.expires_at}\t{int(self.include_subdomains)}"

    @classmethod
    def from_line(cls, line: str) -> HstsEntry:
        host, expires, flag = line.rstrip("\r\n").split("\t")
        if flag not in ("0", "1"):
            raise ValueError(f"include_subdomains must be 0 or 1, got {flag!r}")
        return cls(normalize_host(host), int(expires), flag == "1")


class HstsStore:
    """Host to HSTS policy map, optionally backed by a file.

    Single-writer contract: writes take an exclusive advisory lock on
    ``<store>.lock`` and replace the file atomically, so readers never see a
    partial file.
    """

    def __init__(self, entries: Iterable[HstsEntry] = (), store_path: Union[str, Path, None] = None):
        self.entries: dict[str, HstsEntry] = {e.host: e for e in entries}
        self.store_path = Path(store_path) if store_path is not None else None

    def __eq__(self, other):
        if not isinstance(other, HstsStore):
            return NotImplemented
        return self.entries == other.entries

    def __len__(self):
        return len(self.entries)

    def __contains__(self, host):
        return normalize_host(host) in self.entries

    def __repr__(self):
        return f"HstsStore({len(self.entries)} entries, path={self.store_path})"

    @classmethod
    def load(cls, path: Union[str, Path]) -> HstsStore:
        """Read a store file.  A missing file gives an empty store bound to ``path``."""
        path = Path(path)
        entries = []
        try:
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip() or line.startswith("#"):
                        continue
                    try:
                        entries.append(HstsEntry.from_line(line))
                    except ValueError as exc:
                        log.warning("%s:%d: skipping bad HSTS record: %s", path, lineno, exc)
        except FileNotFoundError:
            pass
        return cls(entries, path)

    def save(self, path: Union[str, Path, None] = None) -> None:
        path = Path(path) if path is not None else self.store_path
        if path is None:
            raise ValueError("store has no path")
        path.parent.mkdir(parents=True, exist_ok=True)
        body = "".join(e.to_line() + "\n" for e in sorted(self.entries.values(), key=lambda e: e.host))
        with _locked(path):
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write("# host\texpires_at\tinclude_subdomains\n")
                    fh.write(body)
                os.replace(tmp, path)
            except BaseException:
                with contextlib.suppress(OSError):
                    os.unlink(tmp)
                raise

    def _persist(self) -> None:
        if self.store_path is not None:
            self.save()

    def update(self, host: str, directives: HstsDirectives, over_secure_transport: bool,
               now: float) -> bool:
        """Apply a received policy.  Returns ``True`` if the store changed.

        Policies received over plain HTTP and policies for IP literals are
        ignored.  ``max-age=0`` removes the host.  Raises ``OSError`` if the
        store cannot be written; the in-memory state is updated regardless.
        """
        if not over_secure_transport:
            return False
        host = normalize_host(host)
        if not host:
            return False
        if is_ip_literal(host):
            log.info("HSTS policy for IP literal %s ignored", host)
            return False
        if directives.max_age == 0:
            changed = self.entries.pop(host, None) is not None
        else:
            entry = HstsEntry(host, int(now) + directives.max_age, directives.include_subdomains)
            changed = self.entries.get(host) != entry
            self.entries[host] = entry
        if changed:
            self._persist()
        return changed

    def lookup(self, host: str, now: float) -> Optional[HstsEntry]:
        """Find the policy covering ``host``, evicting expired entries on the way."""
        host = normalize_host(host)
        if not host or is_ip_literal(host):
            return None
        labels = host.split(".")
        expired = False
        found = None
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            entry = self.entries.get(candidate)
            if entry is None:
                continue
            if now >= entry.expires_at:
                del self.entries[candidate]
                expired = True
                continue
            if i == 0 or entry.include_subdomains:
                found = entry
                break
        if expired:
            with contextlib.suppress(OSError):
                self._persist()
        return found

    def rewrite(self, url: str, now: float) -> str:
        parts = urlsplit(url)
        if fold(parts.scheme) != "http" or not parts.hostname:
            return url
        if self.lookup(parts.hostname, now) is None:
            return url
        netloc = parts.netloc
        if parts.port == 80:
            head, _, _ = netloc.rpartition(":")
            netloc = f"{head}:443"
        return urlunsplit(("https", netloc, parts.path, parts.query, parts.fragment))

    def purge(self, now: float) -> int:
        """Drop every expired entry.  Returns how many were removed."""
        stale = [h for h, e in self.entries.items() if now >= e.expires_at]
        for host in stale:
            del self.entries[host]
        if stale:
            self._persist()
        return len(stale)

    def import_preload(self, path: Union[str, Path], now: float,
                       max_age: int = PRELOAD_MAX_AGE) -> int:
        """Load ``host[,includeSubDomains]`` lines; each host gets ``max_age`` from ``now``."""
        count = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                host, _, flag = (p.strip() for p in line.partition(","))
                host = normalize_host(host)
                if flag and fold(flag) != "includesubdomains":
                    log.warning("%s:%d: unknown preload flag %r", path, lineno, flag)
                if not host or is_ip_literal(host) or "/" in host or ":" in host:
                    log.warning("%s:%d: skipping invalid preload host %r", path, lineno, host)
                    continue
                self.entries[host] = HstsEntry(host, int(now) + max_age, fold(flag) == "includesubdomains")
                count += 1
        if count:
            self._persist()
        return count


@contextlib.contextmanager
def _locked(path: Path):
    if fcntl is None:
        yield
        return
    with open(str(path) + ".lock", "a") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(lock, fcntl.LOCK_UN)


def hsts_update(store: HstsStore, host: str, d: HstsDirectives, over_secure_transport: bool,
                now: float) -> HstsStore:
    store.update(host, d, over_secure_transport, now)
    return store


def hsts_rewrite(store: HstsStore, url: str, now: float) -> str:
    return store.rewrite(url, now)


# --- version leaks -----------------------------------------------------------

class LeakMode(str, enum.Enum):
    STRICT = "strict"
    AUDIT = "audit"
    IGNORE = "ignore"


class VersionLeakError(Exception):
    """A response advertised server software while strict mode was on."""

    def __init__(self, findings: list[VersionLeak]):
        self.findings = list(findings)
        names = ", ".join(f"{f.header}: {f}" for f in self.findings)
        super().__init__(f"version information leaked by {names}")


_LEAK_KEYS = {h.key for h in VERSION_LEAK_FIELDS}


def evaluate_version_leaks(headers: Iterable[RawHeader], mode: LeakMode) -> list[VersionLeak]:
    if mode is LeakMode.IGNORE:
        return []
    findings = [extract_version_leak(h.name, h.text) for h in headers if h.name.key in _LEAK_KEYS]
    if findings and mode is LeakMode.STRICT:
        raise VersionLeakError(findings)
    return findings


# --- Upgrade -------------------------------------------------------------------

@dataclass(frozen=True)
class UpgradeDecision:
    protocol: Optional[str] = None

    @property
    def upgrade(self) -> bool:
        return self.protocol is not None


NO_UPGRADE = UpgradeDecision()


def evaluate_upgrade(offered: Union[UpgradeTargets, Iterable[str]],
                     client_capable: Iterable[str]) -> UpgradeDecision:
    """Pick the server's most preferred protocol that the client can speak."""
    protocols = offered.protocols if isinstance(offered, UpgradeTargets) else tuple(offered)
    capable = {fold(p) for p in client_capable}
    for proto in protocols:
        if fold(proto) in capable:
            return UpgradeDecision(proto)
    return NO_UPGRADE


# --- CORS ----------------------------------------------------------------------

@dataclass(frozen=True)
class CorsFields:
    allow_origin: Optional[CorsOrigin] = None
    allow_credentials: Optional[CorsCredentials] = None
    expose_headers: Optional[ExposedHeaders] = None

    @classmethod
    def from_headers(cls, headers: Iterable[RawHeader]) -> CorsFields:
        found = {}
        for h in headers:
            parsed, _ = parse_security_header(h)
            if isinstance(parsed, (CorsOrigin, CorsCredentials, ExposedHeaders)):
                found.setdefault(type(parsed), parsed)
        return cls(found.get(CorsOrigin), found.get(CorsCredentials), found.get(ExposedHeaders))


@dataclass(frozen=True)
class CorsDecision:
    allowed: bool
    reason: str
    exposed_headers: tuple[str, ...] = field(default=())
    credentials_permitted: bool = False

    def __post_init__(self):
        if not self.allowed and (self.exposed_headers or self.credentials_permitted):
            raise ValueError("a denied response exposes nothing")


def evaluate_cors(request_origin: str, headers: Union[CorsFields, Iterable[RawHeader]]) -> CorsDecision:
    """Decide whether a response may be shared with ``request_origin``.

    Origins are compared as exact serializations.
    """
    fields = headers if isinstance(headers, CorsFields) else CorsFields.from_headers(headers)
    acao = fields.allow_origin
    credentials = bool(fields.allow_credentials and fields.allow_credentials.allowed)
    if acao is None:
        return CorsDecision(False, "no Access-Control-Allow-Origin")
    if acao.kind is OriginKind.WILDCARD:
        if credentials:
            return CorsDecision(False, "wildcard origin cannot be combined with credentials")
    elif acao.kind is OriginKind.NULL:
        if request_origin != "null":
            return CorsDecision(False, "origin mismatch: response allows null")
    elif acao.origin != request_origin:
        return CorsDecision(False, f"origin mismatch: response allows {acao.origin}")
    exposed = fields.expose_headers.names if fields.expose_headers else ()
    return CorsDecision(True, "origin allowed", exposed,
                        credentials and acao.kind is not OriginKind.WILDCARD)
