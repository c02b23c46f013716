"""Parsers for the security-related response header fields.

Every parser is lenient: it always returns a value and reports problems as a
list of :class:`ParseIssue`.  Enforcement code decides how severe they are.

Each parsed value has a canonical text form (:func:`render_value`) such that
parsing the canonical text gives back an equal value.  Canonical forms:

* HSTS: ``max-age=N`` followed by ``; includeSubDomains`` and ``; preload``
* Expect-CT: ``max-age=N``, ``enforce``, ``report-uri="..."`` joined by ``, ``
* comma lists (Upgrade, Access-Control-Expose-Headers, Timing-Allow-Origin,
  X-Allowed-Interpretation): items joined by ``, ``; language names lower-cased
  and sorted
* CSP: ``name src src; name src``
* X-XSS-Protection: ``0``, ``1`` or ``1; mode=block``, plus ``; report=URI``
* everything else: the single token, as the field's registry spells it
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional, Union
from urllib.parse import urlsplit

from .catalog import (
    ALLOWED_INTERPRETATION,
    ALLOWED_PERSISTENCE,
    VERSION_LEAK_FIELDS,
    HeaderName,
    NameLike,
    UnknownHeaderError,
    fold,
    is_token,
)

HSTS_MAX_AGE_CAP = 2**31 - 1


class IssueKind(str, enum.Enum):
    MALFORMED = "malformed"
    UNKNOWN_TOKEN = "unknown-token"
    EMPTY_VALUE = "empty-value"
    DUPLICATE_DIRECTIVE = "duplicate-directive"


@dataclass(frozen=True)
class ParseIssue:
    field: HeaderName
    kind: IssueKind
    detail: str

    def __post_init__(self):
        if not self.detail:
            raise ValueError("issue detail must not be empty")

    def __str__(self) -> str:
        return f"{self.field}: {self.kind.value}: {self.detail}"


@dataclass(frozen=True)
class RawHeader:
    """One header line as received.  ``value`` keeps the exact octets."""

    name: HeaderName
    value: bytes

    def __init__(self, name: NameLike, value: Union[bytes, str]):
        object.__setattr__(self, "name", HeaderName.of(name))
        if isinstance(value, str):
            value = value.encode("latin-1")
        object.__setattr__(self, "value", bytes(value))

    @property
    def text(self) -> str:
        return self.value.decode("latin-1")


# --- parsed value types -----------------------------------------------------

@dataclass(frozen=True)
class HstsDirectives:
    max_age: int = 0
    include_subdomains: bool = False
    preload: bool = False


class InterpretationMode(str, enum.Enum):
    ANY = "any"
    NONE = "none"
    ALLOW = "allow"


@dataclass(frozen=True)
class InterpretationPolicy:
    mode: InterpretationMode
    languages: frozenset = frozenset()

    def __post_init__(self):
        langs = frozenset(fold(l) for l in self.languages)
        if self.mode is InterpretationMode.ALLOW:
            if not langs or not all(is_token(l) for l in langs):
                raise ValueError("Allow needs a non-empty set of language tokens")
        elif langs:
            raise ValueError(f"{self.mode.value} takes no languages")
        object.__setattr__(self, "languages", langs)

    @classmethod
    def any(cls) -> InterpretationPolicy:
        return cls(InterpretationMode.ANY)

    @classmethod
    def none(cls) -> InterpretationPolicy:
        return cls(InterpretationMode.NONE)

    @classmethod
    def allow(cls, *languages: str) -> InterpretationPolicy:
        return cls(InterpretationMode.ALLOW, frozenset(languages))

    def permits(self, language: str) -> bool:
        if self.mode is InterpretationMode.ANY:
            return True
        if self.mode is InterpretationMode.NONE:
            return False
        return fold(language) in self.languages

    def __str__(self) -> str:
        if self.mode is InterpretationMode.ALLOW:
            return ", ".join(sorted(self.languages))
        return self.mode.value


class PersistencePolicy(str, enum.Enum):
    ANY = "any"
    ONLY_HASHED = "only-hashed"
    NONE = "none"

    def __str__(self) -> str:
        return self.value


class FrameMode(str, enum.Enum):
    DENY = "DENY"
    SAMEORIGIN = "SAMEORIGIN"
    ALLOW_FROM = "ALLOW-FROM"


@dataclass(frozen=True)
class FrameOptions:
    mode: FrameMode
    origin: Optional[str] = None


@dataclass(frozen=True)
class VersionLeak:
    header: HeaderName
    product: str
    version: Optional[str] = None
    comment: Optional[str] = None

    def __post_init__(self):
        if not self.product:
            raise ValueError("product must not be empty")

    def __str__(self) -> str:
        text = self.product if self.version is None else f"{self.product}/{self.version}"
        return text if self.comment is None else f"{text} ({self.comment})"


@dataclass(frozen=True)
class ContentTypeOptions:
    nosniff: bool


class XssMode(str, enum.Enum):
    OFF = "off"
    ON = "on"
    BLOCK = "block"


@dataclass(frozen=True)
class XssProtection:
    mode: XssMode
    report: Optional[str] = None


class OriginKind(str, enum.Enum):
    WILDCARD = "wildcard"
    NULL = "null"
    ORIGIN = "origin"


@dataclass(frozen=True)
class CorsOrigin:
    kind: OriginKind
    origin: Optional[str] = None


@dataclass(frozen=True)
class CorsCredentials:
    allowed: bool


@dataclass(frozen=True)
class ExposedHeaders:
    names: tuple[str, ...]


@dataclass(frozen=True)
class CspPolicy:
    directives: tuple[tuple[str, tuple[str, ...]], ...]

    def get(self, name: str) -> Optional[tuple[str, ...]]:
        for key, sources in self.directives:
            if key == fold(name):
                return sources
        return None


@dataclass(frozen=True)
class ExpectCt:
    max_age: int
    enforce: bool = False
    report_uri: Optional[str] = None


REFERRER_POLICIES = (
    "no-referrer",
    "no-referrer-when-downgrade",
    "same-origin",
    "origin",
    "strict-origin",
    "origin-when-cross-origin",
    "strict-origin-when-cross-origin",
    "unsafe-url",
)


@dataclass(frozen=True)
class ReferrerPolicy:
    policy: Optional[str]


@dataclass(frozen=True)
class TimingAllowOrigin:
    wildcard: bool
    origins: tuple[str, ...] = ()


@dataclass(frozen=True)
class UpgradeTargets:
    protocols: tuple[str, ...]


ParsedSecurityHeader = Union[
    HstsDirectives, InterpretationPolicy, PersistencePolicy, FrameOptions,
    VersionLeak, ContentTypeOptions, XssProtection, CorsOrigin, CorsCredentials,
    ExposedHeaders, CspPolicy, ExpectCt, ReferrerPolicy, TimingAllowOrigin,
    UpgradeTargets,
]


# --- helpers ----------------------------------------------------------------

class _Issues(list):
    def __init__(self, name: HeaderName):
        super().__init__()
        self.name = name

    def add(self, kind: IssueKind, detail: str) -> None:
        self.append(ParseIssue(self.name, kind, detail))


def _split_list(value: str, issues: _Issues) -> list[str]:
    items = [p.strip() for p in value.split(",")]
    if any(not p for p in items) and value.strip():
        issues.add(IssueKind.MALFORMED, "empty list element dropped")
    return [p for p in items if p]


def _unquote(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return re.sub(r"\\(.)", r"\1", text[1:-1])
    return text


def _split_directive(part: str) -> tuple[str, Optional[str]]:
    name, sep, val = part.partition("=")
    return fold(name.strip()), (_unquote(val.strip()) if sep else None)


def _parse_seconds(raw: Optional[str], issues: _Issues, directive: str) -> int:
    if raw is None or not raw.isdigit() or not raw.isascii():
        issues.add(IssueKind.MALFORMED, f"{directive} needs a non-negative integer, got {raw!r}")
        return 0
    seconds = int(raw)
    if seconds > HSTS_MAX_AGE_CAP:
        issues.add(IssueKind.MALFORMED, f"{directive} {seconds} clamped to {HSTS_MAX_AGE_CAP}")
        return HSTS_MAX_AGE_CAP
    return seconds


def _is_origin(text: str) -> bool:
    try:
        parts = urlsplit(text)
        parts.port
    except ValueError:
        return False
    return bool(parts.scheme and parts.hostname) and parts.path in ("", "/") \
        and not parts.query and not parts.fragment


def _is_absolute(text: str) -> bool:
    if not text or any(c.isspace() for c in text):
        return False
    try:
        parts = urlsplit(text)
        return bool(parts.scheme and parts.hostname)
    except ValueError:
        return False


# --- per-field parsers ------------------------------------------------------

_HSTS = HeaderName("Strict-Transport-Security")


def _hsts(value: str, issues: _Issues) -> HstsDirectives:
    seen: dict[str, Optional[str]] = {}
    for part in value.split(";"):
        if not part.strip():
            continue
        name, val = _split_directive(part)
        if name in seen:
            issues.add(IssueKind.DUPLICATE_DIRECTIVE, f"{name} repeated, first value kept")
            continue
        if name not in ("max-age", "includesubdomains", "preload"):
            issues.add(IssueKind.UNKNOWN_TOKEN, f"directive {name!r} ignored")
            continue
        if name != "max-age" and val is not None:
            issues.add(IssueKind.MALFORMED, f"{name} takes no value")
        seen[name] = val
    if not value.strip():
        issues.add(IssueKind.EMPTY_VALUE, "no directives")
    if "max-age" in seen:
        max_age = _parse_seconds(seen["max-age"], issues, "max-age")
    else:
        if value.strip():
            issues.add(IssueKind.MALFORMED, "missing max-age")
        max_age = 0
    return HstsDirectives(max_age, "includesubdomains" in seen, "preload" in seen)


def parse_hsts(value: str) -> tuple[HstsDirectives, list[ParseIssue]]:
    """Parse a Strict-Transport-Security value.  First occurrence of a directive wins."""
    issues = _Issues(_HSTS)
    return _hsts(value, issues), list(issues)


def _interpretation(value: str, issues: _Issues) -> InterpretationPolicy:
    tokens = []
    for item in _split_list(value, issues):
        if not is_token(item):
            issues.add(IssueKind.MALFORMED, f"{item!r} is not a language token")
            continue
        tokens.append(fold(item))
    if not tokens:
        # an empty value admits no interpreter at all
        return InterpretationPolicy.none()
    if "none" in tokens:
        if len(tokens) > 1:
            issues.add(IssueKind.MALFORMED, "'none' combined with other values")
        return InterpretationPolicy.none()
    languages = [t for t in tokens if t != "any"]
    if not languages:
        return InterpretationPolicy.any()
    if len(languages) != len(tokens):
        issues.add(IssueKind.MALFORMED, "'any' combined with language names is ignored")
    return InterpretationPolicy(InterpretationMode.ALLOW, frozenset(languages))


def parse_interpretation(value: str) -> InterpretationPolicy:
    return _interpretation(value, _Issues(ALLOWED_INTERPRETATION))


def _persistence(value: str, issues: _Issues) -> PersistencePolicy:
    token = fold(value.strip())
    if not token:
        return PersistencePolicy.NONE
    try:
        return PersistencePolicy(token)
    except ValueError:
        issues.add(IssueKind.UNKNOWN_TOKEN, f"{value.strip()!r}; treated as none")
        return PersistencePolicy.NONE


def parse_persistence(value: str) -> PersistencePolicy:
    return _persistence(value, _Issues(ALLOWED_PERSISTENCE))


_XFO = HeaderName("X-Frame-Options")


def _frame_options(value: str, issues: _Issues) -> FrameOptions:
    text = value.strip()
    head, _, rest = text.partition(" ")
    token = fold(head)
    if token == "deny" and not rest.strip():
        return FrameOptions(FrameMode.DENY)
    if token == "sameorigin" and not rest.strip():
        return FrameOptions(FrameMode.SAMEORIGIN)
    if token == "allow-from":
        origin = rest.strip()
        if _is_absolute(origin):
            return FrameOptions(FrameMode.ALLOW_FROM, origin)
        issues.add(IssueKind.MALFORMED, f"ALLOW-FROM needs an absolute URI, got {origin!r}")
        return FrameOptions(FrameMode.DENY)
    if not text:
        issues.add(IssueKind.EMPTY_VALUE, "treated as DENY")
    else:
        issues.add(IssueKind.UNKNOWN_TOKEN, f"{text!r}; treated as DENY")
    return FrameOptions(FrameMode.DENY)


def parse_frame_options(value: str) -> tuple[FrameOptions, list[ParseIssue]]:
    issues = _Issues(_XFO)
    return _frame_options(value, issues), list(issues)


_VERSION_LEAK_KEYS = {h.key: h for h in VERSION_LEAK_FIELDS}
_ASPNET = HeaderName("X-AspNet-Version")
_PRODUCT_RE = re.compile(r"\s*([^\s/()]+)(?:/(\S*?))?(?=[\s(]|$)")


def extract_version_leak(name: NameLike, value: str) -> VersionLeak:
    """Split a product banner such as ``nginx/1.15.9 (Ubuntu)``.

    X-AspNet-Version carries only the version number.
    """
    header = HeaderName.of(name)
    if header.key not in _VERSION_LEAK_KEYS:
        raise UnknownHeaderError(f"{header} is not a version-leaking header field")
    text = value.strip()
    comment = None
    m = re.search(r"\(([^)]*)\)", text)
    if m:
        comment = m.group(1).strip() or None
        before = text[:m.start()]
    else:
        before = text
    if header.key == _ASPNET.key:
        version = before.split()[0] if before.split() else None
        return VersionLeak(header, "ASP.NET", version, comment)
    pm = _PRODUCT_RE.match(before)
    if not pm:
        return VersionLeak(header, text or "unknown", None, comment if text else None)
    return VersionLeak(header, pm.group(1), pm.group(2) or None, comment)


def _version_leak(name: HeaderName, value: str, issues: _Issues) -> VersionLeak:
    if not value.strip():
        issues.add(IssueKind.EMPTY_VALUE, "no product")
    return extract_version_leak(name, value)


def _nosniff(value: str, issues: _Issues) -> ContentTypeOptions:
    token = fold(value.split(",")[0].strip())
    if token == "nosniff":
        return ContentTypeOptions(True)
    issues.add(IssueKind.EMPTY_VALUE if not token else IssueKind.UNKNOWN_TOKEN,
               f"expected nosniff, got {value.strip()!r}")
    return ContentTypeOptions(False)


def _xss(value: str, issues: _Issues) -> XssProtection:
    parts = [p.strip() for p in value.split(";")]
    head = parts[0]
    if head == "0":
        mode = XssMode.OFF
    elif head == "1":
        mode = XssMode.ON
    else:
        issues.add(IssueKind.EMPTY_VALUE if not head else IssueKind.UNKNOWN_TOKEN,
                   f"expected 0 or 1, got {head!r}; treated as off")
        return XssProtection(XssMode.OFF)
    report = None
    for part in parts[1:]:
        if not part:
            continue
        name, val = _split_directive(part)
        if name == "mode" and val is not None and fold(val) == "block":
            if mode is XssMode.ON:
                mode = XssMode.BLOCK
        elif name == "report" and val:
            report = report or val
        else:
            issues.add(IssueKind.UNKNOWN_TOKEN, f"directive {part!r} ignored")
    return XssProtection(mode, report)


def _acao(value: str, issues: _Issues) -> CorsOrigin:
    text = value.strip()
    if text == "*":
        return CorsOrigin(OriginKind.WILDCARD)
    if fold(text) == "null":
        return CorsOrigin(OriginKind.NULL)
    if not text:
        issues.add(IssueKind.EMPTY_VALUE, "no origin")
    elif "," in text or " " in text:
        issues.add(IssueKind.MALFORMED, "only a single origin is allowed")
    elif not _is_origin(text):
        issues.add(IssueKind.MALFORMED, f"{text!r} is not a serialized origin")
    return CorsOrigin(OriginKind.ORIGIN, text)


def _acac(value: str, issues: _Issues) -> CorsCredentials:
    if fold(value.strip()) == "true":
        return CorsCredentials(True)
    issues.add(IssueKind.UNKNOWN_TOKEN, f"only 'true' is meaningful, got {value.strip()!r}")
    return CorsCredentials(False)


def _aceh(value: str, issues: _Issues) -> ExposedHeaders:
    names = []
    for item in _split_list(value, issues):
        if item != "*" and not is_token(item):
            issues.add(IssueKind.MALFORMED, f"{item!r} is not a header name")
            continue
        names.append(item)
    if not value.strip():
        issues.add(IssueKind.EMPTY_VALUE, "no header names")
    return ExposedHeaders(tuple(names))


def _csp(value: str, issues: _Issues) -> CspPolicy:
    directives: dict[str, tuple[str, ...]] = {}
    for part in value.split(";"):
        tokens = part.split()
        if not tokens:
            continue
        name = fold(tokens[0])
        if name in directives:
            issues.add(IssueKind.DUPLICATE_DIRECTIVE, f"{name} repeated, first kept")
            continue
        directives[name] = tuple(tokens[1:])
    if not directives:
        issues.add(IssueKind.EMPTY_VALUE, "no directives")
    return CspPolicy(tuple(directives.items()))


def _expect_ct(value: str, issues: _Issues) -> ExpectCt:
    seen: dict[str, Optional[str]] = {}
    for part in _split_list(value, issues):
        name, val = _split_directive(part)
        if name in seen:
            issues.add(IssueKind.DUPLICATE_DIRECTIVE, f"{name} repeated, first kept")
        elif name in ("max-age", "enforce", "report-uri"):
            seen[name] = val
        else:
            issues.add(IssueKind.UNKNOWN_TOKEN, f"directive {name!r} ignored")
    if not value.strip():
        issues.add(IssueKind.EMPTY_VALUE, "no directives")
    if "max-age" in seen:
        max_age = _parse_seconds(seen["max-age"], issues, "max-age")
    else:
        if value.strip():
            issues.add(IssueKind.MALFORMED, "missing max-age")
        max_age = 0
    return ExpectCt(max_age, "enforce" in seen, seen.get("report-uri") or None)


def _referrer(value: str, issues: _Issues) -> ReferrerPolicy:
    # the last recognised token wins
    policy = None
    for item in _split_list(value, issues):
        token = fold(item)
        if token in REFERRER_POLICIES:
            policy = token
        else:
            issues.add(IssueKind.UNKNOWN_TOKEN, f"{item!r} is not a referrer policy")
    if not value.strip():
        issues.add(IssueKind.EMPTY_VALUE, "no policy")
    return ReferrerPolicy(policy)


def _tao(value: str, issues: _Issues) -> TimingAllowOrigin:
    items = _split_list(value, issues)
    if not items:
        issues.add(IssueKind.EMPTY_VALUE, "no origins")
    if "*" in items:
        return TimingAllowOrigin(True)
    return TimingAllowOrigin(False, tuple(items))


def _upgrade(value: str, issues: _Issues) -> UpgradeTargets:
    protocols = []
    for item in _split_list(value, issues):
        name, slash, version = item.partition("/")
        if not is_token(name) or (slash and not is_token(version)):
            issues.add(IssueKind.MALFORMED, f"{item!r} is not a protocol token")
            continue
        protocols.append(item)
    if not value.strip():
        issues.add(IssueKind.EMPTY_VALUE, "no protocols")
    return UpgradeTargets(tuple(protocols))


_DISPATCH = {
    "strict-transport-security": _hsts,
    "x-frame-options": _frame_options,
    "x-content-type-options": _nosniff,
    "x-xss-protection": _xss,
    "access-control-allow-origin": _acao,
    "access-control-allow-credentials": _acac,
    "access-control-expose-headers": _aceh,
    "content-security-policy": _csp,
    "expect-ct": _expect_ct,
    "referrer-policy": _referrer,
    "timing-allow-origin": _tao,
    "upgrade": _upgrade,
    ALLOWED_INTERPRETATION.key: _interpretation,
    ALLOWED_PERSISTENCE.key: _persistence,
}

PARSED_FIELDS = frozenset(_DISPATCH) | frozenset(_VERSION_LEAK_KEYS)


def parse_security_header(h: RawHeader) -> tuple[Optional[ParsedSecurityHeader], list[ParseIssue]]:
    """Parse one header line.  Fields without a parser give ``(None, [])``."""
    key = h.name.key
    issues = _Issues(h.name)
    text = h.text
    if any(not (c == "\t" or " " <= c <= "~") for c in text):
        issues.add(IssueKind.MALFORMED, "value contains non-visible octets")
    if key in _VERSION_LEAK_KEYS:
        parsed = _version_leak(h.name, text, issues)
    elif key in _DISPATCH:
        parsed = _DISPATCH[key](text, issues)
    else:
        return None, []
    return parsed, list(issues)


@dataclass
class ParsedHeaders:
    """All security fields of one response.  The first occurrence of a field sets policy."""

    values: dict[str, ParsedSecurityHeader] = field(default_factory=dict)
    occurrences: dict[str, list[ParsedSecurityHeader]] = field(default_factory=dict)
    issues: list[ParseIssue] = field(default_factory=list)

    def get(self, name: NameLike) -> Optional[ParsedSecurityHeader]:
        return self.values.get(HeaderName.of(name).key)


def parse_headers(headers) -> ParsedHeaders:
    result = ParsedHeaders()
    for h in headers:
        parsed, issues = parse_security_header(h)
        result.issues.extend(issues)
        if parsed is None:
            continue
        result.values.setdefault(h.name.key, parsed)
        result.occurrences.setdefault(h.name.key, []).append(parsed)
    return result


def render_value(parsed: ParsedSecurityHeader) -> str:
    """Canonical header value for a parsed field (see module docstring)."""
    if isinstance(parsed, HstsDirectives):
        parts = [f"max-age={parsed.max_age}"]
        if parsed.include_subdomains:
            parts.append("includeSubDomains")
        if parsed.preload:
            parts.append("preload")
        return "; ".join(parts)
    if isinstance(parsed, InterpretationPolicy):
        return str(parsed)
    if isinstance(parsed, PersistencePolicy):
        return parsed.value
    if isinstance(parsed, FrameOptions):
        if parsed.mode is FrameMode.ALLOW_FROM:
            return f"ALLOW-FROM {parsed.origin}"
        return parsed.mode.value
    if isinstance(parsed, VersionLeak):
        if parsed.header.key == _ASPNET.key:
            text = parsed.version or ""
            return text if parsed.comment is None else f"{text} ({parsed.comment})"
        return str(parsed)
    if isinstance(parsed, ContentTypeOptions):
        return "nosniff" if parsed.nosniff else ""
    if isinstance(parsed, XssProtection):
        text = {XssMode.OFF: "0", XssMode.ON: "1", XssMode.BLOCK: "1; mode=block"}[parsed.mode]
        return text if parsed.report is None else f"{text}; report={parsed.report}"
    if isinstance(parsed, CorsOrigin):
        return {OriginKind.WILDCARD: "*", OriginKind.NULL: "null"}.get(parsed.kind, parsed.origin)
    if isinstance(parsed, CorsCredentials):
        return "true" if parsed.allowed else "false"
    if isinstance(parsed, ExposedHeaders):
        return ", ".join(parsed.names)
    if isinstance(parsed, CspPolicy):
        return "; ".join(" ".join((name,) + sources) for name, sources in parsed.directives)
    if isinstance(parsed, ExpectCt):
        parts = [f"max-age={parsed.max_age}"]
        if parsed.enforce:
            parts.append("enforce")
        if parsed.report_uri:
            parts.append(f'report-uri="{parsed.report_uri}"')
        return ", ".join(parts)
    if isinstance(parsed, ReferrerPolicy):
        return parsed.policy or ""
    if isinstance(parsed, TimingAllowOrigin):
        return "*" if parsed.wildcard else ", ".join(parsed.origins)
    if isinstance(parsed, UpgradeTargets):
        return ", ".join(parsed.protocols)
    raise TypeError(f"not a parsed security header: {parsed!r}")
