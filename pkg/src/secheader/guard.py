"""Payload handles that honour X-Allowed-Interpretation and X-Allowed-Persistence.

A :class:`GuardedBody` owns the response bytes.  They only leave the handle
through a sink call that the attached policies permit, which stands in for
whole-program taint tracking.
"""

from __future__ import annotations

import enum
import hashlib
import threading
import time
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from .catalog import ALLOWED_INTERPRETATION, ALLOWED_PERSISTENCE, fold
from .parse import (
    InterpretationMode,
    InterpretationPolicy,
    PersistencePolicy,
    RawHeader,
    parse_interpretation,
    parse_persistence,
)

DIGESTS = {
    "sha224": "sha224",
    "sha256": "sha256",
    "sha384": "sha384",
    "sha512": "sha512",
    "sha3-224": "sha3_224",
    "sha3-256": "sha3_256",
    "sha3-384": "sha3_384",
    "sha3-512": "sha3_512",
    "blake2b": "blake2b",
    "blake2s": "blake2s",
}


class SinkErrorKind(str, enum.Enum):
    INTERPRETER_DENIED = "interpreter-denied"
    PERSISTENCE_DENIED = "persistence-denied"
    HASHING_REQUIRED = "hashing-required"


class SinkError(Exception):
    def __init__(self, kind: SinkErrorKind, requested: str, policy_summary: str):
        if kind is SinkErrorKind.INTERPRETER_DENIED and not requested:
            raise ValueError("interpreter-denied needs the requested language")
        self.kind = kind
        self.requested = requested
        self.policy_summary = policy_summary
        super().__init__(f"{kind.value}: {requested!r} under policy {policy_summary}")


class UnsupportedDigestError(ValueError):
    pass


def _digest_name(algorithm: str) -> str:
    key = fold(algorithm.strip()).replace("_", "-")
    if key.startswith("sha-"):
        key = "sha" + key[4:]
    try:
        return DIGESTS[key]
    except KeyError:
        raise UnsupportedDigestError(f"unsupported digest algorithm {algorithm!r}") from None


class AuditLog:
    """Append-only record of sink decisions, one tab-separated line each."""

    def __init__(self, path: Union[str, Path, None] = None, clock: Callable[[], float] = time.time):
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self.lines: list[str] = []
        self._lock = threading.Lock()

    def record(self, origin_url: str, sink_kind: str, requested: str, allowed: bool) -> str:
        line = "\t".join((str(int(self.clock())), origin_url, sink_kind, requested,
                          "allow" if allowed else "deny"))
        with self._lock:
            self.lines.append(line)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
        return line


class GuardedBody:
    """Response bytes bound to interpretation and persistence policies."""

    __slots__ = ("_GuardedBody__payload", "_interpretation", "_persistence", "_origin_url", "_audit")

    def __init__(self, payload: bytes, interpretation: InterpretationPolicy,
                 persistence: PersistencePolicy, origin_url: str = "",
                 audit: Optional[AuditLog] = None):
        set_ = object.__setattr__
        set_(self, "_GuardedBody__payload", bytes(payload))
        set_(self, "_interpretation", interpretation)
        set_(self, "_persistence", persistence)
        set_(self, "_origin_url", origin_url)
        set_(self, "_audit", audit)

    def __setattr__(self, name, value):
        raise AttributeError("GuardedBody is immutable")

    def __delattr__(self, name):
        raise AttributeError("GuardedBody is immutable")

    def __repr__(self):
        return (f"GuardedBody({len(self.__payload)} bytes, interpretation={self._interpretation}, "
                f"persistence={self._persistence}, origin={self._origin_url!r})")

    @property
    def interpretation(self) -> InterpretationPolicy:
        return self._interpretation

    @property
    def persistence(self) -> PersistencePolicy:
        return self._persistence

    @property
    def origin_url(self) -> str:
        return self._origin_url

    def inspect_len(self) -> int:
        return len(self.__payload)

    def _log(self, sink_kind: str, requested: str, allowed: bool) -> None:
        if self._audit is not None:
            self._audit.record(self._origin_url, sink_kind, requested, allowed)

    def interpret_as(self, language: str) -> bytes:
        """Release the payload to an interpreter for ``language`` if the policy allows it."""
        if not language or not language.strip():
            raise ValueError("language must not be empty")
        allowed = self._interpretation.permits(language.strip())
        self._log("interpret", language, allowed)
        if not allowed:
            raise SinkError(SinkErrorKind.INTERPRETER_DENIED, language, str(self._interpretation))
        return self.__payload

    def persist(self, sink_label: str, write: Optional[Callable[[bytes], object]] = None) -> None:
        """Store the plain payload through ``write``; only ``any`` permits this."""
        policy = self._persistence
        allowed = policy is PersistencePolicy.ANY
        self._log("persist", sink_label, allowed)
        if policy is PersistencePolicy.ONLY_HASHED:
            raise SinkError(SinkErrorKind.HASHING_REQUIRED, sink_label, policy.value)
        if policy is PersistencePolicy.NONE:
            raise SinkError(SinkErrorKind.PERSISTENCE_DENIED, sink_label, policy.value)
        if write is not None:
            write(self.__payload)

    def persist_hashed(self, sink_label: str, digest_algorithm: str = "sha256",
                       write: Optional[Callable[[bytes], object]] = None) -> bytes:
        """Return (and optionally write) the digest of the payload."""
        name = _digest_name(digest_algorithm)
        allowed = self._persistence is not PersistencePolicy.NONE
        self._log("persist-hashed", sink_label, allowed)
        if not allowed:
            raise SinkError(SinkErrorKind.PERSISTENCE_DENIED, sink_label, self._persistence.value)
        digest = hashlib.new(name, self.__payload).digest()
        if write is not None:
            write(digest)
        return digest


def guard_body(payload: bytes, headers: Iterable[RawHeader], origin_url: str = "",
               audit: Optional[AuditLog] = None) -> GuardedBody:
    """Wrap a response body using the first X-Allowed-* header of each kind.

    A missing header places no restriction; a present but empty header is the
    most restrictive setting.
    """
    interpretation = None
    persistence = None
    for h in headers:
        if interpretation is None and h.name == ALLOWED_INTERPRETATION:
            interpretation = parse_interpretation(h.text)
        elif persistence is None and h.name == ALLOWED_PERSISTENCE:
            persistence = parse_persistence(h.text)
    return GuardedBody(
        payload,
        interpretation or InterpretationPolicy(InterpretationMode.ANY),
        persistence or PersistencePolicy.ANY,
        origin_url,
        audit,
    )


def interpret_as(g: GuardedBody, language: str) -> bytes:
    return g.interpret_as(language)


def persist(g: GuardedBody, sink_label: str, write=None) -> None:
    g.persist(sink_label, write)


def persist_hashed(g: GuardedBody, sink_label: str, digest_algorithm: str = "sha256", write=None) -> bytes:
    return g.persist_hashed(sink_label, digest_algorithm, write)
