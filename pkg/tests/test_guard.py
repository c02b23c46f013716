import hashlib
import inspect

import pytest
from hypothesis import given, strategies as st

from secheader import guard
from secheader.guard import (
    AuditLog,
    GuardedBody,
    SinkError,
    SinkErrorKind,
    UnsupportedDigestError,
    guard_body,
    interpret_as,
    persist,
    persist_hashed,
)
from secheader.parse import InterpretationPolicy, PersistencePolicy, RawHeader

PAYLOAD = b'{"user": "alice", "password": "hunter2"}'

# Listing 2 configurations and the sinks each one accepts
INTERPRETATION_MATRIX = {
    "any": {"SQL": True, "JavaScript": True, "JavaSwing": True},
    "none": {"SQL": False, "JavaScript": False, "JavaSwing": False},
    "JavaScript": {"SQL": False, "JavaScript": True, "JavaSwing": False},
    "JavaSwing,JavaScript": {"SQL": False, "JavaScript": True, "JavaSwing": True},
}

# Listing 3 configurations: persist, persist_hashed
PERSISTENCE_MATRIX = {
    "any": (True, True),
    "only-hashed": (False, True),
    "none": (False, False),
}


def body(interp=None, persist_value=None, audit=None):
    headers = []
    if interp is not None:
        headers.append(RawHeader("X-Allowed-Interpretation", interp))
    if persist_value is not None:
        headers.append(RawHeader("X-Allowed-Persistence", persist_value))
    return guard_body(PAYLOAD, headers, "http://api.example/x", audit)


@pytest.mark.parametrize("config", list(INTERPRETATION_MATRIX))
@pytest.mark.parametrize("sink", ["SQL", "JavaScript", "JavaSwing"])
def test_interpretation_matrix(config, sink):
    g = body(interp=config)
    if INTERPRETATION_MATRIX[config][sink]:
        assert interpret_as(g, sink) == PAYLOAD
    else:
        with pytest.raises(SinkError) as err:
            interpret_as(g, sink)
        assert err.value.kind is SinkErrorKind.INTERPRETER_DENIED
        assert err.value.requested == sink


@pytest.mark.parametrize("config", list(PERSISTENCE_MATRIX))
def test_persistence_matrix(config):
    g = body(persist_value=config)
    plain_ok, hashed_ok = PERSISTENCE_MATRIX[config]
    written = []
    if plain_ok:
        persist(g, "db", written.append)
        assert written == [PAYLOAD]
    else:
        with pytest.raises(SinkError) as err:
            persist(g, "db", written.append)
        expected = SinkErrorKind.HASHING_REQUIRED if config == "only-hashed" else SinkErrorKind.PERSISTENCE_DENIED
        assert err.value.kind is expected
        assert written == []
    if hashed_ok:
        assert persist_hashed(g, "db") == hashlib.sha256(PAYLOAD).digest()
    else:
        with pytest.raises(SinkError) as err:
            persist_hashed(g, "db")
        assert err.value.kind is SinkErrorKind.PERSISTENCE_DENIED


def test_absent_headers_place_no_restriction():
    g = body()
    assert interpret_as(g, "SQL") == PAYLOAD
    persist(g, "db")


def test_empty_headers_are_most_restrictive():
    g = body(interp="", persist_value="")
    with pytest.raises(SinkError):
        interpret_as(g, "JavaScript")
    with pytest.raises(SinkError):
        persist_hashed(g, "db")


def test_first_header_wins():
    g = guard_body(PAYLOAD, [RawHeader("x-allowed-persistence", "none"),
                             RawHeader("X-Allowed-Persistence", "any")])
    assert g.persistence is PersistencePolicy.NONE


INTERP_ORDER = ["none", "JavaScript", "JavaSwing,JavaScript", "any"]
PERSIST_ORDER = ["none", "only-hashed", "any"]
languages = st.sampled_from(["SQL", "sql", "JavaScript", "javascript", "JavaSwing", "Python"])


@given(languages)
def test_interpretation_lattice_monotone(lang):
    outcomes = []
    for config in INTERP_ORDER:
        try:
            interpret_as(body(interp=config), lang)
            outcomes.append(True)
        except SinkError:
            outcomes.append(False)
    # once permitted, every weaker policy permits too
    assert outcomes == sorted(outcomes)


def test_persistence_lattice_monotone():
    for sink in ("persist", "persist_hashed"):
        outcomes = []
        for config in PERSIST_ORDER:
            try:
                getattr(guard, sink)(body(persist_value=config), "db")
                outcomes.append(True)
            except SinkError:
                outcomes.append(False)
        assert outcomes == sorted(outcomes)


@given(st.sampled_from(INTERP_ORDER), st.sampled_from(["SQL", "JavaScript", "JavaSwing"]))
def test_case_insensitive_and_deterministic(config, lang):
    def outcome(name):
        try:
            interpret_as(body(interp=config), name)
            return True
        except SinkError:
            return False
    first = outcome(lang)
    assert first == outcome(lang.lower()) == outcome(lang.upper()) == outcome(lang)


def test_no_bypass_public_surface():
    public = {n for n in dir(GuardedBody) if not n.startswith("_")}
    assert public == {"interpretation", "persistence", "origin_url", "inspect_len",
                      "interpret_as", "persist", "persist_hashed"}
    g = body()
    for name in public:
        attr = getattr(g, name)
        assert not isinstance(attr, (bytes, bytearray, memoryview))
    assert g.inspect_len() == len(PAYLOAD)
    # persist returns nothing; the payload only reaches the supplied writer
    assert persist(g, "db") is None
    assert PAYLOAD.decode() not in repr(g)
    module_public = {n for n, f in inspect.getmembers(guard, inspect.isfunction)
                     if not n.startswith("_") and f.__module__ == guard.__name__}
    assert module_public == {"guard_body", "interpret_as", "persist", "persist_hashed"}


def test_immutable():
    g = body()
    with pytest.raises(AttributeError):
        g._persistence = PersistencePolicy.ANY
    with pytest.raises(AttributeError):
        g.payload = b"x"
    with pytest.raises(AttributeError):
        del g._interpretation


def test_digests():
    g = body(persist_value="only-hashed")
    assert persist_hashed(g, "db", "SHA-512") == hashlib.sha512(PAYLOAD).digest()
    assert persist_hashed(g, "db", "sha3_256") == hashlib.sha3_256(PAYLOAD).digest()
    for bad in ("md5", "sha1", "crc32", ""):
        with pytest.raises(UnsupportedDigestError):
            persist_hashed(g, "db", bad)


def test_empty_language_rejected():
    with pytest.raises(ValueError):
        interpret_as(body(), " ")


def test_audit_log(tmp_path):
    path = tmp_path / "audit.tsv"
    log = AuditLog(path, clock=lambda: 1571046256)
    g = body(interp="JavaScript", persist_value="only-hashed", audit=log)
    interpret_as(g, "JavaScript")
    with pytest.raises(SinkError):
        interpret_as(g, "SQL")
    with pytest.raises(SinkError):
        persist(g, "cache")
    persist_hashed(g, "cache")
    assert path.read_text().splitlines() == [
        "1571046256\thttp://api.example/x\tinterpret\tJavaScript\tallow",
        "1571046256\thttp://api.example/x\tinterpret\tSQL\tdeny",
        "1571046256\thttp://api.example/x\tpersist\tcache\tdeny",
        "1571046256\thttp://api.example/x\tpersist-hashed\tcache\tallow",
    ]
    assert log.lines == path.read_text().splitlines()


def test_direct_construction():
    g = GuardedBody(b"abc", InterpretationPolicy.allow("sql"), PersistencePolicy.ANY)
    assert g.interpret_as("SQL") == b"abc"
    assert g.inspect_len() == 3
