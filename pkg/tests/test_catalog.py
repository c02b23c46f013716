import io

import pytest

from secheader.catalog import (
    BROWSERS,
    MITIGATION_FIELDS,
    SECURITY_FIELDS,
    VERSION_LEAK_FIELDS,
    ClientId,
    HeaderName,
    Purpose,
    Relevance,
    SupportLevel,
    ThreatClass,
    UnknownHeaderError,
    classify,
    client_support,
    default_catalog,
    load_catalog,
    threat_of,
    write_catalog,
)


def test_header_name_folds_ascii_case_only():
    assert HeaderName("Server") == HeaderName("sErVeR")
    assert hash(HeaderName("Server")) == hash(HeaderName("SERVER"))
    assert str(HeaderName("X-Timer")) == "X-Timer"
    assert HeaderName("X-Timer") != HeaderName("X-Timers")


@pytest.mark.parametrize("bad", ["", "Bad Name", "Colon:", "tab\t", "naïve", "(x)"])
def test_header_name_rejects_non_tokens(bad):
    with pytest.raises(ValueError):
        HeaderName(bad)


def test_enums_have_exact_variants():
    assert len(Purpose) == 8
    assert len(ThreatClass) == 4
    assert len(SupportLevel) == 3
    assert len(ClientId) == 15
    assert [s.symbol for s in SupportLevel] == ["✓", "(✓)", "✖"]


def test_classify_examples():
    server = classify("Server")
    assert (server.rank, server.purpose, server.relevance) == (3, Purpose.ADVERTISEMENT, Relevance.MAJOR)
    assert server.note == "can leak sensitive information"
    timer = classify("x-timer")
    assert (timer.rank, timer.purpose, timer.relevance) == (50, Purpose.DEBUGGING, Relevance.MINOR)
    assert classify("X-Made-Up-Field") is None
    assert classify("not a token") is None


def test_threat_of_examples():
    assert threat_of("X-Frame-Options") is ThreatClass.CLICK_JACKING
    assert threat_of("Strict-Transport-Security") is ThreatClass.DATA_LEAK
    assert threat_of("Date") is None


def test_client_support_examples():
    assert client_support(ClientId.OKHTTP, "Strict-Transport-Security") is SupportLevel.LIMITED
    assert client_support(ClientId.SOCKET, "Server") is SupportLevel.UNSUPPORTED
    assert client_support(ClientId.MOZILLA_FIREFOX, "Expect-CT") is SupportLevel.LIMITED
    assert client_support("okhttp", "strict-transport-security") is SupportLevel.LIMITED


def test_client_support_rejects_non_security_field():
    with pytest.raises(UnknownHeaderError):
        client_support(ClientId.OKHTTP, "Date")


def test_table_sizes_and_ranks():
    cat = default_catalog()
    ranks = [e.rank for e in cat]
    assert sorted(set(ranks)) == list(range(1, 51))
    # shared ranks as printed: 42 twice, 48 three times
    assert ranks.count(42) == 2 and ranks.count(48) == 3
    assert len(cat) == 53
    assert len(cat.security_entries) == 16
    assert len(cat.version_leak_entries) == 4
    assert {e.name for e in cat.security_entries} == set(SECURITY_FIELDS)
    assert {e.name for e in cat.version_leak_entries} == set(VERSION_LEAK_FIELDS)
    assert {e.name for e in cat.mitigation_entries} == set(MITIGATION_FIELDS)


def test_occurrences_non_increasing_with_rank():
    entries = default_catalog().entries
    for a, b in zip(entries, entries[1:]):
        assert a.rank <= b.rank
        assert a.occurrences >= b.occurrences
        assert (a.rank == b.rank) == (a.occurrences == b.occurrences)


def test_purpose_counts_match_text():
    counts = {}
    for e in default_catalog():
        counts[e.purpose] = counts.get(e.purpose, 0) + 1
    assert counts == {
        Purpose.PERFORMANCE_OPTIMIZATION: 16, Purpose.DEBUGGING: 14, Purpose.SECURITY: 12,
        Purpose.ADVERTISEMENT: 4, Purpose.DATA_PRESENTATION: 4, Purpose.COOKIE_MANAGEMENT: 1,
        Purpose.CONTENT_REDIRECTION: 1, Purpose.PRIVACY: 1,
    }


def test_security_counts_bounds():
    for e in default_catalog().security_entries:
        c = e.security_counts
        assert c.open + c.closed == c.total
        assert c.open <= 1230 and c.closed <= 8486 and c.total <= 9714
        assert e.occurrences == c.total


def test_support_matrix_complete():
    matrix = default_catalog().support_matrix()
    assert len(matrix) == 15 * 16
    for client in ClientId:
        for name in SECURITY_FIELDS:
            assert (client, name.key) in matrix


def test_browser_unsupported_cells_are_the_printed_exceptions():
    cells = {(c, k) for (c, k), level in default_catalog().support_matrix().items()
             if c in BROWSERS and level is SupportLevel.UNSUPPORTED}
    expected = {(c, "x-xss-protection") for c in BROWSERS} | {(ClientId.ANDROID_WEBVIEW, "expect-ct")}
    assert cells == expected


def test_round_trip_through_csv(tmp_path):
    buf = io.StringIO()
    write_catalog(default_catalog(), buf)
    path = tmp_path / "catalog.csv"
    path.write_text(buf.getvalue(), encoding="utf-8")
    again = load_catalog(path)
    assert again.entries == default_catalog().entries


def test_custom_catalog_path(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text(
        "rank,occurrences,name,purpose,relevance,note,threat,total,open,closed,total_pct,open_pct,closed_pct\n"
        "1,5,X-Custom,debugging,Minor,test,,,,,,,\n", encoding="utf-8")
    cat = load_catalog(path)
    assert cat.classify("x-custom").occurrences == 5
    assert cat.classify("Server") is None


def test_catalog_rejects_inconsistent_counts(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text(
        "rank,occurrences,name,purpose,relevance,note,threat,total,open,closed,total_pct,open_pct,closed_pct\n"
        "1,5,Server,advertisement,Major,x,version-leak,5,1,1,1,1,1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_catalog(path)
