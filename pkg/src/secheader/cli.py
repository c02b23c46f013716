"""Command-line entry point: ``secheader {scan,audit,report,hsts,fixture}``.

Exit codes: 0 success, 1 strict-mode policy violation, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from urllib.parse import urlsplit

from . import __version__
from .catalog import HeaderName, load_catalog
from .parse import HstsDirectives, IssueKind, parse_security_header
from .policy import HstsStore, LeakMode, VersionLeakError, default_store_path
from .report import (
    EXTENSIONS,
    FORMATS,
    MissingFieldError,
    corpus_findings,
    findings,
    non_adoption_average,
    prevalence,
    render,
    security_prevalence,
)
from .scanner import (
    DEFAULT_USER_AGENT,
    EmptyUrlListError,
    Group,
    ProbeConfig,
    UrlEntry,
    is_http_url,
    load_url_list,
    probe,
    read_corpus,
    scan,
    write_corpus,
    write_dump_dir,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("secheader")
_HSTS = HeaderName("Strict-Transport-Security")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return value


def _add_probe_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--timeout", type=_positive_float, default=30.0, help="seconds per URL (default 30)")
    p.add_argument("--user-agent", default=DEFAULT_USER_AGENT)
    p.add_argument("--follow-redirects", action="store_true", help="follow 3xx responses")
    p.add_argument("--max-redirects", type=_non_negative_int, default=5)
    p.add_argument("--insecure", action="store_true", help="skip TLS certificate verification")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secheader", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--catalog", type=Path, help="catalog CSV to use instead of the bundled one")
    parser.add_argument("--clock-epoch", type=float, help="fixed clock value (epoch seconds) for reproducible output")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="probe every URL of a group,url list")
    p.add_argument("urls", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True, help="corpus output (JSON Lines)")
    p.add_argument("--concurrency", type=_positive_int, default=8, help="requests in flight (default 8)")
    p.add_argument("--dump-dir", type=Path, help="also write one file per URL here")
    _add_probe_flags(p)

    p = sub.add_parser("audit", help="probe one URL and assess its security headers")
    p.add_argument("url")
    p.add_argument("--strict", action="store_true", help="exit 1 if a version-leaking field is present")
    p.add_argument("--hsts-store", type=Path, help="HSTS store file (default: $SECHEADER_HSTS_STORE or per-user file)")
    p.add_argument("--no-hsts", action="store_true", help="neither consult nor update the HSTS store")
    _add_probe_flags(p)

    p = sub.add_parser("report", help="tables, findings and figures from a corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("--format", default="all", choices=(*FORMATS, "md", "all"))
    p.add_argument("-o", "--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("hsts", help="inspect or maintain the HSTS store")
    p.add_argument("--hsts-store", type=Path)
    hs = p.add_subparsers(dest="hsts_command", required=True)
    hs.add_parser("list")
    hp = hs.add_parser("import", help="import host[,includeSubDomains] lines")
    hp.add_argument("preload", type=Path)
    hp.add_argument("--max-age", type=_positive_int, default=31536000)
    hs.add_parser("purge", help="drop expired entries")
    hp = hs.add_parser("rewrite", help="show how a URL would be rewritten")
    hp.add_argument("url")

    p = sub.add_parser("fixture", help="serve canned responses from a JSON config")
    p.add_argument("config", type=Path)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--tls-cert", type=Path)
    p.add_argument("--tls-key", type=Path)
    return parser


def _clock(args):
    if args.clock_epoch is not None:
        epoch = args.clock_epoch
        return lambda: epoch
    return time.time


def _probe_config(args, concurrency: int = 1) -> ProbeConfig:
    return ProbeConfig(
        timeout=args.timeout,
        max_concurrency=concurrency,
        user_agent=args.user_agent,
        follow_redirects=args.follow_redirects,
        max_redirects=args.max_redirects,
        tls_verify=not args.insecure,
        clock=_clock(args),
    )


def run_scan(args) -> int:
    diagnostics: list[str] = []
    try:
        entries = load_url_list(args.urls, diagnostics)
    except EmptyUrlListError as exc:
        print(f"secheader: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, UnicodeDecodeError) as exc:
        print(f"secheader: cannot read {args.urls}: {exc}", file=sys.stderr)
        return EXIT_IO
    for line in diagnostics:
        print(f"skipped {line}", file=sys.stderr)
    corpus = scan(entries, _probe_config(args, args.concurrency))
    try:
        write_corpus(corpus, args.out)
        if args.dump_dir:
            write_dump_dir(corpus, args.dump_dir)
    except OSError as exc:
        print(f"secheader: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    n = len(corpus)
    print(f"scanned {n} urls, {corpus.responses} responses, {n - corpus.responses} empty")
    return EXIT_OK


def _store(args) -> HstsStore:
    return HstsStore.load(args.hsts_store or default_store_path())


def run_audit(args) -> int:
    if not is_http_url(args.url):
        print(f"secheader: not an absolute http(s) URL: {args.url!r}", file=sys.stderr)
        return EXIT_USAGE
    clock = _clock(args)
    now = clock()
    url = args.url
    try:
        store = None if args.no_hsts else _store(args)
    except OSError as exc:
        print(f"secheader: cannot read HSTS store: {exc}", file=sys.stderr)
        return EXIT_IO
    if store is not None:
        url = store.rewrite(args.url, now)
        if url != args.url:
            print(f"hsts: rewrote {args.url} -> {url}")
    record = probe(UrlEntry(url, Group.OPEN), _probe_config(args))
    print(f"url: {url}")
    if not record.responded:
        print(f"secheader: no response from {url} ({record.outcome.reason.value})", file=sys.stderr)
        return EXIT_IO
    print(f"status: {record.outcome.status}")

    if store is not None and urlsplit(url).scheme == "https":
        hsts = next((h for h in record.headers if h.name == _HSTS), None)
        directives, issues = parse_security_header(hsts) if hsts is not None else (None, [])
        if any(i.kind is IssueKind.MALFORMED for i in issues):
            # a header without max-age is ignored, not read as an eviction
            print(f"hsts: ignoring malformed header {hsts.text!r}")
        elif isinstance(directives, HstsDirectives):
            try:
                store.update(urlsplit(url).hostname, directives, True, now)
            except OSError as exc:
                print(f"secheader: cannot save HSTS store: {exc}", file=sys.stderr)
            print(f"hsts: {urlsplit(url).hostname} max-age={directives.max_age}"
                  f"{' includeSubDomains' if directives.include_subdomains else ''}")

    mode = LeakMode.STRICT if args.strict else LeakMode.AUDIT
    try:
        result = findings(record, mode)
    except VersionLeakError as exc:
        for leak in exc.findings:
            print(f"leak: {leak.header}: {leak}")
        print(f"strict mode violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    for leak in result.leaks:
        print(f"leak: {leak.header}: {leak}")
    print(f"leaks: {len(result.leaks)}")
    order = [f.text for f in sorted(result.mitigations_present | result.mitigations_absent,
                                    key=lambda h: h.key)]
    present = [n for n in order if HeaderName(n) in result.mitigations_present]
    absent = [n for n in order if HeaderName(n) in result.mitigations_absent]
    print(f"mitigations present: {', '.join(present) or '-'}")
    print(f"mitigations absent: {', '.join(absent) or '-'}")
    print(f"grade: {result.grade}")
    return EXIT_OK


def run_report(args) -> int:
    formats = FORMATS if args.format == "all" else ("markdown" if args.format == "md" else args.format,)
    try:
        catalog = load_catalog(args.catalog) if args.catalog else None
        corpus = read_corpus(args.corpus)
    except (OSError, ValueError) as exc:
        print(f"secheader: {exc}", file=sys.stderr)
        return EXIT_IO
    prev = prevalence(corpus, catalog)
    sec = security_prevalence(corpus, catalog)
    found = corpus_findings(corpus)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            ext = EXTENSIONS[fmt]
            (args.out / f"prevalence.{ext}").write_bytes(render(prev, fmt))
            (args.out / f"security.{ext}").write_bytes(render(sec, fmt))
        (args.out / "findings.jsonl").write_bytes(render(found, "json"))
        if not args.no_figures:
            from .figures import plot_prevalence, plot_security
            plot_prevalence(prev, args.out / "prevalence.png")
            plot_security(sec, args.out / "security.png")
    except OSError as exc:
        print(f"secheader: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{len(corpus)} records, {corpus.responses} responses, "
          f"{len(prev.rows)} fields, {len(sec.rows)} security fields")
    try:
        print(f"mitigation fields absent on average: {non_adoption_average(sec)}%")
    except MissingFieldError:
        pass
    return EXIT_OK


def run_hsts(args) -> int:
    now = _clock(args)()
    try:
        store = _store(args)
        if args.hsts_command == "list":
            for entry in sorted(store.entries.values(), key=lambda e: e.host):
                state = "expired" if now >= entry.expires_at else "active"
                print(f"{entry.host}\t{entry.expires_at}\t{int(entry.include_subdomains)}\t{state}")
        elif args.hsts_command == "import":
            print(f"imported {store.import_preload(args.preload, now, args.max_age)} hosts")
        elif args.hsts_command == "purge":
            print(f"purged {store.purge(now)} entries")
        else:
            print(store.rewrite(args.url, now))
    except OSError as exc:
        print(f"secheader: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def run_fixture(args) -> int:
    from .fixture import FixtureServer, load_routes

    try:
        routes = load_routes(args.config)
    except (OSError, ValueError) as exc:
        print(f"secheader: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        server = FixtureServer(routes, args.host, args.port,
                               str(args.tls_cert) if args.tls_cert else None,
                               str(args.tls_key) if args.tls_key else None)
    except OSError as exc:
        print(f"secheader: cannot serve on {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"serving {len(routes)} routes on {server.url('/')}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


COMMANDS = {
    "scan": run_scan,
    "audit": run_audit,
    "report": run_report,
    "hsts": run_hsts,
    "fixture": run_fixture,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING
    if args.command == "fixture" or args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
