import datetime
import json
import socket
from importlib import resources

import pytest

from secheader.fixture import FixtureServer, Route, load_routes

LISTING1_PATH = "/v2/networks/nextbike-leipzig"


def listing1_config_path():
    return resources.files("secheader").joinpath("fixtures", "listing1.json")


@pytest.fixture(scope="session")
def listing1_routes():
    return load_routes(listing1_config_path())


@pytest.fixture
def listing1_server(listing1_routes):
    with FixtureServer(listing1_routes) as srv:
        yield srv


def closed_port():
    """A localhost port with nothing listening on it."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


SYNTHETIC = {
    "/a": [["Server", "Apache/2.4.41 (Unix)"], ["X-Frame-Options", "DENY"]],
    "/b": [["Strict-Transport-Security", "max-age=31536000; includeSubDomains"],
           ["X-Content-Type-Options", "nosniff"]],
    "/c": [["Set-Cookie", "a=1"], ["Set-Cookie", "b=2"], ["Date", "Mon, 14 Oct 2019 09:44:16 GMT"]],
    "/d": [["Content-Security-Policy", "default-src 'self'; img-src *"], ["Referrer-Policy", "no-referrer"]],
    "/e": [["X-Powered-By", "PHP/7.4.3"], ["X-AspNet-Version", "4.0.30319"]],
    "/f": [["Access-Control-Allow-Origin", "https://a.example"],
           ["Access-Control-Allow-Credentials", "true"]],
    "/g": [["Upgrade", "h2c"], ["Connection", "Upgrade"]],
}


@pytest.fixture(scope="session")
def integration_routes(listing1_routes):
    routes = dict(listing1_routes)
    for path, headers in SYNTHETIC.items():
        routes[path] = Route.from_json({"status": 200, "headers": headers, "body": "ok", "delay_ms": 150})
    return routes


@pytest.fixture(scope="session")
def tls_files(tmp_path_factory):
    """Self-signed certificate for localhost."""
    from cryptography import x509
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import ec
    from cryptography.x509.oid import NameOID

    key = ec.generate_private_key(ec.SECP256R1())
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "localhost")])
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(days=1))
        .not_valid_after(now + datetime.timedelta(days=7))
        .add_extension(x509.SubjectAlternativeName([x509.DNSName("localhost")]), critical=False)
        .sign(key, hashes.SHA256())
    )
    d = tmp_path_factory.mktemp("tls")
    certfile, keyfile = d / "cert.pem", d / "key.pem"
    certfile.write_bytes(cert.public_bytes(serialization.Encoding.PEM))
    keyfile.write_bytes(key.private_bytes(serialization.Encoding.PEM,
                                          serialization.PrivateFormat.PKCS8,
                                          serialization.NoEncryption()))
    return str(certfile), str(keyfile)


def write_json(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


def integration_entries(server):
    """Listing 1, the seven synthetic routes and two unreachable URLs: ten entries."""
    from secheader.scanner import Group, UrlEntry

    entries = [UrlEntry(server.url(LISTING1_PATH), Group.OPEN)]
    for i, path in enumerate(SYNTHETIC):
        entries.append(UrlEntry(server.url(path), Group.OPEN if i % 2 else Group.CLOSED))
    entries.append(UrlEntry(f"http://127.0.0.1:{closed_port()}/gone-a", Group.OPEN))
    entries.append(UrlEntry(f"http://127.0.0.1:{closed_port()}/gone-b", Group.CLOSED))
    return entries


@pytest.fixture
def integration_server(integration_routes):
    with FixtureServer(integration_routes) as srv:
        yield srv


# criterion lines collected by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
