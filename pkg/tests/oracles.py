"""Independent reference implementations and printed literals used as test oracles."""

import random
from decimal import ROUND_HALF_UP, Decimal

from hypothesis import strategies as st

from secheader.parse import HstsDirectives, RawHeader
from secheader.policy import HstsStore
from secheader.scanner import Group, NoResponse, NoResponseReason, ProbeRecord, Response

OPEN_URLS, CLOSED_URLS = 1230, 8486

# Table II as printed: name -> (total, open, closed, total%, open%, closed%)
TABLE2 = {
    "Server": (6978, 909, 6069, 70, 74, 72),
    "X-Powered-By": (1770, 95, 1675, 18, 8, 20),
    "X-Content-Type-Options": (1601, 330, 1271, 16, 27, 15),
    "X-XSS-Protection": (1519, 321, 1198, 15, 26, 14),
    "X-Frame-Options": (1289, 317, 972, 13, 26, 11),
    "Access-Control-Allow-Origin": (916, 141, 775, 9, 11, 9),
    "Strict-Transport-Security": (787, 251, 536, 8, 20, 6),
    "Upgrade": (601, 0, 601, 6, 0, 7),
    "X-AspNet-Version": (538, 38, 500, 5, 3, 6),
    "Content-Security-Policy": (517, 176, 341, 5, 14, 4),
    "Access-Control-Expose-Headers": (336, 23, 313, 3, 2, 4),
    "Expect-CT": (332, 147, 185, 3, 12, 2),
    "X-Powered-By-Plesk": (255, 0, 255, 3, 0, 3),
    "Access-Control-Allow-Credentials": (205, 7, 198, 2, 1, 2),
    "Timing-Allow-Origin": (189, 16, 173, 2, 1, 2),
    "Referrer-Policy": (186, 79, 107, 2, 6, 1),
}


def decimal_pct(count, total):
    return int((Decimal(100) * count / Decimal(total)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def brute_force_prevalence(records):
    """Nested-loop recount: [(rank, occurrences, folded name)] sorted like prevalence()."""
    names = []
    for r in records:
        if isinstance(r.outcome, Response):
            for h in r.outcome.headers:
                low = "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in h.name.text)
                if low not in names:
                    names.append(low)
    rows = []
    for name in names:
        occ = 0
        for r in records:
            if not isinstance(r.outcome, Response):
                continue
            hit = False
            for h in r.outcome.headers:
                if h.name.text.lower() == name:
                    hit = True
            if hit:
                occ += 1
        rows.append((occ, name))
    out = []
    for occ, name in rows:
        higher = set(o for o, _ in rows if o > occ)
        out.append((len(higher) + 1, occ, name))
    out.sort(key=lambda t: (t[0], t[2]))
    return out


POOL = ["Server", "server", "SERVER", "Date", "Content-Type", "Set-Cookie", "X-Frame-Options",
        "Strict-Transport-Security", "X-Custom-Thing", "Etag", "ETag", "Via", "X-Powered-By", "Upgrade"]


def random_corpus(rng: random.Random, size=None):
    size = rng.randint(0, 50) if size is None else size
    records = []
    for i in range(size):
        group = rng.choice(list(Group))
        if rng.random() < 0.15:
            outcome = NoResponse(rng.choice(list(NoResponseReason)))
        else:
            headers = tuple(RawHeader(rng.choice(POOL), "v") for _ in range(rng.randint(0, 8)))
            outcome = Response(200, headers)
        records.append(ProbeRecord(f"http://h{i}.example/", group, outcome))
    return records


# --- HSTS reference model ----------------------------------------------------------

HOSTS = ["example.com", "a.example.com", "b.a.example.com", "badexample.com", "api.example", "10.1.2.3"]

_update_op = st.tuples(st.just("update"), st.sampled_from(HOSTS), st.integers(0, 200), st.booleans(), st.booleans())
_rewrite_op = st.tuples(st.just("rewrite"), st.sampled_from(HOSTS), st.sampled_from(["http", "https"]),
                        st.sampled_from(["", ":80", ":8443"]))
hsts_sequences = st.lists(st.tuples(st.one_of(_update_op, _rewrite_op), st.integers(0, 60)),
                          min_size=1, max_size=25)


def model_covers(model, host, now):
    """Reference lookup over a plain dict host -> (expires_at, include_subdomains)."""
    labels = host.split(".")
    for i in range(len(labels)):
        rec = model.get(".".join(labels[i:]))
        if rec and now < rec[0] and (i == 0 or rec[1]):
            return True
    return False


def check_hsts_sequence(seq, path):
    """Replay (op, dt) steps against HstsStore and a dict model; assert they agree."""
    store = HstsStore(store_path=path)
    model = {}
    now = 0
    for op, dt in seq:
        now += dt
        if op[0] == "update":
            _, host, max_age, subdomains, secure = op
            store.update(host, HstsDirectives(max_age, subdomains), secure, now)
            if secure and not host[0].isdigit():
                if max_age == 0:
                    model.pop(host, None)
                else:
                    model[host] = (now + max_age, subdomains)
        else:
            _, host, scheme, port = op
            url = f"{scheme}://{host}{port}/p"
            out = store.rewrite(url, now)
            if scheme == "https" or not model_covers(model, host, now):
                # https is never touched; uncovered hosts (incl. badexample.com) stay as they are
                assert out == url
            else:
                assert out == f"https://{host}{':443' if port == ':80' else port}/p"
        for host, entry in store.entries.items():
            assert model[host] == (entry.expires_at, entry.include_subdomains)
    # whatever was persisted must reload to the in-memory state
    store.save()
    assert HstsStore.load(path) == store
