"""Loopback HTTP/HTTPS fixture servers for tests.

Each endpoint serves the exact bytes its profile describes: the handler
writes the status line and headers itself, so no implicit Server or Date
headers sneak into the fixtures (only Content-Length and Connection: close
are added).  HTTPS listeners use a process-local self-signed certificate;
its PEM path is exposed so a probe config can trust it explicitly, and a
probe that does not is refused like any other untrusted peer.

Header values and string bodies may reference {base}, {http_base}, and
{https_base}, replaced at response time with the endpoint's bound URLs.
This keeps redirect plans (loops, downgrades, upgrade hops) port-agnostic.
"""

from __future__ import annotations

import atexit
import datetime as _dt
import http.client
import ipaddress
import json
import socket
import ssl
import tempfile
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class RouteSpec:
    """The wire response for one path."""

    status: int = 200
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes | str = b""
    delay: float = 0.0


@dataclass(frozen=True)
class MutationPlan:
    """Second-run treatment of an endpoint.

    action 'swap' replaces the routes in place, 'start' brings an
    initially-down endpoint up, 'shutdown' closes the listener, and 'drop'
    is a caller-interpreted directive to leave the URL out of the second
    probe run.
    """

    action: str = "swap"
    routes: dict[str, RouteSpec] | None = None

    def __post_init__(self) -> None:
        if self.action not in ("swap", "start", "shutdown", "drop"):
            raise ValueError(f"unknown mutation action: {self.action!r}")


@dataclass(frozen=True)
class FixtureProfile:
    name: str
    schemes: tuple[str, ...] = ("http",)
    routes: dict[str, RouteSpec] = field(default_factory=dict)
    mutation: MutationPlan | None = None
    initially_down: bool = False

    def __post_init__(self) -> None:
        for scheme in self.schemes:
            if scheme not in ("http", "https"):
                raise ValueError(f"unknown scheme: {scheme!r}")


@dataclass(frozen=True)
class RequestRecord:
    scheme: str
    host: str
    path: str


@lru_cache(maxsize=1)
def _fixture_certificate() -> tuple[str, str]:
    """(cert_pem_path, key_pem_path) for a throwaway loopback certificate."""
    from cryptography import x509
    from cryptography.hazmat.primitives import hashes, serialization
    from cryptography.hazmat.primitives.asymmetric import rsa
    from cryptography.x509.oid import NameOID

    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "smellprobe-fixture")])
    now = _dt.datetime.now(_dt.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - _dt.timedelta(days=1))
        .not_valid_after(now + _dt.timedelta(days=7))
        .add_extension(
            x509.SubjectAlternativeName(
                [
                    x509.DNSName("localhost"),
                    x509.IPAddress(ipaddress.IPv4Address("127.0.0.1")),
                ]
            ),
            critical=False,
        )
        .sign(key, hashes.SHA256())
    )

    directory = Path(tempfile.mkdtemp(prefix="smellprobe-fixture-"))
    cert_path = directory / "cert.pem"
    key_path = directory / "key.pem"
    cert_path.write_bytes(cert.public_bytes(serialization.Encoding.PEM))
    key_path.write_bytes(
        key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.TraditionalOpenSSL,
            serialization.NoEncryption(),
        )
    )

    def _cleanup() -> None:
        for path in (cert_path, key_path):
            try:
                path.unlink()
            except OSError:
                pass
        try:
            directory.rmdir()
        except OSError:
            pass

    atexit.register(_cleanup)
    return str(cert_path), str(key_path)


class _FixtureServer(ThreadingHTTPServer):
    daemon_threads = True
    endpoint: "FixtureEndpoint"
    fixture_scheme: str

    def handle_error(self, request, client_address):  # noqa: D102 - quiet rejected TLS clients
        pass


class _FixtureHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args) -> None:
        pass

    def do_GET(self) -> None:
        server: _FixtureServer = self.server  # type: ignore[assignment]
        endpoint = server.endpoint
        endpoint._record(
            RequestRecord(
                scheme=server.fixture_scheme,
                host=self.headers.get("Host", ""),
                path=self.path,
            )
        )
        route = endpoint.current_routes().get(self.path)
        if route is None:
            route = RouteSpec(status=404)
        try:
            if route.delay:
                time.sleep(route.delay)
            self._write_route(endpoint, route)
        finally:
            endpoint._done()

    def _write_route(self, endpoint: "FixtureEndpoint", route: RouteSpec) -> None:
        body = route.body
        if isinstance(body, str):
            body = endpoint.expand(body).encode("utf-8")
        reason = http.client.responses.get(route.status, "Unknown")
        wire = [f"HTTP/1.1 {route.status} {reason}\r\n".encode("latin-1")]
        for name, value in route.headers:
            wire.append(f"{name}: {endpoint.expand(value)}\r\n".encode("latin-1"))
        wire.append(f"Content-Length: {len(body)}\r\n".encode("latin-1"))
        wire.append(b"Connection: close\r\n\r\n")
        wire.append(body)
        self.wfile.write(b"".join(wire))
        self.close_connection = True


class FixtureEndpoint:
    """A spawned fixture: one route table behind one or two listeners."""

    def __init__(self, profile: FixtureProfile):
        self.profile = profile
        self.requests: list[RequestRecord] = []
        self.max_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()
        self._routes = dict(profile.routes)
        self._servers: dict[str, _FixtureServer] = {}
        self._threads: list[threading.Thread] = []
        self._ports: dict[str, int] = {}
        self.ca_file: str | None = None

        if profile.initially_down:
            # Reserve ports now so the URL is stable; nothing listens until
            # a 'start' mutation brings the endpoint up.
            for scheme in profile.schemes:
                self._ports[scheme] = _free_port()
        else:
            self._start_listeners()

    # -- lifecycle ---------------------------------------------------------

    def _start_listeners(self) -> None:
        for scheme in self.profile.schemes:
            port = self._ports.get(scheme, 0)
            server = _FixtureServer(("127.0.0.1", port), _FixtureHandler)
            server.endpoint = self
            server.fixture_scheme = scheme
            if scheme == "https":
                cert_path, key_path = _fixture_certificate()
                self.ca_file = cert_path
                context = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
                context.load_cert_chain(cert_path, key_path)
                server.socket = context.wrap_socket(server.socket, server_side=True)
            self._ports[scheme] = server.server_address[1]
            self._servers[scheme] = server
            thread = threading.Thread(target=server.serve_forever, daemon=True)
            thread.start()
            self._threads.append(thread)

    def mutate(self, plan: MutationPlan | dict[str, RouteSpec]) -> None:
        """Swap the route table (or execute the plan's action) atomically."""
        if isinstance(plan, dict):
            plan = MutationPlan(action="swap", routes=plan)
        if plan.action == "shutdown":
            self.shutdown()
            return
        if plan.action == "drop":
            return
        if plan.routes is not None:
            with self._lock:
                self._routes = dict(plan.routes)
        if plan.action == "start" and not self._servers:
            self._start_listeners()

    def shutdown(self) -> None:
        for server in self._servers.values():
            server.shutdown()
            server.server_close()
        self._servers.clear()

    # -- request-time plumbing ----------------------------------------------

    def current_routes(self) -> dict[str, RouteSpec]:
        with self._lock:
            return self._routes

    def expand(self, text: str) -> str:
        for token, value in (
            ("{http_base}", self.base_url("http") if "http" in self._ports else ""),
            ("{https_base}", self.base_url("https") if "https" in self._ports else ""),
        ):
            text = text.replace(token, value)
        default_scheme = self.profile.schemes[0]
        return text.replace("{base}", self.base_url(default_scheme))

    def _record(self, record: RequestRecord) -> None:
        with self._lock:
            self.requests.append(record)
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)

    def _done(self) -> None:
        with self._lock:
            self._in_flight -= 1

    # -- addressing ----------------------------------------------------------

    def port(self, scheme: str) -> int:
        return self._ports[scheme]

    def base_url(self, scheme: str | None = None) -> str:
        scheme = scheme or self.profile.schemes[0]
        return f"{scheme}://127.0.0.1:{self._ports[scheme]}"

    def url(self, path: str = "/", scheme: str | None = None) -> str:
        return self.base_url(scheme) + path

    def __enter__(self) -> "FixtureEndpoint":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()


def spawn(profile: FixtureProfile) -> FixtureEndpoint:
    """Bind the profile to loopback listeners and start serving."""
    return FixtureEndpoint(profile)


def _free_port() -> int:
    sock = socket.socket()
    try:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]
    finally:
        sock.close()


# --- profile library --------------------------------------------------------


@dataclass(frozen=True)
class SmellCase:
    profile: str
    path: str = "/"
    scheme: str | None = None


@dataclass(frozen=True)
class ProfileLibrary:
    profiles: dict[str, FixtureProfile]
    smell_cases: dict[str, dict[str, tuple[SmellCase, ...]]]
    maintenance_cases: dict[str, str]
    unclassifiable_cases: dict[str, str]

    def profile(self, name: str) -> FixtureProfile:
        return self.profiles[name]


def _route_from_dict(data: dict) -> RouteSpec:
    body = data.get("body", "")
    if data.get("body_encoding") == "latin-1":
        body = body.encode("latin-1")
    return RouteSpec(
        status=data.get("status", 200),
        headers=tuple((n, v) for n, v in data.get("headers", [])),
        body=body,
        delay=data.get("delay", 0.0),
    )


def _profile_from_dict(name: str, data: dict) -> FixtureProfile:
    mutation = None
    if "mutation" in data:
        m = data["mutation"]
        routes = None
        if "routes" in m:
            routes = {path: _route_from_dict(r) for path, r in m["routes"].items()}
        mutation = MutationPlan(action=m.get("action", "swap"), routes=routes)
    return FixtureProfile(
        name=name,
        schemes=tuple(data.get("schemes", ["http"])),
        routes={path: _route_from_dict(r) for path, r in data.get("routes", {}).items()},
        mutation=mutation,
        initially_down=data.get("initially_down", False),
    )


def load_profile_library() -> ProfileLibrary:
    """The shipped fixtures: smell positives/negatives and maintenance pairs."""
    with resources.files("smellprobe.data").joinpath("fixture_profiles.json").open(
        "r", encoding="utf-8"
    ) as fh:
        raw = json.load(fh)

    profiles = {name: _profile_from_dict(name, p) for name, p in raw["profiles"].items()}
    smell_cases = {}
    for kind, sides in raw["smells"].items():
        smell_cases[kind] = {
            side: tuple(
                SmellCase(
                    profile=c["profile"],
                    path=c.get("path", "/"),
                    scheme=c.get("scheme"),
                )
                for c in cases
            )
            for side, cases in sides.items()
        }
    return ProfileLibrary(
        profiles=profiles,
        smell_cases=smell_cases,
        maintenance_cases=dict(raw["maintenance"]),
        unclassifiable_cases=dict(raw["unclassifiable"]),
    )
