"""Service discovery: descriptor records, liveness metrics, update feeds.

Descriptors travel as single-line bracketed records::

    [IP=131.12.10.1, PORT=63150, TASK_ID=25376, METRIC=0,
     PAR_LIST=[PRICE, BANDWITH, DISKSIZE], PRO_ID=10]

Keys are case-insensitive and whitespace-tolerant.  PAR_LIST only
names parameters, so offers carry the actual values: inline under the
OFFERS extension key, or in a separate offers file.  Parameter names
normalize to lowercase; literal values keep their case.

The update controller turns provider drift into ChangeEvents, either
by polling snapshots on an interval or by relaying pushed broadcasts
with a staleness watchdog.  Simulated providers also speak a tiny
line-oriented wire protocol for live invocation.
"""

from __future__ import annotations

import base64
import enum
import math
import random
import socket
import socketserver
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .model import (ChangeEvent, ChangeKind, MetricOutOfRange, Offer,
                    ServiceDescriptor, Value, metric_changed, parameter_changed,
                    validate_catalog)


class MissingKey(ValueError):
    """A required descriptor key is absent."""


class MalformedValue(ValueError):
    """A descriptor field failed to parse."""


class CallFailed(RuntimeError):
    """The wire protocol returned ERR or the transport broke."""


REQUIRED_KEYS = ("IP", "PORT", "TASK_ID", "METRIC", "PAR_LIST", "PRO_ID")


def parse_value(text: str) -> Value:
    """Numeric-looking text parses to a float, everything else stays literal."""
    text = text.strip()
    try:
        v = float(text)
    except ValueError:
        return text
    if math.isnan(v) or math.isinf(v):
        return text
    return v


def format_value(value: Value) -> str:
    if isinstance(value, bool):
        raise MalformedValue(f"boolean value {value!r} has no wire form")
    if isinstance(value, (int, float)):
        f = float(value)
        if f == int(f) and abs(f) < 1e16:
            return str(int(f))
        return repr(f)
    return str(value)


def _split_top_level(text: str, sep: str = ",") -> list[str]:
    parts, depth, current = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if current or parts:
        parts.append("".join(current))
    return parts


def _parse_assignments(body: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in _split_top_level(body):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise MalformedValue(f"expected KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        out[key.strip().upper()] = value.strip()
    return out


def _parse_offer_record(text: str, provider_id: str, task_id: str,
                        offer_index: int) -> Offer:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise MalformedValue(f"offer record must be braced: {text!r}")
    values = {k.lower(): parse_value(v) for k, v in _parse_assignments(text[1:-1]).items()}
    return Offer(provider_id=provider_id, subtask_id=task_id,
                 offer_index=offer_index, values=values)


def parse_descriptor(text: str) -> ServiceDescriptor:
    """Parse one bracketed record; raises MissingKey, MalformedValue, or
    MetricOutOfRange."""
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MalformedValue(f"descriptor must be bracketed: {text[:40]!r}")
    fields = _parse_assignments(text[1:-1])
    for key in REQUIRED_KEYS:
        if key not in fields:
            raise MissingKey(key)
    try:
        port = int(fields["PORT"])
    except ValueError:
        raise MalformedValue(f"PORT is not an integer: {fields['PORT']!r}") from None
    metric_raw = parse_value(fields["METRIC"])
    if not isinstance(metric_raw, float):
        raise MalformedValue(f"METRIC is not numeric: {fields['METRIC']!r}")
    if not (0.0 <= metric_raw <= 1.0):
        raise MetricOutOfRange(f"METRIC {metric_raw} outside [0, 1]")
    par_text = fields["PAR_LIST"]
    if not (par_text.startswith("[") and par_text.endswith("]")):
        raise MalformedValue(f"PAR_LIST must be bracketed: {par_text!r}")
    par_list = tuple(p.strip().lower() for p in _split_top_level(par_text[1:-1])
                     if p.strip())
    provider_id = fields["PRO_ID"]
    task_id = fields["TASK_ID"]
    offers: list[Offer] = []
    if "OFFERS" in fields:
        offers_text = fields["OFFERS"]
        if not (offers_text.startswith("[") and offers_text.endswith("]")):
            raise MalformedValue(f"OFFERS must be bracketed: {offers_text!r}")
        for i, rec in enumerate(r for r in _split_top_level(offers_text[1:-1])
                                if r.strip()):
            offers.append(_parse_offer_record(rec, provider_id, task_id, i))
    return ServiceDescriptor(address=fields["IP"], port=port, task_id=task_id,
                             metric=metric_raw, par_list=par_list,
                             provider_id=provider_id, offers=tuple(offers))


def emit_descriptor(descriptor: ServiceDescriptor) -> str:
    """Canonical single-line record; parse_descriptor(emit(d)) == d."""
    parts = [
        f"IP={descriptor.address}",
        f"PORT={descriptor.port}",
        f"TASK_ID={descriptor.task_id}",
        f"METRIC={format_value(descriptor.metric)}",
        "PAR_LIST=[" + ", ".join(p.upper() for p in descriptor.par_list) + "]",
        f"PRO_ID={descriptor.provider_id}",
    ]
    if descriptor.offers:
        offer_recs = []
        for offer in descriptor.offers:
            inner = ", ".join(f"{k.upper()}={format_value(v)}"
                              for k, v in offer.values.items())
            offer_recs.append("{" + inner + "}")
        parts.append("OFFERS=[" + ", ".join(offer_recs) + "]")
    return "[" + ", ".join(parts) + "]"


def _content_lines(text: str) -> list[str]:
    return [line.strip() for line in text.splitlines()
            if line.strip() and not line.strip().startswith("#")]


def parse_offers_line(line: str) -> tuple[str, str, dict[str, Value]]:
    """One offer per line in the separate offers file:
    PRO_ID=10; TASK_ID=convert; PRICE=50; RUNTIME=50"""
    fields = {}
    for item in line.split(";"):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise MalformedValue(f"expected KEY=VALUE, got {item!r}")
        k, _, v = item.partition("=")
        fields[k.strip().upper()] = v.strip()
    if "PRO_ID" not in fields:
        raise MissingKey("PRO_ID")
    if "TASK_ID" not in fields:
        raise MissingKey("TASK_ID")
    provider_id = fields.pop("PRO_ID")
    task_id = fields.pop("TASK_ID")
    values = {k.lower(): parse_value(v) for k, v in fields.items()}
    return provider_id, task_id, values


def load_catalog(services_text: str, offers_text: str | None = None
                 ) -> tuple[ServiceDescriptor, ...]:
    """Parse a services file (and optional offers file) into a validated catalog."""
    descriptors = [parse_descriptor(line) for line in _content_lines(services_text)]
    if offers_text is not None:
        by_key: dict[tuple[str, str], int] = {}
        for i, d in enumerate(descriptors):
            by_key[(d.provider_id, d.task_id)] = i
        for line in _content_lines(offers_text):
            provider_id, task_id, values = parse_offers_line(line)
            key = (provider_id, task_id)
            if key not in by_key:
                raise MalformedValue(f"offer for unknown service {key}")
            i = by_key[key]
            d = descriptors[i]
            offer = Offer(provider_id=provider_id, subtask_id=task_id,
                          offer_index=len(d.offers), values=values)
            descriptors[i] = replace(d, offers=d.offers + (offer,))
    return validate_catalog(descriptors)


def rtt_metric(round_trip: float, window: float) -> float:
    """Availability from a round-trip probe: 1 - rtt/window, clamped to [0, 1].

    A probe answered instantly scores 1, one slower than the window
    scores 0.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    return min(1.0, max(0.0, 1.0 - float(round_trip) / float(window)))


def find_services(catalog: Iterable[ServiceDescriptor], task_id: str
                  ) -> list[ServiceDescriptor]:
    """Descriptors advertising task_id: available (metric > 0) first,
    then by provider_id; deterministic."""
    matching = [d for d in catalog if d.task_id == task_id]
    return sorted(matching, key=lambda d: (d.metric <= 0.0, d.provider_id,
                                           d.address, d.port))


# -- simulated providers ---------------------------------------------


@dataclass(frozen=True, slots=True)
class ScriptedChange:
    """One scheduled drift of a provider's advertised data."""

    at: float
    offer_index: int | None = None
    parameter: str | None = None
    value: Value | None = None
    metric: float | None = None


class SimulatedProvider:
    """A deterministic stand-in service.

    Advertised values drift along a script of timed changes; invoke()
    transforms payloads reproducibly from the seed, so whole runs
    replay bit-identically.
    """

    def __init__(self, descriptor: ServiceDescriptor, seed: int = 0,
                 script: Sequence[ScriptedChange] = (), behavior: str = "tag"):
        self.descriptor = descriptor
        self.seed = seed
        self.script = sorted(script, key=lambda c: c.at)
        self.behavior = behavior
        self._rng = random.Random(
            f"{seed}:{descriptor.provider_id}:{descriptor.task_id}")

    def snapshot(self, now: float) -> tuple[dict[int, dict[str, Value]], float]:
        """Advertised (offer values, metric) after all drift up to now."""
        values = {o.offer_index: dict(o.values) for o in self.descriptor.offers}
        metric = self.descriptor.metric
        for change in self.script:
            if change.at > now:
                break
            if change.metric is not None:
                metric = change.metric
            else:
                values.setdefault(change.offer_index, {})[change.parameter] = change.value
        return values, metric

    def contacts_between(self, t0: float, t1: float) -> list[ScriptedChange]:
        return [c for c in self.script if t0 < c.at <= t1]

    def invoke(self, payload: bytes) -> bytes:
        if self.behavior == "random":
            return str(self._rng.random()).encode("ascii")
        tag = f"[{self.descriptor.task_id}:{self.descriptor.provider_id}]".encode("ascii")
        return tag + payload

    def descriptor_line(self, now: float | None = None) -> str:
        if now is None:
            return emit_descriptor(self.descriptor)
        values, metric = self.snapshot(now)
        offers = tuple(
            Offer(self.descriptor.provider_id, self.descriptor.task_id, i, vals)
            for i, vals in sorted(values.items()))
        return emit_descriptor(replace(self.descriptor, metric=metric, offers=offers))


# -- update controller -----------------------------------------------


class UpdateMode(str, enum.Enum):
    POLL = "Poll"
    PUSH = "Push"


@dataclass(frozen=True, slots=True)
class UpdatePolicy:
    """How provider drift reaches the engine.

    The three weights are reserved for blending freshness, probe cost,
    and trust into the metric; they are carried and validated but have
    no semantics yet.
    """

    mode: UpdateMode = UpdateMode.POLL
    interval: float = 5.0
    staleness_timeout: float = 15.0
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        if len(self.weights) != 3:
            raise ValueError("exactly three reserved weights")


class UpdateController:
    """Feeds ChangeEvents into a sink as providers drift.

    Poll mode diffs each provider's snapshot every interval.  Push mode
    relays scripted broadcasts as they happen and emits a metric-0
    event for any provider silent longer than staleness_timeout,
    within one tick of the deadline.
    """

    def __init__(self, policy: UpdatePolicy, providers: Sequence[SimulatedProvider],
                 sink: Callable[[ChangeEvent], None], start: float = 0.0):
        self.policy = policy
        self.providers = list(providers)
        self.sink = sink
        self.now = start
        self._next_tick = start + policy.interval
        self._last_seen = {id(p): p.snapshot(start) for p in self.providers}
        self._last_contact = {id(p): start for p in self.providers}
        self._stale: set[int] = set()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _emit_diff(self, provider: SimulatedProvider, old, new) -> None:
        old_values, old_metric = old
        new_values, new_metric = new
        d = provider.descriptor
        for offer_index in sorted(new_values):
            before = old_values.get(offer_index, {})
            after = new_values[offer_index]
            for parameter in sorted(after):
                if before.get(parameter) != after[parameter]:
                    self.sink(parameter_changed(d.provider_id, offer_index, parameter,
                                                after[parameter], task_id=d.task_id))
        if new_metric != old_metric:
            self.sink(metric_changed(d.provider_id, new_metric))

    def step(self, now: float) -> None:
        """Advance the controller's clock to `now` and emit what is due."""
        previous = self.now
        self.now = now
        if self.policy.mode is UpdateMode.POLL:
            for provider in self.providers:
                snap = provider.snapshot(now)
                self._emit_diff(provider, self._last_seen[id(provider)], snap)
                self._last_seen[id(provider)] = snap
            return
        # push: scripted broadcasts arrive on their own schedule
        for provider in self.providers:
            contacts = provider.contacts_between(previous, now)
            if contacts:
                self._last_contact[id(provider)] = contacts[-1].at
                self._stale.discard(id(provider))
                snap = provider.snapshot(now)
                self._emit_diff(provider, self._last_seen[id(provider)], snap)
                self._last_seen[id(provider)] = snap
        for provider in self.providers:
            silent_for = now - self._last_contact[id(provider)]
            if silent_for >= self.policy.staleness_timeout and id(provider) not in self._stale:
                self._stale.add(id(provider))
                self.sink(metric_changed(provider.descriptor.provider_id, 0.0))

    def run_until(self, t: float) -> None:
        """Tick the controller at every interval boundary up to t."""
        while self._next_tick <= t:
            self.step(self._next_tick)
            self._next_tick += self.policy.interval

    def start(self) -> None:
        """Wall-clock mode: tick on a daemon thread until stop()."""
        import time

        def loop() -> None:
            t0 = time.monotonic()
            while not self._stop.wait(self.policy.interval):
                self.step(time.monotonic() - t0)

        self._thread = threading.Thread(target=loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None


def run_update_controller(policy: UpdatePolicy, providers: Sequence[SimulatedProvider],
                          sink: Callable[[ChangeEvent], None],
                          start: float = 0.0) -> UpdateController:
    """Build a controller; call run_until() with a logical clock or start()
    for wall time."""
    return UpdateController(policy, providers, sink, start)


# -- wire protocol ---------------------------------------------------
#
# request  "OFFER <task_id>\n"            -> one descriptor line
# request  "CALL <task_id> <base64>\n"    -> "OK <base64>\n" | "ERR <reason>\n"
# ASCII, LF-terminated.


class _ProviderHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        provider: SimulatedProvider = self.server.provider  # type: ignore[attr-defined]
        task_id = provider.descriptor.task_id
        for raw in self.rfile:
            try:
                line = raw.decode("ascii").strip()
            except UnicodeDecodeError:
                self.wfile.write(b"ERR non-ascii request\n")
                continue
            if not line:
                continue
            parts = line.split(" ", 2)
            if parts[0] == "OFFER" and len(parts) == 2:
                if parts[1] != task_id:
                    self.wfile.write(b"ERR unknown task\n")
                else:
                    self.wfile.write(provider.descriptor_line().encode("ascii") + b"\n")
            elif parts[0] == "CALL" and len(parts) == 3:
                if parts[1] != task_id:
                    self.wfile.write(b"ERR unknown task\n")
                    continue
                try:
                    payload = base64.b64decode(parts[2], validate=True)
                    result = provider.invoke(payload)
                except Exception as exc:  # noqa: BLE001 - reported to the peer
                    self.wfile.write(f"ERR {exc}\n".encode("ascii", "replace"))
                    continue
                self.wfile.write(b"OK " + base64.b64encode(result) + b"\n")
            else:
                self.wfile.write(b"ERR bad request\n")
            self.wfile.flush()


class ProviderEndpoint:
    """Serves one SimulatedProvider over the wire protocol."""

    def __init__(self, provider: SimulatedProvider, host: str = "127.0.0.1",
                 port: int = 0):
        self.provider = provider
        self._server = socketserver.ThreadingTCPServer((host, port), _ProviderHandler,
                                                       bind_and_activate=True)
        self._server.daemon_threads = True
        self._server.provider = provider  # type: ignore[attr-defined]
        self.address, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "ProviderEndpoint":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _request_line(address: str, port: int, line: str, timeout: float) -> str:
    with socket.create_connection((address, port), timeout=timeout) as sock:
        sock.sendall(line.encode("ascii") + b"\n")
        chunks = []
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            chunks.append(chunk)
            if chunk.endswith(b"\n"):
                break
    return b"".join(chunks).decode("ascii").strip()


def query_offer(address: str, port: int, task_id: str, timeout: float = 5.0
                ) -> ServiceDescriptor:
    reply = _request_line(address, port, f"OFFER {task_id}", timeout)
    if reply.startswith("ERR"):
        raise CallFailed(reply)
    return parse_descriptor(reply)


def call_provider(address: str, port: int, task_id: str, payload: bytes,
                  timeout: float = 5.0) -> bytes:
    encoded = base64.b64encode(payload).decode("ascii")
    try:
        reply = _request_line(address, port, f"CALL {task_id} {encoded}", timeout)
    except OSError as exc:
        raise CallFailed(f"transport failure: {exc}") from exc
    if reply.startswith("OK "):
        return base64.b64decode(reply[3:], validate=True)
    raise CallFailed(reply or "empty reply")


def simulated_catalog_providers(catalog: Iterable[ServiceDescriptor], seed: int = 0
                                ) -> dict[tuple[str, str], SimulatedProvider]:
    """One deterministic SimulatedProvider per catalog descriptor."""
    return {(d.provider_id, d.task_id): SimulatedProvider(d, seed=seed)
            for d in catalog}
