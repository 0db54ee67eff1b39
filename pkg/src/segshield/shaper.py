"""Shaped stream transport and the loopback transfer benchmark.

The sender splits every application message with segcore and pushes each
chunk as its own send call, with Nagle disabled and a deliberately small
send buffer so the kernel cannot re-batch chunks at its leisure. Wall
time is sender-side: first send call until the receiver's EOF comes back
after shutdown, i.e. until delivery is acknowledged end-to-end.

Note on Linux buffer sizes: the kernel doubles the requested SO_SNDBUF /
SO_RCVBUF for bookkeeping, so queried values are compared as
effective >= requested rather than for equality.
"""

from __future__ import annotations

import hashlib
import random
import select
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigurationError, IntegrityError, TransportError
from .rng import derive_seed, make_rng
from .segcore import SegmentationConfig, SegmentPlan, iter_chunks, segment_message

DEFAULT_SEND_BUFFER = 2**16
DEFAULT_RECV_BUFFER = 2**17


@dataclass(frozen=True)
class SocketTuning:
    no_delay: bool = True
    send_buffer_bytes: int | None = DEFAULT_SEND_BUFFER
    receive_buffer_bytes: int | None = DEFAULT_RECV_BUFFER

    def validate_for_shaping(self) -> None:
        if not self.no_delay:
            raise ConfigurationError("shaping requires no_delay=true")
        if (
            self.send_buffer_bytes is not None
            and self.receive_buffer_bytes is not None
            and self.send_buffer_bytes >= self.receive_buffer_bytes
        ):
            raise ConfigurationError(
                "shaping requires send buffer < receive buffer "
                f"(got {self.send_buffer_bytes} >= {self.receive_buffer_bytes})"
            )


@dataclass(frozen=True)
class TransferStats:
    bytes_sent: int
    packets_sent: int
    wall_time: float
    segment_log: tuple[int, ...] = ()
    checksum: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segment_log", tuple(self.segment_log))
        if self.segment_log:
            if sum(self.segment_log) != self.bytes_sent:
                raise ValueError("segment_log does not account for bytes_sent")
            if len(self.segment_log) != self.packets_sent:
                raise ValueError("packets_sent must equal len(segment_log)")

    def to_dict(self) -> dict:
        return {
            "bytes_sent": self.bytes_sent,
            "packets_sent": self.packets_sent,
            "wall_time": self.wall_time,
            "segment_log": list(self.segment_log),
            "checksum": self.checksum,
        }


def parse_address(address) -> tuple[str, int]:
    if isinstance(address, tuple):
        host, port = address
        return str(host), int(port)
    host, _, port = str(address).rpartition(":")
    if not host or not port:
        raise ValueError(f"address must be host:port, got {address!r}")
    return host, int(port)


def _apply_tuning(sock: socket.socket, tuning: SocketTuning) -> None:
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, int(tuning.no_delay))
    for option, requested in (
        (socket.SO_SNDBUF, tuning.send_buffer_bytes),
        (socket.SO_RCVBUF, tuning.receive_buffer_bytes),
    ):
        if requested is None:
            continue
        sock.setsockopt(socket.SOL_SOCKET, option, requested)
        effective = sock.getsockopt(socket.SOL_SOCKET, option)
        if effective < requested:
            raise ConfigurationError(
                f"kernel clamped buffer to {effective} (< requested {requested})"
            )


class ShapedConnection:
    """One connected stream. Owned by one thread at a time; hand the object
    over whole if another thread takes it."""

    def __init__(
        self,
        sock: socket.socket,
        config: SegmentationConfig | None,
        rng: random.Random | int | None = None,
    ):
        self._sock = sock
        self._config = config
        if config is not None:
            self._rng = make_rng(config.seed if rng is None else rng)
        else:
            self._rng = make_rng(0 if rng is None else rng)
        self._segment_log: list[int] = []
        self._bytes_sent = 0
        self._started: float | None = None
        self._finished: float | None = None

    @property
    def socket(self) -> socket.socket:
        return self._sock

    def send(self, message: bytes) -> SegmentPlan:
        """Send one application message, one send call per planned chunk."""
        if self._config is not None:
            plan = segment_message(message, self._config, self._rng)
        else:
            plan = SegmentPlan((len(message),), segmented=False)
        if self._started is None:
            self._started = time.perf_counter()
        sent = 0
        try:
            for chunk in iter_chunks(message, plan):
                self._sock.sendall(chunk)
                sent += 1
                self._segment_log.append(len(chunk))
                self._bytes_sent += len(chunk)
        except OSError as exc:
            raise TransportError(
                f"connection lost after {sent} chunks: {exc}", chunks_sent=sent
            ) from exc
        return plan

    def finish(self) -> TransferStats:
        """Signal end-of-stream and wait for the peer to drain and close;
        the clock stops when its EOF arrives."""
        if self._finished is None:
            try:
                self._sock.shutdown(socket.SHUT_WR)
                while self._sock.recv(4096):
                    pass
            except OSError as exc:
                raise TransportError(f"peer vanished before drain: {exc}") from exc
            self._finished = time.perf_counter()
        return self.stats()

    def stats(self) -> TransferStats:
        start = self._started if self._started is not None else 0.0
        end = self._finished if self._finished is not None else start
        return TransferStats(
            bytes_sent=self._bytes_sent,
            packets_sent=len(self._segment_log),
            wall_time=end - start,
            segment_log=tuple(self._segment_log),
        )

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "ShapedConnection":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_shaped_connection(
    address,
    config: SegmentationConfig | None = None,
    tuning: SocketTuning | None = None,
    timeout: float | None = 10.0,
    rng: random.Random | int | None = None,
) -> ShapedConnection:
    """Connect and apply per-socket tuning; nothing system-wide changes."""
    host, port = parse_address(address)
    if tuning is None:
        tuning = SocketTuning()
    if config is not None:
        tuning.validate_for_shaping()
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        _apply_tuning(sock, tuning)
        sock.settimeout(timeout)
        sock.connect((host, port))
        sock.settimeout(None)
    except ConfigurationError:
        sock.close()
        raise
    except OSError as exc:
        sock.close()
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    return ShapedConnection(sock, config, rng)


def run_receiver(
    port: int,
    expected_checksum: str | None = None,
    host: str = "127.0.0.1",
    timeout: float = 30.0,
    recv_buffer: int = DEFAULT_RECV_BUFFER,
    drain_pause_s: float = 0.0,
    listening: "threading.Event | None" = None,
    _result: list | None = None,
) -> TransferStats:
    """Accept one connection, drain it to EOF, and report byte count, wall
    time, and the payload digest. Shaping-agnostic by construction.

    With `drain_pause_s` > 0 the receiver acts as a bursty consumer: it
    empties the backlog, stalls for that long, and repeats. Stalls keep the
    sender blocked on its socket buffer, so buffer sizing becomes visible in
    sender wall time even over loopback."""
    if drain_pause_s < 0:
        raise ValueError("drain_pause_s must be >= 0")
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, recv_buffer)
        try:
            server.bind((host, port))
        except OSError as exc:
            raise TransportError(f"cannot bind {host}:{port}: {exc}") from exc
        server.listen(1)
        server.settimeout(timeout)
        if listening is not None:
            listening.set()
        try:
            conn, _ = server.accept()
        except socket.timeout as exc:
            raise TransportError(f"no connection within {timeout}s") from exc
    digest = hashlib.sha256()
    received = 0
    started = None
    eof = False
    with conn:
        conn.settimeout(timeout)
        while not eof:
            block = conn.recv(65536)
            if started is None:
                started = time.perf_counter()
            if not block:
                break
            if drain_pause_s == 0.0:
                digest.update(block)
                received += len(block)
                continue
            # Drain with bare recv calls so the backlog empties faster than
            # the sender refills it; hash only once the pipe runs dry, else
            # the stall below never triggers and pacing silently degrades.
            backlog = [block]
            while True:
                ready, _, _ = select.select([conn], [], [], 0)
                if not ready:
                    break
                block = conn.recv(65536)
                if not block:
                    eof = True
                    break
                backlog.append(block)
            for piece in backlog:
                digest.update(piece)
                received += len(piece)
            if not eof:
                time.sleep(drain_pause_s)
    wall = time.perf_counter() - (started if started is not None else time.perf_counter())
    checksum = digest.hexdigest()
    if expected_checksum is not None and checksum != expected_checksum:
        raise IntegrityError(
            f"digest mismatch: got {checksum[:12]}.., want {expected_checksum[:12]}.."
        )
    stats = TransferStats(
        bytes_sent=received, packets_sent=0, wall_time=wall, checksum=checksum
    )
    if _result is not None:
        _result.append(stats)
    return stats


def bound_port(host: str = "127.0.0.1") -> int:
    """Reserve an ephemeral port number."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.bind((host, 0))
        return probe.getsockname()[1]


def run_transfer_benchmark(
    file_bytes: int,
    config: SegmentationConfig | None,
    tuning: SocketTuning | None = None,
    repetitions: int = 10,
    host: str = "127.0.0.1",
    seed: int = 0,
    receiver_recv_buffer: int | None = None,
    receiver_pause_s: float = 0.0,
) -> list[TransferStats]:
    """Send a pseudo-random payload `repetitions` times over loopback,
    one fresh receiver thread per run, verifying the digest every time.

    `receiver_recv_buffer` and `receiver_pause_s` configure the consumer
    side; a small buffer plus a nonzero pause emulates a slow peer whose
    backpressure makes sender buffer sizing measurable."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if file_bytes < 1:
        raise ValueError("file_bytes must be >= 1")
    runs: list[TransferStats] = []
    for rep in range(repetitions):
        payload = random.Random(derive_seed(seed, "payload", rep)).randbytes(file_bytes)
        expected = hashlib.sha256(payload).hexdigest()
        port = bound_port(host)
        listening = threading.Event()
        result: list[TransferStats] = []
        if receiver_recv_buffer is not None:
            rx_buffer = receiver_recv_buffer
        elif tuning is not None and tuning.receive_buffer_bytes is not None:
            rx_buffer = tuning.receive_buffer_bytes
        else:
            rx_buffer = DEFAULT_RECV_BUFFER
        receiver = threading.Thread(
            target=run_receiver,
            args=(port,),
            kwargs={
                "host": host,
                "recv_buffer": rx_buffer,
                "drain_pause_s": receiver_pause_s,
                "listening": listening,
                "_result": result,
            },
            daemon=True,
        )
        receiver.start()
        if not listening.wait(timeout=10):
            raise TransportError("receiver did not come up")
        conn = open_shaped_connection(
            (host, port), config, tuning, rng=derive_seed(seed, "plan", rep)
        )
        with conn:
            conn.send(payload)
            stats = conn.finish()
        receiver.join(timeout=30)
        if receiver.is_alive() or not result:
            raise TransportError("receiver did not finish")
        got = result[0].checksum
        if got != expected:
            raise IntegrityError(
                f"run {rep}: digest mismatch: got {got[:12]}.., want {expected[:12]}.."
            )
        runs.append(
            TransferStats(
                bytes_sent=stats.bytes_sent,
                packets_sent=stats.packets_sent,
                wall_time=stats.wall_time,
                segment_log=stats.segment_log,
                checksum=got,
            )
        )
    return runs


def mean_wall_time(runs: Sequence[TransferStats]) -> float:
    if not runs:
        raise ValueError("no runs")
    return sum(r.wall_time for r in runs) / len(runs)
