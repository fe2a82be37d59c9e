"""Signal delivery: the in-process loopback wire and the UDP HiL protocol.

Frame layout (10 bytes, big-endian)::

    0-1  magic   'H' 'L'
    2    version 0x01
    3    type    0x01 SENSOR | 0x02 ACTUATOR | 0x03 SYNC | 0x04 BYE
    4-7  seq     uint32 (SYNC: base step in microseconds)
    8    channel
    9    code    raw 8-bit sample
"""
from __future__ import annotations

import logging
import os
import socket
import struct
import threading
import time
from dataclasses import dataclass
from enum import IntEnum

from .vdevice import VirtualAddaCard, dequantize, quantize

log = logging.getLogger(__name__)

MAGIC = b"HL"
VERSION = 0x01
FRAME_LEN = 10
DEFAULT_PORT = 47055
_FMT = struct.Struct(">2sBBIBB")
assert _FMT.size == FRAME_LEN


def default_port() -> int:
    return int(os.environ.get("HILSIM_PORT", DEFAULT_PORT))


class MsgType(IntEnum):
    SENSOR = 0x01
    ACTUATOR = 0x02
    SYNC = 0x03
    BYE = 0x04


class FrameError(ValueError):
    pass


class BadMagic(FrameError):
    pass


class BadVersion(FrameError):
    pass


class BadLength(FrameError):
    pass


class BadType(FrameError):
    pass


@dataclass(frozen=True)
class HilFrame:
    msg_type: MsgType
    seq: int
    channel: int = 0
    code: int = 0


def encode_frame(f: HilFrame) -> bytes:
    msg_type = MsgType(f.msg_type)
    if not 0 <= f.seq <= 0xFFFFFFFF:
        raise ValueError(f"seq out of range: {f.seq}")
    if not 0 <= f.channel <= 0xFF or not 0 <= f.code <= 0xFF:
        raise ValueError(f"channel/code must fit one byte: {f.channel}, {f.code}")
    return _FMT.pack(MAGIC, VERSION, msg_type, f.seq, f.channel, f.code)


def decode_frame(data: bytes) -> HilFrame:
    if len(data) != FRAME_LEN:
        raise BadLength(f"frame is {len(data)} bytes, expected {FRAME_LEN}")
    magic, version, msg_type, seq, channel, code = _FMT.unpack(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    try:
        msg_type = MsgType(msg_type)
    except ValueError:
        raise BadType(f"unknown message type 0x{msg_type:02x}") from None
    return HilFrame(msg_type, seq, channel, code)


class Wire:
    """Hardwired DAC -> ADC pairs on one card (the loopback of real-time mode)."""

    def __init__(self, card: VirtualAddaCard, pairs: dict[int, int] | None = None):
        self.card = card
        self.pairs = dict(pairs) if pairs is not None else {0: 0, 1: 1}
        for dac, adc in self.pairs.items():
            card.connect(dac, adc)

    def voltage(self, adc_channel: int) -> float:
        return self.card.wire_V(adc_channel)


@dataclass(frozen=True)
class HilEndpointConfig:
    bind_host: str = "127.0.0.1"
    bind_port: int = 0
    peer_host: str = "127.0.0.1"
    peer_port: int | None = None  # None: HILSIM_PORT or 47055
    step_timeout_ms: int | None = None

    def __post_init__(self):
        if self.step_timeout_ms is not None and self.step_timeout_ms <= 0:
            raise ValueError("step_timeout_ms must be > 0")

    def timeout_s(self, base_step_s: float) -> float:
        ms = self.step_timeout_ms if self.step_timeout_ms is not None else base_step_s * 1e3
        return ms / 1e3


class HilClient:
    """Framework side of the protocol: one SENSOR out, one matching ACTUATOR back."""

    def __init__(self, cfg: HilEndpointConfig, base_step_s: float, initial_code: int = 0):
        self.cfg = cfg
        self.base_step_s = base_step_s
        self.timeout_s = cfg.timeout_s(base_step_s)
        self.peer = (cfg.peer_host, cfg.peer_port if cfg.peer_port is not None else default_port())
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((cfg.bind_host, cfg.bind_port))
        self.u_code = initial_code
        self._last_seq = -1
        self.discarded = 0

    def _send(self, frame: HilFrame):
        self.sock.sendto(encode_frame(frame), self.peer)

    def sync(self):
        self._send(HilFrame(MsgType.SYNC, round(self.base_step_s * 1e6)))

    def bye(self):
        self._send(HilFrame(MsgType.BYE, 0))

    def round_trip(self, y_code: int, seq: int, channel: int = 1):
        """Returns ``(u_code, timed_out)``; a timeout holds the previous code."""
        if seq <= self._last_seq:
            raise ValueError(f"seq must increase: {seq} after {self._last_seq}")
        self._last_seq = seq
        self._send(HilFrame(MsgType.SENSOR, seq, channel, int(y_code)))
        deadline = time.monotonic() + self.timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return self.u_code, True
            self.sock.settimeout(remaining)
            try:
                data, _ = self.sock.recvfrom(64)
            except socket.timeout:
                return self.u_code, True
            try:
                frame = decode_frame(data)
            except FrameError as exc:
                log.debug("dropping bad datagram: %s", exc)
                self.discarded += 1
                continue
            if frame.msg_type is MsgType.ACTUATOR and frame.seq == seq:
                self.u_code = frame.code
                return self.u_code, False
            # stale or duplicate reply
            self.discarded += 1

    def close(self):
        self.sock.close()

    def __enter__(self):
        self.sync()
        return self

    def __exit__(self, *exc):
        try:
            self.bye()
        finally:
            self.close()


def hil_round_trip(endpoint: HilClient, y_code: int, seq: int):
    return endpoint.round_trip(y_code, seq)


# ------------------------------------------------------------------ peer side


class EchoLaw:
    def reset(self, base_step_s: float):
        pass

    def step(self, y_code: int, seq: int) -> int:
        return y_code


class ControllerLaw:
    """Wraps an in-process controller so it speaks codes.

    ``seq`` is the framework's base-step index, which gives the peer the
    simulation time for its own reference generator.
    """

    def __init__(self, make_controller, reference, card_cfg):
        self.make_controller = make_controller
        self.reference = reference
        self.card_cfg = card_cfg
        self.base_step_s = None
        self.controller = None

    def reset(self, base_step_s: float):
        self.base_step_s = base_step_s
        self.controller = self.make_controller()

    def step(self, y_code: int, seq: int) -> int:
        if self.controller is None:
            raise RuntimeError("SENSOR before SYNC")
        t = seq * self.base_step_s
        u = self.controller.step(self.reference(t), dequantize(y_code, self.card_cfg))
        return quantize(u, self.card_cfg)


class HilPeer:
    """Reference external controller: answers SENSOR frames with ACTUATOR frames."""

    def __init__(self, law, host: str = "127.0.0.1", port: int | None = None):
        self.law = law
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, default_port() if port is None else port))
        self.address = self.sock.getsockname()
        self._stop = threading.Event()
        self._thread = None
        self.sessions = 0
        self.frames_in = 0

    def serve(self, max_sessions: int | None = None, poll_s: float = 0.1):
        last_seq = -1
        last_reply = None
        self.sock.settimeout(poll_s)
        while not self._stop.is_set():
            try:
                data, addr = self.sock.recvfrom(64)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                frame = decode_frame(data)
            except FrameError as exc:
                log.warning("peer dropping bad datagram from %s: %s", addr, exc)
                continue
            self.frames_in += 1
            if frame.msg_type is MsgType.SYNC:
                self.law.reset(frame.seq / 1e6)
                last_seq, last_reply = -1, None
            elif frame.msg_type is MsgType.SENSOR:
                if frame.seq == last_seq and last_reply is not None:
                    self.sock.sendto(last_reply, addr)
                    continue
                if frame.seq < last_seq:
                    continue
                code = int(self.law.step(frame.code, frame.seq))
                last_seq = frame.seq
                last_reply = encode_frame(HilFrame(MsgType.ACTUATOR, frame.seq, 0, code))
                self.sock.sendto(last_reply, addr)
            elif frame.msg_type is MsgType.BYE:
                self.sessions += 1
                if max_sessions is not None and self.sessions >= max_sessions:
                    break

    def start(self, **kw):
        self._thread = threading.Thread(target=self.serve, kwargs=kw, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self.sock.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
