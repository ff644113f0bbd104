"""Bit-exact timeline encoder/decoder for standard I2S, I2S TDM and TDM DSP
mode, with FSYNC generation, latency calculators, VCD export and
multi-channel WAV payload interchange.

Time base: one tick is half a BCLK period, so a bit slot spans two ticks.
Level arrays hold the line state during tick interval [t, t+1); the
driving side updates SD at slot starts, FSYNC half a slot earlier (on the
opposite clock edge), and the sampling side reads the level present just
before its own clock edge.  The half-slot FSYNC lead is what makes a
wrong-polarity decode come out shifted by one data bit against the frame
sync, and therefore detectable.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

LEAD_IN_SLOTS = 2  # idle bit slots before the first frame
MAX_DEVICES = 16
MAX_SAMPLE_RATE_HZ = 48000
FRAME_BITS_CHOICES = (16, 24, 32)
NO_DRIVER = -1


class BusMode(Enum):
    STANDARD_I2S = "standard-i2s"
    TDM_I2S = "tdm-i2s"
    TDM_DSP = "tdm-dsp"


class Polarity(Enum):
    SAMPLE_ON_RISING = "sample-on-rising"
    SAMPLE_ON_FALLING = "sample-on-falling"


class Alignment(Enum):
    ALIGNED = "aligned"
    ONE_BIT_DELAY = "one-bit-delay"


class FsyncStyle(Enum):
    PULSE = "pulse"
    CHANNEL_LENGTH = "channel-length"


class Role(Enum):
    MASTER = "master"
    SLAVE = "slave"


class FramingError(Exception):
    """Frame sync missing or frame truncated; carries any partial decode."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


@dataclass(frozen=True)
class BusConfig:
    mode: BusMode
    n_devices: int = 1
    frame_bits: int = 32
    sample_rate: int = 48000
    clk_div: int = 1
    polarity: Polarity = Polarity.SAMPLE_ON_RISING
    alignment: Alignment = Alignment.ALIGNED
    fsync_style: FsyncStyle = FsyncStyle.PULSE
    # both ends observe the same waveform; role only labels which one we are
    role: Role = Role.MASTER

    def __post_init__(self):
        if not 1 <= self.n_devices <= MAX_DEVICES:
            raise ValueError(f"n_devices {self.n_devices} outside 1..{MAX_DEVICES}")
        if self.frame_bits not in FRAME_BITS_CHOICES:
            raise ValueError(f"frame_bits must be one of {FRAME_BITS_CHOICES}")
        if not 0 < self.sample_rate <= MAX_SAMPLE_RATE_HZ:
            raise ValueError(f"sample_rate {self.sample_rate} outside (0, 48000]")
        if self.clk_div < 1:
            raise ValueError("clk_div must be >= 1")
        if self.mode is BusMode.STANDARD_I2S and self.n_devices != 1:
            raise ValueError("standard I2S carries exactly one device")

    @property
    def channel_bits(self) -> int:
        return self.frame_bits // 2

    @property
    def frame_slots(self) -> int:
        """Bit slots per sample period."""
        return self.n_devices * self.frame_bits

    @property
    def data_delay(self) -> int:
        return 1 if self.alignment is Alignment.ONE_BIT_DELAY else 0

    @property
    def idle_fsync(self) -> int:
        # I2S-style framing idles high so the first frame begins on a
        # falling edge; DSP mode idles low and asserts a pulse.
        return 0 if self.mode is BusMode.TDM_DSP else 1


@dataclass(frozen=True)
class FramePayload:
    device: int
    left: int
    right: int

    def validate(self, channel_bits: int) -> None:
        limit = 1 << channel_bits
        if not (0 <= self.left < limit and 0 <= self.right < limit):
            raise ValueError(
                f"device {self.device} payload exceeds {channel_bits} bits")


@dataclass
class Timeline:
    """Per-tick line levels: bclk, fsync, sd plus the driving device id."""

    bclk: np.ndarray
    fsync: np.ndarray
    sd: np.ndarray
    driver: np.ndarray

    @property
    def n_ticks(self) -> int:
        return len(self.bclk)

    def truncated(self, n_ticks: int) -> "Timeline":
        return Timeline(self.bclk[:n_ticks].copy(), self.fsync[:n_ticks].copy(),
                        self.sd[:n_ticks].copy(), self.driver[:n_ticks].copy())


def bclk_frequency(n_devices: int, frame_bits: int, sample_rate: float) -> float:
    """BCLK needed to move every device's frame each sample period."""
    if n_devices <= 0 or frame_bits <= 0 or sample_rate < 0:
        raise ValueError("n_devices and frame_bits must be positive, rate >= 0")
    return n_devices * frame_bits * sample_rate


def latency_tdm(n_bits: int, n_devices: int, tclk: float = 1.0) -> float:
    """Frame latency of a source on the TDM I2S bus: (n/2)*(K+1)*Tclk."""
    if n_bits % 2 or n_bits <= 0:
        raise ValueError("n_bits must be positive and even")
    if n_devices < 1:
        raise ValueError("need at least one device")
    return (n_bits // 2) * (n_devices + 1) * tclk

def latency_dsp(n_bits: int, tclk: float = 1.0) -> float:
    """DSP-mode frame latency: a fixed n_bits*Tclk, independent of K."""
    if n_bits <= 0:
        raise ValueError("n_bits must be positive")
    return n_bits * tclk


def _slot_layout(config: BusConfig, payloads: list[FramePayload]):
    """Per-slot (sd, driver) for one sample period, before the data delay."""
    n, k, K = config.frame_bits, config.channel_bits, config.n_devices
    sd = np.zeros(config.frame_slots, dtype=np.int8)
    drv = np.full(config.frame_slots, NO_DRIVER, dtype=np.int16)
    by_dev = {p.device: p for p in payloads}
    for d in range(K):
        p = by_dev[d]
        if config.mode is BusMode.TDM_DSP:
            base = d * n
            for j in range(k):
                sd[base + j] = (p.left >> (k - 1 - j)) & 1
                sd[base + k + j] = (p.right >> (k - 1 - j)) & 1
            drv[base:base + n] = d
        else:
            lbase = d * k
            rbase = K * k + d * k
            for j in range(k):
                sd[lbase + j] = (p.left >> (k - 1 - j)) & 1
                sd[rbase + j] = (p.right >> (k - 1 - j)) & 1
            drv[lbase:lbase + k] = d
            drv[rbase:rbase + k] = d
    return sd, drv


def _fsync_period(config: BusConfig) -> np.ndarray:
    fs = np.zeros(config.frame_slots, dtype=np.int8)
    if config.mode is BusMode.TDM_DSP:
        width = 1 if config.fsync_style is FsyncStyle.PULSE else config.channel_bits
        fs[:width] = 1
    else:
        # frame-select: low across the left block, high across the right
        fs[config.n_devices * config.channel_bits:] = 1
    return fs


def encode(config: BusConfig, frames: list[list[FramePayload]]) -> Timeline:
    """Serialize per-period payload sets into a bit-exact timeline.

    ``frames[p]`` holds one payload per device for sample period ``p``.
    MSB first; SD changes on the driving edge; FSYNC per mode and style.
    """
    if not frames:
        raise ValueError("need at least one sample period")
    for period in frames:
        if len(period) != config.n_devices:
            raise ValueError("payload count must equal n_devices")
        if sorted(p.device for p in period) != list(range(config.n_devices)):
            raise ValueError("payload device ids must be 0..K-1")
        for p in period:
            p.validate(config.channel_bits)

    delay = config.data_delay
    total_slots = LEAD_IN_SLOTS + len(frames) * config.frame_slots + delay
    sd = np.zeros(total_slots, dtype=np.int8)
    fsync = np.full(total_slots, config.idle_fsync, dtype=np.int8)
    driver = np.full(total_slots, NO_DRIVER, dtype=np.int16)
    for p, period in enumerate(frames):
        start = LEAD_IN_SLOTS + p * config.frame_slots
        fsync[start:start + config.frame_slots] = _fsync_period(config)
        slot_sd, slot_drv = _slot_layout(config, period)
        sd[start + delay:start + delay + config.frame_slots] = slot_sd
        driver[start + delay:start + delay + config.frame_slots] = slot_drv

    ticks = np.arange(2 * total_slots)
    if config.polarity is Polarity.SAMPLE_ON_RISING:
        bclk = (ticks % 2).astype(np.int8)          # drive low phase, rise mid-slot
    else:
        bclk = ((ticks + 1) % 2).astype(np.int8)
    # FSYNC is driven on the opposite half-edge, half a slot ahead of SD.
    fsync_ticks = np.repeat(fsync, 2)
    fsync_ticks = np.append(fsync_ticks[1:], fsync_ticks[-1])
    return Timeline(bclk, fsync_ticks, np.repeat(sd, 2), np.repeat(driver, 2))


def _sampled(timeline: Timeline, config: BusConfig):
    """Line levels captured at each sampling edge (setup values)."""
    level_after = 1 if config.polarity is Polarity.SAMPLE_ON_RISING else 0
    b = timeline.bclk
    edges = np.nonzero(b[1:] != b[:-1])[0] + 1
    edges = edges[b[edges] == level_after]
    edges = edges[edges >= 1]
    return (timeline.sd[edges - 1], timeline.fsync[edges - 1],
            timeline.driver[edges - 1])


def _find_frame_start(fsync_bits: np.ndarray, config: BusConfig) -> int:
    if config.mode is BusMode.TDM_DSP:
        hits = np.nonzero((fsync_bits[1:] == 1) & (fsync_bits[:-1] == 0))[0] + 1
    else:
        hits = np.nonzero((fsync_bits[1:] == 0) & (fsync_bits[:-1] == 1))[0] + 1
    if len(hits) == 0:
        raise FramingError("frame sync never asserted")
    return int(hits[0])


def _bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def decode(timeline: Timeline, config: BusConfig) -> list[list[FramePayload]]:
    """Recover the payload sets; exact inverse of ``encode``.

    Raises FramingError when FSYNC never appears or when the timeline
    ends inside a frame (the complete periods ride on ``.partial``).
    """
    sd_bits, fs_bits, _ = _sampled(timeline, config)
    start = _find_frame_start(fs_bits, config)
    n, k, K = config.frame_bits, config.channel_bits, config.n_devices
    delay = config.data_delay
    per = config.frame_slots
    available = len(sd_bits) - start - delay
    complete = max(available // per, 0)
    # data of period p lives in slots [start + delay + p*per, ... + per)
    tail = available - complete * per

    periods = []
    for p in range(complete):
        base = start + delay + p * per
        window = sd_bits[base:base + per]
        payloads = []
        for d in range(K):
            if config.mode is BusMode.TDM_DSP:
                left = _bits_to_int(window[d * n:d * n + k])
                right = _bits_to_int(window[d * n + k:d * n + n])
            else:
                left = _bits_to_int(window[d * k:(d + 1) * k])
                right = _bits_to_int(window[K * k + d * k:K * k + (d + 1) * k])
            payloads.append(FramePayload(d, left, right))
        periods.append(payloads)

    if complete == 0:
        raise FramingError("timeline ends before one complete frame", partial=[])
    if tail > 0:
        raise FramingError(f"timeline truncated {tail} bits into a frame",
                           partial=periods)
    return periods


def measure_latency(timeline: Timeline, config: BusConfig) -> int:
    """First-sample-complete latency in Tclk units, read off the timeline.

    Measured from the start of the first frame's data slots to the end of
    the slot in which device 0 finishes its frame (left and right).
    """
    sd_bits, fs_bits, drv_bits = _sampled(timeline, config)
    start = _find_frame_start(fs_bits, config)
    base = start + config.data_delay
    window = drv_bits[base:base + config.frame_slots]
    if len(window) < config.frame_slots:
        raise FramingError("timeline ends before the first frame completes")
    owned = np.nonzero(window == 0)[0]
    if len(owned) == 0:
        raise FramingError("device 0 never drives the line")
    return int(owned[-1]) + 1


# -- waveform / payload interchange ------------------------------------------


def write_vcd(timeline: Timeline, path) -> None:
    """Value-change dump of the timeline (1 tick = half BCLK = 1 time unit)."""
    signals = [("bclk", 1, "b", timeline.bclk),
               ("fsync", 1, "f", timeline.fsync),
               ("sd", 1, "s", timeline.sd),
               ("driver", 8, "d", timeline.driver)]
    lines = ["$timescale 1ns $end", "$scope module audio_bus $end"]
    for name, width, ident, _ in signals:
        lines.append(f"$var wire {width} {ident} {name} $end")
    lines += ["$upscope $end", "$enddefinitions $end"]

    def fmt(ident, width, value):
        if width == 1:
            return f"{int(value)}{ident}"
        return f"b{int(value) & 0xFF:08b} {ident}"

    last = {}
    for t in range(timeline.n_ticks):
        changes = []
        for name, width, ident, arr in signals:
            v = int(arr[t])
            if last.get(ident) != v:
                changes.append(fmt(ident, width, v))
                last[ident] = v
        if changes or t == 0:
            lines.append(f"#{t}")
            lines.extend(changes)
    lines.append(f"#{timeline.n_ticks}")
    Path(path).write_text("\n".join(lines) + "\n")


def payloads_to_wav(path, frames: list[list[FramePayload]], config: BusConfig) -> None:
    """Standard multi-channel 16-bit WAV: channels dev0.L, dev0.R, dev1.L, ...

    Channel words narrower than 16 bits are stored sign-extended; the
    round trip back through ``wav_to_payloads`` is bit-exact.
    """
    k = config.channel_bits
    K = config.n_devices
    data = np.zeros((len(frames), 2 * K), dtype=np.int16)
    for p, period in enumerate(frames):
        for payload in period:
            payload.validate(k)
            data[p, 2 * payload.device] = _sign_extend(payload.left, k)
            data[p, 2 * payload.device + 1] = _sign_extend(payload.right, k)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(2 * K)
        w.setsampwidth(2)
        w.setframerate(config.sample_rate)
        w.writeframes(data.astype("<i2").tobytes())


def wav_to_payloads(path, config: BusConfig) -> list[list[FramePayload]]:
    k = config.channel_bits
    K = config.n_devices
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 2 * K:
            raise ValueError(f"expected {2 * K} channels, file has {w.getnchannels()}")
        if w.getsampwidth() != 2:
            raise ValueError("expected 16-bit PCM")
        raw = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    data = raw.reshape(-1, 2 * K)
    mask = (1 << k) - 1
    frames = []
    for row in data:
        frames.append([FramePayload(d, int(row[2 * d]) & mask,
                                    int(row[2 * d + 1]) & mask)
                       for d in range(K)])
    return frames


def _sign_extend(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    if value & (1 << (bits - 1)):
        value -= 1 << bits
    return value
