"""Cycle-level model of the 16-bank word-interleaved shared memory.

Addresses are 32-bit word addresses; bank(addr) = addr mod 16.  The
accelerator sees eight 32-bit ports: ports 0-3 read, ports 4-7 write.
Requests hitting pairwise-distinct banks all complete in their cycle;
same-bank collisions complete only the lowest-numbered port, the rest are
rejected for retry and each rejection costs one stall cycle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fixedpoint import DataType, FixedComplex, to_signed, to_unsigned

N_BANKS = 16
N_PORTS = 8
READ_PORTS = range(0, 4)
WRITE_PORTS = range(4, 8)
DEFAULT_TOTAL_WORDS = 65536  # 256 kB

FULL_STROBE = 0xF
LO_HALF_STROBE = 0x3
HI_HALF_STROBE = 0xC


class MemoryModelError(Exception):
    """Address or capacity violation against the memory model."""


def bank_of(address: int) -> int:
    return address % N_BANKS


@dataclass(frozen=True)
class Request:
    """One port transaction for a single cycle."""

    port: int
    address: int
    write: bool = False
    data: int = 0          # 32-bit word for writes
    strobe: int = FULL_STROBE  # byte lanes, writes only


@dataclass
class AccessResult:
    read_data: dict[int, int]   # port -> word, completed reads
    completed: list[Request]
    rejected: list[Request]
    conflicts: int


@dataclass
class CycleStats:
    """Cycle accounting for one accelerator run.

    total = butterfly + reorder + stall + overhead; conflicts == stall
    (one stall per rejected request).  stage_conflicts splits out any
    conflict seen during butterfly stages (expected to stay zero).
    """

    total_cycles: int = 0
    butterfly_cycles: int = 0
    reorder_cycles: int = 0
    stall_cycles: int = 0
    overhead_cycles: int = 0
    conflicts: int = 0
    stage_conflicts: int = 0

    def as_dict(self) -> dict:
        return {
            "total_cycles": self.total_cycles,
            "butterfly_cycles": self.butterfly_cycles,
            "reorder_cycles": self.reorder_cycles,
            "stall_cycles": self.stall_cycles,
            "overhead_cycles": self.overhead_cycles,
            "conflicts": self.conflicts,
            "stage_conflicts": self.stage_conflicts,
        }


_STROBE_MASKS = {
    0x1: 0x000000FF, 0x2: 0x0000FF00, 0x4: 0x00FF0000, 0x8: 0xFF000000,
    0x3: 0x0000FFFF, 0xC: 0xFFFF0000, 0xF: 0xFFFFFFFF,
}


class BankedMemory:
    """16 word-interleaved banks behind the 8-port accelerator interface."""

    def __init__(self, total_words: int = DEFAULT_TOTAL_WORDS, log_accesses: bool = False):
        if total_words <= 0 or total_words % N_BANKS:
            raise ValueError("total_words must be a positive multiple of 16")
        self.total_words = total_words
        self.words = np.zeros(total_words, dtype=np.uint32)
        self.log_accesses = log_accesses
        self.access_log: list[tuple[int, int, int, str]] = []  # (cycle, port, bank, kind)

    # -- raw word access (test fixtures, image I/O; not cycle-accounted) --

    def read_word(self, address: int) -> int:
        self._check_address(address)
        return int(self.words[address])

    def write_word(self, address: int, value: int, strobe: int = FULL_STROBE) -> None:
        self._check_address(address)
        mask = _STROBE_MASKS[strobe]
        old = int(self.words[address])
        self.words[address] = (old & ~mask) | (value & mask)

    def _check_address(self, address: int) -> None:
        if not (0 <= address < self.total_words):
            raise MemoryModelError(f"word address {address} outside capacity {self.total_words}")

    # -- the per-cycle port interface --

    def access(self, cycle: int, requests: list[Request]) -> AccessResult:
        """Arbitrate one cycle of up to 8 port requests.

        Lowest port wins a contended bank; every rejected request counts
        one conflict.  Writes of completed requests are applied in port
        order within the cycle.
        """
        if len(requests) > N_PORTS:
            raise ValueError(f"{len(requests)} requests exceed {N_PORTS} ports")
        seen_ports = set()
        for r in requests:
            if r.port in seen_ports:
                raise ValueError(f"port {r.port} issued twice in one cycle")
            seen_ports.add(r.port)
            if r.write and r.port not in WRITE_PORTS:
                raise ValueError(f"write on read port {r.port}")
            if not r.write and r.port not in READ_PORTS:
                raise ValueError(f"read on write port {r.port}")
            self._check_address(r.address)

        winners: dict[int, Request] = {}
        rejected = []
        for r in sorted(requests, key=lambda r: r.port):
            b = bank_of(r.address)
            if b in winners:
                rejected.append(r)
            else:
                winners[b] = r

        read_data: dict[int, int] = {}
        completed = []
        for r in sorted(winners.values(), key=lambda r: r.port):
            if r.write:
                self.write_word(r.address, r.data, r.strobe)
            else:
                read_data[r.port] = self.read_word(r.address)
            completed.append(r)
            if self.log_accesses:
                self.access_log.append(
                    (cycle, r.port, bank_of(r.address), "W" if r.write else "R"))
        return AccessResult(read_data, completed, rejected, len(rejected))


def bandwidth_bytes_per_s(frequency_hz: float) -> float:
    """Peak delivery of the banked memory: 16 banks x 4 bytes per cycle."""
    if frequency_hz <= 0:
        raise ValueError("frequency must be positive")
    return N_BANKS * 4 * frequency_hz


# -- sample packing ---------------------------------------------------------
#
# C64: one sample = 2 words (re word then im word).
# C32: one sample = 1 word, re in the low half, im in the high half.
# C16: two samples per word, sample 2i in the low half-word; within a
#      half-word re is the low byte, im the high byte.


def words_per_samples(dtype: DataType, n_samples: int) -> int:
    if dtype is DataType.C64:
        return 2 * n_samples
    if dtype is DataType.C32:
        return n_samples
    if n_samples % 2:
        raise ValueError("C16 arrays must have an even sample count")
    return n_samples // 2


def pack_samples(samples: list[FixedComplex], dtype: DataType) -> list[int]:
    for s in samples:
        if s.dtype is not dtype:
            raise ValueError("sample dtype mismatch")
    w = dtype.part_width
    words = []
    if dtype is DataType.C64:
        for s in samples:
            words.append(to_unsigned(s.re, 32))
            words.append(to_unsigned(s.im, 32))
    elif dtype is DataType.C32:
        for s in samples:
            words.append(to_unsigned(s.im, 16) << 16 | to_unsigned(s.re, 16))
    else:
        if len(samples) % 2:
            raise ValueError("C16 arrays must have an even sample count")
        for lo, hi in zip(samples[::2], samples[1::2]):
            words.append(to_unsigned(hi.im, 8) << 24 | to_unsigned(hi.re, 8) << 16
                         | to_unsigned(lo.im, 8) << 8 | to_unsigned(lo.re, 8))
    return words


def unpack_samples(words: list[int], dtype: DataType, n_samples: int) -> list[FixedComplex]:
    samples = []
    if dtype is DataType.C64:
        for i in range(n_samples):
            samples.append(FixedComplex(to_signed(words[2 * i], 32),
                                        to_signed(words[2 * i + 1], 32), dtype))
    elif dtype is DataType.C32:
        for i in range(n_samples):
            word = words[i]
            samples.append(FixedComplex(to_signed(word, 16),
                                        to_signed(word >> 16, 16), dtype))
    else:
        for i in range(n_samples):
            half = (words[i // 2] >> (16 * (i % 2))) & 0xFFFF
            samples.append(FixedComplex(to_signed(half, 8),
                                        to_signed(half >> 8, 8), dtype))
    return samples


def load_samples(memory: BankedMemory, base_address: int,
                 samples: list[FixedComplex], dtype: DataType) -> None:
    """Write a sample array into memory, bit-exact per the packing rules."""
    words = pack_samples(samples, dtype)
    if base_address < 0 or base_address + len(words) > memory.total_words:
        raise MemoryModelError(
            f"{len(words)} words at base {base_address} exceed capacity")
    for i, word in enumerate(words):
        memory.write_word(base_address + i, word)


def read_samples(memory: BankedMemory, base_address: int,
                 n_samples: int, dtype: DataType) -> list[FixedComplex]:
    n_words = words_per_samples(dtype, n_samples)
    if base_address < 0 or base_address + n_words > memory.total_words:
        raise MemoryModelError("sample array exceeds capacity")
    words = [memory.read_word(base_address + i) for i in range(n_words)]
    return unpack_samples(words, dtype, n_samples)


# -- image import/export ----------------------------------------------------

def export_image(memory: BankedMemory, path: str | Path, dtype: DataType,
                 n_points: int, base_address: int) -> None:
    """Raw little-endian 32-bit words plus a JSON sidecar descriptor."""
    path = Path(path)
    memory.words.astype("<u4").tofile(path)
    sidecar = {
        "dtype": dtype.name,
        "n_points": n_points,
        "base_address": base_address,
        "total_words": memory.total_words,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def import_image(path: str | Path) -> tuple[BankedMemory, dict]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    words = np.fromfile(path, dtype="<u4")
    if len(words) != sidecar["total_words"]:
        raise MemoryModelError("image size disagrees with its descriptor")
    memory = BankedMemory(total_words=len(words))
    memory.words[:] = words
    sidecar["dtype"] = DataType.from_tag(sidecar["dtype"])
    return memory, sidecar
