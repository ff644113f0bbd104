"""Radix-2 fixed-point FFT: twiddle storage, reference oracle and the
cycle-accurate executor that drives stage/reorder schedules against the
banked memory.

Stages walk natural-order data with decreasing half-spans and leave a
bit-reversed spectrum; the final reorder pass restores natural order.
Every butterfly in block ``c`` of stage ``s`` uses twiddle exponent
``bit_reverse_index(c, s) * half_span``, which is what makes the
decomposition exact (checked against the oracle down to the last stage).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fixedpoint import (DataType, FixedComplex, OverflowFlag, ScalingPolicy,
                         butterfly, dequantize, quantize)
from .membank import (BankedMemory, CycleStats, Request, load_samples,
                      pack_samples, read_samples, unpack_samples,
                      words_per_samples)
from .schedule import (REGISTER_CAPACITY, bit_reverse_index, schedule_reorder,
                       schedule_stage)


class ConfigurationError(ValueError):
    """Run configuration the model rejects (size, alignment, schema...)."""


MIN_POINTS = 8
BASE_ALIGN_WORDS = 4


# -- twiddle storage ----------------------------------------------------------


@dataclass
class TwiddleTable:
    """One lookup table per data type, sized for that type's largest FFT.

    Entry k holds exp(-2*pi*i*k/n_max) quantized to the data type; smaller
    transforms stride through the same table.  Quantization is
    round-to-nearest with a magnitude fix-up: entries that round outside
    the unit circle are nudged toward zero (minimal-error component) so
    that |entry| <= 1.0 always holds.
    """

    dtype: DataType
    n_max: int
    entries: list[FixedComplex]

    @classmethod
    def build(cls, dtype: DataType) -> "TwiddleTable":
        n_max = dtype.max_points
        scale = dtype.scale
        entries = []
        for k in range(n_max // 2):
            z = cmath.exp(-2j * cmath.pi * k / n_max)
            q = quantize(z, dtype)
            re, im = q.re, q.im
            while re * re + im * im > scale * scale:
                candidates = []
                if re:
                    candidates.append((re - (1 if re > 0 else -1), im))
                if im:
                    candidates.append((re, im - (1 if im > 0 else -1)))
                if re and im:
                    candidates.append((re - (1 if re > 0 else -1),
                                       im - (1 if im > 0 else -1)))
                ok = [c for c in candidates
                      if c[0] * c[0] + c[1] * c[1] <= scale * scale]
                pool = ok or candidates
                re, im = min(pool, key=lambda c: (c[0] - z.real * scale) ** 2
                             + (c[1] - z.imag * scale) ** 2)
            entries.append(FixedComplex(re, im, dtype))
        return cls(dtype, n_max, entries)


@lru_cache(maxsize=None)
def twiddle_table(dtype: DataType) -> TwiddleTable:
    return TwiddleTable.build(dtype)


def twiddle_lookup(table: TwiddleTable, n_points: int, k: int) -> FixedComplex:
    """W_n^k from the shared table; one table serves all sizes by stride."""
    if n_points > table.n_max:
        raise ValueError(f"{n_points} points exceed table size {table.n_max}")
    if not 0 <= k < n_points // 2:
        raise ValueError(f"twiddle exponent {k} out of range for {n_points} points")
    return table.entries[k * (table.n_max // n_points)]


# -- double-precision reference oracle ---------------------------------------


def _check_power_of_two(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")


def dft_direct(x) -> np.ndarray:
    """O(N^2) direct summation; the trusted ground truth for N <= 256."""
    x = np.asarray(x, dtype=np.complex128)
    _check_power_of_two(len(x))
    n = len(x)
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x


def fft_recursive(x) -> np.ndarray:
    """Separately-coded recursive radix-2 FFT; must agree with dft_direct."""
    x = np.asarray(x, dtype=np.complex128)
    _check_power_of_two(len(x))

    def rec(v):
        n = len(v)
        if n == 1:
            return v
        even = rec(v[::2])
        odd = rec(v[1::2])
        tw = np.exp(-2j * np.pi * np.arange(n // 2) / n)
        half = tw * odd
        return np.concatenate([even + half, even - half])

    return rec(x)


def fft_reference(x) -> np.ndarray:
    """Exact DFT: direct summation up to 256 points, recursive above."""
    x = np.asarray(x, dtype=np.complex128)
    _check_power_of_two(len(x))
    return dft_direct(x) if len(x) <= 256 else fft_recursive(x)


def spectrum_snr_db(reference, measured) -> float:
    """10*log10(|ref|^2 / |ref - measured|^2) over a whole spectrum."""
    reference = np.asarray(reference, dtype=np.complex128)
    measured = np.asarray(measured, dtype=np.complex128)
    err = np.sum(np.abs(reference - measured) ** 2)
    sig = np.sum(np.abs(reference) ** 2)
    if err == 0:
        return math.inf
    if sig == 0:
        return -math.inf
    return 10.0 * math.log10(sig / err)


# -- the accelerator run ------------------------------------------------------


@dataclass(frozen=True)
class FftJob:
    n_points: int
    dtype: DataType
    base_address: int = 0
    scaling: ScalingPolicy = ScalingPolicy.DIVIDE_BY_TWO_PER_STAGE

    def validate(self, memory: BankedMemory) -> None:
        n = self.n_points
        if n < MIN_POINTS or n & (n - 1):
            raise ConfigurationError(f"n_points {n} must be a power of two >= {MIN_POINTS}")
        if n > self.dtype.max_points:
            raise ConfigurationError(
                f"{n} points exceed the {self.dtype.name} limit of {self.dtype.max_points}")
        if self.base_address % BASE_ALIGN_WORDS:
            raise ConfigurationError(
                f"base_address {self.base_address} not {BASE_ALIGN_WORDS}-word aligned")
        end = self.base_address + words_per_samples(self.dtype, n)
        if self.base_address < 0 or end > memory.total_words:
            raise ConfigurationError("sample array does not fit in memory")


@dataclass
class FftResultSummary:
    job: FftJob
    stats: CycleStats
    overflow: bool
    scaling_stages: int   # spectrum is DFT / 2**scaling_stages


def _issue(memory, cycle, requests, stats, in_stage_phase):
    """One port cycle plus solo retry of every rejected request.

    Each rejection stalls exactly one cycle (retried alone, in port
    order), which is what keeps conflicts == stall_cycles.
    Returns (read_data, extra_cycles).
    """
    result = memory.access(cycle, requests)
    data = dict(result.read_data)
    extra = 0
    for req in sorted(result.rejected, key=lambda r: r.port):
        extra += 1
        solo = memory.access(cycle + extra, [req])
        data.update(solo.read_data)
    stats.conflicts += result.conflicts
    stats.stall_cycles += result.conflicts
    if in_stage_phase:
        stats.stage_conflicts += result.conflicts
    return data, extra


class _RegisterFile:
    """Sample staging around the butterfly unit, capacity-checked."""

    def __init__(self, dtype):
        self.capacity = REGISTER_CAPACITY[dtype]
        self.samples: dict[int, FixedComplex] = {}

    def insert(self, index, value):
        self.samples[index] = value

    def take(self, index):
        return self.samples.pop(index)

    def check(self, what):
        if len(self.samples) > self.capacity:
            raise AssertionError(
                f"{what} register overflow: {len(self.samples)} > {self.capacity}")


def _run_stage(memory, job, table, stage, stats, flag, cycle):
    sched = schedule_stage(job.n_points, job.dtype, stage)
    dtype, base = job.dtype, job.base_address
    inregs, outregs = _RegisterFile(dtype), _RegisterFile(dtype)
    for entry in sched.cycles:
        for ia, ib, exp in entry.butterflies:
            a = inregs.take(ia)
            b = inregs.take(ib)
            w = twiddle_lookup(table, job.n_points, exp)
            out0, out1 = butterfly(a, b, w, job.scaling, flag)
            outregs.insert(ia, out0)
            outregs.insert(ib, out1)
        requests = [Request(p, base + addr) for p, addr in enumerate(entry.reads)]
        if entry.writes:
            first = entry.writes[0]
            group = [outregs.take(i) for i in _group_samples(first, dtype)]
            words = pack_samples(group, dtype)
            requests += [Request(4 + p, base + addr, write=True, data=word)
                         for p, (addr, word) in enumerate(zip(entry.writes, words))]
        data, extra = _issue(memory, cycle, requests, stats, in_stage_phase=True)
        if entry.reads:
            stats.butterfly_cycles += 1
            words = [data[p] for p in range(len(entry.reads))]
            indices = _group_samples(entry.reads[0], dtype)
            for i, s in zip(indices, unpack_samples(words, dtype, len(indices))):
                inregs.insert(i, s)
        else:
            stats.overhead_cycles += 1
        inregs.check("input")
        outregs.check("output")
        cycle += 1 + extra
    return cycle


def _group_samples(first_word: int, dtype: DataType) -> range:
    """Sample indices held by the 4-word group starting at ``first_word``."""
    if dtype is DataType.C64:
        start = first_word // 2
        return range(start, start + 2)
    if dtype is DataType.C32:
        return range(first_word, first_word + 4)
    return range(2 * first_word, 2 * first_word + 8)


def _run_reorder(memory, job, stats, cycle):
    sched = schedule_reorder(job.n_points, job.dtype)
    dtype, base, n = job.dtype, job.base_address, job.n_points
    m = n.bit_length() - 1
    before = read_samples(memory, base, n, dtype)
    shuffled = [before[bit_reverse_index(i, m)] for i in range(n)]
    for entry in sched.cycles:
        requests = [Request(p, base + addr) for p, addr in enumerate(entry.reads)]
        for p, (addr, strobe) in enumerate(entry.writes):
            word = _packed_word(shuffled, addr, dtype)
            requests.append(Request(4 + p, base + addr, write=True,
                                    data=word, strobe=strobe))
        _, extra = _issue(memory, cycle, requests, stats, in_stage_phase=False)
        if entry.reads:
            stats.reorder_cycles += 1
        else:
            stats.overhead_cycles += 1
        cycle += 1 + extra
    return cycle


def _packed_word(samples, word_offset, dtype):
    if dtype is DataType.C64:
        idx = word_offset // 2
        word = pack_samples([samples[idx]], dtype)[word_offset % 2]
        return word
    if dtype is DataType.C32:
        return pack_samples([samples[word_offset]], dtype)[0]
    return pack_samples(samples[2 * word_offset:2 * word_offset + 2], dtype)[0]


def fft_fixed(job: FftJob, memory: BankedMemory) -> FftResultSummary:
    """In-place fixed-point FFT on the memory image, cycle-accounted.

    On return the memory holds the natural-order spectrum scaled by
    2**-scaling_stages; the summary carries the sticky overflow flag and
    the cycle statistics.
    """
    job.validate(memory)
    table = twiddle_table(job.dtype)
    stats = CycleStats()
    flag = OverflowFlag()
    m = job.n_points.bit_length() - 1
    cycle = 0
    for stage in range(m):
        cycle = _run_stage(memory, job, table, stage, stats, flag, cycle)
    cycle = _run_reorder(memory, job, stats, cycle)
    stats.total_cycles = (stats.butterfly_cycles + stats.reorder_cycles
                          + stats.stall_cycles + stats.overhead_cycles)
    assert stats.total_cycles == cycle
    scaling = m if job.scaling is ScalingPolicy.DIVIDE_BY_TWO_PER_STAGE else 0
    return FftResultSummary(job, stats, flag.seen, scaling)


def load_quantized(memory: BankedMemory, job: FftJob, values,
                   flag: OverflowFlag | None = None) -> list[FixedComplex]:
    """Quantize a complex vector and place it at the job's base address."""
    samples = [quantize(complex(v), job.dtype, flag) for v in values]
    if len(samples) != job.n_points:
        raise ConfigurationError(f"expected {job.n_points} samples, got {len(samples)}")
    load_samples(memory, job.base_address, samples, job.dtype)
    return samples


def read_spectrum(memory: BankedMemory, job: FftJob) -> np.ndarray:
    """Dequantized natural-order spectrum currently in memory."""
    samples = read_samples(memory, job.base_address, job.n_points, job.dtype)
    return np.array([dequantize(s) for s in samples], dtype=np.complex128)
