"""Per-cycle port transaction plans for butterfly stages and the final reorder.

Stages run on natural-order data with decreasing half-spans; all loads and
stores are groups of 4 consecutive word addresses ("wing sets"), staged
through the butterfly register sets, and writes trail reads by 3 cycles,
which keeps every stage cycle bank-conflict-free.  The final bit-reversal
is realized as swap units (the permutation is an involution); its cycles
can and do collide in the banks, each rejected request stalling the
pipeline for exactly one cycle.

All schedule addresses are word offsets from the start of the sample
array; the executor adds the job's base address.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .fixedpoint import DataType
from .membank import (FULL_STROBE, HI_HALF_STROBE, LO_HALF_STROBE, N_BANKS,
                      CycleStats)

WRITE_LAG_STAGE = 3
WRITE_LAG_REORDER = 2

# samples carried by one 4-word port group
_SAMPLES_PER_GROUP = {DataType.C64: 2, DataType.C32: 4, DataType.C16: 8}
# butterflies the engine completes per cycle
THROUGHPUT = {DataType.C64: 1, DataType.C32: 2, DataType.C16: 4}
# register-set capacity in samples ("two sets of four C64 registers")
REGISTER_CAPACITY = {DataType.C64: 4, DataType.C32: 8, DataType.C16: 16}


def bit_reverse_index(i: int, bits: int) -> int:
    """Reverse the low ``bits`` bits of ``i``; involutive."""
    if bits < 0 or not 0 <= i < (1 << bits):
        raise ValueError(f"index {i} out of range for {bits} bits")
    r = 0
    for _ in range(bits):
        r = (r << 1) | (i & 1)
        i >>= 1
    return r


def _log2_points(n_points: int) -> int:
    if n_points < 2 or n_points & (n_points - 1):
        raise ValueError(f"{n_points} is not a power of two")
    return n_points.bit_length() - 1


def word_of_sample(index: int, dtype: DataType) -> int:
    if dtype is DataType.C64:
        return 2 * index
    if dtype is DataType.C32:
        return index
    return index // 2


def _group_words(first_sample: int, dtype: DataType) -> tuple[int, ...]:
    start = word_of_sample(first_sample, dtype)
    return (start, start + 1, start + 2, start + 3)


@dataclass(frozen=True)
class StageCycle:
    reads: tuple[int, ...]                       # word offsets, ports 0-3
    writes: tuple[int, ...]                      # word offsets, ports 4-7
    butterflies: tuple[tuple[int, int, int], ...]  # (sample_a, sample_b, twiddle_exp)


@dataclass
class StageSchedule:
    n_points: int
    dtype: DataType
    stage: int
    cycles: list[StageCycle]

    @property
    def read_cycles(self) -> int:
        return sum(1 for c in self.cycles if c.reads)


def _read_groups_and_batches(n_points, dtype, stage):
    """Ordered read groups plus butterfly batches keyed by cycle index.

    Wing-pair spans (half-span >= one group) alternate left/right wing
    groups; a pair's butterflies split into two engine-rate batches on the
    two cycles after the right wing lands.  Smaller spans pack whole
    blocks per group and compute the cycle after the read.
    """
    m = _log2_points(n_points)
    h = n_points >> (stage + 1)
    spg = _SAMPLES_PER_GROUP[dtype]
    rate = THROUGHPUT[dtype]
    groups: list[int] = []                # first sample index of each read group
    batches: dict[int, list] = {}

    def add_batch(cycle, flies):
        batches.setdefault(cycle, []).extend(flies)

    if h >= spg:
        for c in range(n_points // (2 * h)):
            exp = bit_reverse_index(c, stage) * h
            base = c * 2 * h
            for g in range(h // spg):
                left = base + g * spg
                t = len(groups)
                groups.append(left)          # left wings at cycle t
                groups.append(left + h)      # right wings at cycle t+1
                flies = [(x, x + h, exp) for x in range(left, left + spg)]
                add_batch(t + 2, flies[:rate])
                add_batch(t + 3, flies[rate:])
    else:
        blocks_per_group = spg // (2 * h)
        for g in range(n_points // spg):
            first = g * spg
            t = len(groups)
            groups.append(first)
            flies = []
            for b in range(blocks_per_group):
                block = first // (2 * h) + b
                exp = bit_reverse_index(block, stage) * h
                start = block * 2 * h
                flies += [(x, x + h, exp) for x in range(start, start + h)]
            add_batch(t + 1, flies)
    return groups, batches


@lru_cache(maxsize=None)
def _schedule_stage_cached(n_points, dtype, stage):
    groups, batches = _read_groups_and_batches(n_points, dtype, stage)
    n_cycles = len(groups) + WRITE_LAG_STAGE
    cycles = []
    for t in range(n_cycles):
        reads = _group_words(groups[t], dtype) if t < len(groups) else ()
        writes = (_group_words(groups[t - WRITE_LAG_STAGE], dtype)
                  if t >= WRITE_LAG_STAGE else ())
        cycles.append(StageCycle(reads, writes, tuple(batches.get(t, ()))))
    return StageSchedule(n_points, dtype, stage, cycles)


def schedule_stage(n_points: int, dtype: DataType, stage: int) -> StageSchedule:
    m = _log2_points(n_points)
    if not 0 <= stage < m:
        raise ValueError(f"stage {stage} invalid for {n_points} points")
    if n_points > dtype.max_points:
        raise ValueError(f"{n_points} points exceed {dtype.name} limit")
    return _schedule_stage_cached(n_points, dtype, stage)


# -- final bit-reversed reorder ----------------------------------------------


@dataclass(frozen=True)
class ReorderCycle:
    reads: tuple[int, ...]
    writes: tuple[tuple[int, int], ...]   # (word offset, byte strobe)


@dataclass
class ReorderSchedule:
    n_points: int
    dtype: DataType
    cycles: list[ReorderCycle]
    entries: tuple[tuple[int, int], ...]  # (src sample, dst sample), whole permutation
    expected_stalls: int

    @property
    def read_cycles(self) -> int:
        return sum(1 for c in self.cycles if c.reads)


def _pick_unit(pending, occupied_banks):
    """Index of the pending unit with fewest bank collisions (stable)."""
    best_i = 0
    best_cost = None
    for i, unit in enumerate(pending):
        banks = [w % N_BANKS for w in unit["words"]]
        cost = (len(banks) - len(set(banks))) + sum(1 for b in set(banks)
                                                    if b in occupied_banks)
        if best_cost is None or cost < best_cost:
            best_i, best_cost = i, cost
            if cost == 0:
                break
    return best_i


def _sample_swap_units(n_points, m, dtype):
    units = []
    for i in range(n_points):
        j = bit_reverse_index(i, m)
        if i < j:
            if dtype is DataType.C64:
                words = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1)
            else:
                words = (i, j)
            units.append({"words": words, "moves": ((i, j), (j, i))})
    return units


def _word_pair_units(n_points, m):
    """C16 units: bit reversal maps word pair (s, s+q) onto (d, d+q)."""
    q = n_points // 4
    pair_units, fixups = [], []
    for s in range(q):
        d = bit_reverse_index(2 * s, m) >> 1
        if d == s:
            # samples 2s and 2s+n/2+1 are palindromes; swap 2s+1 <-> 2s+n/2
            a, b = 2 * s + 1, 2 * s + n_points // 2
            fixups.append({"words": (s, s + q), "moves": ((a, b), (b, a))})
        elif s < d:
            samples = [2 * s, 2 * s + 1, 2 * s + n_points // 2, 2 * s + n_points // 2 + 1,
                       2 * d, 2 * d + 1, 2 * d + n_points // 2, 2 * d + n_points // 2 + 1]
            moves = tuple((x, bit_reverse_index(x, m)) for x in samples)
            pair_units.append({"base": (s, d), "words": (s, d), "moves": moves})
    return pair_units, fixups, q


def _reorder_read_cycles(n_points, dtype):
    """Greedy, deterministic grouping of swap units into read cycles.

    Returns (cycles, entries): cycles as lists of (word, strobe) reads;
    unit order is chosen to keep the cycle's banks clear of the write set
    echoing two cycles behind it.
    """
    m = _log2_points(n_points)
    read_cycles: list[list[tuple[int, int]]] = []
    entries: list[tuple[int, int]] = []

    if dtype is not DataType.C16:
        units = _sample_swap_units(n_points, m, dtype)
        per_cycle = 1 if dtype is DataType.C64 else 2
        prev2: set[int] = set()
        prev1: set[int] = set()
        while units:
            chosen = []
            occupied = set(prev2)
            for _ in range(min(per_cycle, len(units))):
                i = _pick_unit(units, occupied)
                unit = units.pop(i)
                chosen.append(unit)
                occupied |= {w % N_BANKS for w in unit["words"]}
            words = [w for u in chosen for w in u["words"]]
            read_cycles.append([(w, FULL_STROBE) for w in words])
            for u in chosen:
                entries.extend(u["moves"])
            prev2, prev1 = prev1, {w % N_BANKS for w in words}
        return read_cycles, entries

    pair_units, fixups, q = _word_pair_units(n_points, m)
    prev_slot: set[int] = set()
    while pair_units:
        chosen = []
        occupied = set(prev_slot)
        for _ in range(min(2, len(pair_units))):
            i = _pick_unit(pair_units, occupied)
            unit = pair_units.pop(i)
            chosen.append(unit)
            occupied |= {w % N_BANKS for w in unit["words"]}
        base = [w for u in chosen for w in u["base"]]
        read_cycles.append([(w, FULL_STROBE) for w in base])
        read_cycles.append([(w + q, FULL_STROBE) for w in base])
        for u in chosen:
            entries.extend(u["moves"])
        prev_slot = {w % N_BANKS for w in base}
    # fixups: half-word swaps, four per two cycles with staggered halves
    for i in range(0, len(fixups), 4):
        grp = fixups[i:i + 4]
        lo, hi = grp[:2], grp[2:]
        read_cycles.append([(u["words"][0], HI_HALF_STROBE) for u in lo]
                           + [(u["words"][1], LO_HALF_STROBE) for u in hi])
        read_cycles.append([(u["words"][1], LO_HALF_STROBE) for u in lo]
                           + [(u["words"][0], HI_HALF_STROBE) for u in hi])
        for u in grp:
            entries.extend(u["moves"])
    return read_cycles, entries


@lru_cache(maxsize=None)
def _schedule_reorder_cached(n_points, dtype):
    read_cycles, entries = _reorder_read_cycles(n_points, dtype)
    n_cycles = len(read_cycles) + (WRITE_LAG_REORDER if read_cycles else 0)
    cycles = []
    stalls = 0
    for t in range(n_cycles):
        reads = tuple(a for a, _ in read_cycles[t]) if t < len(read_cycles) else ()
        writes = (tuple(read_cycles[t - WRITE_LAG_REORDER])
                  if t >= WRITE_LAG_REORDER else ())
        banks = [a % N_BANKS for a in reads] + [a % N_BANKS for a, _ in writes]
        stalls += len(banks) - len(set(banks))
        cycles.append(ReorderCycle(reads, writes))
    return ReorderSchedule(n_points, dtype, cycles, tuple(entries), stalls)


def schedule_reorder(n_points: int, dtype: DataType) -> ReorderSchedule:
    _log2_points(n_points)
    if n_points > dtype.max_points:
        raise ValueError(f"{n_points} points exceed {dtype.name} limit")
    return _schedule_reorder_cached(n_points, dtype)


def total_cycle_model(n_points: int, dtype: DataType) -> CycleStats:
    """Closed-form cycle prediction; the simulator must match it exactly."""
    m = _log2_points(n_points)
    if not 8 <= n_points <= dtype.max_points:
        raise ValueError(f"{n_points} points invalid for {dtype.name}")
    butterfly = (n_points // 2) * m // THROUGHPUT[dtype]
    reorder = schedule_reorder(n_points, dtype)
    stats = CycleStats(
        butterfly_cycles=butterfly,
        reorder_cycles=reorder.read_cycles,
        stall_cycles=reorder.expected_stalls,
        overhead_cycles=WRITE_LAG_STAGE * m
        + (WRITE_LAG_REORDER if reorder.read_cycles else 0),
        conflicts=reorder.expected_stalls,
    )
    stats.total_cycles = (stats.butterfly_cycles + stats.reorder_cycles
                          + stats.stall_cycles + stats.overhead_cycles)
    return stats


# -- debug dump ---------------------------------------------------------------


def dump_stage_schedule(sched: StageSchedule) -> str:
    lines = [f"# stage {sched.stage} of {sched.n_points}-point {sched.dtype.name}"]
    for t, c in enumerate(sched.cycles):
        reads = " ".join(f"{a:5d}" for a in c.reads) or "-"
        writes = " ".join(f"{a:5d}" for a in c.writes) or "-"
        exps = " ".join(str(e) for _, _, e in c.butterflies) or "-"
        lines.append(f"cycle {t:5d}  R: {reads:<23}  W: {writes:<23}  T: {exps}")
    return "\n".join(lines) + "\n"


def dump_reorder_schedule(sched: ReorderSchedule) -> str:
    lines = [f"# reorder of {sched.n_points}-point {sched.dtype.name}"
             f" (expected stalls {sched.expected_stalls})"]
    for t, c in enumerate(sched.cycles):
        reads = " ".join(f"{a:5d}" for a in c.reads) or "-"
        writes = " ".join(f"{a:5d}" for a, _ in c.writes) or "-"
        lines.append(f"cycle {t:5d}  R: {reads:<23}  W: {writes}")
    return "\n".join(lines) + "\n"
