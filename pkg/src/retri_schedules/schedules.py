"""
Phase-by-phase All-to-All schedules: ReTri (balanced ternary), mirrored Bruck
(radix 2, one half per ring direction) and the static shortest-path baseline.

Every schedule materializes all n**2 blocks B[r, d], self-blocks included; those
carry all-zero digits and never move.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from .ternary import RingConfig, balanced_ternary_table, binary_table, padded_size, phase_count

logger = logging.getLogger(__name__)

SCHEDULE_FORMAT_VERSION = 1
SCHEDULE_HEADER = f"# retri-schedules schedule v{SCHEDULE_FORMAT_VERSION}"
SCHEDULE_COLUMNS = ["phase", "node", "peer", "direction", "blocks"]


class Algorithm(str, enum.Enum):
    RETRI = "retri"
    BRUCK_MIRRORED = "bruck_mirrored"
    DIRECT = "direct"

    @property
    def radix(self):
        return {"retri": 3, "bruck_mirrored": 2}.get(self.value)

    @classmethod
    def parse(cls, name):
        """Accept the enum, its value, or the short alias 'bruck'."""
        if isinstance(name, cls):
            return name
        aliases = {"bruck": cls.BRUCK_MIRRORED}
        if name in aliases:
            return aliases[name]
        try:
            return cls(name)
        except ValueError:
            raise ValueError(
                f"Unknown algorithm '{name}', must be one of {[a.value for a in cls] + ['bruck']}"
            ) from None


class Half(str, enum.Enum):
    WHOLE = "whole"
    FORWARD = "forward"
    MIRROR = "mirror"


@dataclass(frozen=True)
class Block:
    source: int
    destination: int
    bytes: int
    half: Half = Half.WHOLE

    @property
    def label(self):
        suffix = {Half.WHOLE: "", Half.FORWARD: "f", Half.MIRROR: "m"}[self.half]
        return f"{self.source}>{self.destination}{suffix}"


@dataclass(frozen=True)
class NodeSends:
    """Outgoing messages of one node in one phase.

    `left_peer`/`right_peer` are None for the direct baseline, where every block
    travels to its own destination.
    """

    node: int
    left_peer: int | None
    right_peer: int | None
    to_left: tuple
    to_right: tuple


@dataclass(frozen=True)
class PhaseSchedule:
    phase: int
    sends: tuple

    def node(self, i):
        return self.sends[i]


@dataclass(frozen=True)
class Transfers:
    """Aggregated messages of a phase as parallel arrays.

    direction is +1 (clockwise, towards higher ids) or -1.
    """

    source: np.ndarray
    target: np.ndarray
    direction: np.ndarray
    bytes: np.ndarray

    def __len__(self):
        return len(self.source)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Complete All-to-All schedule over `n` (possibly padded) nodes.

    Block ids index `blocks`; for whole blocks id = r * n + d, for Bruck halves
    id = 2 * (r * n + d) + (0 forward, 1 mirror).
    """

    algorithm: Algorithm
    n: int
    n_requested: int
    block_bytes: int
    blocks: tuple
    phases: tuple

    @property
    def padded(self):
        return self.n != self.n_requested

    @property
    def radix(self):
        return self.algorithm.radix

    @property
    def config(self):
        if self.radix is None:
            raise ValueError("The direct baseline has no radix configuration")
        return RingConfig(self.n, self.radix)

    @property
    def s(self):
        return len(self.phases)

    @cached_property
    def destinations(self):
        return np.fromiter((b.destination for b in self.blocks), dtype=np.int64, count=len(self.blocks))

    @cached_property
    def sources(self):
        return np.fromiter((b.source for b in self.blocks), dtype=np.int64, count=len(self.blocks))

    @cached_property
    def sizes(self):
        return np.fromiter((b.bytes for b in self.blocks), dtype=np.int64, count=len(self.blocks))

    def transfers(self, k):
        """Messages sent in phase k, one per (node, direction) or per block for direct."""
        sizes = self.sizes
        source, target, direction, nbytes = [], [], [], []
        for sends in self.phases[k].sends:
            sides = ((-1, sends.left_peer, sends.to_left), (1, sends.right_peer, sends.to_right))
            for sign, peer, ids in sides:
                if not ids:
                    continue
                if peer is None:
                    ids = np.asarray(ids, dtype=np.int64)
                    source.append(np.full(len(ids), sends.node))
                    target.append(self.destinations[ids])
                    direction.append(np.full(len(ids), sign))
                    nbytes.append(sizes[ids])
                else:
                    source.append([sends.node])
                    target.append([peer])
                    direction.append([sign])
                    nbytes.append([sizes[list(ids)].sum()])
        if not source:
            empty = np.zeros(0, dtype=np.int64)
            return Transfers(empty, empty, empty, empty)
        return Transfers(
            np.concatenate(source).astype(np.int64),
            np.concatenate(target).astype(np.int64),
            np.concatenate(direction).astype(np.int64),
            np.concatenate(nbytes).astype(np.int64),
        )


def block_size(n, m, strict=False):
    """Bytes per block when m bytes per node are split over n destinations.

    Non-divisible m is rounded up to ceil(m / n) (warning) unless `strict`.
    """
    if m < 0:
        raise ValueError(f"Message size must be non-negative, got {m}")
    if m % n:
        if strict:
            raise ValueError(f"Message size {m} is not divisible into {n} equal blocks")
        warnings.warn(f"Message size {m} is not a multiple of {n}; using {math.ceil(m / n)}-byte blocks")
    return -(-m // n)


def _pad(n, radix, pad):
    target = padded_size(n, radix)
    if target != n:
        if not pad:
            raise ValueError(f"Ring size {n} is not a power of {radix}")
        logger.info("Padding ring of %d nodes to %d virtual nodes", n, target)
    return target


def _group_by_node(location, mask, n):
    """Block ids selected by `mask`, split per current location node."""
    ids = np.nonzero(mask)[0]
    order = np.argsort(location[ids], kind="stable")
    ids = ids[order]
    bounds = np.searchsorted(location[ids], np.arange(n + 1))
    return [tuple(ids[bounds[i] : bounds[i + 1]].tolist()) for i in range(n)]


def _phase(k, n, step, location, left_mask, right_mask):
    to_left = _group_by_node(location, left_mask, n)
    to_right = _group_by_node(location, right_mask, n)
    return PhaseSchedule(
        phase=k,
        sends=tuple(
            NodeSends(i, (i - step) % n, (i + step) % n, to_left[i], to_right[i]) for i in range(n)
        ),
    )


def _real_sizes(src, dst, n_requested, nbytes):
    return np.where((src < n_requested) & (dst < n_requested), nbytes, 0)


def retri_schedule(n, m, pad=True, strict=False):
    """Balanced-ternary All-to-All schedule.

    Parameters
    ----------
    n : int
        ring size; padded to the next power of three unless pad=False
    m : int
        bytes per node (one block of m / n bytes per destination)
    pad : bool, default=True
        add zero-byte virtual nodes for non-canonical n
    strict : bool, default=False
        reject m that does not split into n equal blocks

    Returns
    -------
    Schedule
        s = log_3 n' phases; in phase k node i sends its stored blocks with
        tau_k = +1 to i + 3**k and those with tau_k = -1 to i - 3**k
    """
    n_eff = _pad(n, 3, pad)
    s = phase_count(n_eff, 3)
    b = block_size(n, m, strict)

    src, dst = np.divmod(np.arange(n_eff * n_eff, dtype=np.int64), n_eff)
    digits = balanced_ternary_table(n_eff)[(dst - src) % n_eff]
    sizes = _real_sizes(src, dst, n, b)

    phases = []
    location = src.copy()
    for k in range(s):
        step = 3**k
        tau = digits[:, k]
        phases.append(_phase(k, n_eff, step, location, tau == -1, tau == 1))
        location = (location + tau * step) % n_eff

    blocks = tuple(Block(int(r), int(d), int(nb)) for r, d, nb in zip(src, dst, sizes))
    return Schedule(Algorithm.RETRI, n_eff, n, b, blocks, tuple(phases))


def bruck_mirrored_schedule(n, m, pad=False, strict=False):
    """Mirrored radix-2 Bruck schedule.

    Each block is halved by bytes: the forward half follows the bits of
    (d - r) mod n clockwise (offset +2**k), the mirror half follows the bits of
    (r - d) mod n counter-clockwise (offset -2**k). The forward half takes the
    extra byte of an odd-sized block.

    Parameters
    ----------
    n : int
        ring size, a power of two unless pad=True
    m : int
        bytes per node
    pad : bool, default=False
        pad to the next power of two instead of rejecting n
    strict : bool, default=False
        reject m that does not split into n equal blocks

    Returns
    -------
    Schedule
    """
    n_eff = _pad(n, 2, pad)
    s = phase_count(n_eff, 2)
    b = block_size(n, m, strict)
    if b % 2:
        warnings.warn(f"Block of {b} bytes split unevenly; forward half carries the extra byte")
    forward_bytes, mirror_bytes = b - b // 2, b // 2

    pair = np.arange(n_eff * n_eff, dtype=np.int64)
    src, dst = np.divmod(np.repeat(pair, 2), n_eff)
    is_mirror = np.tile(np.array([False, True]), len(pair))
    offsets = np.where(is_mirror, (src - dst) % n_eff, (dst - src) % n_eff)
    bits = binary_table(n_eff)[offsets]
    sign = np.where(is_mirror, -1, 1)
    sizes = _real_sizes(src, dst, n, np.where(is_mirror, mirror_bytes, forward_bytes))

    phases = []
    location = src.copy()
    for k in range(s):
        step = 2**k
        moving = bits[:, k] == 1
        phases.append(_phase(k, n_eff, step, location, moving & is_mirror, moving & ~is_mirror))
        location = (location + moving * sign * step) % n_eff

    blocks = tuple(
        Block(int(r), int(d), int(nb), Half.MIRROR if mirror else Half.FORWARD)
        for r, d, nb, mirror in zip(src, dst, sizes, is_mirror)
    )
    return Schedule(Algorithm.BRUCK_MIRRORED, n_eff, n, b, blocks, tuple(phases))


def direct_schedule(n, m, strict=False):
    """Single-phase shortest-path baseline on a static ring.

    Each block goes straight to its destination along the shorter ring
    direction; an offset of exactly n/2 goes clockwise.
    """
    if n < 2:
        raise ValueError(f"Ring size must be at least 2, got {n}")
    b = block_size(n, m, strict)
    src, dst = np.divmod(np.arange(n * n, dtype=np.int64), n)
    offset = (dst - src) % n
    right = (offset > 0) & (offset <= n // 2)
    left = offset > n // 2
    to_left = _group_by_node(src, left, n)
    to_right = _group_by_node(src, right, n)
    phase = PhaseSchedule(
        phase=0, sends=tuple(NodeSends(i, None, None, to_left[i], to_right[i]) for i in range(n))
    )
    blocks = tuple(Block(int(r), int(d), b) for r, d in zip(src, dst))
    return Schedule(Algorithm.DIRECT, n, n, b, blocks, (phase,))


def schedule_for(algorithm, n, m, pad=True, strict=False):
    """Build the schedule of `algorithm` ('retri', 'bruck'/'bruck_mirrored', 'direct')."""
    algorithm = Algorithm.parse(algorithm)
    if algorithm is Algorithm.RETRI:
        return retri_schedule(n, m, pad=pad, strict=strict)
    if algorithm is Algorithm.BRUCK_MIRRORED:
        return bruck_mirrored_schedule(n, m, pad=pad, strict=strict)
    return direct_schedule(n, m, strict=strict)


def schedule_records(schedule):
    """One row per phase, node and direction with a non-empty block list.

    Returns
    -------
    pd.DataFrame
        columns phase, node, peer, direction ('left'/'right'), blocks
        (space-separated block labels); peer is empty for the direct baseline
    """
    rows = []
    for phase in schedule.phases:
        for sends in phase.sends:
            for direction, peer, ids in (
                ("left", sends.left_peer, sends.to_left),
                ("right", sends.right_peer, sends.to_right),
            ):
                if ids:
                    labels = " ".join(schedule.blocks[i].label for i in ids)
                    rows.append((phase.phase, sends.node, peer, direction, labels))
    df = pd.DataFrame(rows, columns=SCHEDULE_COLUMNS)
    df["peer"] = df["peer"].astype("Int64")
    return df


def export_schedule(schedule, path):
    """Write the schedule interchange file: version header, then CSV records."""
    records = schedule_records(schedule)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"{SCHEDULE_HEADER}\n")
        f.write(f"# algorithm = {schedule.algorithm.value}\n")
        f.write(f"# n = {schedule.n}\n")
        f.write(f"# n_requested = {schedule.n_requested}\n")
        f.write(f"# block_bytes = {schedule.block_bytes}\n")
        records.to_csv(f, index=False)
    return path


def read_schedule_records(path):
    """Read back the records of `export_schedule`, checking the version header."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
    if header != SCHEDULE_HEADER:
        raise ValueError(f"Unsupported schedule file header '{header}'")
    df = pd.read_csv(path, comment="#", dtype={"peer": "Int64"})
    return df
