"""
Phase-by-phase execution of a schedule on the active topology.

Tracks where every block sits, routes every message along its subring and
measures per-phase hop distance h_k, per-direction volume m_k and congestion
c_k. This is the independent oracle the closed-form cost model is checked
against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .schedules import Algorithm
from .topology import ReconfigPlan, build_base_ring, topology_for_phase

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "phase",
    "reconfigured",
    "hops",
    "congestion",
    "bytes_per_direction",
    "max_load",
    "max_load_link",
]


class UnreachablePeerError(RuntimeError):
    """A message target cannot be reached on the active topology."""


@dataclass(frozen=True)
class PlacementState:
    """Current node of every block (indexed by block id) after `phase_completed` phases."""

    location: np.ndarray
    phase_completed: int


@dataclass(frozen=True)
class PhaseMetrics:
    phase: int
    hops: int
    congestion: float
    bytes_per_direction: int
    reconfigured: bool = False
    max_load: int = 0
    max_load_link: tuple | None = None


@dataclass(frozen=True)
class DeliveryReport:
    ok: bool
    n_blocks: int
    misplaced: tuple = ()

    def __bool__(self):
        return self.ok


def _path_links(topology, transfers):
    """Expand every transfer into the directed links it traverses.

    Returns
    -------
    hops : np.ndarray
        hop count of each transfer
    tails, heads, directions, nbytes : np.ndarray
        one entry per traversed link
    """
    n, stride = topology.n, topology.stride
    distance = ((transfers.target - transfers.source) * transfers.direction) % n
    if np.any(distance % stride):
        bad = int(np.argmax(distance % stride != 0))
        raise UnreachablePeerError(
            f"Node {transfers.target[bad]} is not on the subring of node {transfers.source[bad]} "
            f"(stride {stride}, n={n})"
        )
    hops = distance // stride
    starts = np.cumsum(hops) - hops
    t = np.arange(hops.sum()) - np.repeat(starts, hops)
    directions = np.repeat(transfers.direction, hops)
    tails = (np.repeat(transfers.source, hops) + directions * stride * t) % n
    heads = (tails + directions * stride) % n
    nbytes = np.repeat(transfers.bytes, hops)

    pairs = np.unique(np.stack([np.minimum(tails, heads), np.maximum(tails, heads)], axis=1), axis=0)
    missing = [tuple(p) for p in pairs.tolist() if not topology.has_link(*p)]
    if missing:
        raise UnreachablePeerError(f"Links {missing[:5]} are not part of the active topology")
    return hops, tails, heads, directions, nbytes


def link_loads(topology, transfers):
    """Bytes carried by every directional link in one phase.

    Parameters
    ----------
    topology : Topology
        active topology of the phase
    transfers : Transfers
        messages of the phase, e.g. from Schedule.transfers(k)

    Returns
    -------
    pd.Series
        bytes indexed by (tail, head, direction); direction is +1 clockwise,
        -1 counter-clockwise, so both logical directions of a two-node subring
        are kept apart
    """
    _, tails, heads, directions, nbytes = _path_links(topology, transfers)
    return _aggregate_loads(tails, heads, directions, nbytes)


def _aggregate_loads(tails, heads, directions, nbytes):
    index = pd.MultiIndex.from_arrays([tails, heads, directions], names=["tail", "head", "direction"])
    return pd.Series(nbytes, index=index, name="bytes").groupby(level=[0, 1, 2]).sum()


def per_direction_volume(transfers):
    """Largest number of bytes a single node sends in a single direction."""
    if len(transfers) == 0:
        return 0
    key = transfers.source * 2 + (transfers.direction > 0)
    return int(np.bincount(key, weights=transfers.bytes).max())


def _default_plan(schedule, plan):
    if plan is None:
        return ReconfigPlan.static(schedule.s)
    if plan.s != schedule.s:
        raise ValueError(f"Plan covers {plan.s} phases, schedule has {schedule.s}")
    if schedule.algorithm is Algorithm.DIRECT and plan.R:
        raise ValueError("The direct baseline runs on a static ring and cannot be reconfigured")
    return plan


def _move_blocks(location, schedule, phase):
    for sends in phase.sends:
        for peer, ids in ((sends.left_peer, sends.to_left), (sends.right_peer, sends.to_right)):
            if not ids:
                continue
            ids = np.asarray(ids, dtype=np.int64)
            location[ids] = schedule.destinations[ids] if peer is None else peer


def iter_execute(schedule, plan=None, radix=None):
    """Run the schedule one phase at a time.

    Parameters
    ----------
    schedule : Schedule
    plan : ReconfigPlan, optional
        reconfiguration plan, default static (no reconfiguration)
    radix : int, optional
        radix of the edge sets, default the schedule's own

    Yields
    ------
    (PlacementState, PhaseMetrics)
        state and metrics after every phase
    """
    plan = _default_plan(schedule, plan)
    radix = radix or schedule.radix
    location = schedule.sources.copy()
    for k, phase in enumerate(schedule.phases):
        if schedule.algorithm is Algorithm.DIRECT:
            topology = build_base_ring(schedule.n)
        else:
            topology = topology_for_phase(plan, k, schedule.n, radix)
        transfers = schedule.transfers(k)
        hops, tails, heads, directions, nbytes = _path_links(topology, transfers)
        loads = _aggregate_loads(tails, heads, directions, nbytes)
        volume = per_direction_volume(transfers)
        max_load = int(loads.max()) if len(loads) else 0
        metrics = PhaseMetrics(
            phase=k,
            hops=int(hops.max()) if len(hops) else 0,
            congestion=max_load / volume if volume else 1.0,
            bytes_per_direction=volume,
            reconfigured=k > 0 and plan.x[k],
            max_load=max_load,
            max_load_link=tuple(int(v) for v in loads.idxmax()) if max_load else None,
        )
        logger.debug("phase %d: h=%d c=%.3f m_k=%d", k, metrics.hops, metrics.congestion, volume)
        _move_blocks(location, schedule, phase)
        yield PlacementState(location.copy(), k + 1), metrics


def execute(schedule, plan=None, radix=None):
    """Execute every phase; returns (final PlacementState, list of PhaseMetrics)."""
    state = PlacementState(schedule.sources.copy(), 0)
    metrics = []
    for state, phase_metrics in iter_execute(schedule, plan, radix):
        metrics.append(phase_metrics)
    return state, metrics


def verify_all_delivered(final, schedule):
    """Check that every block (every half, for Bruck) sits at its destination."""
    if final.phase_completed != schedule.s:
        raise ValueError(f"Execution stopped after {final.phase_completed} of {schedule.s} phases")
    wrong = np.nonzero(final.location != schedule.destinations)[0]
    misplaced = tuple(
        (int(i), int(schedule.sources[i]), int(schedule.destinations[i]), int(final.location[i]))
        for i in wrong
    )
    return DeliveryReport(not misplaced, len(schedule.blocks), misplaced)


def trace_frame(metrics):
    """Per-phase trace table (phase, reconfigured, h_k, c_k, m_k, max-load link)."""
    rows = [
        (
            m.phase,
            m.reconfigured,
            m.hops,
            m.congestion,
            m.bytes_per_direction,
            m.max_load,
            "" if m.max_load_link is None else "{}->{} ({:+d})".format(*m.max_load_link),
        )
        for m in metrics
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def dump_trace(metrics, path):
    trace_frame(metrics).to_csv(path, index=False)
    return path
