"""
Extended Hockney alpha-beta model for phase-structured All-to-All:

    C(m) = s * alpha_s + sum_k (h_k * alpha_h + m_k * c_k * beta) + R * delta

with the closed forms for ReTri (static, per segment, R reconfigurations,
every-phase reconfiguration), mirrored Bruck and the static shortest-path
baseline, plus the cross-check against simulated metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, field_validator

from .schedules import Algorithm
from .ternary import phase_count

BITS_PER_BYTE = 8
CROSSCHECK_EPS = 1e-30

COST_COLUMNS = [
    "algorithm",
    "n",
    "m_bytes",
    "R",
    "alpha_s",
    "alpha_h",
    "beta",
    "delta",
    "per_phase",
    "hop",
    "transmission",
    "reconfig",
    "total",
]


def beta_from_bandwidth(bits_per_s):
    """Seconds per byte for a link rate given in bits per second (beta = 8 / b)."""
    if not bits_per_s > 0:
        raise ValueError(f"Bandwidth must be positive, got {bits_per_s}")
    return BITS_PER_BYTE / bits_per_s


class CostParams(BaseModel):
    """Model inputs, all in seconds (beta in seconds per byte)."""

    model_config = ConfigDict(frozen=True)

    alpha_s: float = 0.0
    alpha_h: float = 0.0
    beta: float = 0.0
    delta: float = 0.0

    @field_validator("alpha_s", "alpha_h", "beta", "delta")
    @classmethod
    def _non_negative(cls, value, info):
        if not (math.isfinite(value) and value >= 0):
            raise ValueError(f"{info.field_name} must be finite and non-negative, got {value}")
        return value

    @classmethod
    def from_bandwidth(cls, alpha_s, alpha_h, bandwidth_bits_per_s, delta=0.0):
        return cls(
            alpha_s=alpha_s,
            alpha_h=alpha_h,
            beta=beta_from_bandwidth(bandwidth_bits_per_s),
            delta=delta,
        )

    def with_delta(self, delta):
        return self.model_copy(update={"delta": delta})


@dataclass(frozen=True)
class CostBreakdown:
    per_phase_delay: float
    hop_delay: float
    transmission_delay: float
    reconfig_delay: float
    R: int = 0

    @property
    def total(self):
        return self.per_phase_delay + self.hop_delay + self.transmission_delay + self.reconfig_delay

    def __add__(self, other):
        return CostBreakdown(
            self.per_phase_delay + other.per_phase_delay,
            self.hop_delay + other.hop_delay,
            self.transmission_delay + other.transmission_delay,
            self.reconfig_delay + other.reconfig_delay,
            self.R + other.R,
        )

    def scaled(self, factor):
        """Every component multiplied by `factor` (e.g. 1 / n for per-node normalization)."""
        return CostBreakdown(
            self.per_phase_delay * factor,
            self.hop_delay * factor,
            self.transmission_delay * factor,
            self.reconfig_delay * factor,
            self.R,
        )


def effective_message_bytes(algorithm, n, m, n_eff=None):
    """Per-node bytes the closed forms are priced with.

    Blocks carry ceil(m / n) bytes; a mirrored Bruck block is priced by its
    forward half, which takes the odd byte. The result equals m whenever the
    blocks split evenly, and is scaled to the padded ring size `n_eff`.

    Parameters
    ----------
    algorithm : Algorithm or str
    n : int
        requested ring size (the block count the message is split into)
    m : int
        bytes per node
    n_eff : int, optional
        ring size the schedule runs on, default n

    Returns
    -------
    int
    """
    algorithm = Algorithm.parse(algorithm)
    n_eff = n if n_eff is None else n_eff
    b = -(-m // n)
    if algorithm is Algorithm.BRUCK_MIRRORED:
        return 2 * n_eff * -(-b // 2)
    return n_eff * b


def _canonical_phases(n, radix):
    s = phase_count(n, radix)
    if radix**s != n:
        raise ValueError(f"Ring size {n} is not a power of {radix}")
    return s


def cost_from_metrics(metrics, params, R=0):
    """Evaluate the model on measured per-phase metrics.

    Parameters
    ----------
    metrics : list of PhaseMetrics
        output of propagation.execute
    params : CostParams
    R : int, default=0
        number of charged reconfigurations

    Returns
    -------
    CostBreakdown
    """
    return CostBreakdown(
        per_phase_delay=len(metrics) * params.alpha_s,
        hop_delay=sum(m.hops for m in metrics) * params.alpha_h,
        transmission_delay=sum(m.bytes_per_direction * m.congestion for m in metrics) * params.beta,
        reconfig_delay=R * params.delta,
        R=R,
    )


def _segment_breakdown(r, m, params, radix):
    # hop distance grows by the radix within a segment: sum_t radix**t
    if r < 1:
        raise ValueError(f"Segment length must be >= 1, got {r}")
    if radix == 3:
        growth, share = (3**r - 1) // 2, m / 3
    else:
        growth, share = 2**r - 1, m / 4
    return CostBreakdown(r * params.alpha_s, growth * params.alpha_h, growth * share * params.beta, 0.0)


def segment_cost(r, m, params):
    """ReTri segment of r phases without reconfiguration: r*alpha_s + y*(3**r - 1)/2."""
    return _segment_breakdown(r, m, params, 3).total


def bruck_segment_cost(r, m, params):
    """Mirrored Bruck segment: r*alpha_s + (alpha_h + beta*m/4)*(2**r - 1)."""
    return _segment_breakdown(r, m, params, 2).total


def segments_cost(lengths, m, params, radix=3):
    """Cost of consecutive segments of the given lengths plus (len - 1) reconfigurations."""
    total = CostBreakdown(0.0, 0.0, 0.0, 0.0)
    for r in lengths:
        total = total + _segment_breakdown(r, m, params, radix)
    R = len(lengths) - 1
    return total + CostBreakdown(0.0, 0.0, 0.0, R * params.delta, R)


def retri_static_cost(n, m, params):
    """log_3 n * alpha_s + (alpha_h + beta*m/3) * (n - 1)/2 on a static ring."""
    s = _canonical_phases(n, 3)
    return s * params.alpha_s + (params.alpha_h + params.beta * m / 3) * (n - 1) / 2


def retri_cost_R(n, m, params, R):
    """ReTri cost with R reconfigurations over balanced segments."""
    from .optimizer import balanced_segments

    s = _canonical_phases(n, 3)
    return segments_cost(balanced_segments(s, R).lengths, m, params, radix=3)


def retri_full_reconfig_cost(n, m, params):
    """Reconfiguration before every phase.

    s (alpha_s + alpha_h + beta*m/3) + (s - 1) delta with s = log_3 n.
    """
    s = _canonical_phases(n, 3)
    return s * (params.alpha_s + params.alpha_h + params.beta * m / 3) + (s - 1) * params.delta


def bruck_full_reconfig_cost(n, m, params):
    """Mirrored Bruck with every-phase reconfiguration.

    s (alpha_s + alpha_h + beta*m/4) + (s - 1) delta with s = log_2 n.
    """
    s = _canonical_phases(n, 2)
    return s * (params.alpha_s + params.alpha_h + params.beta * m / 4) + (s - 1) * params.delta


def bruck_cost_R(n, m, params, R):
    """Base-2 analog of the ReTri segment model for mirrored Bruck.

    Intermediate R (0 < R < s - 1) is a model extrapolation: the segment cost
    follows the n / 2**k subring sizes.
    """
    from .optimizer import balanced_segments

    s = _canonical_phases(n, 2)
    return segments_cost(balanced_segments(s, R).lengths, m, params, radix=2)


def direct_link_blocks(n):
    """Most blocks crossing one directional ring link in the shortest-path baseline."""
    if n % 2:
        return (n * n - 1) // 8
    # offset n/2 goes clockwise, so clockwise links carry sum_{l=1..n/2} l
    return n * (n + 2) // 8


def direct_static_cost(n, m, params):
    """Single-phase shortest-path All-to-All on a static ring.

    alpha_s + floor(n/2) * alpha_h + beta * (m / n) * L(n), with L(n) the
    number of blocks on the busiest directional link.
    """
    if n < 2:
        raise ValueError(f"Ring size must be at least 2, got {n}")
    return CostBreakdown(
        params.alpha_s,
        (n // 2) * params.alpha_h,
        direct_link_blocks(n) * (m / n) * params.beta,
        0.0,
    )


def closed_form_cost(algorithm, n, m, params, R=0):
    """Closed-form CostBreakdown of `algorithm` at canonical size n."""
    algorithm = Algorithm.parse(algorithm)
    if algorithm is Algorithm.RETRI:
        return retri_cost_R(n, m, params, R)
    if algorithm is Algorithm.BRUCK_MIRRORED:
        return bruck_cost_R(n, m, params, R)
    if R:
        raise ValueError("The direct baseline has no reconfigurations")
    return direct_static_cost(n, m, params)


def plan_cost(plan, n, m, params, algorithm="retri"):
    """Segment-model cost of an arbitrary reconfiguration plan."""
    algorithm = Algorithm.parse(algorithm)
    if algorithm.radix is None:
        raise ValueError("Plans apply only to log-phase algorithms")
    s = _canonical_phases(n, algorithm.radix)
    if plan.s != s:
        raise ValueError(f"Plan covers {plan.s} phases, n={n} needs {s}")
    return segments_cost(plan.segments(), m, params, radix=algorithm.radix)


def crosscheck(closed, simulated):
    """Relative error |closed - simulated.total| / max(closed, eps)."""
    return abs(closed - simulated.total) / max(closed, CROSSCHECK_EPS)


def cost_row(algorithm, n, m, params, breakdown):
    """CSV record of one CostBreakdown (columns COST_COLUMNS)."""
    return {
        "algorithm": Algorithm.parse(algorithm).value,
        "n": n,
        "m_bytes": m,
        "R": breakdown.R,
        "alpha_s": params.alpha_s,
        "alpha_h": params.alpha_h,
        "beta": params.beta,
        "delta": params.delta,
        "per_phase": breakdown.per_phase_delay,
        "hop": breakdown.hop_delay,
        "transmission": breakdown.transmission_delay,
        "reconfig": breakdown.reconfig_delay,
        "total": breakdown.total,
    }
