"""
Choice of the reconfiguration count R* and the balanced plan that realizes it.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

from .cost_model import closed_form_cost, plan_cost
from .schedules import Algorithm
from .ternary import phase_count
from .topology import ReconfigPlan

logger = logging.getLogger(__name__)

AUDIT_RTOL = 1e-12
AUDIT_MAX_PHASES = 8


@dataclass(frozen=True)
class SegmentLayout:
    """Lengths of the R + 1 segments; they sum to s and differ by at most one."""

    lengths: tuple

    def __post_init__(self):
        lengths = tuple(int(r) for r in self.lengths)
        if not lengths or min(lengths) < 1:
            raise ValueError(f"Segment lengths must be positive, got {lengths}")
        if max(lengths) - min(lengths) > 1:
            raise ValueError(f"Segment lengths {lengths} differ by more than one")
        object.__setattr__(self, "lengths", lengths)

    @property
    def s(self):
        return sum(self.lengths)

    @property
    def R(self):
        return len(self.lengths) - 1


def balanced_segments(s, R):
    """Split s phases into R + 1 segments of length floor or ceil of s / (R + 1).

    Longer segments come first.
    """
    if not 0 <= R < s:
        raise ValueError(f"Reconfiguration count {R} outside [0, {s - 1}] for {s} phases")
    base, extra = divmod(s, R + 1)
    return SegmentLayout((base + 1,) * extra + (base,) * (R + 1 - extra))


def plan_from_segments(layout):
    """ReconfigPlan with x_0 set and x_k set at every segment boundary."""
    boundaries = set(itertools.accumulate(layout.lengths[:-1]))
    return ReconfigPlan(tuple(k == 0 or k in boundaries for k in range(layout.s)))


def all_plans(s):
    """Every plan over s phases (x_0 fixed), 2**(s - 1) of them."""
    for tail in itertools.product((False, True), repeat=s - 1):
        yield ReconfigPlan((True,) + tail)


def optimal_R(n, m, params, algorithm="retri"):
    """Exhaustive search for the cost-minimizing reconfiguration count.

    Parameters
    ----------
    n : int
        canonical ring size of `algorithm`
    m : int
        bytes per node
    params : CostParams
    algorithm : str or Algorithm, default="retri"

    Returns
    -------
    (R_star, CostBreakdown)
        ties go to the smaller R; the direct baseline always returns R = 0
    """
    algorithm = Algorithm.parse(algorithm)
    if algorithm.radix is None:
        return 0, closed_form_cost(algorithm, n, m, params)
    s = phase_count(n, algorithm.radix)
    best_R, best = 0, None
    for R in range(s):
        cost = closed_form_cost(algorithm, n, m, params, R)
        if best is None or cost.total < best.total:
            best_R, best = R, cost
    logger.debug("%s n=%d m=%d delta=%g: R*=%d", algorithm.value, n, m, params.delta, best_R)
    return best_R, best


@dataclass(frozen=True)
class PlanAudit:
    """Balanced plan of every R against the cheapest plan with the same R."""

    n: int
    m: int
    delta: float
    counterexamples: tuple = ()

    @property
    def ok(self):
        return not self.counterexamples


def audit_balanced_plans(n, m, params, algorithm="retri"):
    """Compare every balanced plan with all 2**(s - 1) plans (s <= 8).

    A counterexample (R, best plan, best cost, balanced cost) is recorded when some
    plan with the same R is cheaper than the balanced one beyond a relative
    tolerance of 1e-12.
    """
    algorithm = Algorithm.parse(algorithm)
    if algorithm.radix is None:
        raise ValueError("The direct baseline has no reconfiguration plans")
    s = phase_count(n, algorithm.radix)
    if s > AUDIT_MAX_PHASES:
        raise ValueError(f"Exhaustive plan audit limited to s <= {AUDIT_MAX_PHASES}, got {s}")

    cheapest = {}
    for plan in all_plans(s):
        total = plan_cost(plan, n, m, params, algorithm).total
        if plan.R not in cheapest or total < cheapest[plan.R][1]:
            cheapest[plan.R] = (plan, total)

    counterexamples = []
    for R, (plan, total) in sorted(cheapest.items()):
        balanced = plan_cost(plan_from_segments(balanced_segments(s, R)), n, m, params, algorithm)
        if total < balanced.total * (1 - AUDIT_RTOL):
            logger.warning(
                "Plan %s beats the balanced plan for R=%d (%g < %g)", plan, R, total, balanced.total
            )
            counterexamples.append((R, str(plan), total, balanced.total))
    return PlanAudit(n, m, params.delta, tuple(counterexamples))
