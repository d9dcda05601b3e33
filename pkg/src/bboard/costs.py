"""Cost formulas mapping raw parameter values onto search costs.

Finite costs land in (0, 1] when the provider metric is 1: a value
exactly on the border costs 1.0, generous headroom costs less.  Values
violating their rule are Infeasible, never merely expensive.
"""

from __future__ import annotations

from .model import (CostPolicy, CostValue, DEFAULT_POLICY, INFEASIBLE, Offer, Rule,
                    RuleKind, Value, ZERO_COST)


class NegativeInput(ValueError):
    """Numeric cost inputs must be non-negative."""


def _check_non_negative(x: float, border: float) -> tuple[float, float]:
    x, border = float(x), float(border)
    if x < 0 or border < 0:
        raise NegativeInput(f"negative cost input: x={x}, border={border}")
    return x, border


def cost_at_least(x: float, border: float) -> CostValue:
    """Cost of meeting a lower bound: (border + 1) / (x + 1), else Infeasible."""
    x, border = _check_non_negative(x, border)
    if x < border:
        return INFEASIBLE
    return CostValue((border + 1.0) / (x + 1.0))


def cost_at_most(x: float, border: float) -> CostValue:
    """Cost of staying under an upper bound: (x + 1) / (border + 1), else Infeasible."""
    x, border = _check_non_negative(x, border)
    if x > border:
        return INFEASIBLE
    return CostValue((x + 1.0) / (border + 1.0))


def cost_equals(x: Value, target: Value) -> CostValue:
    """Boolean condition: zero cost on an exact match, Infeasible otherwise.

    Comparison is exact and case-sensitive; no normalization is applied
    beyond what parsing already did (numeric-looking text parses to a
    float on both the rule and the offer side, so 50 matches "50").
    """
    return ZERO_COST if x == target else INFEASIBLE


def rule_cost(rule: Rule, x: Value) -> CostValue:
    """Apply one rule to one raw value."""
    if rule.kind is RuleKind.EQUALS:
        return cost_equals(x, rule.border)
    try:
        xf = float(x)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        return INFEASIBLE
    if rule.kind is RuleKind.AT_MOST:
        return cost_at_most(xf, float(rule.border))
    return cost_at_least(xf, float(rule.border))


def value_cost(rule: Rule, values, metric: float,
               policy: CostPolicy = DEFAULT_POLICY) -> CostValue:
    """Like node_cost but over a plain parameter→value mapping."""
    if metric <= 0.0 or metric < policy.metric_floor:
        return INFEASIBLE
    if rule.parameter not in values:
        return INFEASIBLE
    base = rule_cost(rule, values[rule.parameter])
    if base.infeasible or not policy.metric_scaling:
        return base
    return CostValue(base.value / metric)  # type: ignore[operator]


def node_cost(rule: Rule, offer: Offer, metric: float,
              policy: CostPolicy = DEFAULT_POLICY) -> CostValue:
    """Full cost of an offer's node in one rule's region.

    An offer that lacks the rule's parameter cannot be judged and is
    Infeasible.  A provider with metric 0 (or below the policy floor)
    is unavailable: every node Infeasible.  With metric scaling on,
    the finite cost is divided by the metric, so halving the metric
    doubles the cost; scaled costs may exceed 1.
    """
    return value_cost(rule, offer.values, metric, policy)
