"""Core domain types shared by every other module.

The vocabulary is small: subtasks are constrained by rules, service
providers advertise offers, and the planner walks parameter nodes whose
costs are either finite floats or the distinguished Infeasible value.
All types here are immutable after construction except ParameterNode,
which is the single mutable cell the incremental search rewrites.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Iterable, Mapping, Sequence, Union

Value = Union[float, str]


@total_ordering
@dataclass(frozen=True, slots=True)
class CostValue:
    """A non-negative 64-bit float cost, or Infeasible (value is None).

    Infeasible is deliberately not an IEEE infinity: it marks a rule
    violation, never an arithmetic overflow.  It absorbs addition and
    loses every minimum comparison.
    """

    value: float | None = None

    def __post_init__(self) -> None:
        if self.value is not None:
            v = float(self.value)
            if v != v or v < 0.0:
                raise ValueError(f"cost must be a non-negative number, got {self.value!r}")
            object.__setattr__(self, "value", v)

    @property
    def infeasible(self) -> bool:
        return self.value is None

    @property
    def finite(self) -> bool:
        return self.value is not None

    def __add__(self, other: "CostValue") -> "CostValue":
        if not isinstance(other, CostValue):
            return NotImplemented
        if self.value is None or other.value is None:
            return INFEASIBLE
        return CostValue(self.value + other.value)

    def __radd__(self, other):
        # allows sum() over costs with the default integer start
        if other == 0:
            return self
        return NotImplemented

    def __lt__(self, other: "CostValue") -> bool:
        if not isinstance(other, CostValue):
            return NotImplemented
        if self.value is None:
            return False
        if other.value is None:
            return True
        return self.value < other.value

    def __float__(self) -> float:
        if self.value is None:
            raise ValueError("Infeasible has no float value")
        return self.value

    def __repr__(self) -> str:
        return "CostValue(Infeasible)" if self.value is None else f"CostValue({self.value!r})"


ZERO_COST = CostValue(0.0)
INFEASIBLE = CostValue(None)


class RuleKind(str, enum.Enum):
    AT_MOST = "AT_MOST"
    AT_LEAST = "AT_LEAST"
    EQUALS = "EQUALS"


@dataclass(frozen=True, slots=True)
class Rule:
    """One QoS constraint on one parameter of one subtask."""

    rule_id: str
    subtask_id: str
    parameter: str
    kind: RuleKind
    border: Value
    seq: int = 0

    def __post_init__(self) -> None:
        if not self.rule_id:
            raise ValueError("rule_id must be non-empty")
        if not self.subtask_id:
            raise ValueError("subtask_id must be non-empty")
        if not self.parameter:
            raise ValueError("parameter must be non-empty")
        object.__setattr__(self, "parameter", self.parameter.lower())
        if self.kind in (RuleKind.AT_MOST, RuleKind.AT_LEAST):
            try:
                b = float(self.border)
            except (TypeError, ValueError):
                raise ValueError(
                    f"{self.kind.value} border must be numeric, got {self.border!r}"
                ) from None
            if b < 0:
                raise ValueError(f"border must be non-negative, got {b}")
            object.__setattr__(self, "border", b)


@dataclass(frozen=True, slots=True)
class Offer:
    """A bundle of parameter values a provider commits to as a unit.

    Offers are never recombined across bundles: offer 0's price cannot
    be paired with offer 1's runtime.
    """

    provider_id: str
    subtask_id: str
    offer_index: int
    values: Mapping[str, Value] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "values", {str(k).lower(): v for k, v in dict(self.values).items()}
        )
        if self.offer_index < 0:
            raise ValueError("offer_index must be >= 0")


@dataclass(frozen=True, slots=True)
class ServiceDescriptor:
    """A provider's advertisement for one task, plus its offers."""

    address: str
    port: int
    task_id: str
    metric: float
    par_list: tuple[str, ...]
    provider_id: str
    offers: tuple[Offer, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "par_list", tuple(str(p).lower() for p in self.par_list))
        object.__setattr__(self, "metric", float(self.metric))
        object.__setattr__(self, "offers", tuple(self.offers))


class ParameterNode:
    """One (offer, region) cell on a blackboard.

    The search and the dynamics layer rewrite cost and raw_value in
    place; version increments on every rewrite so stale priority-queue
    entries can be recognized and skipped.
    """

    __slots__ = ("node_id", "region_index", "provider_id", "offer_index",
                 "parameter", "raw_value", "cost", "version")

    def __init__(self, node_id: str, region_index: int, provider_id: str,
                 offer_index: int, parameter: str, raw_value: Value | None,
                 cost: CostValue):
        self.node_id = node_id
        self.region_index = region_index
        self.provider_id = provider_id
        self.offer_index = offer_index
        self.parameter = parameter
        self.raw_value = raw_value
        self.cost = cost
        self.version = 0

    def rewrite(self, *, raw_value: Value | None = None, cost: CostValue | None = None) -> None:
        if raw_value is not None:
            self.raw_value = raw_value
        if cost is not None:
            self.cost = cost
        self.version += 1

    def __repr__(self) -> str:
        return (f"ParameterNode({self.node_id}, raw={self.raw_value!r}, "
                f"cost={self.cost!r}, v{self.version})")


@dataclass(frozen=True, slots=True)
class Solution:
    """A finished selection: the cheapest offer and its node path."""

    subtask_id: str
    provider_id: str
    offer_index: int
    total_cost: float
    path: tuple[str, ...]
    solved_at: int = 0

    def same_selection(self, other: "Solution | None") -> bool:
        return (other is not None
                and self.provider_id == other.provider_id
                and self.offer_index == other.offer_index
                and self.total_cost == other.total_cost
                and self.path == other.path)


class ChangeKind(str, enum.Enum):
    RULE_ADDED = "RuleAdded"
    RULE_MODIFIED = "RuleModified"
    RULE_DELETED = "RuleDeleted"
    PARAMETER_CHANGED = "ParameterChanged"
    METRIC_CHANGED = "MetricChanged"


@dataclass(frozen=True, slots=True)
class ChangeEvent:
    """A single mutation of the live system, totally ordered by seq.

    task_id narrows ParameterChanged to one subtask's offers; left None
    the event applies to every board holding that provider.
    """

    kind: ChangeKind
    seq: int = 0
    rule: Rule | None = None
    rule_id: str | None = None
    provider_id: str | None = None
    offer_index: int | None = None
    parameter: str | None = None
    value: Value | None = None
    metric: float | None = None
    task_id: str | None = None

    def with_seq(self, seq: int) -> "ChangeEvent":
        return ChangeEvent(kind=self.kind, seq=seq, rule=self.rule, rule_id=self.rule_id,
                           provider_id=self.provider_id, offer_index=self.offer_index,
                           parameter=self.parameter, value=self.value, metric=self.metric,
                           task_id=self.task_id)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.value, "seq": self.seq}
        if self.rule is not None:
            d["rule"] = {"rule_id": self.rule.rule_id, "subtask_id": self.rule.subtask_id,
                         "parameter": self.rule.parameter, "kind": self.rule.kind.value,
                         "border": self.rule.border, "seq": self.rule.seq}
        for f in ("rule_id", "provider_id", "offer_index", "parameter", "value",
                  "metric", "task_id"):
            v = getattr(self, f)
            if v is not None:
                d[f] = v
        return d

    @staticmethod
    def from_dict(d: Mapping) -> "ChangeEvent":
        rule = None
        if "rule" in d and d["rule"] is not None:
            r = d["rule"]
            rule = Rule(rule_id=r["rule_id"], subtask_id=r["subtask_id"],
                        parameter=r["parameter"], kind=RuleKind(r["kind"]),
                        border=r["border"], seq=int(r.get("seq", 0)))
        return ChangeEvent(
            kind=ChangeKind(d["kind"]), seq=int(d.get("seq", 0)), rule=rule,
            rule_id=d.get("rule_id"), provider_id=d.get("provider_id"),
            offer_index=d.get("offer_index"), parameter=d.get("parameter"),
            value=d.get("value"), metric=d.get("metric"), task_id=d.get("task_id"))


def rule_added(rule: Rule, seq: int = 0) -> ChangeEvent:
    return ChangeEvent(kind=ChangeKind.RULE_ADDED, seq=seq, rule=rule, rule_id=rule.rule_id)


def rule_modified(rule: Rule, seq: int = 0) -> ChangeEvent:
    return ChangeEvent(kind=ChangeKind.RULE_MODIFIED, seq=seq, rule=rule, rule_id=rule.rule_id)


def rule_deleted(rule_id: str, task_id: str | None = None, seq: int = 0) -> ChangeEvent:
    return ChangeEvent(kind=ChangeKind.RULE_DELETED, seq=seq, rule_id=rule_id,
                       task_id=task_id)


def parameter_changed(provider_id: str, offer_index: int, parameter: str, value: Value,
                      task_id: str | None = None, seq: int = 0) -> ChangeEvent:
    return ChangeEvent(kind=ChangeKind.PARAMETER_CHANGED, seq=seq, provider_id=provider_id,
                       offer_index=offer_index, parameter=parameter.lower(), value=value,
                       task_id=task_id)


def metric_changed(provider_id: str, metric: float, seq: int = 0) -> ChangeEvent:
    return ChangeEvent(kind=ChangeKind.METRIC_CHANGED, seq=seq, provider_id=provider_id,
                       metric=float(metric))


@dataclass(frozen=True, slots=True)
class CostPolicy:
    """Knobs for turning raw parameter values into costs.

    feasibility_mode is fixed: rule-violating values are excluded from
    the search outright instead of being admitted at a penalty.
    """

    metric_scaling: bool = True
    metric_floor: float = 0.0

    FEASIBILITY_MODE = "ExcludeViolations"


DEFAULT_POLICY = CostPolicy()


@dataclass(frozen=True, slots=True)
class Violation:
    code: str
    provider_id: str
    field: str
    message: str


class MetricOutOfRange(ValueError):
    """Metric values must lie in [0, 1]."""


class CatalogError(ValueError):
    """Raised by validate_catalog; carries the full violation list."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        summary = "; ".join(f"{v.code}({v.provider_id}.{v.field})" for v in self.violations)
        super().__init__(f"catalog invalid: {summary}")


def catalog_violations(descriptors: Iterable[ServiceDescriptor]) -> list[Violation]:
    """Collect every type-invariant violation in a prospective catalog."""
    violations: list[Violation] = []
    seen_offers: set[tuple[str, str, int]] = set()
    for d in descriptors:
        if not (0.0 <= d.metric <= 1.0):
            violations.append(Violation("MetricOutOfRange", d.provider_id, "metric",
                                        f"metric {d.metric} outside [0, 1]"))
        allowed = set(d.par_list)
        for offer in d.offers:
            key = (offer.provider_id, offer.subtask_id, offer.offer_index)
            if key in seen_offers:
                violations.append(Violation("DuplicateOffer", offer.provider_id,
                                            f"offers[{offer.offer_index}]",
                                            f"duplicate offer key {key}"))
            seen_offers.add(key)
            for name, value in offer.values.items():
                if name not in allowed:
                    violations.append(Violation("ParameterNotInParList", offer.provider_id,
                                                f"offers[{offer.offer_index}].{name}",
                                                f"parameter {name!r} missing from PAR_LIST"))
                if isinstance(value, (int, float)) and float(value) < 0:
                    violations.append(Violation("NegativeValue", offer.provider_id,
                                                f"offers[{offer.offer_index}].{name}",
                                                f"negative value {value!r}"))
    return violations


def validate_catalog(descriptors: Iterable[ServiceDescriptor]) -> tuple[ServiceDescriptor, ...]:
    """Return the catalog unchanged iff every invariant holds.

    Raises CatalogError carrying one Violation per offending field
    otherwise; the scan is exhaustive, not first-failure.
    """
    catalog = tuple(descriptors)
    violations = catalog_violations(catalog)
    if violations:
        raise CatalogError(violations)
    return catalog
