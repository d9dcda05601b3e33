"""The blackboard: one region per rule, one parameter node per (offer, region).

A board is built once from the active rules and the service catalog,
then mutated structurally: rule additions and modifications append
regions at the end, deletions zero a region in place.  Regions are
never removed, so node ids and ancestor chains stay valid for the
lifetime of the board.  Offer parameter values and provider metrics
live here too, so appended regions always price against current data
rather than the build-time catalog snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .costs import value_cost
from .model import (CostPolicy, CostValue, DEFAULT_POLICY, INFEASIBLE, MetricOutOfRange,
                    ParameterNode, Rule, ServiceDescriptor, Value, ZERO_COST)


class NoRules(ValueError):
    """A board needs at least one rule."""


class NoServicesForTask(LookupError):
    """No catalog descriptor offers anything for the subtask."""


class UnknownNode(KeyError):
    pass


class UnknownRule(KeyError):
    pass


class UnknownProviderOrParameter(KeyError):
    pass


@dataclass(slots=True)
class Region:
    """One horizontal slice of the board, owned by one rule.

    active=False marks a zeroed (deleted-rule) region: its nodes cost 0
    and the region is kept only so existing paths remain intact.
    """

    index: int
    rule: Rule
    active: bool = True
    appended: bool = False


def node_id_for(region_index: int, provider_id: str, offer_index: int) -> str:
    return f"r{region_index}:{provider_id}:{offer_index}"


class Board:
    """Blackboard for a single subtask."""

    def __init__(self, subtask_id: str, policy: CostPolicy = DEFAULT_POLICY):
        self.subtask_id = subtask_id
        self.policy = policy
        self.regions: list[Region] = []
        self.nodes: dict[str, ParameterNode] = {}
        # (region_index, provider_id, offer_index) -> node_id
        self.index: dict[tuple[int, str, int], str] = {}
        # live offer values, updated by parameter-change events
        self.offer_values: dict[tuple[str, int], dict[str, Value]] = {}
        self.metrics: dict[str, float] = {}
        self.known_parameters: dict[str, set[str]] = {}
        self.epoch = 0

    # -- introspection ------------------------------------------------

    @property
    def offer_keys(self) -> list[tuple[str, int]]:
        return sorted(self.offer_values.keys())

    @property
    def last_region_index(self) -> int:
        return len(self.regions) - 1

    def node(self, node_id: str) -> ParameterNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def node_at(self, region_index: int, provider_id: str, offer_index: int) -> ParameterNode:
        return self.node(self.index[(region_index, provider_id, offer_index)])

    def successors(self, node_id: str) -> list[str]:
        """Node ids reachable from node_id: the same offer one region later."""
        n = self.node(node_id)
        nxt = n.region_index + 1
        if nxt >= len(self.regions):
            return []
        return [self.index[(nxt, n.provider_id, n.offer_index)]]

    def predecessor(self, node_id: str) -> str | None:
        n = self.node(node_id)
        if n.region_index == 0:
            return None
        return self.index[(n.region_index - 1, n.provider_id, n.offer_index)]

    def fingerprint(self) -> dict:
        """Canonical snapshot used by determinism and replay checks."""
        return {
            "subtask": self.subtask_id,
            "epoch": self.epoch,
            "regions": [(r.index, r.rule.rule_id, r.rule.parameter, r.rule.kind.value,
                         r.rule.border, r.active, r.appended) for r in self.regions],
            "nodes": {nid: (n.raw_value, n.cost.value) for nid, n in sorted(self.nodes.items())},
            "metrics": dict(sorted(self.metrics.items())),
            "values": {f"{p}:{o}": dict(sorted(v.items()))
                       for (p, o), v in sorted(self.offer_values.items())},
        }

    # -- cost recomputation -------------------------------------------

    def current_cost(self, node: ParameterNode) -> CostValue:
        """Price a node from the live values, metric, and region state."""
        metric = self.metrics.get(node.provider_id, 0.0)
        if metric <= 0.0 or metric < self.policy.metric_floor:
            return INFEASIBLE
        region = self.regions[node.region_index]
        if not region.active:
            return ZERO_COST
        values = self.offer_values[(node.provider_id, node.offer_index)]
        return value_cost(region.rule, values, metric, self.policy)

    # -- structural mutation ------------------------------------------

    def _make_region_nodes(self, region: Region) -> None:
        for provider_id, offer_index in self.offer_keys:
            nid = node_id_for(region.index, provider_id, offer_index)
            values = self.offer_values[(provider_id, offer_index)]
            node = ParameterNode(
                node_id=nid, region_index=region.index, provider_id=provider_id,
                offer_index=offer_index, parameter=region.rule.parameter,
                raw_value=values.get(region.rule.parameter), cost=ZERO_COST)
            self.nodes[nid] = node
            self.index[(region.index, provider_id, offer_index)] = nid
            node.cost = self.current_cost(node)

    def append_region(self, rule: Rule) -> Region:
        """Append a region for a new or modified rule; epoch advances.

        A modified rule keeps its old region untouched and gets a fresh
        one at the end re-checking the same parameter under the new
        border.
        """
        region = Region(index=len(self.regions), rule=rule, active=True,
                        appended=bool(self.regions))
        self.regions.append(region)
        self._make_region_nodes(region)
        self.epoch += 1
        return region

    def zero_region(self, rule_id: str) -> list[int]:
        """Zero every region owned by rule_id (deletion); epoch advances.

        Costs drop to 0 for all of the region's nodes, including ones
        that were Infeasible under the deleted border: the rule is gone,
        so its parameter no longer disqualifies anyone.  Providers
        excluded by metric stay Infeasible; availability is not a rule.
        """
        hit = [r for r in self.regions if r.rule.rule_id == rule_id and r.active]
        if not hit:
            raise UnknownRule(rule_id)
        for region in hit:
            region.active = False
            for provider_id, offer_index in self.offer_keys:
                node = self.node_at(region.index, provider_id, offer_index)
                node.rewrite(cost=self.current_cost(node))
        self.epoch += 1
        return [r.index for r in hit]

    # -- live data mutation -------------------------------------------

    def set_parameter(self, provider_id: str, offer_index: int, parameter: str,
                      new_value: Value) -> list[tuple[ParameterNode, CostValue, CostValue]]:
        """Write a new raw value; reprice every node checking that parameter.

        Returns (node, old_cost, new_cost) for each touched node, in
        region order, including nodes whose cost did not move (their
        raw_value still updates).
        """
        parameter = parameter.lower()
        key = (provider_id, offer_index)
        if key not in self.offer_values:
            raise UnknownProviderOrParameter(f"{provider_id}:{offer_index}")
        if parameter not in self.known_parameters.get(provider_id, set()):
            raise UnknownProviderOrParameter(f"{provider_id}:{parameter}")
        self.offer_values[key][parameter] = new_value
        touched: list[tuple[ParameterNode, CostValue, CostValue]] = []
        for region in self.regions:
            if region.rule.parameter != parameter:
                continue
            node = self.node_at(region.index, provider_id, offer_index)
            old = node.cost
            node.rewrite(raw_value=new_value, cost=self.current_cost(node))
            touched.append((node, old, node.cost))
        return touched

    def set_metric(self, provider_id: str, metric: float
                   ) -> list[tuple[ParameterNode, CostValue, CostValue]]:
        """Update a provider's metric; reprice all of its nodes.

        Returns only nodes whose cost actually moved.
        """
        if provider_id not in self.metrics:
            raise UnknownProviderOrParameter(provider_id)
        metric = float(metric)
        if not (0.0 <= metric <= 1.0):
            raise MetricOutOfRange(f"metric {metric} outside [0, 1]")
        self.metrics[provider_id] = metric
        touched: list[tuple[ParameterNode, CostValue, CostValue]] = []
        for region in self.regions:
            for (p, o) in self.offer_keys:
                if p != provider_id:
                    continue
                node = self.node_at(region.index, p, o)
                old = node.cost
                new = self.current_cost(node)
                if new != old:
                    node.rewrite(cost=new)
                    touched.append((node, old, new))
        return touched


def build_board(rules: Sequence[Rule], catalog: Iterable[ServiceDescriptor],
                policy: CostPolicy = DEFAULT_POLICY, *,
                zeroed: Iterable[str] = ()) -> Board:
    """Construct the board for one subtask.

    Rules become regions in Rule.seq order (stable on ties).  zeroed
    names rule_ids whose regions start out inactive, which lets a board
    be rebuilt mid-history as a pure function of the event log.
    """
    rules = sorted(rules, key=lambda r: r.seq)
    if not rules:
        raise NoRules("at least one rule is required")
    subtask = rules[0].subtask_id
    mismatched = [r.rule_id for r in rules if r.subtask_id != subtask]
    if mismatched:
        raise ValueError(f"rules for mixed subtasks: {mismatched}")

    board = Board(subtask, policy)
    for descriptor in sorted(catalog, key=lambda d: (d.provider_id, d.address, d.port)):
        if descriptor.task_id != subtask:
            continue
        board.metrics.setdefault(descriptor.provider_id, descriptor.metric)
        known = board.known_parameters.setdefault(descriptor.provider_id, set())
        known.update(descriptor.par_list)
        for offer in descriptor.offers:
            key = (offer.provider_id, offer.offer_index)
            if key in board.offer_values:
                continue
            board.offer_values[key] = dict(offer.values)
            known.update(offer.values.keys())
    if not board.offer_values:
        raise NoServicesForTask(subtask)

    zeroed = set(zeroed)
    for i, rule in enumerate(rules):
        region = Region(index=i, rule=rule, active=rule.rule_id not in zeroed,
                        appended=False)
        board.regions.append(region)
        board._make_region_nodes(region)
    return board
