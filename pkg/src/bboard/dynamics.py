"""Bridging live changes into a running search without starting over.

Every entry point takes (state, board), applies the change to the
board, then patches the open/closed lists so that resuming the search
yields exactly what a from-scratch search on the mutated board would.
Descendant eviction is eager: whenever a node with list presence (or a
recorded chain through it) changes cost, everything deeper on the same
offer chain is thrown out and recomputed on re-expansion.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .board import Board
from .model import ChangeEvent, ChangeKind, CostValue, ParameterNode, Value
from .search import (BrokenAncestorChain, SearchState, evict_closed, evict_open,
                     open_insert)


class OutcomeKind(str, enum.Enum):
    NO_OP = "NoOp"
    LISTS_PATCHED = "ListsPatched"
    REGION_APPENDED = "RegionAppended"
    BACKTRACE_RESTARTED = "BacktraceRestarted"
    PROVIDER_EXCLUDED = "ProviderExcluded"


@dataclass(frozen=True, slots=True)
class ChangeOutcome:
    """What a change did to the search: reopened is non-empty only for
    ListsPatched and BacktraceRestarted."""

    kind: OutcomeKind
    reopened: tuple[str, ...] = ()
    invalidated_solution: bool = False


def _evict_descendants(state: SearchState, board: Board, node: ParameterNode) -> bool:
    """Drop every deeper same-offer entry from both lists.

    Deeper entries embed this node's old cost in their cumulatives
    (normal expansion and merged external branches alike), so they are
    stale the moment the cost moves.
    """
    evicted = False
    for region_index in range(node.region_index + 1, len(board.regions)):
        nid = board.index[(region_index, node.provider_id, node.offer_index)]
        evicted |= evict_open(state, nid)
        evicted |= evict_closed(state, nid)
    return evicted


def _reopen_cumulative(state: SearchState, board: Board, node: ParameterNode,
                       new_cost: CostValue) -> float | None:
    """Cumulative for re-inserting a node, or None if its basis is gone."""
    if node.region_index == 0:
        return new_cost.value
    pred_id = board.predecessor(node.node_id)
    pred_entry = state.closed.get(pred_id)
    if pred_entry is None:
        return None
    return pred_entry.cumulative + new_cost.value


def _patch_lists(state: SearchState, board: Board,
                 touched: list[tuple[ParameterNode, CostValue, CostValue]]
                 ) -> tuple[list[str], bool, bool]:
    """Apply cost rewrites to the lists; returns (reopened, invalidated, effect)."""
    reopened: list[str] = []
    invalidated = False
    effect = False
    best = state.best
    touched = sorted((t for t in touched),
                     key=lambda t: (t[0].provider_id, t[0].offer_index, t[0].region_index))
    for node, old, new in touched:
        if old == new:
            continue
        nid = node.node_id
        effect |= _evict_descendants(state, board, node)
        if nid in state.closed:
            effect = True
            if best is not None and nid in best.path:
                invalidated = True
            evict_closed(state, nid)
            if new.finite:
                cumulative = _reopen_cumulative(state, board, node, new)
                if cumulative is None:
                    raise BrokenAncestorChain(
                        f"closed node {nid} has no closed predecessor")
                ancestor = board.predecessor(nid)
                open_insert(state, board, node, cumulative, ancestor)
                reopened.append(nid)
        elif nid in state.open_map:
            effect = True
            if best is not None and nid in best.path:
                invalidated = True
            if new.infeasible:
                evict_open(state, nid)
            else:
                cumulative = _reopen_cumulative(state, board, node, new)
                if cumulative is None:
                    # basis vanished (a merged chain's interior); rediscovery
                    # through normal expansion keeps the search exact
                    evict_open(state, nid)
                else:
                    ancestor = board.predecessor(nid)
                    open_insert(state, board, node, cumulative, ancestor)
        else:
            # not on either list: usually nothing to do ("the node is not
            # yet known"), unless the node just became feasible under an
            # already-expanded predecessor, which a fresh search would see
            if new.finite:
                cumulative = _reopen_cumulative(state, board, node, new)
                if cumulative is not None:
                    ancestor = board.predecessor(nid)
                    open_insert(state, board, node, cumulative, ancestor)
                    reopened.append(nid)
                    effect = True
    return reopened, invalidated, effect


def apply_parameter_change(state: SearchState, board: Board, provider_id: str,
                           offer_index: int, parameter: str, new_value: Value
                           ) -> ChangeOutcome:
    """One offer parameter gets a new raw value.

    The raw value is stored even when nothing else happens; list
    patching depends on where the repriced nodes currently live.
    """
    touched = board.set_parameter(provider_id, offer_index, parameter, new_value)
    reopened, invalidated, effect = _patch_lists(state, board, touched)
    if invalidated:
        state.best = None
    if not effect:
        return ChangeOutcome(OutcomeKind.NO_OP)
    return ChangeOutcome(OutcomeKind.LISTS_PATCHED, tuple(reopened), invalidated)


def apply_metric_change(state: SearchState, board: Board, provider_id: str,
                        new_metric: float) -> ChangeOutcome:
    """Provider availability moved.

    Metric 0 (or below the policy floor) excludes the provider: every
    node Infeasible and off both lists.  Any other value reprices all
    of the provider's nodes like a simultaneous parameter change.
    """
    new_metric = float(new_metric)
    touched = board.set_metric(provider_id, new_metric)
    excluded = new_metric <= 0.0 or new_metric < board.policy.metric_floor
    reopened, invalidated, effect = _patch_lists(state, board, touched)
    if invalidated:
        state.best = None
    if excluded:
        return ChangeOutcome(OutcomeKind.PROVIDER_EXCLUDED, (), invalidated)
    if not effect:
        return ChangeOutcome(OutcomeKind.NO_OP)
    return ChangeOutcome(OutcomeKind.LISTS_PATCHED, tuple(reopened), invalidated)


def apply_rule_event(state: SearchState, board: Board, event: ChangeEvent) -> ChangeOutcome:
    """A rule was added or modified: its region goes to the end of the board.

    A modification leaves the old region in place with its old costs;
    the appended region re-checks the parameter under the new border.
    Chains that already reached the old last region extend into the new
    one so the resumed search keeps their progress.
    """
    rule = event.rule
    if rule is None:
        raise ValueError(f"{event.kind.value} event carries no rule")
    if rule.subtask_id != board.subtask_id:
        raise ValueError(
            f"rule {rule.rule_id} targets {rule.subtask_id!r}, board is {board.subtask_id!r}")
    region = board.append_region(rule)
    state.board_epoch = board.epoch
    old_last = region.index - 1
    frontier = sorted(
        ((nid, entry) for nid, entry in state.closed.items()
         if board.node(nid).region_index == old_last),
        key=lambda item: (board.node(item[0]).provider_id, board.node(item[0]).offer_index))
    for nid, entry in frontier:
        node = board.node(nid)
        succ = board.node_at(region.index, node.provider_id, node.offer_index)
        if succ.cost.infeasible:
            continue
        open_insert(state, board, succ, entry.cumulative + succ.cost.value, nid)
    invalidated = state.best is not None
    state.best = None
    return ChangeOutcome(OutcomeKind.REGION_APPENDED, (), invalidated)


def apply_rule_deletion(state: SearchState, board: Board, rule_id: str) -> ChangeOutcome:
    """A rule was deleted: its regions zero in place and the search backtracks.

    If the search already closed nodes at or past a zeroed region, its
    entries there are discarded, the zeroed region's nodes re-seed with
    their predecessors' cumulatives, and everything deeper is evicted
    for re-expansion (BacktraceRestarted).  A region still ahead of the
    frontier only needs its entries repriced (ListsPatched).
    """
    zeroed = board.zero_region(rule_id)
    state.board_epoch = board.epoch
    reopened: list[str] = []
    backtraced = False
    for region_index in sorted(zeroed):
        backtraced |= any(board.node(nid).region_index >= region_index
                          for nid in state.closed)
        # discard the zeroed region's own entries and everything deeper
        for r in range(region_index, len(board.regions)):
            for provider_id, offer_index in board.offer_keys:
                nid = board.index[(r, provider_id, offer_index)]
                evict_open(state, nid)
                evict_closed(state, nid)
        for provider_id, offer_index in board.offer_keys:
            node = board.node_at(region_index, provider_id, offer_index)
            if node.cost.infeasible:
                continue  # provider excluded by metric
            if region_index == 0:
                open_insert(state, board, node, node.cost.value, None)
                reopened.append(node.node_id)
            else:
                pred_id = board.predecessor(node.node_id)
                pred_entry = state.closed.get(pred_id)
                if pred_entry is None:
                    continue  # frontier has not reached this chain yet
                open_insert(state, board, node,
                            pred_entry.cumulative + node.cost.value, pred_id)
                reopened.append(node.node_id)
    invalidated = state.best is not None
    state.best = None
    kind = OutcomeKind.BACKTRACE_RESTARTED if backtraced else OutcomeKind.LISTS_PATCHED
    return ChangeOutcome(kind, tuple(reopened), invalidated)


def apply_change(state: SearchState, board: Board, event: ChangeEvent) -> ChangeOutcome:
    """Dispatch one ChangeEvent to the matching handler."""
    if event.kind is ChangeKind.PARAMETER_CHANGED:
        return apply_parameter_change(state, board, event.provider_id,
                                      event.offer_index, event.parameter, event.value)
    if event.kind is ChangeKind.METRIC_CHANGED:
        return apply_metric_change(state, board, event.provider_id, event.metric)
    if event.kind in (ChangeKind.RULE_ADDED, ChangeKind.RULE_MODIFIED):
        return apply_rule_event(state, board, event)
    if event.kind is ChangeKind.RULE_DELETED:
        return apply_rule_deletion(state, board, event.rule_id)
    raise ValueError(f"unhandled event kind {event.kind!r}")
