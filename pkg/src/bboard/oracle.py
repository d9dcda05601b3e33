"""Brute-force enumeration over a board, independent of the search.

Used by the scenario runner's --oracle mode and by tests as the second
route: every offer's chain is a fixed sum of its per-region node
costs, so the optimum is the minimum over at most providers x offers
sums.  No priority queue, no incremental state.
"""

from __future__ import annotations

from .board import Board
from .model import CostValue, INFEASIBLE, Solution


def enumerate_totals(board: Board) -> dict[tuple[str, int], CostValue]:
    """Total chain cost for every offer, Infeasible included."""
    totals: dict[tuple[str, int], CostValue] = {}
    for provider_id, offer_index in board.offer_keys:
        total = CostValue(0.0)
        for region in board.regions:
            node = board.node_at(region.index, provider_id, offer_index)
            total = total + node.cost
            if total.infeasible:
                break
        totals[(provider_id, offer_index)] = total
    return totals


def best_offer(board: Board) -> Solution | None:
    """Cheapest feasible offer under the same tie-break as the search:
    (total, provider_id, offer_index) ascending.  None if nothing is
    feasible."""
    best_key = None
    for (provider_id, offer_index), total in enumerate_totals(board).items():
        if total.infeasible:
            continue
        key = (total.value, provider_id, offer_index)
        if best_key is None or key < best_key:
            best_key = key
    if best_key is None:
        return None
    total, provider_id, offer_index = best_key
    path = tuple(board.index[(r.index, provider_id, offer_index)] for r in board.regions)
    return Solution(subtask_id=board.subtask_id, provider_id=provider_id,
                    offer_index=offer_index, total_cost=total, path=path)
