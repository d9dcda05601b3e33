"""Incremental minimum-cost-path search over a blackboard.

A modified Dijkstra: the openlist starts with every feasible node of
the first region, expansion walks offer chains region by region, and
the first last-region pop is optimal.  The twist is that the search
state survives live cost rewrites (see dynamics): the priority queue
uses lazy deletion with per-entry serial numbers instead of
decrease-key, so any entry can be superseded at any time, and
termination is checked against every closed last-region candidate, not
just the most recent pop, because mutations can resurrect or demote
candidates between resumes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

from .board import Board
from .model import ParameterNode, Solution

Heuristic = Callable[[ParameterNode], float]


class NoFeasiblePath(LookupError):
    """Every chain through the board hits an Infeasible node."""

    def __init__(self, subtask_id: str):
        self.subtask_id = subtask_id
        super().__init__(f"no feasible provider chain for subtask {subtask_id!r}")


class EpochMismatch(RuntimeError):
    """The board mutated structurally behind the search state's back."""


class BrokenAncestorChain(RuntimeError):
    """Retrace hit a gap; the state was corrupted externally."""


@dataclass(slots=True)
class OpenEntry:
    cumulative: float
    serial: int
    priority: float


@dataclass(slots=True)
class ClosedEntry:
    cumulative: float
    serial: int


@dataclass
class SearchState:
    """Everything the search knows between resumes.

    heap entries are (priority, provider_id, offer_index, node_id,
    serial, cumulative); an entry is stale unless its serial matches
    the current open_map entry for that node.  Ties break by
    (provider_id, offer_index) ascending by construction of the tuple.
    """

    subtask_id: str
    board_epoch: int
    heuristic: Heuristic | None = None
    heap: list = field(default_factory=list)
    open_map: dict[str, OpenEntry] = field(default_factory=dict)
    closed: dict[str, ClosedEntry] = field(default_factory=dict)
    ancestors: dict[str, str] = field(default_factory=dict)
    best: Solution | None = None
    ticks: int = 0
    serial_counter: int = 0
    delegations: dict = field(default_factory=dict)

    def next_serial(self) -> int:
        self.serial_counter += 1
        return self.serial_counter

    def check_invariants(self, board: Board) -> None:
        overlap = self.open_map.keys() & self.closed.keys()
        if overlap:
            raise AssertionError(f"openlist and closedlist overlap: {sorted(overlap)}")
        for nid in list(self.open_map) + list(self.closed):
            board.node(nid)


def _priority(state: SearchState, node: ParameterNode, cumulative: float) -> float:
    if state.heuristic is None:
        return cumulative
    return cumulative + float(state.heuristic(node))


def open_insert(state: SearchState, board: Board, node: ParameterNode,
                cumulative: float, ancestor_id: str | None) -> None:
    """Insert or supersede the open entry for a node."""
    serial = state.next_serial()
    prio = _priority(state, node, cumulative)
    state.open_map[node.node_id] = OpenEntry(cumulative, serial, prio)
    if ancestor_id is None:
        state.ancestors.pop(node.node_id, None)
    else:
        state.ancestors[node.node_id] = ancestor_id
    heapq.heappush(state.heap, (prio, node.provider_id, node.offer_index,
                                node.node_id, serial, cumulative))


def evict_open(state: SearchState, node_id: str) -> bool:
    if node_id in state.open_map:
        del state.open_map[node_id]
        state.ancestors.pop(node_id, None)
        return True
    return False


def evict_closed(state: SearchState, node_id: str) -> bool:
    if node_id in state.closed:
        del state.closed[node_id]
        state.ancestors.pop(node_id, None)
        return True
    return False


def new_search(board: Board, heuristic: Heuristic | None = None) -> SearchState:
    """Seed a fresh search: every finite-cost first-region node opens.

    Infeasible nodes never enter the lists at all.
    """
    state = SearchState(subtask_id=board.subtask_id, board_epoch=board.epoch,
                        heuristic=heuristic)
    for provider_id, offer_index in board.offer_keys:
        node = board.node_at(0, provider_id, offer_index)
        if node.cost.finite:
            open_insert(state, board, node, node.cost.value, None)
    return state


def _peek_valid(state: SearchState):
    """Drop stale heap heads; return the live minimum entry or None."""
    heap = state.heap
    while heap:
        prio, provider_id, offer_index, node_id, serial, cumulative = heap[0]
        entry = state.open_map.get(node_id)
        if entry is not None and entry.serial == serial:
            return heap[0]
        heapq.heappop(heap)
    return None


def _best_candidate(state: SearchState, board: Board):
    """Cheapest closed last-region node as (cum, provider, offer, node_id)."""
    last = board.last_region_index
    best = None
    for node_id, entry in state.closed.items():
        node = board.node(node_id)
        if node.region_index != last:
            continue
        key = (entry.cumulative, node.provider_id, node.offer_index, node_id)
        if best is None or key < best:
            best = key
    return best


def run_steps(state: SearchState, board: Board, pops: int | None = None) -> bool:
    """Advance the search by at most `pops` pops (None = to completion).

    Returns True once the frontier can no longer improve on the best
    closed last-region candidate.  Instrumentation hook; resume() is
    the normal entry point.
    """
    last = board.last_region_index
    best = _best_candidate(state, board)
    done = 0
    while pops is None or done < pops:
        head = _peek_valid(state)
        if head is None:
            return True
        prio, provider_id, offer_index, node_id, serial, cumulative = head
        if best is not None and (prio, provider_id, offer_index) >= best[:3]:
            return True
        heapq.heappop(state.heap)
        del state.open_map[node_id]
        state.closed[node_id] = ClosedEntry(cumulative, serial)
        done += 1
        node = board.node(node_id)
        if node.region_index == last:
            best = (cumulative, provider_id, offer_index, node_id)
            continue
        for succ_id in board.successors(node_id):
            if succ_id in state.open_map or succ_id in state.closed:
                continue
            succ = board.node(succ_id)
            if succ.cost.infeasible:
                continue
            open_insert(state, board, succ, cumulative + succ.cost.value, node_id)
    return False


def retrace(state: SearchState, board: Board, node_id: str) -> list[str]:
    """Walk ancestors back to the first region; returns ids in region order."""
    node = board.node(node_id)
    path = [node_id]
    while node.region_index > 0:
        ancestor_id = state.ancestors.get(node.node_id)
        if ancestor_id is None or ancestor_id not in board.nodes:
            raise BrokenAncestorChain(f"no ancestor recorded for {node.node_id}")
        ancestor = board.node(ancestor_id)
        if (ancestor.region_index != node.region_index - 1
                or ancestor.provider_id != node.provider_id
                or ancestor.offer_index != node.offer_index):
            raise BrokenAncestorChain(
                f"{ancestor_id} is not a valid predecessor of {node.node_id}")
        path.append(ancestor_id)
        node = ancestor
    path.reverse()
    return path


def resume(state: SearchState, board: Board) -> Solution:
    """Continue (or finish) the search and return the current optimum.

    Idempotent when nothing changed: the same Solution comes back
    unchanged.  After dynamics patched the lists, expansion picks up
    exactly where the surviving entries left off.
    """
    if state.board_epoch != board.epoch:
        raise EpochMismatch(
            f"search state at epoch {state.board_epoch}, board at {board.epoch}")
    run_steps(state, board, None)
    best = _best_candidate(state, board)
    if best is None:
        state.best = None
        raise NoFeasiblePath(state.subtask_id)
    cumulative, provider_id, offer_index, node_id = best
    path = tuple(retrace(state, board, node_id))
    candidate = Solution(subtask_id=state.subtask_id, provider_id=provider_id,
                         offer_index=offer_index, total_cost=cumulative, path=path,
                         solved_at=state.ticks)
    if candidate.same_selection(state.best):
        return state.best  # unchanged fixpoint
    state.ticks += 1
    solution = Solution(subtask_id=candidate.subtask_id, provider_id=provider_id,
                        offer_index=offer_index, total_cost=cumulative, path=path,
                        solved_at=state.ticks)
    state.best = solution
    return solution


def find_best_provider(board: Board, heuristic: Heuristic | None = None,
                       state: SearchState | None = None) -> Solution:
    """One-shot selection; pass a state from new_search to keep it resumable."""
    if state is None:
        state = new_search(board, heuristic)
    return resume(state, board)
