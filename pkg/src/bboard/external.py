"""Delegating a slice of the search to an outside solver.

A delegation freezes a branch of the current board - a provider
subset across a contiguous region span - into a plain-text fragment
any holder can price without seeing the rest of the board.  The
returned claim is never trusted: merge re-prices every node of the
claimed path against the current board and drops anything stale,
mispriced, or shaped wrong.  Accepted claims enter the open list as
ordinary entries, so a cheaper local path still wins the race.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

from .board import Board, build_board, node_id_for
from .costs import INFEASIBLE
from .model import (CostPolicy, DEFAULT_POLICY, Offer, Rule, RuleKind,
                    ServiceDescriptor)
from .registry import emit_descriptor, format_value, parse_descriptor, parse_value
from .search import NoFeasiblePath, SearchState, find_best_provider, open_insert

ABS_TOL = 1e-9


class InvalidBranchSpec(ValueError):
    """The requested branch does not describe part of this board."""


class VerificationFailed(ValueError):
    """A returned claim contradicts the current board."""


class StaleEpoch(RuntimeError):
    """The board restructured while the delegation was out."""


class FragmentError(ValueError):
    """A fragment's text form failed to parse."""


class DelegationStatus(str, enum.Enum):
    PENDING = "Pending"
    RETURNED = "Returned"
    IGNORED = "Ignored"
    TIMED_OUT = "TimedOut"


@dataclass(frozen=True, slots=True)
class BranchSpec:
    """Which slice of the board goes out: providers x region span
    (inclusive)."""

    provider_ids: tuple[str, ...]
    region_start: int
    region_end: int


@dataclass(slots=True)
class BranchDelegation:
    delegation_id: str
    subtask_id: str
    spec: BranchSpec
    board_epoch: int
    fragment: str
    created_at: float = 0.0
    deadline: float | None = None
    status: DelegationStatus = DelegationStatus.PENDING
    merged_node_id: str | None = None


@dataclass(frozen=True, slots=True)
class PartialSolution:
    """An external solver's priced pick for one branch.

    Empty (provider_id None, claimed None) means the solver found no
    feasible offer; that is an answer, not an error.
    """

    delegation_id: str
    region_start: int
    provider_id: str | None = None
    offer_index: int | None = None
    costs: tuple[float, ...] = ()
    claimed: float | None = None

    @property
    def empty(self) -> bool:
        return self.provider_id is None

    def to_dict(self) -> dict:
        return {
            "delegation_id": self.delegation_id,
            "region_start": self.region_start,
            "provider_id": self.provider_id,
            "offer_index": self.offer_index,
            "costs": list(self.costs),
            "claimed": self.claimed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PartialSolution":
        return cls(delegation_id=data["delegation_id"],
                   region_start=int(data["region_start"]),
                   provider_id=data.get("provider_id"),
                   offer_index=(None if data.get("offer_index") is None
                                else int(data["offer_index"])),
                   costs=tuple(float(c) for c in data.get("costs", ())),
                   claimed=(None if data.get("claimed") is None
                            else float(data["claimed"])))


# -- fragment text form ----------------------------------------------
#
# FRAGMENT TASK=convert START=1 ID=d1
# REGION PARAM=RUNTIME; KIND=AT_MOST; BORDER=80
# REGION PARAM=PRICE; KIND=AT_MOST; BORDER=60; ZEROED=1
# [IP=fragment, PORT=0, TASK_ID=convert, ..., OFFERS=[{...}]]


def fragment_text(board: Board, spec: BranchSpec, delegation_id: str = "") -> str:
    lines = [f"FRAGMENT TASK={board.subtask_id} START={spec.region_start}"
             + (f" ID={delegation_id}" if delegation_id else "")]
    for r in range(spec.region_start, spec.region_end + 1):
        region = board.regions[r]
        rule = region.rule
        line = (f"REGION PARAM={rule.parameter.upper()}; KIND={rule.kind.value};"
                f" BORDER={format_value(rule.border)}")
        if not region.active:
            line += "; ZEROED=1"
        lines.append(line)
    for provider_id in sorted(set(spec.provider_ids)):
        offers = []
        params: set[str] = set()
        for p, o in board.offer_keys:
            if p != provider_id:
                continue
            values = dict(board.offer_values[(p, o)])
            params.update(values)
            offers.append(Offer(provider_id=p, subtask_id=board.subtask_id,
                                offer_index=o, values=values))
        descriptor = ServiceDescriptor(
            address="fragment", port=0, task_id=board.subtask_id,
            metric=board.metrics[provider_id], par_list=tuple(sorted(params)),
            provider_id=provider_id, offers=tuple(offers))
        lines.append(emit_descriptor(descriptor))
    return "\n".join(lines) + "\n"


def parse_fragment(text: str) -> tuple[str, int, str, list[Rule], set[str],
                                       list[ServiceDescriptor]]:
    """Returns (task_id, region_start, delegation_id, rules, zeroed_ids,
    descriptors)."""
    lines = [ln.strip() for ln in text.splitlines()
             if ln.strip() and not ln.strip().startswith("#")]
    if not lines or not lines[0].startswith("FRAGMENT"):
        raise FragmentError("fragment must open with a FRAGMENT header")
    header: dict[str, str] = {}
    for token in lines[0].split()[1:]:
        if "=" not in token:
            raise FragmentError(f"bad header token {token!r}")
        k, _, v = token.partition("=")
        header[k.upper()] = v
    if "TASK" not in header:
        raise FragmentError("FRAGMENT header needs TASK")
    task_id = header["TASK"]
    region_start = int(header.get("START", "0"))
    delegation_id = header.get("ID", "")
    rules: list[Rule] = []
    zeroed: set[str] = set()
    descriptors: list[ServiceDescriptor] = []
    for line in lines[1:]:
        if line.startswith("REGION"):
            fields: dict[str, str] = {}
            for item in line[len("REGION"):].split(";"):
                item = item.strip()
                if not item:
                    continue
                if "=" not in item:
                    raise FragmentError(f"bad REGION field {item!r}")
                k, _, v = item.partition("=")
                fields[k.strip().upper()] = v.strip()
            for need in ("PARAM", "KIND", "BORDER"):
                if need not in fields:
                    raise FragmentError(f"REGION line missing {need}")
            try:
                kind = RuleKind(fields["KIND"])
            except ValueError:
                raise FragmentError(f"unknown KIND {fields['KIND']!r}") from None
            rule_id = f"f{len(rules)}"
            rules.append(Rule(rule_id=rule_id, subtask_id=task_id,
                              parameter=fields["PARAM"], kind=kind,
                              border=parse_value(fields["BORDER"]),
                              seq=len(rules) + 1))
            if fields.get("ZEROED") == "1":
                zeroed.add(rule_id)
        elif line.startswith("["):
            descriptors.append(parse_descriptor(line))
        else:
            raise FragmentError(f"unrecognized fragment line {line[:40]!r}")
    if not rules:
        raise FragmentError("fragment has no REGION lines")
    return task_id, region_start, delegation_id, rules, zeroed, descriptors


def solve_fragment(text: str, policy: CostPolicy = DEFAULT_POLICY) -> PartialSolution:
    """Price a fragment in isolation and return the best claim found.

    This is the whole external-solver side: stateless, no shared data,
    safe to expose to strangers.
    """
    task_id, region_start, delegation_id, rules, zeroed, descriptors = parse_fragment(text)
    empty = PartialSolution(delegation_id=delegation_id, region_start=region_start)
    if not descriptors:
        return empty
    try:
        board = build_board(rules, descriptors, policy, zeroed=zeroed)
        solution = find_best_provider(board)
    except NoFeasiblePath:
        return empty
    costs = tuple(float(board.node(nid).cost) for nid in solution.path)
    return PartialSolution(delegation_id=delegation_id, region_start=region_start,
                           provider_id=solution.provider_id,
                           offer_index=solution.offer_index,
                           costs=costs, claimed=float(solution.total_cost))


serve_as_solver = solve_fragment


# -- delegator side --------------------------------------------------


def delegate_branch(state: SearchState, board: Board, spec: BranchSpec, *,
                    now: float = 0.0, deadline: float | None = None
                    ) -> BranchDelegation:
    """Record a pending delegation and build its fragment."""
    if not spec.provider_ids:
        raise InvalidBranchSpec("empty provider set")
    if not (0 <= spec.region_start <= spec.region_end <= board.last_region_index):
        raise InvalidBranchSpec(
            f"span {spec.region_start}..{spec.region_end} outside board")
    known = {p for p, _ in board.offer_keys}
    missing = set(spec.provider_ids) - known
    if missing:
        raise InvalidBranchSpec(f"unknown providers {sorted(missing)}")
    delegation_id = f"d{len(state.delegations) + 1}"
    delegation = BranchDelegation(
        delegation_id=delegation_id, subtask_id=board.subtask_id, spec=spec,
        board_epoch=board.epoch,
        fragment=fragment_text(board, spec, delegation_id),
        created_at=now, deadline=deadline)
    state.delegations[delegation_id] = delegation
    return delegation


def expire_delegations(state: SearchState, now: float) -> list[BranchDelegation]:
    """Flip every overdue pending delegation to TimedOut."""
    expired = []
    for delegation in state.delegations.values():
        if (delegation.status is DelegationStatus.PENDING
                and delegation.deadline is not None
                and now >= delegation.deadline):
            delegation.status = DelegationStatus.TIMED_OUT
            expired.append(delegation)
    return expired


def _fail(delegation: BranchDelegation, reason: str) -> VerificationFailed:
    delegation.status = DelegationStatus.IGNORED
    return VerificationFailed(reason)


def merge_partial_solution(state: SearchState, board: Board,
                           partial: PartialSolution) -> BranchDelegation:
    """Verify a returned claim and, if it holds up, plant its terminal
    node in the open list.

    Raises StaleEpoch if the board restructured since delegation and
    VerificationFailed if the claim is shaped wrong or mispriced
    against current data; both mark the delegation Ignored.  A claim
    arriving after timeout is dropped silently.
    """
    delegation = state.delegations.get(partial.delegation_id)
    if delegation is None:
        raise InvalidBranchSpec(f"unknown delegation {partial.delegation_id!r}")
    if delegation.status is not DelegationStatus.PENDING:
        return delegation
    if board.epoch != delegation.board_epoch:
        delegation.status = DelegationStatus.IGNORED
        raise StaleEpoch(
            f"delegated at epoch {delegation.board_epoch}, board now {board.epoch}")
    if partial.empty:
        delegation.status = DelegationStatus.RETURNED
        return delegation

    spec = delegation.spec
    span = spec.region_end - spec.region_start + 1
    if partial.provider_id not in spec.provider_ids:
        raise _fail(delegation,
                    f"provider {partial.provider_id!r} not in delegated branch")
    if partial.region_start != spec.region_start:
        raise _fail(delegation, "claim starts at the wrong region")
    if len(partial.costs) != span:
        raise _fail(delegation,
                    f"claim has {len(partial.costs)} costs for a span of {span}")
    if partial.claimed is None:
        raise _fail(delegation, "claim has no total")
    if abs(sum(partial.costs) - partial.claimed) > ABS_TOL:
        raise _fail(delegation, "claimed total disagrees with its own entries")
    key = (spec.region_start, partial.provider_id, partial.offer_index)
    if key not in board.index:
        raise _fail(delegation, f"no such offer {partial.provider_id!r}"
                                f"/{partial.offer_index} on this board")
    for i, claimed_cost in enumerate(partial.costs):
        node = board.node_at(spec.region_start + i, partial.provider_id,
                             partial.offer_index)
        if node.cost is INFEASIBLE or node.cost.value is None:
            raise _fail(delegation, f"node {node.node_id} is infeasible now")
        if abs(node.cost.value - claimed_cost) > ABS_TOL:
            raise _fail(delegation,
                        f"node {node.node_id} costs {node.cost.value}, "
                        f"claim says {claimed_cost}")

    # claim verified; splice it in unless the local search already covers it
    delegation.status = DelegationStatus.RETURNED
    prefix = 0.0
    for r in range(spec.region_start):
        node = board.node_at(r, partial.provider_id, partial.offer_index)
        if node.cost.value is None:
            return delegation  # unreachable head, claim is moot
        prefix += node.cost.value
    terminal_id = node_id_for(spec.region_end, partial.provider_id,
                              partial.offer_index)
    for r in range(1, spec.region_end + 1):
        state.ancestors[node_id_for(r, partial.provider_id, partial.offer_index)] = \
            node_id_for(r - 1, partial.provider_id, partial.offer_index)
    if terminal_id in state.closed:
        return delegation  # local search got there first, same true cost
    if terminal_id in state.open_map:
        return delegation
    ancestor = (node_id_for(spec.region_end - 1, partial.provider_id,
                            partial.offer_index)
                if spec.region_end > 0 else None)
    # fold the board's own costs region by region: the planted cumulative
    # must be bitwise what a local expansion of the same chain would carry,
    # so the claim is trusted as a pointer, never as arithmetic
    cumulative = prefix
    for r in range(spec.region_start, spec.region_end + 1):
        cumulative += board.node_at(r, partial.provider_id,
                                    partial.offer_index).cost.value
    open_insert(state, board, board.node(terminal_id), cumulative, ancestor)
    delegation.merged_node_id = terminal_id
    return delegation
