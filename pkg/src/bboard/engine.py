"""The control layer: shared repository, rules controller, run controller.

Every mutation becomes a seq-stamped ChangeEvent in an append-only
log, and all repository state is a pure fold over that log, so
replaying the log on a fresh engine reconstructs every solution
exactly.  Per-subtask search sessions are built lazily from the
folded state and then patched incrementally by the same events that
extend the log.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .board import (Board, NoRules, UnknownProviderOrParameter, UnknownRule,
                    build_board)
from .dynamics import ChangeOutcome, apply_change
from .executor import (ConfirmHook, ExecutionMode, SimulatedInvoker, Invoker,
                       Workflow, WorkflowReport, execute_workflow)
from .model import (ChangeEvent, ChangeKind, CostPolicy, DEFAULT_POLICY,
                    MetricOutOfRange, Rule, RuleKind, ServiceDescriptor,
                    Solution, Value, metric_changed, parameter_changed,
                    rule_added, rule_deleted, rule_modified, validate_catalog)
from .registry import parse_value, simulated_catalog_providers
from .search import NoFeasiblePath, SearchState, new_search, resume


class DuplicateActiveRule(ValueError):
    """An active rule for this (subtask, parameter) already exists."""


class UnknownRuleForDelete(UnknownRule):
    """Deletion named a rule id that is not active."""


class UnknownRun(KeyError):
    pass


class RulesFileError(ValueError):
    """A rules file line failed to parse; carries the line number."""


def parse_rules_text(text: str) -> list[tuple[str, str, RuleKind, Value]]:
    """Lines of SUBTASK=<id>; PARAM=<name>; KIND=<kind>; BORDER=<value>."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields: dict[str, str] = {}
        for item in line.split(";"):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise RulesFileError(f"line {lineno}: expected KEY=VALUE, got {item!r}")
            k, _, v = item.partition("=")
            fields[k.strip().upper()] = v.strip()
        for need in ("SUBTASK", "PARAM", "KIND", "BORDER"):
            if need not in fields:
                raise RulesFileError(f"line {lineno}: missing {need}")
        try:
            kind = RuleKind(fields["KIND"])
        except ValueError:
            raise RulesFileError(
                f"line {lineno}: unknown KIND {fields['KIND']!r}") from None
        out.append((fields["SUBTASK"], fields["PARAM"].lower(), kind,
                    parse_value(fields["BORDER"])))
    return out


@dataclass(slots=True)
class SolutionRecord:
    """A solved (or provably unsolvable) subtask, stamped with when."""

    subtask_id: str
    feasible: bool
    solution: Solution | None
    epoch: int
    solved_seq: int

    def to_dict(self) -> dict:
        base = {"subtask_id": self.subtask_id, "feasible": self.feasible,
                "epoch": self.epoch, "seq": self.solved_seq}
        if self.solution is not None:
            base.update(provider_id=self.solution.provider_id,
                        offer_index=self.solution.offer_index,
                        total_cost=float(self.solution.total_cost),
                        path=list(self.solution.path),
                        solved_at=self.solution.solved_at)
        else:
            base.update(provider_id=None, offer_index=None, total_cost=None,
                        path=[], solved_at=None)
        return base


class SharedRepository:
    """Append-only event log plus the state folded from it.

    record_event is the entire fold step; nothing else mutates the
    folded fields, which is what makes replay exact.
    """

    def __init__(self, catalog: Sequence[ServiceDescriptor]):
        self.catalog: tuple[ServiceDescriptor, ...] = tuple(catalog)
        self.events: list[ChangeEvent] = []
        self.seq = 0
        self.rule_counter = 0
        # every rule version per subtask, in event order; zeroed ids separate
        self.rule_versions: dict[str, list[Rule]] = {}
        self.active_rules: dict[str, Rule] = {}
        self.rule_by_key: dict[tuple[str, str], str] = {}
        self.deleted_rule_ids: set[str] = set()
        self.external_flags: dict[tuple[str, int], bool] = {}
        self.solutions: dict[str, SolutionRecord] = {}
        # live service data starts at the catalog and drifts with events
        self.current_values: dict[tuple[str, str, int], dict[str, Value]] = {}
        self.current_metrics: dict[str, float] = {}
        self.par_lists: dict[tuple[str, str], tuple[str, ...]] = {}
        for d in sorted(self.catalog, key=lambda d: (d.provider_id, d.address, d.port)):
            self.current_metrics.setdefault(d.provider_id, d.metric)
            self.par_lists[(d.provider_id, d.task_id)] = d.par_list
            for offer in d.offers:
                self.current_values[(d.task_id, d.provider_id, offer.offer_index)] = \
                    dict(offer.values)

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def record_event(self, event: ChangeEvent) -> None:
        self.events.append(event)
        self.seq = max(self.seq, event.seq)
        kind = event.kind
        if kind is ChangeKind.RULE_ADDED:
            rule = event.rule
            self.rule_versions.setdefault(rule.subtask_id, []).append(rule)
            self.active_rules[rule.rule_id] = rule
            self.rule_by_key[(rule.subtask_id, rule.parameter)] = rule.rule_id
            self.rule_counter += 1
        elif kind is ChangeKind.RULE_MODIFIED:
            rule = event.rule
            self.rule_versions.setdefault(rule.subtask_id, []).append(rule)
            self.active_rules[rule.rule_id] = rule
            self.rule_by_key[(rule.subtask_id, rule.parameter)] = rule.rule_id
        elif kind is ChangeKind.RULE_DELETED:
            rule = self.active_rules.pop(event.rule_id, None)
            self.deleted_rule_ids.add(event.rule_id)
            if rule is not None:
                self.rule_by_key.pop((rule.subtask_id, rule.parameter), None)
        elif kind is ChangeKind.PARAMETER_CHANGED:
            for (task, provider, offer), values in self.current_values.items():
                if provider != event.provider_id or offer != event.offer_index:
                    continue
                if event.task_id is not None and task != event.task_id:
                    continue
                values[event.parameter] = event.value
        elif kind is ChangeKind.METRIC_CHANGED:
            if event.provider_id in self.current_metrics:
                self.current_metrics[event.provider_id] = event.metric


@dataclass(slots=True)
class Session:
    board: Board
    state: SearchState


@dataclass(slots=True)
class RunRecord:
    run_id: str
    subtasks: tuple[str, ...]
    mode: ExecutionMode
    report: WorkflowReport
    created_seq: int


class Engine:
    """One engine per catalog: owns the repository, sessions, and runs."""

    def __init__(self, catalog: Iterable[ServiceDescriptor],
                 policy: CostPolicy = DEFAULT_POLICY, seed: int = 0,
                 invoker: Invoker | None = None):
        catalog = validate_catalog(catalog)
        self.policy = policy
        self.seed = seed
        self.repo = SharedRepository(catalog)
        self.providers = simulated_catalog_providers(catalog, seed=seed)
        self.invoker: Invoker = invoker or SimulatedInvoker(self.providers)
        self._sessions: dict[str, Session] = {}
        self._runs: dict[str, RunRecord] = {}
        self._lock = threading.RLock()

    # -- rules controller --------------------------------------------

    def add_rule(self, subtask_id: str, parameter: str, kind: RuleKind | str,
                 border: Value) -> tuple[Rule, ChangeEvent,
                                         list[tuple[str, ChangeOutcome]]]:
        with self._lock:
            parameter = parameter.lower()
            key = (subtask_id, parameter)
            if key in self.repo.rule_by_key:
                raise DuplicateActiveRule(
                    f"active rule for {parameter!r} on {subtask_id!r} already exists")
            seq = self.repo.next_seq()
            rule = Rule(rule_id=f"r{self.repo.rule_counter + 1}",
                        subtask_id=subtask_id, parameter=parameter,
                        kind=RuleKind(kind), border=border, seq=seq)
            event = rule_added(rule).with_seq(seq)
            return rule, event, self._commit(event)

    def modify_rule(self, rule_id: str, border: Value
                    ) -> tuple[Rule, ChangeEvent, list[tuple[str, ChangeOutcome]]]:
        with self._lock:
            old = self.repo.active_rules.get(rule_id)
            if old is None:
                raise UnknownRule(rule_id)
            seq = self.repo.next_seq()
            rule = replace(old, border=border, seq=seq)
            event = rule_modified(rule).with_seq(seq)
            return rule, event, self._commit(event)

    def delete_rule(self, rule_id: str) -> tuple[ChangeEvent,
                                                 list[tuple[str, ChangeOutcome]]]:
        with self._lock:
            old = self.repo.active_rules.get(rule_id)
            if old is None:
                raise UnknownRuleForDelete(rule_id)
            seq = self.repo.next_seq()
            event = rule_deleted(rule_id, old.subtask_id).with_seq(seq)
            return event, self._commit(event)

    def load_rules(self, text: str) -> list[Rule]:
        """Bootstrap rules from the rules-file format."""
        return [self.add_rule(s, p, k, b)[0] for s, p, k, b in parse_rules_text(text)]

    # -- service drift -----------------------------------------------

    def inject_parameter(self, provider_id: str, offer_index: int, parameter: str,
                         value: Value, task_id: str | None = None
                         ) -> tuple[ChangeEvent, list[tuple[str, ChangeOutcome]]]:
        with self._lock:
            parameter = parameter.lower()
            matches = [(t, p, o) for (t, p, o) in self.repo.current_values
                       if p == provider_id and o == offer_index
                       and (task_id is None or t == task_id)]
            if not matches:
                raise UnknownProviderOrParameter(
                    f"no offer {offer_index} for provider {provider_id!r}")
            for (t, p, _o) in matches:
                par_list = self.repo.par_lists.get((p, t), ())
                if parameter not in par_list:
                    raise UnknownProviderOrParameter(
                        f"parameter {parameter!r} not advertised by {provider_id!r}")
            seq = self.repo.next_seq()
            event = parameter_changed(provider_id, offer_index, parameter, value,
                                      task_id=task_id).with_seq(seq)
            return event, self._commit(event)

    def inject_metric(self, provider_id: str, metric: float
                      ) -> tuple[ChangeEvent, list[tuple[str, ChangeOutcome]]]:
        with self._lock:
            if provider_id not in self.repo.current_metrics:
                raise UnknownProviderOrParameter(f"unknown provider {provider_id!r}")
            metric = float(metric)
            if not (0.0 <= metric <= 1.0):
                raise MetricOutOfRange(f"metric {metric} outside [0, 1]")
            seq = self.repo.next_seq()
            event = metric_changed(provider_id, metric).with_seq(seq)
            return event, self._commit(event)

    def apply_event_dict(self, data: dict) -> tuple[ChangeEvent,
                                                    list[tuple[str, ChangeOutcome]]]:
        """Inject a ParameterChanged/MetricChanged given as JSON."""
        kind = ChangeKind(data["kind"])
        if kind is ChangeKind.PARAMETER_CHANGED:
            return self.inject_parameter(
                str(data["provider_id"]), int(data["offer_index"]),
                str(data["parameter"]), data["value"], data.get("task_id"))
        if kind is ChangeKind.METRIC_CHANGED:
            return self.inject_metric(str(data["provider_id"]), data["metric"])
        raise ValueError(f"only service drift can be injected here, not {kind.value}")

    # -- event routing -----------------------------------------------

    def _commit(self, event: ChangeEvent) -> list[tuple[str, ChangeOutcome]]:
        """Fold the event into the repository and patch live sessions."""
        self.repo.record_event(event)
        outcomes: list[tuple[str, ChangeOutcome]] = []
        for subtask_id in sorted(self._sessions):
            session = self._sessions[subtask_id]
            if not self._relevant(event, subtask_id, session.board):
                continue
            outcome = apply_change(session.state, session.board, event)
            outcomes.append((subtask_id, outcome))
        return outcomes

    @staticmethod
    def _relevant(event: ChangeEvent, subtask_id: str, board: Board) -> bool:
        if event.kind in (ChangeKind.RULE_ADDED, ChangeKind.RULE_MODIFIED):
            return event.rule.subtask_id == subtask_id
        if event.kind is ChangeKind.RULE_DELETED:
            return event.task_id == subtask_id
        if event.kind is ChangeKind.PARAMETER_CHANGED:
            if event.task_id is not None and event.task_id != subtask_id:
                return False
            if (event.provider_id, event.offer_index) not in board.offer_values:
                return False
            known = board.known_parameters.get(event.provider_id, set())
            return event.parameter in known
        if event.kind is ChangeKind.METRIC_CHANGED:
            return event.provider_id in board.metrics
        return False

    # -- sessions and solving ----------------------------------------

    def _ensure_session(self, subtask_id: str) -> Session:
        session = self._sessions.get(subtask_id)
        if session is not None:
            return session
        history = self.repo.rule_versions.get(subtask_id, [])
        if not history:
            raise NoRules(subtask_id)
        board = build_board(history, self.repo.catalog, self.policy,
                            zeroed=self.repo.deleted_rule_ids)
        # overlay drift that happened before this session existed
        for (task, provider, offer), values in sorted(self.repo.current_values.items()):
            if task != subtask_id or (provider, offer) not in board.offer_values:
                continue
            for parameter in sorted(values):
                if board.offer_values[(provider, offer)].get(parameter) != values[parameter]:
                    board.set_parameter(provider, offer, parameter, values[parameter])
        for provider in sorted(board.metrics):
            live = self.repo.current_metrics.get(provider, board.metrics[provider])
            if live != board.metrics[provider]:
                board.set_metric(provider, live)
        session = Session(board=board, state=new_search(board))
        self._sessions[subtask_id] = session
        return session

    def solve(self, subtask_id: str) -> SolutionRecord:
        with self._lock:
            session = self._ensure_session(subtask_id)
            try:
                solution = resume(session.state, session.board)
                record = SolutionRecord(subtask_id, True, solution,
                                        session.board.epoch, self.repo.seq)
            except NoFeasiblePath:
                record = SolutionRecord(subtask_id, False, None,
                                        session.board.epoch, self.repo.seq)
            self.repo.solutions[subtask_id] = record
            return record

    def session(self, subtask_id: str) -> Session:
        with self._lock:
            return self._ensure_session(subtask_id)

    def mark_external(self, subtask_id: str, region_index: int,
                      available: bool = True) -> None:
        self.repo.external_flags[(subtask_id, region_index)] = available

    # -- runs --------------------------------------------------------

    def run(self, subtasks: Sequence[str], mode: ExecutionMode | str,
            payload: bytes = b"", confirm: ConfirmHook | None = None,
            parallel: bool = True) -> RunRecord:
        workflow = Workflow(tuple(subtasks), payload)  # rejects empty chains

        def select(subtask_id: str) -> tuple[Solution, ServiceDescriptor]:
            record = self.solve(subtask_id)
            if not record.feasible or record.solution is None:
                raise NoFeasiblePath(subtask_id)
            return record.solution, self._descriptor_for(subtask_id,
                                                         record.solution.provider_id)

        report = execute_workflow(workflow, select, self.invoker,
                                  ExecutionMode(mode), confirm, parallel)
        with self._lock:
            run_id = f"run{len(self._runs) + 1}"
            record = RunRecord(run_id, tuple(subtasks), ExecutionMode(mode),
                               report, self.repo.seq)
            self._runs[run_id] = record
            return record

    def _descriptor_for(self, subtask_id: str, provider_id: str) -> ServiceDescriptor:
        for d in sorted(self.repo.catalog, key=lambda d: (d.address, d.port)):
            if d.task_id == subtask_id and d.provider_id == provider_id:
                return d
        raise UnknownProviderOrParameter(
            f"no descriptor for {provider_id!r} on {subtask_id!r}")

    def results(self, run_id: str) -> dict:
        with self._lock:
            record = self._runs.get(run_id)
            if record is None:
                raise UnknownRun(run_id)
            rows = []
            for subtask_id in record.subtasks:
                try:
                    rows.append(self.solve(subtask_id).to_dict())
                except NoRules:
                    rows.append({"subtask_id": subtask_id, "feasible": False,
                                 "provider_id": None, "offer_index": None,
                                 "total_cost": None, "path": [], "solved_at": None,
                                 "epoch": 0, "seq": self.repo.seq})
            return {"run_id": record.run_id, "status": record.report.status,
                    "mode": record.mode.value, "seq": self.repo.seq,
                    "results": rows}

    # -- views -------------------------------------------------------

    def rules_view(self) -> list[dict]:
        rules = sorted(self.repo.active_rules.values(), key=lambda r: r.seq)
        return [{"rule_id": r.rule_id, "subtask_id": r.subtask_id,
                 "parameter": r.parameter, "kind": r.kind.value,
                 "border": r.border, "seq": r.seq} for r in rules]

    def services_view(self) -> list[dict]:
        out = []
        for d in sorted(self.repo.catalog,
                        key=lambda d: (d.task_id, d.provider_id, d.address, d.port)):
            offers = []
            for offer in d.offers:
                live = self.repo.current_values.get(
                    (d.task_id, d.provider_id, offer.offer_index), offer.values)
                offers.append({"offer_index": offer.offer_index,
                               "values": dict(sorted(live.items()))})
            out.append({"provider_id": d.provider_id, "task_id": d.task_id,
                        "address": d.address, "port": d.port,
                        "metric": self.repo.current_metrics.get(d.provider_id,
                                                                d.metric),
                        "par_list": list(d.par_list), "offers": offers})
        return out

    # -- replay ------------------------------------------------------

    @classmethod
    def replay(cls, catalog: Iterable[ServiceDescriptor],
               events: Sequence[ChangeEvent],
               policy: CostPolicy = DEFAULT_POLICY, seed: int = 0) -> "Engine":
        """Rebuild an engine from a recorded event log.

        Sessions are built lazily from folded state, so no routing is
        needed; solving any subtask afterwards reproduces the live
        engine's answer for the same log.
        """
        engine = cls(catalog, policy=policy, seed=seed)
        for event in sorted(events, key=lambda e: e.seq):
            engine.repo.record_event(event)
        return engine
