"""Scripted timelines against a simulated clock, with replayable reports.

A scenario file is JSON: the workflow, a timeline of timestamped
events, and optionally a golden section naming the expected final
selections.  The report is plain text, one line per event, per
recomputation, per solution, every cost printed to nine decimals -
running the same scenario twice must produce byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, IO

from .board import NoRules, NoServicesForTask
from .dynamics import ChangeOutcome
from .engine import Engine, RulesFileError
from .executor import ExecutionMode
from .model import CatalogError, MetricOutOfRange, RuleKind
from .oracle import best_offer, enumerate_totals
from .registry import MalformedValue, MissingKey, format_value, load_catalog

TOLERANCE = 1e-9

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_PARSE = 2


class ScenarioError(ValueError):
    """The scenario file is malformed."""


@dataclass(frozen=True, slots=True)
class TimelineEntry:
    t: float
    spec: dict


@dataclass(frozen=True, slots=True)
class Scenario:
    subtasks: tuple[str, ...]
    mode: ExecutionMode
    seed: int | None
    timeline: tuple[TimelineEntry, ...]
    golden: dict | None


def load_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    subtasks = tuple(str(s) for s in data.get("subtasks", ()))
    try:
        mode = ExecutionMode(data.get("mode", "DryRun"))
    except ValueError:
        raise ScenarioError(f"unknown mode {data.get('mode')!r}") from None
    if mode is ExecutionMode.CONFIRM:
        raise ScenarioError("scenarios are non-interactive; use DryRun or Auto")
    seed = None if data.get("seed") is None else int(data["seed"])
    entries = []
    for i, item in enumerate(data.get("timeline", ())):
        if not isinstance(item, dict) or "event" not in item:
            raise ScenarioError(f"timeline[{i}] needs an event object")
        entries.append(TimelineEntry(t=float(item.get("t", i)), spec=item["event"]))
    entries.sort(key=lambda e: e.t)
    golden = data.get("golden")
    if golden is not None and not isinstance(golden, dict):
        raise ScenarioError("golden section must be an object")
    return Scenario(subtasks=subtasks, mode=mode, seed=seed,
                    timeline=tuple(entries), golden=golden)


def _fmt_cost(value: float | None) -> str:
    return "infeasible" if value is None else f"{value:.9f}"


def _solution_line(record) -> str:
    if not record.feasible or record.solution is None:
        return f"SOLUTION {record.subtask_id} infeasible"
    s = record.solution
    return (f"SOLUTION {record.subtask_id} provider={s.provider_id}"
            f" offer={s.offer_index} total={_fmt_cost(float(s.total_cost))}"
            f" path={'->'.join(s.path)}")


def _event_line(t: float, seq: int, spec: dict) -> str:
    kind = spec.get("kind", "?")
    tail = " ".join(f"{k}={format_value(v) if isinstance(v, (int, float)) else v}"
                    for k, v in sorted(spec.items()) if k != "kind" and v is not None)
    return f"EVENT t={t:.3f} seq={seq} {kind} {tail}".rstrip()


def _outcome_line(subtask_id: str, outcome: ChangeOutcome) -> str:
    reopened = ",".join(outcome.reopened) if outcome.reopened else "-"
    return (f"RECOMPUTE {subtask_id} outcome={outcome.kind.value}"
            f" reopened={reopened}"
            f" invalidated={'1' if outcome.invalidated_solution else '0'}")


def _resolve_rule_id(engine: Engine, spec: dict) -> str:
    if "rule_id" in spec:
        return str(spec["rule_id"])
    key = (str(spec.get("subtask")), str(spec.get("parameter", "")).lower())
    rule_id = engine.repo.rule_by_key.get(key)
    if rule_id is None:
        raise ScenarioError(f"no active rule for {key}")
    return rule_id


def _apply_entry(engine: Engine, entry: TimelineEntry
                 ) -> tuple[int, list[tuple[str, ChangeOutcome]]]:
    spec = entry.spec
    kind = spec.get("kind")
    if kind == "RuleAdded":
        try:
            rule_kind = RuleKind(spec["rule_kind"])
        except (KeyError, ValueError):
            raise ScenarioError(f"RuleAdded needs a valid rule_kind: {spec}") from None
        _, event, outcomes = engine.add_rule(str(spec["subtask"]),
                                             str(spec["parameter"]),
                                             rule_kind, spec["border"])
        return event.seq, outcomes
    if kind == "RuleModified":
        rule_id = _resolve_rule_id(engine, spec)
        if "border" not in spec:
            raise ScenarioError(f"RuleModified needs a border: {spec}")
        _, event, outcomes = engine.modify_rule(rule_id, spec["border"])
        return event.seq, outcomes
    if kind == "RuleDeleted":
        rule_id = _resolve_rule_id(engine, spec)
        event, outcomes = engine.delete_rule(rule_id)
        return event.seq, outcomes
    if kind == "ParameterChanged":
        event, outcomes = engine.inject_parameter(
            str(spec["provider_id"]), int(spec["offer_index"]),
            str(spec["parameter"]), spec["value"], spec.get("task_id"))
        return event.seq, outcomes
    if kind == "MetricChanged":
        event, outcomes = engine.inject_metric(str(spec["provider_id"]),
                                               float(spec["metric"]))
        return event.seq, outcomes
    raise ScenarioError(f"unknown event kind {kind!r}")


def run_scenario(rules_text: str, services_text: str,
                 scenario_text: str | None = None, *, offers_text: str | None = None,
                 oracle: bool = False, seed: int = 0, out: IO[str]) -> int:
    """Drive an engine through a scenario; returns the process exit code."""
    return run_scenario_with_engine(rules_text, services_text, scenario_text,
                                    offers_text=offers_text, oracle=oracle,
                                    seed=seed, out=out)[0]


def run_scenario_with_engine(rules_text: str, services_text: str,
                             scenario_text: str | None = None, *,
                             offers_text: str | None = None, oracle: bool = False,
                             seed: int = 0, out: IO[str]
                             ) -> tuple[int, Engine | None]:
    """Like run_scenario, but also hands back the engine in its final
    state so a server can keep it."""
    try:
        catalog = load_catalog(services_text, offers_text)
        if scenario_text is not None:
            scenario = load_scenario(scenario_text)
        else:
            scenario = Scenario(subtasks=(), mode=ExecutionMode.DRY_RUN,
                                seed=None, timeline=(), golden=None)
        engine = Engine(catalog, seed=seed if scenario.seed is None else scenario.seed)
        engine.load_rules(rules_text)
    except (ScenarioError, RulesFileError, CatalogError, MissingKey,
            MalformedValue, MetricOutOfRange, ValueError) as exc:
        out.write(f"PARSE-ERROR {exc}\n")
        return EXIT_PARSE, None

    subtasks = scenario.subtasks or tuple(sorted(
        {r.subtask_id for r in engine.repo.active_rules.values()}))
    out.write(f"SCENARIO subtasks={','.join(subtasks)}"
              f" mode={scenario.mode.value} seed={engine.seed}\n")

    records = {}
    try:
        run = engine.run(subtasks, scenario.mode)
    except (NoRules, NoServicesForTask) as exc:
        out.write(f"PARSE-ERROR unusable subtask: {exc}\n")
        return EXIT_PARSE, None
    out.write(f"RUN {run.run_id} status={run.report.status}\n")
    for subtask_id in subtasks:
        records[subtask_id] = engine.solve(subtask_id)
        out.write(_solution_line(records[subtask_id]) + "\n")

    try:
        for entry in scenario.timeline:
            seq, outcomes = _apply_entry(engine, entry)
            out.write(_event_line(entry.t, seq, entry.spec) + "\n")
            for subtask_id, outcome in outcomes:
                out.write(_outcome_line(subtask_id, outcome) + "\n")
                if subtask_id in subtasks:
                    records[subtask_id] = engine.solve(subtask_id)
                    out.write(_solution_line(records[subtask_id]) + "\n")
    except (ScenarioError, MetricOutOfRange, KeyError, ValueError) as exc:
        out.write(f"PARSE-ERROR {exc}\n")
        return EXIT_PARSE, engine

    exit_code = EXIT_OK
    if oracle:
        for subtask_id in subtasks:
            session = engine.session(subtask_id)
            totals = enumerate_totals(session.board)
            for (provider_id, offer_index), total in sorted(totals.items()):
                out.write(f"ORACLE {subtask_id} provider={provider_id}"
                          f" offer={offer_index} total={_fmt_cost(total.value)}\n")
            best = best_offer(session.board)
            record = records[subtask_id]
            agree = _oracle_agrees(best, record)
            out.write(f"ORACLE-BEST {subtask_id} "
                      + ("infeasible" if best is None else
                         f"provider={best.provider_id} offer={best.offer_index}"
                         f" total={_fmt_cost(float(best.total_cost))}")
                      + f" engine-agrees={'1' if agree else '0'}\n")
            if not agree:
                exit_code = EXIT_MISMATCH

    if scenario.golden is not None:
        mismatches = _golden_mismatches(scenario.golden, records)
        for line in mismatches:
            out.write(f"GOLDEN-MISMATCH {line}\n")
        out.write(f"GOLDEN {'fail' if mismatches else 'pass'}\n")
        if mismatches:
            exit_code = EXIT_MISMATCH

    out.write(f"END events={len(scenario.timeline)} seq={engine.repo.seq}\n")
    return exit_code, engine


def _oracle_agrees(best, record) -> bool:
    if best is None:
        return not record.feasible
    if not record.feasible or record.solution is None:
        return False
    s = record.solution
    return (s.provider_id == best.provider_id
            and s.offer_index == best.offer_index
            and abs(float(s.total_cost) - float(best.total_cost)) <= TOLERANCE)


def _golden_mismatches(golden: dict, records: dict) -> list[str]:
    tolerance = float(golden.get("tolerance", TOLERANCE))
    mismatches = []
    for subtask_id, expected in sorted(golden.get("solutions", {}).items()):
        record = records.get(subtask_id)
        if record is None:
            mismatches.append(f"{subtask_id} never solved")
            continue
        want_feasible = expected.get("feasible", True)
        if want_feasible != record.feasible:
            mismatches.append(f"{subtask_id} feasible={record.feasible}"
                              f" expected {want_feasible}")
            continue
        if not want_feasible:
            continue
        s = record.solution
        if "provider_id" in expected and s.provider_id != str(expected["provider_id"]):
            mismatches.append(f"{subtask_id} provider={s.provider_id}"
                              f" expected {expected['provider_id']}")
        if "offer_index" in expected and s.offer_index != int(expected["offer_index"]):
            mismatches.append(f"{subtask_id} offer={s.offer_index}"
                              f" expected {expected['offer_index']}")
        if "total_cost" in expected:
            want = float(expected["total_cost"])
            if abs(float(s.total_cost) - want) > tolerance:
                mismatches.append(f"{subtask_id} total={float(s.total_cost)!r}"
                                  f" expected {want!r}")
    return mismatches
