"""Control layer: event log, lazy sessions, runs, and log replay."""

import random

import pytest

from bboard.board import NoRules, UnknownProviderOrParameter, UnknownRule
from bboard.dynamics import OutcomeKind
from bboard.engine import (DuplicateActiveRule, Engine, RulesFileError,
                           SharedRepository, UnknownRun, UnknownRuleForDelete,
                           parse_rules_text)
from bboard.executor import ExecutionMode
from bboard.model import (CatalogError, MetricOutOfRange, RuleKind,
                          ServiceDescriptor)

from conftest import (chain_catalog_list, chain_rules_list, fig_catalog_list,
                      make_instance)

RULES_TEXT = """\
# the worked example
SUBTASK=convert; PARAM=FORMAT; KIND=EQUALS; BORDER=FLV
SUBTASK=convert; PARAM=RUNTIME; KIND=AT_MOST; BORDER=80
SUBTASK=convert; PARAM=PRICE; KIND=AT_MOST; BORDER=60
"""

A1_TOTAL = 51.0 / 81.0 + 51.0 / 61.0


def fig_engine() -> Engine:
    engine = Engine(fig_catalog_list())
    engine.load_rules(RULES_TEXT)
    return engine


class TestRulesText:
    def test_parses_lines(self):
        parsed = parse_rules_text(RULES_TEXT)
        assert parsed[0] == ("convert", "format", RuleKind.EQUALS, "FLV")
        assert parsed[1] == ("convert", "runtime", RuleKind.AT_MOST, 80.0)

    @pytest.mark.parametrize("line,match", [
        ("SUBTASK=t; PARAM=p; KIND=AT_MOST", "missing BORDER"),
        ("SUBTASK=t; PARAM=p; KIND=NEVER; BORDER=1", "unknown KIND"),
        ("SUBTASK=t; PARAM p; KIND=AT_MOST; BORDER=1", "KEY=VALUE"),
    ])
    def test_errors_carry_line_numbers(self, line, match):
        with pytest.raises(RulesFileError, match="line 2"):
            parse_rules_text("# header\n" + line + "\n")
        with pytest.raises(RulesFileError, match=match):
            parse_rules_text(line)


class TestRulesController:
    def test_ids_and_seq_assigned_in_order(self):
        engine = fig_engine()
        rules = engine.rules_view()
        assert [r["rule_id"] for r in rules] == ["r1", "r2", "r3"]
        assert [r["seq"] for r in rules] == [1, 2, 3]

    def test_duplicate_active_parameter_rejected(self):
        engine = fig_engine()
        with pytest.raises(DuplicateActiveRule):
            engine.add_rule("convert", "PRICE", RuleKind.AT_MOST, 99.0)
        # same parameter on another subtask is fine
        engine.add_rule("resize", "price", RuleKind.AT_MOST, 99.0)

    def test_delete_frees_the_slot(self):
        engine = fig_engine()
        engine.delete_rule("r3")
        rule, _event, _outs = engine.add_rule("convert", "price",
                                              RuleKind.AT_MOST, 40.0)
        assert rule.rule_id == "r4"
        assert engine.repo.deleted_rule_ids == {"r3"}

    def test_modify_keeps_id_appends_version(self):
        engine = fig_engine()
        rule, event, _outs = engine.modify_rule("r2", 50.0)
        assert rule.rule_id == "r2" and rule.border == 50.0
        assert event.seq == 4
        versions = [r.border for r in engine.repo.rule_versions["convert"]
                    if r.rule_id == "r2"]
        assert versions == [80.0, 50.0]
        assert engine.repo.active_rules["r2"].border == 50.0

    def test_unknown_rule_errors(self):
        engine = fig_engine()
        with pytest.raises(UnknownRule):
            engine.modify_rule("r9", 1.0)
        with pytest.raises(UnknownRuleForDelete):
            engine.delete_rule("r9")
        engine.delete_rule("r2")
        with pytest.raises(UnknownRuleForDelete):
            engine.delete_rule("r2")

    def test_delete_event_carries_subtask(self):
        engine = fig_engine()
        event, _outs = engine.delete_rule("r2")
        assert event.task_id == "convert" and event.rule_id == "r2"


class TestSolve:
    def test_golden_selection(self):
        record = fig_engine().solve("convert")
        assert record.feasible
        assert (record.solution.provider_id, record.solution.offer_index) == ("20", 0)
        assert record.solution.total_cost == A1_TOTAL
        assert record.solved_seq == 3

    def test_no_rules(self):
        engine = Engine(fig_catalog_list())
        with pytest.raises(NoRules):
            engine.solve("convert")

    def test_infeasible_is_a_record_not_an_error(self):
        engine = fig_engine()
        engine.modify_rule("r3", 30.0)
        record = engine.solve("convert")
        assert not record.feasible and record.solution is None
        assert record.to_dict()["total_cost"] is None

    def test_outcomes_only_for_live_sessions(self):
        engine = fig_engine()
        _rule, _event, outs = engine.modify_rule("r2", 70.0)
        assert outs == []                       # nothing solved yet
        engine.solve("convert")
        _rule, _event, outs = engine.modify_rule("r2", 60.0)
        assert [(s, o.kind) for s, o in outs] == [
            ("convert", OutcomeKind.REGION_APPENDED)]

    def test_irrelevant_events_not_routed(self):
        engine = Engine(fig_catalog_list() + chain_catalog_list())
        engine.load_rules(RULES_TEXT)
        for rule in chain_rules_list():
            if rule.subtask_id != "convert":    # convert already rules price
                engine.add_rule(rule.subtask_id, rule.parameter, rule.kind,
                                rule.border)
        engine.solve("convert")
        engine.solve("store")
        _e, outs = engine.inject_parameter("st0", 0, "price", 7.0)
        assert [s for s, _o in outs] == ["store"]

    def test_catalog_validated_on_construction(self):
        bad = ServiceDescriptor("a", 1, "t", 2.0, ("p",), "10")
        with pytest.raises(CatalogError):
            Engine([bad])


class TestDrift:
    def test_inject_parameter_updates_board_and_log(self):
        engine = fig_engine()
        assert engine.solve("convert").solution.total_cost == A1_TOTAL
        event, outs = engine.inject_parameter("20", 0, "runtime", 10.0)
        assert event.seq == 4
        assert outs[0][1].kind is OutcomeKind.LISTS_PATCHED
        assert engine.solve("convert").solution.total_cost == \
            11.0 / 81.0 + 51.0 / 61.0
        assert engine.repo.current_values[("convert", "20", 0)]["runtime"] == 10.0

    def test_inject_parameter_validation(self):
        engine = fig_engine()
        with pytest.raises(UnknownProviderOrParameter):
            engine.inject_parameter("99", 0, "price", 1.0)
        with pytest.raises(UnknownProviderOrParameter):
            engine.inject_parameter("20", 9, "price", 1.0)
        with pytest.raises(UnknownProviderOrParameter):
            engine.inject_parameter("20", 0, "color", 1.0)

    def test_inject_metric_validation(self):
        engine = fig_engine()
        with pytest.raises(UnknownProviderOrParameter):
            engine.inject_metric("99", 0.5)
        with pytest.raises(MetricOutOfRange):
            engine.inject_metric("20", 1.5)

    def test_metric_exclusion_fails_solve(self):
        engine = fig_engine()
        engine.solve("convert")
        _e, outs = engine.inject_metric("20", 0.0)
        assert outs[0][1].kind is OutcomeKind.PROVIDER_EXCLUDED
        assert not engine.solve("convert").feasible

    def test_apply_event_dict(self):
        engine = fig_engine()
        engine.apply_event_dict({"kind": "ParameterChanged", "provider_id": "20",
                                 "offer_index": 0, "parameter": "runtime",
                                 "value": 10.0})
        engine.apply_event_dict({"kind": "MetricChanged", "provider_id": "10",
                                 "metric": 0.5})
        with pytest.raises(ValueError, match="drift"):
            engine.apply_event_dict({"kind": "RuleDeleted", "rule_id": "r1"})


class TestLateJoinerSessions:
    def test_first_solve_after_history_matches_always_live(self):
        def mutate(engine):
            engine.modify_rule("r2", 70.0)
            engine.inject_parameter("20", 0, "runtime", 30.0)
            engine.delete_rule("r1")
            engine.inject_metric("10", 0.25)

        live = fig_engine()
        live.solve("convert")                   # session exists during events
        mutate(live)
        late = fig_engine()                     # session built only at the end
        mutate(late)
        a = live.solve("convert")
        b = late.solve("convert")
        assert a.feasible == b.feasible
        assert a.solution.same_selection(b.solution)

    def test_solvable_after_total_rule_removal(self):
        engine = fig_engine()
        for rule_id in ("r1", "r2", "r3"):
            engine.delete_rule(rule_id)
        record = engine.solve("convert")
        assert record.feasible and record.solution.total_cost == 0.0


class TestRuns:
    def chain_engine(self):
        engine = Engine(chain_catalog_list())
        for rule in chain_rules_list():
            engine.add_rule(rule.subtask_id, rule.parameter, rule.kind, rule.border)
        return engine

    def test_dry_run(self):
        engine = self.chain_engine()
        record = engine.run(("convert", "compress", "store"), "DryRun")
        assert record.run_id == "run1"
        assert record.report.status == "planned"
        results = engine.results("run1")
        assert results["status"] == "planned"
        assert [r["provider_id"] for r in results["results"]] == [
            "co1", "co1", "st0"]

    def test_auto_threads_payload(self):
        engine = self.chain_engine()
        record = engine.run(("convert", "compress", "store"), "Auto", payload=b"x")
        assert record.report.completed
        assert record.report.final_payload == \
            b"[store:st0][compress:co1][convert:co1]x"

    def test_results_resolve_live(self):
        engine = self.chain_engine()
        engine.run(("store",), "DryRun")
        engine.inject_parameter("st0", 0, "price", 99.0)
        results = engine.results("run1")
        assert results["results"][0]["provider_id"] == "st1"

    def test_unknown_run(self):
        with pytest.raises(UnknownRun):
            self.chain_engine().results("run9")

    def test_run_ids_count_up(self):
        engine = self.chain_engine()
        assert engine.run(("store",), "DryRun").run_id == "run1"
        assert engine.run(("store",), "DryRun").run_id == "run2"


class TestViews:
    def test_services_view_shows_live_data(self):
        engine = fig_engine()
        engine.inject_parameter("20", 0, "runtime", 10.0)
        engine.inject_metric("20", 0.5)
        view = engine.services_view()
        row = [r for r in view if r["provider_id"] == "20"][0]
        assert row["metric"] == 0.5
        assert row["offers"][0]["values"]["runtime"] == 10.0
        assert row["par_list"] == ["format", "runtime", "price"]

    def test_rules_view_tracks_modifications(self):
        engine = fig_engine()
        engine.modify_rule("r2", 50.0)
        engine.delete_rule("r1")
        view = engine.rules_view()
        assert [(r["rule_id"], r["border"]) for r in view] == [
            ("r3", 60.0), ("r2", 50.0)]

    def test_mark_external(self):
        engine = fig_engine()
        engine.mark_external("convert", 1)
        assert engine.repo.external_flags == {("convert", 1): True}


class TestReplay:
    def replay_matches(self, engine, subtasks):
        replayed = Engine.replay(engine.repo.catalog, engine.repo.events,
                                 policy=engine.policy, seed=engine.seed)
        for subtask_id in subtasks:
            a = engine.solve(subtask_id)
            b = replayed.solve(subtask_id)
            assert a.feasible == b.feasible, subtask_id
            if a.feasible:
                assert a.solution.same_selection(b.solution), subtask_id

    def test_fig_history_replays(self):
        engine = fig_engine()
        engine.solve("convert")
        engine.inject_parameter("20", 0, "runtime", 10.0)
        engine.modify_rule("r3", 55.0)
        engine.delete_rule("r2")
        engine.inject_metric("10", 0.5)
        self.replay_matches(engine, ["convert"])

    def test_shuffled_log_replays_identically(self):
        engine = fig_engine()
        engine.solve("convert")
        engine.inject_parameter("20", 0, "runtime", 10.0)
        engine.delete_rule("r2")
        events = list(engine.repo.events)
        random.Random(3).shuffle(events)
        replayed = Engine.replay(engine.repo.catalog, events)
        assert engine.solve("convert").solution.same_selection(
            replayed.solve("convert").solution)

    def test_random_histories_replay(self):
        # random but contract-respecting histories, one parameter per rule
        parameters = ("fmt", "alpha", "beta", "gamma", "delta")
        for trial in range(40):
            rng = random.Random(60_000 + trial)
            gen = make_instance(rng)
            engine = Engine(gen.catalog, policy=gen.policy)
            seen = set()
            for rule in gen.rules:
                if rule.parameter in seen:
                    continue
                seen.add(rule.parameter)
                engine.add_rule(rule.subtask_id, rule.parameter, rule.kind,
                                rule.border)
            engine.solve("t")
            for _ in range(rng.randint(0, 8)):
                active = engine.rules_view()
                roll = rng.random()
                if roll < 0.35:
                    provider, offer = rng.choice(
                        sorted(engine.session("t").board.offer_keys))
                    engine.inject_parameter(provider, offer,
                                            rng.choice(parameters[1:]),
                                            float(rng.randint(0, 100)))
                elif roll < 0.55:
                    provider = rng.choice(sorted(engine.repo.current_metrics))
                    engine.inject_metric(provider, rng.choice((0.0, 0.5, 1.0)))
                elif roll < 0.7:
                    free = [p for p in parameters
                            if ("t", p) not in engine.repo.rule_by_key]
                    if free:
                        parameter = rng.choice(free)
                        kind = (RuleKind.EQUALS if parameter == "fmt"
                                else RuleKind.AT_MOST)
                        border = "FLV" if parameter == "fmt" \
                            else float(rng.randint(20, 120))
                        engine.add_rule("t", parameter, kind, border)
                elif roll < 0.85 and active:
                    picked = rng.choice(active)
                    border = "AVI" if picked["kind"] == "EQUALS" \
                        else float(rng.randint(0, 120))
                    engine.modify_rule(picked["rule_id"], border)
                elif active:
                    engine.delete_rule(rng.choice(active)["rule_id"])
                engine.solve("t")
            self.replay_matches(engine, ["t"])


def test_repository_is_a_pure_fold():
    repo = SharedRepository(fig_catalog_list())
    engine = fig_engine()
    engine.inject_parameter("20", 1, "price", 25.0)
    for event in engine.repo.events:
        repo.record_event(event)
    assert repo.active_rules == engine.repo.active_rules
    assert repo.current_values == engine.repo.current_values
    assert repo.seq == engine.repo.seq
