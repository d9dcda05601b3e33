"""Board construction, live repricing, and structural mutation."""

import pytest

from bboard.board import (Board, NoRules, NoServicesForTask, UnknownNode,
                          UnknownProviderOrParameter, UnknownRule, build_board,
                          node_id_for)
from bboard.model import (INFEASIBLE, MetricOutOfRange, Offer, Rule, RuleKind,
                          ServiceDescriptor)

from conftest import fig_catalog_list, fig_rules_list


def test_node_id_shape():
    assert node_id_for(2, "20", 1) == "r2:20:1"


class TestBuild:
    def test_region_order_follows_seq(self, fig_board):
        assert [r.rule.parameter for r in fig_board.regions] == [
            "format", "runtime", "price"]
        # shuffled input, same board
        rules = list(reversed(fig_rules_list()))
        again = build_board(rules, fig_catalog_list())
        assert [r.rule.rule_id for r in again.regions] == ["rf", "rr", "rp"]

    def test_every_offer_gets_a_node_per_region(self, fig_board):
        assert set(fig_board.offer_keys) == {("10", 0), ("20", 0), ("20", 1)}
        assert len(fig_board.nodes) == 9
        node = fig_board.node("r1:20:0")
        assert node.parameter == "runtime" and node.raw_value == 50.0

    def test_initial_costs(self, fig_board):
        assert fig_board.node("r0:10:0").cost.infeasible      # AVI != FLV
        assert fig_board.node("r1:20:1").cost.infeasible      # 100 > 80
        assert fig_board.node("r1:20:0").cost.value == 51.0 / 81.0
        assert fig_board.node("r2:20:1").cost.value == 21.0 / 61.0

    def test_no_rules(self, fig_catalog):
        with pytest.raises(NoRules):
            build_board([], fig_catalog)

    def test_no_services_for_task(self, fig_rules):
        other = ServiceDescriptor("a", 1, "other", 1.0, ("price",), "99")
        with pytest.raises(NoServicesForTask):
            build_board(fig_rules, [other])

    def test_mixed_subtasks_rejected(self, fig_catalog):
        rules = [Rule("a", "convert", "price", RuleKind.AT_MOST, 60, 1),
                 Rule("b", "resize", "price", RuleKind.AT_MOST, 60, 2)]
        with pytest.raises(ValueError, match="mixed"):
            build_board(rules, fig_catalog)

    def test_zeroed_rules_start_inactive(self, fig_rules, fig_catalog):
        board = build_board(fig_rules, fig_catalog, zeroed={"rr"})
        assert not board.regions[1].active
        assert board.node("r1:20:1").cost.value == 0.0
        assert board.node("r1:10:0").cost.value == 0.0

    def test_catalog_for_other_tasks_ignored(self, fig_rules, fig_catalog):
        extra = ServiceDescriptor("b", 2, "resize", 1.0, ("price",), "30",
                                  (Offer("30", "resize", 0, {"price": 1.0}),))
        board = build_board(fig_rules, fig_catalog + [extra])
        assert ("30", 0) not in board.offer_values


class TestLookups:
    def test_unknown_node(self, fig_board):
        with pytest.raises(UnknownNode):
            fig_board.node("r9:20:0")

    def test_topology(self, fig_board):
        assert fig_board.successors("r0:20:0") == ["r1:20:0"]
        assert fig_board.successors("r2:20:0") == []
        assert fig_board.predecessor("r1:20:1") == "r0:20:1"
        assert fig_board.predecessor("r0:10:0") is None


class TestSetParameter:
    def test_touches_matching_regions_in_order(self, fig_board):
        touched = fig_board.set_parameter("20", 0, "runtime", 10.0)
        assert [(n.node_id, new.value) for n, _old, new in touched] == [
            ("r1:20:0", 11.0 / 81.0)]
        assert fig_board.offer_values[("20", 0)]["runtime"] == 10.0

    def test_parameter_case_insensitive(self, fig_board):
        touched = fig_board.set_parameter("20", 0, "RUNTIME", 10.0)
        assert touched[0][0].node_id == "r1:20:0"

    def test_reports_even_unmoved_costs(self, fig_board):
        touched = fig_board.set_parameter("20", 0, "runtime", 50.0)
        node, old, new = touched[0]
        assert old == new and node.raw_value == 50.0

    def test_value_without_region_updates_silently(self, fig_board):
        # format parameter of provider 10: value changes, no rule on it moves
        touched = fig_board.set_parameter("10", 0, "format", "FLV")
        assert [n.node_id for n, _o, _n in touched] == ["r0:10:0"]
        assert fig_board.node("r0:10:0").cost.value == 0.0

    def test_unknown_offer_and_parameter(self, fig_board):
        with pytest.raises(UnknownProviderOrParameter):
            fig_board.set_parameter("99", 0, "price", 1.0)
        with pytest.raises(UnknownProviderOrParameter):
            fig_board.set_parameter("20", 0, "color", 1.0)

    def test_epoch_untouched_by_value_changes(self, fig_board):
        before = fig_board.epoch
        fig_board.set_parameter("20", 0, "runtime", 10.0)
        fig_board.set_metric("20", 0.5)
        assert fig_board.epoch == before


class TestSetMetric:
    def test_reprices_all_provider_nodes(self, fig_board):
        touched = fig_board.set_metric("20", 0.5)
        moved = {n.node_id for n, _o, _n in touched}
        # provider 10 untouched; zero-cost format nodes do not move
        assert moved == {"r1:20:0", "r2:20:0", "r2:20:1"}
        assert fig_board.node("r1:20:0").cost.value == (51.0 / 81.0) / 0.5

    def test_zero_excludes_provider(self, fig_board):
        fig_board.set_metric("20", 0.0)
        for region in range(3):
            assert fig_board.node(f"r{region}:20:0").cost.infeasible

    def test_out_of_range(self, fig_board):
        with pytest.raises(MetricOutOfRange):
            fig_board.set_metric("20", 1.5)
        with pytest.raises(MetricOutOfRange):
            fig_board.set_metric("20", -0.1)

    def test_unknown_provider(self, fig_board):
        with pytest.raises(UnknownProviderOrParameter):
            fig_board.set_metric("99", 0.5)


class TestAppendRegion:
    def test_appended_nodes_price_from_live_values(self, fig_board):
        fig_board.set_parameter("20", 1, "price", 25.0)
        region = fig_board.append_region(
            Rule("rp", "convert", "price", RuleKind.AT_MOST, 30.0, 9))
        assert region.index == 3 and region.appended
        assert fig_board.node("r3:20:1").cost.value == 26.0 / 31.0
        assert fig_board.node("r3:20:0").cost.infeasible     # 50 > 30

    def test_epoch_advances(self, fig_board):
        before = fig_board.epoch
        fig_board.append_region(
            Rule("rx", "convert", "price", RuleKind.AT_MOST, 99.0, 9))
        assert fig_board.epoch == before + 1


class TestZeroRegion:
    def test_rehabilitates_rule_violations(self, fig_board):
        assert fig_board.node("r1:20:1").cost.infeasible
        indices = fig_board.zero_region("rr")
        assert indices == [1]
        assert fig_board.node("r1:20:1").cost.value == 0.0
        assert not fig_board.regions[1].active

    def test_metric_exclusion_survives_zeroing(self, fig_board):
        fig_board.set_metric("10", 0.0)
        fig_board.zero_region("rf")
        assert fig_board.node("r0:10:0").cost.infeasible
        assert fig_board.node("r0:20:0").cost.value == 0.0

    def test_zeroes_every_region_of_the_rule(self, fig_board):
        fig_board.append_region(
            Rule("rr", "convert", "runtime", RuleKind.AT_MOST, 10.0, 9))
        indices = fig_board.zero_region("rr")
        assert indices == [1, 3]

    def test_unknown_or_already_zeroed(self, fig_board):
        with pytest.raises(UnknownRule):
            fig_board.zero_region("nope")
        fig_board.zero_region("rr")
        with pytest.raises(UnknownRule):
            fig_board.zero_region("rr")


def test_fingerprint_stable_across_builds(fig_rules, fig_catalog):
    a = build_board(fig_rules, fig_catalog).fingerprint()
    b = build_board(list(fig_rules), list(fig_catalog)).fingerprint()
    assert a == b
