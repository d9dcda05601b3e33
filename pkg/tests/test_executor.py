"""Workflow execution: plan, confirm, invoke, contain failures."""

import pytest

from bboard.board import build_board
from bboard.executor import (ExecutionMode, SimulatedInvoker, StepReport,
                             Workflow, execute_workflow)
from bboard.model import ServiceDescriptor, Solution
from bboard.registry import (ProviderEndpoint, SimulatedProvider,
                             simulated_catalog_providers)
from bboard.executor import NetworkInvoker
from bboard.search import NoFeasiblePath, find_best_provider

from conftest import chain_catalog_list, chain_rules_list


def chain_selector(catalog=None, rules=None):
    """Selector over per-subtask boards built from the three-step chain."""
    catalog = chain_catalog_list() if catalog is None else catalog
    rules = chain_rules_list() if rules is None else rules
    by_task = {}
    for rule in rules:
        board = build_board([rule], catalog)
        descriptor_by_provider = {d.provider_id: d for d in catalog
                                  if d.task_id == rule.subtask_id}
        by_task[rule.subtask_id] = (board, descriptor_by_provider)

    calls = []

    def select(subtask_id):
        calls.append(subtask_id)
        board, descriptors = by_task[subtask_id]
        sol = find_best_provider(board)
        return sol, descriptors[sol.provider_id]

    select.calls = calls
    select.boards = {t: b for t, (b, _d) in by_task.items()}
    return select


WF = Workflow(("convert", "compress", "store"), payload=b"clip")


class TestDryRun:
    def test_plans_without_invoking(self):
        select = chain_selector()
        report = execute_workflow(WF, select)
        assert report.status == "planned" and not report.completed
        assert [s.subtask_id for s in report.steps] == list(WF.subtasks)
        assert all(s.solution is not None and not s.invoked for s in report.steps)
        assert report.final_payload is None
        # cheapest per step: co1 (30), co1 (12), st0 (9)
        assert [s.solution.provider_id for s in report.steps] == [
            "co1", "co1", "st0"]

    def test_selection_failure_aborts_before_any_invocation(self):
        rules = chain_rules_list()
        catalog = [d for d in chain_catalog_list() if d.task_id != "compress"]
        invoked = []

        def select(subtask_id):
            sel = chain_selector(catalog=[d for d in chain_catalog_list()],
                                 rules=rules)
            if subtask_id == "compress":
                raise NoFeasiblePath(subtask_id)
            return sel(subtask_id)

        report = execute_workflow(WF, select, invoker=lambda d, p: invoked.append(p),
                                  mode=ExecutionMode.AUTO)
        assert report.status == "aborted"
        assert report.failed_subtask == "compress"
        assert invoked == []
        failed = [s for s in report.steps if s.subtask_id == "compress"][0]
        assert failed.error == "no feasible provider"

    def test_parallel_selection_same_result(self):
        a = execute_workflow(WF, chain_selector(), parallel=False)
        b = execute_workflow(WF, chain_selector(), parallel=True)
        assert ([s.solution.provider_id for s in a.steps]
                == [s.solution.provider_id for s in b.steps])


class TestAuto:
    def test_payload_threads_through_chain(self):
        select = chain_selector()
        providers = simulated_catalog_providers(chain_catalog_list())
        report = execute_workflow(WF, select, invoker=SimulatedInvoker(providers),
                                  mode=ExecutionMode.AUTO)
        assert report.completed
        assert report.final_payload == b"[store:st0][compress:co1][convert:co1]clip"
        assert all(s.invoked for s in report.steps)

    def test_reselects_before_each_invocation(self):
        select = chain_selector()
        providers = simulated_catalog_providers(chain_catalog_list())
        execute_workflow(WF, select, invoker=SimulatedInvoker(providers),
                         mode=ExecutionMode.AUTO)
        # one planning pass plus one re-selection per step
        assert select.calls == list(WF.subtasks) * 2

    def test_mid_run_change_lands_on_remaining_steps(self):
        select = chain_selector()
        providers = simulated_catalog_providers(chain_catalog_list())
        inner = SimulatedInvoker(providers)

        def invoker(descriptor, payload):
            out = inner(descriptor, payload)
            if descriptor.task_id == "convert":
                # the compress winner's price jumps over the border
                select.boards["compress"].set_parameter("co1", 0, "price", 99.0)
            return out

        report = execute_workflow(WF, select, invoker=invoker,
                                  mode=ExecutionMode.AUTO)
        assert report.completed
        assert report.steps[1].solution.provider_id == "co0"

    def test_invocation_fault_contained_in_report(self):
        select = chain_selector()

        def invoker(descriptor, payload):
            if descriptor.task_id == "compress":
                raise IOError("connection reset")
            return payload

        report = execute_workflow(WF, select, invoker=invoker,
                                  mode=ExecutionMode.AUTO)
        assert report.status == "aborted"
        assert report.failed_subtask == "compress"
        assert "connection reset" in report.reason
        assert report.steps[0].invoked and not report.steps[1].invoked
        assert report.steps[2].solution is not None   # planned but never run

    def test_auto_without_invoker_rejected(self):
        with pytest.raises(ValueError, match="invoker"):
            execute_workflow(WF, chain_selector(), mode=ExecutionMode.AUTO)


class TestConfirm:
    def test_denied_confirmation_aborts(self):
        seen = []

        def confirm(steps):
            seen.extend(s.subtask_id for s in steps)
            return False

        report = execute_workflow(WF, chain_selector(), invoker=lambda d, p: p,
                                  mode=ExecutionMode.CONFIRM, confirm=confirm)
        assert report.status == "aborted" and report.reason == "confirmation denied"
        assert seen == list(WF.subtasks)

    def test_approved_confirmation_runs(self):
        providers = simulated_catalog_providers(chain_catalog_list())
        report = execute_workflow(WF, chain_selector(),
                                  invoker=SimulatedInvoker(providers),
                                  mode=ExecutionMode.CONFIRM, confirm=lambda s: True)
        assert report.completed

    def test_confirm_without_hook_rejected(self):
        with pytest.raises(ValueError, match="hook"):
            execute_workflow(WF, chain_selector(), invoker=lambda d, p: p,
                             mode=ExecutionMode.CONFIRM)


class TestInvokers:
    def test_simulated_invoker_unknown_provider(self):
        invoker = SimulatedInvoker({})
        d = ServiceDescriptor("a", 1, "t", 1.0, ("p",), "10")
        with pytest.raises(KeyError):
            invoker(d, b"")

    def test_network_invoker_round_trip(self, fig_catalog):
        provider = SimulatedProvider(fig_catalog[1])
        with ProviderEndpoint(provider) as ep:
            from dataclasses import replace
            live = replace(fig_catalog[1], address=ep.address, port=ep.port)
            out = NetworkInvoker(timeout=5.0)(live, b"x")
        assert out == b"[convert:20]x"


def test_workflow_requires_subtasks():
    with pytest.raises(ValueError):
        Workflow(())


def test_mode_coerces_from_string():
    report = execute_workflow(WF, chain_selector(), mode="DryRun")
    assert report.mode is ExecutionMode.DRY_RUN
