"""Runs a workflow against whatever providers currently win.

Selection is all-or-nothing before anything is invoked: if any
subtask has no feasible provider the whole run aborts and no service
is touched.  Once invocation starts, each step re-selects just before
its call so mid-run rule or parameter changes land on the remaining
steps only.  Failures come back inside the WorkflowReport, never as
raised exceptions, so a half-finished run is still inspectable.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .model import ServiceDescriptor, Solution
from .registry import SimulatedProvider, call_provider
from .search import NoFeasiblePath


class ExecutionMode(str, enum.Enum):
    DRY_RUN = "DryRun"
    CONFIRM = "Confirm"
    AUTO = "Auto"


class ConfirmationDenied(RuntimeError):
    """The confirmation hook rejected the proposed chain."""


@dataclass(frozen=True, slots=True)
class Workflow:
    """An ordered chain of subtasks; each step feeds its output to the next."""

    subtasks: tuple[str, ...]
    payload: bytes = b""

    def __post_init__(self) -> None:
        if not self.subtasks:
            raise ValueError("workflow needs at least one subtask")


@dataclass(slots=True)
class StepReport:
    subtask_id: str
    solution: Solution | None = None
    descriptor: ServiceDescriptor | None = None
    invoked: bool = False
    output: bytes | None = None
    error: str | None = None


@dataclass(slots=True)
class WorkflowReport:
    """What happened, step by step.  status is one of planned /
    completed / aborted."""

    mode: ExecutionMode
    status: str
    steps: list[StepReport] = field(default_factory=list)
    reason: str | None = None
    failed_subtask: str | None = None
    final_payload: bytes | None = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"


Selector = Callable[[str], tuple[Solution, ServiceDescriptor]]
Invoker = Callable[[ServiceDescriptor, bytes], bytes]
ConfirmHook = Callable[[Sequence[StepReport]], bool]


class SimulatedInvoker:
    """Routes invocations to in-process SimulatedProviders."""

    def __init__(self, providers: Mapping[tuple[str, str], SimulatedProvider]):
        self.providers = dict(providers)

    def __call__(self, descriptor: ServiceDescriptor, payload: bytes) -> bytes:
        key = (descriptor.provider_id, descriptor.task_id)
        if key not in self.providers:
            raise KeyError(f"no simulated provider for {key}")
        return self.providers[key].invoke(payload)


class NetworkInvoker:
    """Calls the selected provider over the wire protocol."""

    def __init__(self, timeout: float = 5.0):
        self.timeout = timeout

    def __call__(self, descriptor: ServiceDescriptor, payload: bytes) -> bytes:
        return call_provider(descriptor.address, descriptor.port,
                             descriptor.task_id, payload, timeout=self.timeout)


def _select_all(workflow: Workflow, select: Selector,
                parallel: bool) -> tuple[list[StepReport], str | None]:
    """Resolve every subtask before anything runs; returns (steps, failed_subtask)."""
    steps = [StepReport(subtask_id=s) for s in workflow.subtasks]

    def resolve(step: StepReport) -> None:
        try:
            step.solution, step.descriptor = select(step.subtask_id)
        except NoFeasiblePath:
            step.error = "no feasible provider"

    if parallel and len(steps) > 1:
        # independent boards, safe to fan out
        with ThreadPoolExecutor(max_workers=min(8, len(steps))) as pool:
            list(pool.map(resolve, steps))
    else:
        for step in steps:
            resolve(step)
    for step in steps:
        if step.error is not None:
            return steps, step.subtask_id
    return steps, None


def execute_workflow(workflow: Workflow, select: Selector,
                     invoker: Invoker | None = None,
                     mode: ExecutionMode = ExecutionMode.DRY_RUN,
                     confirm: ConfirmHook | None = None,
                     parallel: bool = False) -> WorkflowReport:
    """Select providers for every step, then (mode permitting) invoke them.

    select maps a subtask to its current cheapest (Solution, descriptor)
    and raises NoFeasiblePath when the board has no acceptable provider.
    Invocation re-calls select per step, so the chain follows live data.
    """
    mode = ExecutionMode(mode)
    report = WorkflowReport(mode=mode, status="planned")
    steps, failed = _select_all(workflow, select, parallel)
    report.steps = steps
    if failed is not None:
        report.status = "aborted"
        report.failed_subtask = failed
        report.reason = f"no feasible provider for {failed!r}"
        return report
    if mode is ExecutionMode.DRY_RUN:
        return report

    if mode is ExecutionMode.CONFIRM:
        if confirm is None:
            raise ValueError("Confirm mode needs a confirm hook")
        if not confirm(steps):
            report.status = "aborted"
            report.reason = "confirmation denied"
            return report
    if invoker is None:
        raise ValueError(f"{mode.value} mode needs an invoker")

    payload = workflow.payload
    for step in steps:
        try:
            # live re-selection: events since planning move the choice
            step.solution, step.descriptor = select(step.subtask_id)
        except NoFeasiblePath:
            step.error = "no feasible provider"
            report.status = "aborted"
            report.failed_subtask = step.subtask_id
            report.reason = f"no feasible provider for {step.subtask_id!r}"
            return report
        try:
            step.output = invoker(step.descriptor, payload)
        except Exception as exc:  # noqa: BLE001 - provider faults belong in the report
            step.error = str(exc) or exc.__class__.__name__
            report.status = "aborted"
            report.failed_subtask = step.subtask_id
            report.reason = f"invocation failed for {step.subtask_id!r}: {step.error}"
            return report
        step.invoked = True
        payload = step.output
    report.status = "completed"
    report.final_payload = payload
    return report
