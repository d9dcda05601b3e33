"""HTTP frontdoor.

JSON endpoints over one Engine.  Every mutating response carries the
seq the event got; results carry the board epoch and solved_at tick
so a client can tell how fresh what it is looking at is.  POST /solve
prices a delegated fragment for another engine, which is all it takes
to act as an external solver.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .board import NoRules, NoServicesForTask, UnknownProviderOrParameter
from .engine import (DuplicateActiveRule, Engine, RulesFileError, UnknownRule,
                     UnknownRuleForDelete, UnknownRun)
from .executor import ExecutionMode
from .external import FragmentError, solve_fragment
from .model import MetricOutOfRange, RuleKind


class RuleIn(BaseModel):
    subtask_id: str
    parameter: str
    kind: str
    border: Any


class BorderIn(BaseModel):
    border: Any


class RunIn(BaseModel):
    subtasks: list[str] = Field(default_factory=list)
    mode: str = ExecutionMode.DRY_RUN.value


class EventIn(BaseModel):
    kind: str
    provider_id: str
    offer_index: int | None = None
    parameter: str | None = None
    value: Any = None
    metric: float | None = None
    task_id: str | None = None


class FragmentIn(BaseModel):
    fragment: str


def create_app(engine: Engine, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="bboard", docs_url=None, redoc_url=None)

    @app.exception_handler(DuplicateActiveRule)
    async def _dup(request: Request, exc: DuplicateActiveRule) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(MetricOutOfRange)
    async def _metric(request: Request, exc: MetricOutOfRange) -> JSONResponse:
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "seq": engine.repo.seq}

    @app.get("/services")
    def services() -> dict:
        return {"seq": engine.repo.seq, "services": engine.services_view()}

    @app.get("/rules")
    def rules() -> dict:
        return {"seq": engine.repo.seq, "rules": engine.rules_view()}

    @app.post("/rules", status_code=201)
    def add_rule(body: RuleIn) -> dict:
        try:
            kind = RuleKind(body.kind)
        except ValueError:
            raise HTTPException(422, f"unknown kind {body.kind!r}") from None
        try:
            rule, event, _ = engine.add_rule(body.subtask_id, body.parameter, kind,
                                             body.border)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, DuplicateActiveRule):
                raise
            raise HTTPException(422, str(exc)) from None
        return {"seq": event.seq, "rule": _rule_dict(rule)}

    @app.put("/rules/{rule_id}")
    def modify_rule(rule_id: str, body: BorderIn) -> dict:
        try:
            rule, event, _ = engine.modify_rule(rule_id, body.border)
        except UnknownRule:
            raise HTTPException(404, f"no active rule {rule_id!r}") from None
        except (ValueError, TypeError) as exc:
            raise HTTPException(422, str(exc)) from None
        return {"seq": event.seq, "rule": _rule_dict(rule)}

    @app.delete("/rules/{rule_id}")
    def delete_rule(rule_id: str) -> dict:
        try:
            event, _ = engine.delete_rule(rule_id)
        except UnknownRuleForDelete:
            raise HTTPException(404, f"no active rule {rule_id!r}") from None
        return {"seq": event.seq, "rule_id": rule_id}

    @app.post("/run", status_code=201)
    def start_run(body: RunIn) -> dict:
        try:
            mode = ExecutionMode(body.mode)
        except ValueError:
            raise HTTPException(422, f"unknown mode {body.mode!r}") from None
        if mode is ExecutionMode.CONFIRM:
            # confirmation needs an interactive hook; the API offers
            # DryRun for inspection and a second POST with Auto to commit
            raise HTTPException(422, "Confirm mode is not available over HTTP; "
                                     "inspect a DryRun, then POST Auto")
        try:
            record = engine.run(body.subtasks, mode)
        except (NoRules, NoServicesForTask) as exc:
            # before the ValueError catch: NoRules is one
            raise HTTPException(409, str(exc)) from None
        except ValueError as exc:
            raise HTTPException(422, str(exc)) from None
        return {"run_id": record.run_id, "status": record.report.status,
                "seq": record.created_seq}

    @app.get("/runs/{run_id}/results")
    def run_results(run_id: str) -> dict:
        try:
            return engine.results(run_id)
        except UnknownRun:
            raise HTTPException(404, f"no run {run_id!r}") from None
        except (NoRules, NoServicesForTask) as exc:
            raise HTTPException(409, str(exc)) from None

    @app.post("/events", status_code=201)
    def inject_event(body: EventIn) -> dict:
        try:
            event, outcomes = engine.apply_event_dict(body.model_dump())
        except UnknownProviderOrParameter as exc:
            raise HTTPException(404, str(exc)) from None
        except MetricOutOfRange:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(422, str(exc)) from None
        return {"seq": event.seq,
                "outcomes": [{"subtask_id": s, "kind": o.kind.value,
                              "reopened": list(o.reopened),
                              "invalidated_solution": o.invalidated_solution}
                             for s, o in outcomes]}

    @app.post("/solve")
    def solve(body: FragmentIn) -> dict:
        try:
            partial = solve_fragment(body.fragment, engine.policy)
        except (FragmentError, MetricOutOfRange, ValueError) as exc:
            raise HTTPException(422, str(exc)) from None
        return {"partial": partial.to_dict()}

    if ui_dir is not None:
        ui_path = Path(ui_dir)
        if ui_path.is_dir():
            app.mount("/ui", StaticFiles(directory=str(ui_path), html=True),
                      name="ui")

    return app


def _rule_dict(rule) -> dict:
    return {"rule_id": rule.rule_id, "subtask_id": rule.subtask_id,
            "parameter": rule.parameter, "kind": rule.kind.value,
            "border": rule.border, "seq": rule.seq}
