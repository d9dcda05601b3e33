"""QoS-constrained service provider selection on a blackboard.

The package picks the cheapest chain of providers for a multi-step
workflow: one board per subtask, one region per rule, an incremental
minimum-cost-path search that survives live rule and parameter
changes, plus a registry, a workflow executor, external branch
delegation, and an HTTP/CLI frontdoor.
"""

from .board import (Board, NoRules, NoServicesForTask, Region, UnknownNode,
                    UnknownProviderOrParameter, UnknownRule, build_board)
from .costs import (NegativeInput, cost_at_least, cost_at_most, cost_equals,
                    node_cost, rule_cost)
from .dynamics import (ChangeOutcome, OutcomeKind, apply_change, apply_metric_change,
                       apply_parameter_change, apply_rule_deletion, apply_rule_event)
from .model import (CatalogError, ChangeEvent, ChangeKind, CostPolicy, CostValue,
                    DEFAULT_POLICY, INFEASIBLE, MetricOutOfRange, Offer, ParameterNode,
                    Rule, RuleKind, ServiceDescriptor, Solution, Violation, ZERO_COST,
                    catalog_violations, metric_changed, parameter_changed, rule_added,
                    rule_deleted, rule_modified, validate_catalog)
from .engine import (DuplicateActiveRule, Engine, RulesFileError, RunRecord,
                     SharedRepository, SolutionRecord, UnknownRuleForDelete,
                     UnknownRun, parse_rules_text)
from .executor import (ConfirmationDenied, ExecutionMode, NetworkInvoker,
                       SimulatedInvoker, StepReport, Workflow, WorkflowReport,
                       execute_workflow)
from .external import (BranchDelegation, BranchSpec, DelegationStatus,
                       FragmentError, InvalidBranchSpec, PartialSolution,
                       StaleEpoch, VerificationFailed, delegate_branch,
                       expire_delegations, fragment_text, merge_partial_solution,
                       parse_fragment, serve_as_solver, solve_fragment)
from .oracle import best_offer, enumerate_totals
from .registry import (CallFailed, MalformedValue, MissingKey, ProviderEndpoint,
                       ScriptedChange, SimulatedProvider, UpdateController,
                       UpdateMode, UpdatePolicy, call_provider, emit_descriptor,
                       find_services, load_catalog, parse_descriptor, query_offer,
                       rtt_metric, run_update_controller,
                       simulated_catalog_providers)
from .scenario import (Scenario, ScenarioError, load_scenario, run_scenario,
                       run_scenario_with_engine)
from .search import (BrokenAncestorChain, EpochMismatch, NoFeasiblePath, SearchState,
                     find_best_provider, new_search, resume, retrace, run_steps)

__version__ = "0.1.0"

__all__ = [
    "Board", "BranchDelegation", "BranchSpec", "BrokenAncestorChain", "CallFailed",
    "CatalogError", "ChangeEvent", "ChangeKind", "ChangeOutcome",
    "ConfirmationDenied", "CostPolicy", "CostValue", "DEFAULT_POLICY",
    "DelegationStatus", "DuplicateActiveRule", "Engine", "EpochMismatch",
    "ExecutionMode", "FragmentError", "INFEASIBLE", "InvalidBranchSpec",
    "MalformedValue", "MetricOutOfRange", "MissingKey", "NegativeInput",
    "NetworkInvoker", "NoFeasiblePath", "NoRules", "NoServicesForTask", "Offer",
    "OutcomeKind", "ParameterNode", "PartialSolution", "ProviderEndpoint",
    "Region", "Rule", "RuleKind", "RulesFileError", "RunRecord", "Scenario",
    "ScenarioError", "ScriptedChange", "SearchState", "ServiceDescriptor",
    "SharedRepository", "SimulatedInvoker", "SimulatedProvider", "Solution",
    "SolutionRecord", "StaleEpoch", "StepReport", "UnknownNode",
    "UnknownProviderOrParameter", "UnknownRule", "UnknownRuleForDelete",
    "UnknownRun", "UpdateController", "UpdateMode", "UpdatePolicy",
    "VerificationFailed", "Violation", "Workflow", "WorkflowReport", "ZERO_COST",
    "apply_change", "apply_metric_change", "apply_parameter_change",
    "apply_rule_deletion", "apply_rule_event", "best_offer", "build_board",
    "call_provider", "catalog_violations", "cost_at_least", "cost_at_most",
    "cost_equals", "delegate_branch", "emit_descriptor", "enumerate_totals",
    "execute_workflow", "expire_delegations", "find_best_provider",
    "find_services", "fragment_text", "load_catalog", "load_scenario",
    "merge_partial_solution", "metric_changed", "new_search", "node_cost",
    "parameter_changed", "parse_descriptor", "parse_fragment", "parse_rules_text",
    "query_offer", "resume", "retrace", "rtt_metric", "rule_added", "rule_cost",
    "rule_deleted", "rule_modified", "run_scenario", "run_scenario_with_engine",
    "run_steps", "run_update_controller", "serve_as_solver",
    "simulated_catalog_providers", "solve_fragment", "validate_catalog",
]
