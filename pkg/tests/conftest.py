"""Shared fixtures: the worked three-rule example and a seeded
instance generator used by the big randomized properties.

The generator drives two models at once: the live board (through the
dynamics layer) and a plain-data shadow (tests/oracles.py) that knows
nothing about the package.  Agreement between them at the end of an
event run is the backbone of the randomized suites.
"""

from __future__ import annotations

import random

import pytest

from bboard.board import Board, build_board
from bboard.model import (DEFAULT_POLICY, CostPolicy, Offer, Rule, RuleKind,
                          ServiceDescriptor, metric_changed, parameter_changed,
                          rule_added, rule_deleted, rule_modified)

from oracles import ShadowInstance

LITERALS = ("FLV", "AVI", "OGG")
NUMERIC_PARAMS = ("alpha", "beta", "gamma", "delta")
FMT_PARAM = "fmt"


def fig_rules_list() -> list[Rule]:
    return [
        Rule("rf", "convert", "format", RuleKind.EQUALS, "FLV", 1),
        Rule("rr", "convert", "runtime", RuleKind.AT_MOST, 80.0, 2),
        Rule("rp", "convert", "price", RuleKind.AT_MOST, 60.0, 3),
    ]


def fig_catalog_list() -> list[ServiceDescriptor]:
    par_list = ("format", "runtime", "price")
    o10 = Offer("10", "convert", 0, {"format": "AVI", "runtime": 50.0, "price": 20.0})
    o20a = Offer("20", "convert", 0, {"format": "FLV", "runtime": 50.0, "price": 50.0})
    o20b = Offer("20", "convert", 1, {"format": "FLV", "runtime": 100.0, "price": 20.0})
    return [
        ServiceDescriptor("131.12.10.1", 63150, "convert", 1.0, par_list, "10", (o10,)),
        ServiceDescriptor("131.12.10.2", 63151, "convert", 1.0, par_list, "20",
                          (o20a, o20b)),
    ]


@pytest.fixture
def fig_rules() -> list[Rule]:
    return fig_rules_list()


@pytest.fixture
def fig_catalog() -> list[ServiceDescriptor]:
    return fig_catalog_list()


@pytest.fixture
def fig_board(fig_rules, fig_catalog) -> Board:
    return build_board(fig_rules, fig_catalog)


# three-subtask chain: borders 60 / 20 / 15
def chain_rules_list() -> list[Rule]:
    return [
        Rule("c1", "convert", "price", RuleKind.AT_MOST, 60.0, 1),
        Rule("c2", "compress", "price", RuleKind.AT_MOST, 20.0, 2),
        Rule("c3", "store", "price", RuleKind.AT_MOST, 15.0, 3),
    ]


def chain_catalog_list() -> list[ServiceDescriptor]:
    out = []
    prices = {"convert": (50.0, 30.0), "compress": (18.0, 12.0), "store": (9.0, 14.0)}
    port = 7000
    for task, (pa, pb) in prices.items():
        for i, price in enumerate((pa, pb)):
            provider = f"{task[:2]}{i}"
            offer = Offer(provider, task, 0, {"price": price})
            out.append(ServiceDescriptor(f"10.1.0.{port % 250}", port, task, 1.0,
                                         ("price",), provider, (offer,)))
            port += 1
    return out


# -- randomized instances --------------------------------------------


class GenState:
    """Book-keeping for one generated instance while events mutate it."""

    def __init__(self, rules, catalog, shadow, policy):
        self.rules = list(rules)          # every version, append order
        self.catalog = catalog
        self.shadow = shadow
        self.policy = policy
        self.deleted: set[str] = set()
        self.rule_counter = len(rules)
        self.seq = len(rules)

    def next_rule_id(self) -> str:
        self.rule_counter += 1
        return f"g{self.rule_counter}"

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def active_rule_ids(self) -> list[str]:
        return sorted({r.rule_id for r in self.rules} - self.deleted)

    def last_version(self, rule_id: str) -> Rule:
        return [r for r in self.rules if r.rule_id == rule_id][-1]


def _random_border(rng: random.Random, kind: RuleKind):
    if kind is RuleKind.AT_MOST:
        return float(rng.randint(20, 120))
    if kind is RuleKind.AT_LEAST:
        return float(rng.randint(0, 80))
    return rng.choice(LITERALS)


def _random_rule(rng: random.Random, rule_id: str, seq: int) -> Rule:
    if rng.random() < 0.25:
        return Rule(rule_id, "t", FMT_PARAM, RuleKind.EQUALS,
                    rng.choice(LITERALS), seq)
    parameter = rng.choice(NUMERIC_PARAMS)
    kind = rng.choice((RuleKind.AT_MOST, RuleKind.AT_LEAST))
    return Rule(rule_id, "t", parameter, kind, _random_border(rng, kind), seq)


def make_instance(rng: random.Random,
                  policy: CostPolicy = DEFAULT_POLICY) -> GenState:
    """One random subtask: up to 8 providers x 3 offers, up to 5 rules."""
    n_rules = rng.randint(1, 5)
    rules = [_random_rule(rng, f"g{i + 1}", i + 1) for i in range(n_rules)]

    catalog = []
    offers_map = {}
    metrics = {}
    for p in range(rng.randint(1, 8)):
        provider = f"p{p}"
        metric = rng.choice((0.0, 0.3, 0.6)) if rng.random() < 0.15 else 1.0
        metrics[provider] = metric
        provider_offers = []
        for oi in range(rng.randint(1, 3)):
            values = {FMT_PARAM: rng.choice(LITERALS)}
            for parameter in NUMERIC_PARAMS:
                if rng.random() < 0.85:
                    values[parameter] = float(rng.randint(0, 100))
            provider_offers.append(Offer(provider, "t", oi, values))
            offers_map[(provider, oi)] = dict(values)
        par_list = (FMT_PARAM,) + NUMERIC_PARAMS
        catalog.append(ServiceDescriptor(f"10.0.0.{p}", 9000 + p, "t", metric,
                                         par_list, provider, tuple(provider_offers)))

    shadow = ShadowInstance(
        regions=[(r.rule_id, r.kind.value, r.parameter, r.border, False)
                 for r in rules],
        offers=offers_map, metrics=metrics,
        scaling=policy.metric_scaling, floor=policy.metric_floor)
    return GenState(rules, catalog, shadow, policy)


def random_event(rng: random.Random, gen: GenState):
    """One valid ChangeEvent against the instance's current state;
    mirrors it into the shadow and generator book-keeping."""
    roll = rng.random()
    if roll < 0.35:
        provider, offer_index = rng.choice(sorted(gen.shadow.offers))
        if rng.random() < 0.2:
            parameter, value = FMT_PARAM, rng.choice(LITERALS)
        else:
            parameter, value = rng.choice(NUMERIC_PARAMS), float(rng.randint(0, 100))
        gen.shadow.set_parameter(provider, offer_index, parameter, value)
        return parameter_changed(provider, offer_index, parameter, value,
                                 seq=gen.next_seq())
    if roll < 0.55:
        provider = rng.choice(sorted(gen.shadow.metrics))
        metric = rng.choice((0.0, 0.2, 0.5, 1.0))
        gen.shadow.set_metric(provider, metric)
        return metric_changed(provider, metric, seq=gen.next_seq())
    if roll < 0.75:
        seq = gen.next_seq()
        rule = _random_rule(rng, gen.next_rule_id(), seq)
        gen.rules.append(rule)
        gen.shadow.append_rule(rule.rule_id, rule.kind.value, rule.parameter,
                               rule.border)
        return rule_added(rule, seq=seq)
    active = gen.active_rule_ids()
    if roll < 0.9 and active:
        rule_id = rng.choice(active)
        old = gen.last_version(rule_id)
        seq = gen.next_seq()
        new = Rule(rule_id, old.subtask_id, old.parameter, old.kind,
                   _random_border(rng, old.kind), seq)
        gen.rules.append(new)
        gen.shadow.append_rule(rule_id, new.kind.value, new.parameter, new.border)
        return rule_modified(new, seq=seq)
    if active:
        rule_id = rng.choice(active)
        gen.deleted.add(rule_id)
        gen.shadow.delete_rule(rule_id)
        return rule_deleted(rule_id, "t", seq=gen.next_seq())
    # nothing left to delete or modify; fall back to a metric nudge
    provider = rng.choice(sorted(gen.shadow.metrics))
    gen.shadow.set_metric(provider, 1.0)
    return metric_changed(provider, 1.0, seq=gen.next_seq())


def build_from_shadow(gen: GenState) -> Board:
    """A fresh board from the recorded rule history and current data -
    what a brand-new session would see."""
    board = build_board(gen.rules, catalog_from_shadow(gen), gen.policy,
                        zeroed=gen.deleted)
    return board


def catalog_from_shadow(gen: GenState) -> list[ServiceDescriptor]:
    by_provider: dict[str, list[Offer]] = {}
    for (provider, offer_index), values in sorted(gen.shadow.offers.items()):
        by_provider.setdefault(provider, []).append(
            Offer(provider, "t", offer_index, dict(values)))
    out = []
    for i, (provider, offers) in enumerate(sorted(by_provider.items())):
        params = sorted(set().union(*(o.values.keys() for o in offers)))
        out.append(ServiceDescriptor(f"10.0.0.{i}", 9000 + i, "t",
                                     gen.shadow.metrics[provider], tuple(params),
                                     provider, tuple(offers)))
    return out
