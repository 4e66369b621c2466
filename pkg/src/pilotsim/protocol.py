"""Distributed pilot negotiation as explicit UE/AP message passing.

This reruns the distributed scheme with every piece of information that
crosses the air logged as a message, so tests can audit the overhead claims
directly: no AP ever talks to another AP (or to any central node, which
simply does not exist here), and each arriving UE costs exactly S' probes,
S' offers, and |M_t| notifications.

AP agents are constructed with nothing but their own LSFC row restricted to
the UEs they serve; locality is enforced by what the handlers can reach, not
by convention. The candidate-set arithmetic is shared with the direct
implementation, so the negotiated assignment is bit-identical to it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .assignment import (CandidateSets, SchemeConfig,
                         candidate_set_from_profile, priority_select,
                         rank_from_order)
from .estimation import PilotAssignment, local_error_profile

__all__ = [
    "KIND_PROBE",
    "KIND_OFFER",
    "KIND_NOTIFY",
    "Message",
    "TraceLog",
    "AccessPointAgent",
    "UserAgent",
    "BudgetViolation",
    "run_protocol",
    "audit_overhead",
]

KIND_PROBE = "PilotProbe"
KIND_OFFER = "CandidateOffer"
KIND_NOTIFY = "PilotNotify"

# who may send what to whom; anything else (notably ap->ap) cannot exist
_DIRECTIONS = {
    KIND_PROBE: ("ue", "ap"),
    KIND_OFFER: ("ap", "ue"),
    KIND_NOTIFY: ("ue", "ap"),
}


def node_role(node: str) -> str:
    if node.startswith("ap"):
        return "ap"
    if node.startswith("ue"):
        return "ue"
    raise ValueError(f"unknown node id {node!r}")


@dataclass(frozen=True)
class Message:
    """One logged transmission; payload counts pilot indices carried."""

    kind: str
    src: str
    dst: str
    payload_size: int

    def __post_init__(self):
        if self.kind not in _DIRECTIONS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if self.src == self.dst:
            raise ValueError("self-addressed message")
        want_src, want_dst = _DIRECTIONS[self.kind]
        if node_role(self.src) != want_src or node_role(self.dst) != want_dst:
            raise ValueError(f"{self.kind} must go {want_src}->{want_dst}, "
                             f"got {self.src}->{self.dst}")
        if self.payload_size < 0:
            raise ValueError("negative payload")


@dataclass
class TraceLog:
    """Ordered message log with per-kind and per-edge counters."""

    records: list = field(default_factory=list)
    by_kind: Counter = field(default_factory=Counter)
    by_edge: Counter = field(default_factory=Counter)

    def record(self, arrival_index: int, msg: Message):
        self.records.append((arrival_index, msg))
        self.by_kind[msg.kind] += 1
        self.by_edge[(msg.src, msg.dst)] += 1

    def verify_counters(self) -> bool:
        kinds = Counter(m.kind for _, m in self.records)
        edges = Counter((m.src, m.dst) for _, m in self.records)
        return kinds == self.by_kind and edges == self.by_edge

    def ap_to_ap_count(self) -> int:
        return sum(1 for _, m in self.records
                   if node_role(m.src) == "ap" and node_role(m.dst) == "ap")

    def total_payload(self) -> int:
        return sum(m.payload_size for _, m in self.records)

    def export_lines(self):
        """Line-delimited trace: arrival_index,kind,src,dst,payload_size."""
        for idx, m in self.records:
            yield f"{idx},{m.kind},{m.src},{m.dst},{m.payload_size}"


class AccessPointAgent:
    """AP-side handler; owns only what AP m can learn over the air.

    State is the LSFC (and pilot power) of each served UE, known from
    association, plus per-pilot contamination sums accumulated from
    notifications, in arrival order.
    """

    def __init__(self, ap_id: int, served_beta: dict, served_weight: dict,
                 num_pilots: int, delta: float):
        self.ap_id = int(ap_id)
        self._beta = dict(served_beta)
        self._weight = dict(served_weight)
        self.pilot_sums = np.zeros(num_pilots)
        self.delta = float(delta)

    def candidate_offer(self, ue: int) -> tuple:
        """Candidate pilots for a probing served UE, best-first.

        Ordering by ascending local error (ties by pilot index) is what lets
        the UE apply the lowest-error fallback without extra payload.
        """
        own = self._beta[ue]
        errors = local_error_profile(self._weight[ue] * own, own, self.pilot_sums)
        members = candidate_set_from_profile(errors, self.delta)
        ranked = members[np.argsort(errors[members], kind="stable")]
        return tuple(int(i) for i in ranked)

    def learn_assignment(self, ue: int, pilot: int):
        self.pilot_sums[pilot] += self._weight[ue] * self._beta[ue]


class UserAgent:
    """UE-side chooser working purely from the received offers."""

    def __init__(self, ue_id: int, num_pilots: int, tie_rule: str, seed: int):
        self.ue_id = int(ue_id)
        self.num_pilots = int(num_pilots)
        self.tie_rule = tie_rule
        self.seed = int(seed)

    def choose(self, offers) -> int:
        # the top AP's offer order stands in for its error profile: rank
        # positions preserve exactly the comparisons selection performs
        rank = rank_from_order(np.asarray(offers[0], dtype=int), self.num_pilots)
        sets = tuple(np.sort(np.asarray(offer, dtype=int)) for offer in offers)
        cands = CandidateSets(sets, rank)
        return priority_select(cands, self.tie_rule, self.seed, ue=self.ue_id)


def run_protocol(real, assoc, scheme: SchemeConfig, arrival_order, powers,
                 lp: int):
    """Negotiate pilots for the arriving UEs over logged messages.

    `arrival_order` may be any duplicate-free subset of UEs; UEs that never
    arrive stay unassigned (-1), so replaying a prefix of an arrival sequence
    reproduces exactly the prefix of the full run. Deterministic given
    (scheme.seed, arrival_order); matches the direct implementation exactly.
    """
    if scheme.scheme_id != "dpb":
        raise ValueError("the message protocol enacts the distributed scheme only")
    num_ues = real.num_ues
    order = np.asarray(arrival_order, dtype=int)
    if order.size != np.unique(order).size:
        raise ValueError("arrival order must not repeat UEs")
    if order.size and (order.min() < 0 or order.max() >= num_ues):
        raise ValueError("arrival order names unknown UEs")
    w = powers.p_pilot * lp
    agents = []
    for m in range(real.num_aps):
        served = assoc.served_ues[m]
        agents.append(AccessPointAgent(
            m,
            {int(t): float(real.beta[m, t]) for t in served},
            {int(t): float(w[t]) for t in served},
            lp, scheme.dpb_delta))
    log = TraceLog()
    pilot_of = np.full(num_ues, -1, dtype=int)
    for arrival_index, t in enumerate(order):
        t = int(t)
        serving = assoc.serving_aps[t]
        s_prime = min(scheme.dpb_s, serving.size)
        offers = []
        for m in serving[:s_prime]:
            m = int(m)
            log.record(arrival_index, Message(KIND_PROBE, f"ue{t}", f"ap{m}", 0))
            offer = agents[m].candidate_offer(t)
            log.record(arrival_index,
                       Message(KIND_OFFER, f"ap{m}", f"ue{t}", len(offer)))
            offers.append(offer)
        pilot = UserAgent(t, lp, scheme.tie_rule, scheme.seed).choose(offers)
        for m in serving:
            m = int(m)
            log.record(arrival_index, Message(KIND_NOTIFY, f"ue{t}", f"ap{m}", 1))
            agents[m].learn_assignment(t, pilot)
        pilot_of[t] = pilot
    return PilotAssignment(pilot_of, lp), log


class BudgetViolation(RuntimeError):
    def __init__(self, ue: int, detail: str):
        self.ue = ue
        super().__init__(f"UE {ue}: {detail}")


def audit_overhead(log: TraceLog, assoc, s: int) -> dict:
    """Check every UE's message budget against the trace.

    Budget per UE: S'_t probes, S'_t offers, |M_t| notifies, with
    S'_t = min(S, |M_t|). Raises BudgetViolation naming the first offender.
    """
    probes, offers, notifies = Counter(), Counter(), Counter()
    for _, m in log.records:
        if m.kind == KIND_PROBE:
            probes[int(m.src[2:])] += 1
        elif m.kind == KIND_OFFER:
            offers[int(m.dst[2:])] += 1
        else:
            notifies[int(m.src[2:])] += 1
    ues = sorted(set(probes) | set(offers) | set(notifies))
    per_ue = {}
    for t in ues:
        s_prime = min(s, len(assoc.serving_aps[t]))
        serving = len(assoc.serving_aps[t])
        got = (probes[t], offers[t], notifies[t])
        if got != (s_prime, s_prime, serving):
            raise BudgetViolation(
                t, f"expected {(s_prime, s_prime, serving)} "
                   f"(probes, offers, notifies), traced {got}")
        per_ue[t] = {"probes": got[0], "offers": got[1], "notifies": got[2]}
    return {
        "per_ue": per_ue,
        "total_messages": len(log.records),
        "total_payload": log.total_payload(),
        "ap_to_ap": log.ap_to_ap_count(),
    }
