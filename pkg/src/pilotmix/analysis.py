"""Closed-form benchmarks: the unresolvable-collision probability with its
packet-loss floor, and the no-SIC loss approximations for slotted-unframed
and framed operation.

Products over huge choice counts (up to ~10^11) are evaluated in the log
domain; the alternating binomial sums are accumulated with exact compensated
summation since the terms cancel heavily at large preamble order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .core import DegreeDistribution


class Scenario(str, Enum):
    SLOTTED_UNFRAMED = "SlottedUnframed"
    FRAMED_NESTED = "FramedNested"


@dataclass(frozen=True)
class BoundQuery:
    """Concentrated-distribution collision query: r repeats, p mixed pilots,
    n_users contenders (per slot when unframed, per frame when framed)."""

    scenario: Scenario
    n_pilots: int
    p: int
    n_users: int
    r: int = 1
    n_slots: int | None = None

    def validate(self) -> "BoundQuery":
        if self.p < 1 or self.p > self.n_pilots:
            raise ValueError(f"p={self.p} outside [1, n_pilots={self.n_pilots}]")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if self.scenario is Scenario.FRAMED_NESTED:
            if self.n_slots is None:
                raise ValueError("framed query needs n_slots")
            if self.r < 1 or self.r > self.n_slots:
                raise ValueError(f"r={self.r} outside [1, n_slots={self.n_slots}]")
        return self


def choice_count(q: BoundQuery) -> int:
    """Total number of distinct full choice tuples a user can make."""
    q.validate()
    if q.scenario is Scenario.SLOTTED_UNFRAMED:
        return math.comb(q.n_pilots, q.p)
    return math.comb(q.n_slots, q.r) * math.comb(q.n_pilots, q.p) ** q.r


def collision_prob(q: BoundQuery) -> float:
    """Probability that at least two of the n_users pick identical full
    choice tuples (birthday problem over choice_count outcomes)."""
    c = choice_count(q)
    n = q.n_users
    if n > c:
        return 1.0
    log_all_distinct = 0.0
    for i in range(1, n):
        log_all_distinct += math.log1p(-i / c)
    return -math.expm1(log_all_distinct)


def plr_lower_bound(q: BoundQuery) -> float:
    """Loss-rate floor: at least two of the n_users are lost whenever an
    identical-choice collision occurs."""
    return 2.0 * collision_prob(q) / q.n_users


def _check_mean(dist: DegreeDistribution, limit: int, name: str) -> float:
    mean = dist.mean_degree()
    if mean > limit:
        raise ValueError(f"{name} mean degree {mean} exceeds {limit}")
    return mean


def plr_slotted_nosic(psi: DegreeDistribution, n_pilots: int, k_s: int) -> float:
    """Single-slot no-SIC loss approximation: a packet is lost when every
    pilot of its mixture is also picked by some interferer, treating the per
    pilot collision events as independent. Exact for p = 1; an approximation
    otherwise that tightens as n_pilots grows."""
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    mean = _check_mean(psi, n_pilots, "psi")
    hit = -math.expm1((k_s - 1) * math.log1p(-mean / n_pilots))
    return math.fsum(prob * hit**p for p, prob in psi.coefficients)


def plr_framed_nosic(
    lam: DegreeDistribution,
    psi: DegreeDistribution,
    n_slots: int,
    n_pilots: int,
    k_a: int,
) -> float:
    """Framed no-SIC loss approximation: a packet is lost when in each of its
    r replica slots every pilot of the mixture is interfered. The inner
    alternating sum marginalizes the binomial number of interferers sharing a
    slot."""
    if k_a < 1:
        raise ValueError("k_a must be >= 1")
    lam_mean = _check_mean(lam, n_slots, "lambda")
    psi_mean = _check_mean(psi, n_pilots, "psi")
    slot_hit = lam_mean / n_slots
    pilot_free = 1.0 - psi_mean / n_pilots
    inner = 0.0
    for p, psi_prob in psi.coefficients:
        terms = []
        for j in range(p + 1):
            base = 1.0 - slot_hit + slot_hit * pilot_free**j
            terms.append((-1.0) ** j * math.comb(p, j) * base ** (k_a - 1))
        inner += psi_prob * math.fsum(terms)
    return math.fsum(
        lam_prob * inner**r for r, lam_prob in lam.coefficients
    )
