"""Collision-model abstraction of the protocol on the slot x pilot grid.

A packet is decodable iff some pilot of its mixture is a singleton in its
slot; inner and outer SIC become peeling. No PHY impairments exist at this
level by design: the grid is the fast large-scale engine and the brute-force
reference for the closed-form approximations.
"""

from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .core import ProtocolConfig, ReceiverMode, UserTransmission

ENUMERATION_LIMIT = 10**8


@dataclass
class FrameGrid:
    n_slots: int
    n_pilots: int
    occupancy: dict[tuple[int, int], set[int]]
    users: dict[int, UserTransmission]


def synthetic_transmission(
    user_id: int,
    placement: dict[int, tuple[int, ...]],
    payload_bits: np.ndarray | None = None,
) -> UserTransmission:
    """Build a transmission with hand-chosen placement (constructed tests)."""
    slots = tuple(sorted(placement))
    return UserTransmission(
        user_id=user_id,
        payload_bits=np.zeros(0, dtype=np.uint8) if payload_bits is None else payload_bits,
        repetition_degree=len(slots),
        slot_indices=slots,
        pilot_subsets=tuple(tuple(sorted(placement[s])) for s in slots),
    )


def build_grid(
    transmissions: list[UserTransmission], n_slots: int, n_pilots: int
) -> FrameGrid:
    occupancy: dict[tuple[int, int], set[int]] = {}
    users: dict[int, UserTransmission] = {}
    for tx in transmissions:
        if tx.user_id in users:
            raise ValueError(f"duplicate user id {tx.user_id}")
        users[tx.user_id] = tx
        for slot, subset in zip(tx.slot_indices, tx.pilot_subsets):
            for j in subset:
                occupancy.setdefault((slot, j), set()).add(tx.user_id)
    return FrameGrid(n_slots=n_slots, n_pilots=n_pilots, occupancy=occupancy, users=users)


def has_singleton(grid: FrameGrid, user_id: int, slot: int) -> bool:
    """True iff some pilot of the user's mixture in this slot is used by
    exactly one user (necessarily this one)."""
    subset = grid.users[user_id].subset_in_slot(slot)  # KeyError if not placed
    return any(len(grid.occupancy[(slot, j)]) == 1 for j in subset)


def _slot_occupancy(grid: FrameGrid) -> list[dict[int, set[int]]]:
    occ: list[dict[int, set[int]]] = [dict() for _ in range(grid.n_slots)]
    for (slot, pilot), users in grid.occupancy.items():
        occ[slot][pilot] = set(users)
    return occ


def _remove_user_from_slot(
    occ_n: dict[int, set[int]], subset: tuple[int, ...], user_id: int
) -> None:
    for j in subset:
        bucket = occ_n.get(j)
        if bucket is not None:
            bucket.discard(user_id)
            if not bucket:
                del occ_n[j]


def _peel_slot(
    occ_n: dict[int, set[int]],
    placements: dict[int, dict[int, tuple[int, ...]]],
    slot: int,
    resolved: set[int],
    rng: np.random.Generator | None,
) -> list[int]:
    """Peel one slot to fixpoint: any singleton pilot resolves its user and
    removes the user's whole mixture from the slot. Returns the users peeled
    here (possibly already resolved elsewhere)."""
    peeled: list[int] = []
    progress = True
    while progress:
        progress = False
        pilots = sorted(occ_n)
        if rng is not None:
            rng.shuffle(pilots)
        for j in pilots:
            bucket = occ_n.get(j)
            if bucket is None or len(bucket) != 1:
                continue
            (u,) = bucket
            _remove_user_from_slot(occ_n, placements[u][slot], u)
            resolved.add(u)
            peeled.append(u)
            progress = True
    return peeled


def peel_frame(
    grid: FrameGrid,
    mode: ReceiverMode,
    rng: np.random.Generator | None = None,
) -> set[int]:
    """Resolved user set under the collision model for the given receiver
    mode. rng, when given, shuffles internal peeling order (the fixpoint is
    order-independent; the hook exists to test that)."""
    placements = {uid: tx.placement() for uid, tx in grid.users.items()}

    if mode is ReceiverMode.NO_SIC:
        return {
            uid
            for uid, tx in grid.users.items()
            if any(has_singleton(grid, uid, s) for s in tx.slot_indices)
        }

    occ = _slot_occupancy(grid)
    resolved: set[int] = set()
    ack_slot: dict[int, int] = {}

    for n in range(grid.n_slots):
        if mode.uses_ack:
            for uid, ack in ack_slot.items():
                if ack < n and n in placements[uid]:
                    _remove_user_from_slot(occ[n], placements[uid][n], uid)
        newly = _peel_slot(occ[n], placements, n, resolved, rng)
        if mode.uses_ack:
            for uid in newly:
                ack_slot.setdefault(uid, n)

    if mode.uses_outer_sic:
        queue = deque(sorted(resolved))
        queued = set(resolved)
        while queue:
            uid = queue.popleft()
            for s, subset in placements[uid].items():
                if any(uid in occ[s].get(j, ()) for j in subset):
                    _remove_user_from_slot(occ[s], subset, uid)
                    for v in _peel_slot(occ[s], placements, s, resolved, rng):
                        if v not in queued:
                            queued.add(v)
                            queue.append(v)
    return resolved


def unresolvable_collision_count(transmissions: list[UserTransmission]) -> int:
    """Users whose complete (slot set, per-slot pilot subsets) tuple is
    shared with at least one other user; no receiver can separate them."""
    counts = Counter(tx.choice_key() for tx in transmissions)
    return sum(counts[tx.choice_key()] >= 2 for tx in transmissions)


def enumerate_nosic_slot_plr(n_pilots: int, p: int, k_s: int) -> float:
    """Exact single-slot no-SIC loss probability for concentrated preamble
    order p, by exhaustive enumeration of every joint pilot choice.

    By symmetry the probe user's subset is fixed and the K_s - 1 interferers
    are enumerated, so the cost is C(n_pilots, p) ** (k_s - 1)."""
    if k_s < 1:
        raise ValueError("k_s must be >= 1")
    if k_s == 1:
        return 0.0
    subsets = list(itertools.combinations(range(n_pilots), p))
    n_choices = len(subsets)
    if n_choices ** (k_s - 1) > ENUMERATION_LIMIT:
        raise ValueError(
            f"enumeration of {n_choices}^{k_s - 1} joint outcomes exceeds "
            f"{ENUMERATION_LIMIT:.0e}"
        )
    probe = set(subsets[0])
    failures = 0
    for others in itertools.product(subsets, repeat=k_s - 1):
        covered = set()
        for subset in others:
            covered.update(subset)
        if probe <= covered:
            failures += 1
    return failures / n_choices ** (k_s - 1)


# ---------------------------------------------------------------------------
# Line-oriented instance format, shared between grid tests and PHY receiver
# tests: one user per line, "uid slot:j,j slot:j,..."
# ---------------------------------------------------------------------------

def transmissions_to_lines(transmissions: list[UserTransmission]) -> list[str]:
    lines = []
    for tx in transmissions:
        cells = " ".join(
            f"{slot}:{','.join(str(j) for j in subset)}"
            for slot, subset in zip(tx.slot_indices, tx.pilot_subsets)
        )
        lines.append(f"{tx.user_id} {cells}")
    return lines


def transmissions_from_lines(
    lines: list[str], payload_factory=None
) -> list[UserTransmission]:
    out = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, *cells = line.split()
        uid = int(head)
        placement = {}
        for cell in cells:
            slot_str, pilots_str = cell.split(":")
            placement[int(slot_str)] = tuple(int(j) for j in pilots_str.split(","))
        payload = payload_factory(uid) if payload_factory is not None else None
        out.append(synthetic_transmission(uid, placement, payload))
    return out


def grid_from_config(
    transmissions: list[UserTransmission], cfg: ProtocolConfig
) -> FrameGrid:
    return build_grid(transmissions, cfg.n_slots, cfg.n_pilots)
