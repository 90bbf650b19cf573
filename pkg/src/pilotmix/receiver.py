"""Nested successive interference cancellation receiver.

Per slot (inner phase): sweep all pilots; for each, matched-filter channel
estimation, MRC payload estimation, hard slicing and codec validation. A
validated packet is reconstructed from its payload bits, its contribution is
subtracted from the slot (inner SIC), and the pilot sweep restarts from the
first pilot. The sweep ends when a full pass yields nothing new.

Across slots (outer phase, Nested modes): validated packets are buffered
FIFO. For each buffered packet, every replica slot not yet cleaned gets a
payload-aided channel re-estimate (projection of Y onto the known payload),
the replica is subtracted from P and Y, and decoding is re-attempted in that
slot for all pilots. Newly validated packets join the buffer; the phase runs
until the buffer drains.

In ACK modes a user validated in slot n stops transmitting, so its replicas
in later slots are never part of the synthesized signal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from . import codec
from .baseband import (
    PilotBook,
    SlotSignal,
    build_preamble,
    estimate_channel_mf,
    estimate_payload_mrc,
    synthesize_slot,
)
from .core import ProtocolConfig, ReceiverMode, UserTransmission, derive_choices

# validator(hard_bits, slot_index, pilot_index) -> validated payload bits or None
Validator = Callable[[np.ndarray, int, int], "np.ndarray | None"]
# resolver(payload_bits) -> the user's replayed UserTransmission
Resolver = Callable[[np.ndarray], UserTransmission]


class TraceEvent(NamedTuple):
    slot: int
    pilot: int
    sic_iteration: int
    user: int
    phase: str  # "inner" | "outer"

    def line(self, trial: int = 0) -> str:
        return (
            f"trial={trial} slot={self.slot} pilot={self.pilot} "
            f"sic={self.sic_iteration} user={self.user} phase={self.phase}"
        )


@dataclass
class DecodedPacket:
    """A validated payload with its replayed placement and decode site."""

    payload_bits: np.ndarray
    tx: UserTransmission
    slot_index: int
    pilot_index: int
    sic_iteration: int
    effective_scale: float  # sqrt(p) of the decoding slot's preamble order
    phase: str
    symbols: np.ndarray     # reconstructed modulated payload


@dataclass
class FrameState:
    slots: list[SlotSignal | None]
    decoded_buffer: deque = field(default_factory=deque)
    resolved_users: set[int] = field(default_factory=set)
    ack_slot: dict[int, int] = field(default_factory=dict)
    subtracted: set[tuple[int, int]] = field(default_factory=set)
    slot_decoded: list[set[int]] = field(default_factory=list)
    trace: list[TraceEvent] | None = None

    def is_suppressed(self, user_id: int, slot_index: int) -> bool:
        """True when the user's replica in this slot was never transmitted
        because the user was acknowledged in an earlier slot."""
        ack = self.ack_slot.get(user_id)
        return ack is not None and slot_index > ack


def make_codec_validator() -> Validator:
    def validate(hard_bits: np.ndarray, slot_index: int, pilot_index: int):
        return codec.try_decode_hard_bits(hard_bits)

    return validate


def make_genie_validator(transmissions: Iterable[UserTransmission]) -> Validator:
    """Speed shortcut: a packet is declared valid iff the sliced block is
    within the correction radius of a true codeword placed on this (slot,
    pilot). Skips BCH/CRC entirely; an approximation, never for acceptance."""
    coded: dict[int, np.ndarray] = {}
    payloads: dict[int, np.ndarray] = {}
    candidates: dict[tuple[int, int], list[int]] = {}
    for tx in transmissions:
        coded[tx.user_id] = codec.bch_encode(tx.payload_bits)
        payloads[tx.user_id] = tx.payload_bits
        for slot, subset in zip(tx.slot_indices, tx.pilot_subsets):
            for j in subset:
                candidates.setdefault((slot, j), []).append(tx.user_id)

    def validate(hard_bits: np.ndarray, slot_index: int, pilot_index: int):
        best_uid = None
        best_dist = codec.T_CORRECT + 1
        block = hard_bits[: codec.N_CODE]
        for uid in candidates.get((slot_index, pilot_index), ()):
            dist = int(np.count_nonzero(block != coded[uid]))
            if dist < best_dist:
                best_dist = dist
                best_uid = uid
        return payloads[best_uid] if best_uid is not None else None

    return validate


def make_replay_resolver(cfg: ProtocolConfig) -> Resolver:
    """Default resolver: replay the choice derivation from payload bits."""
    cache: dict[bytes, UserTransmission] = {}

    def resolve(payload_bits: np.ndarray) -> UserTransmission:
        key = payload_bits.tobytes()
        tx = cache.get(key)
        if tx is None:
            tx = derive_choices(payload_bits, cfg)
            cache[key] = tx
        return tx

    return resolve


def make_table_resolver(transmissions: Iterable[UserTransmission]) -> Resolver:
    """Test hook: resolve payloads against hand-constructed placements."""
    table = {tx.payload_bits.tobytes(): tx for tx in transmissions}

    def resolve(payload_bits: np.ndarray) -> UserTransmission:
        return table[payload_bits.tobytes()]

    return resolve


def inner_sic_subtract(
    slot: SlotSignal,
    phi: np.ndarray,
    pkt: DecodedPacket,
    book: PilotBook,
    scale_correction: bool = True,
) -> SlotSignal:
    """Remove the decoded packet using the matched-filter estimate phi.

    phi carries the user's channel scaled by 1/sqrt(p) (mixture
    normalization), so the effective estimate sqrt(p)*phi is what cancels
    both the normalized preamble and the payload. scale_correction=False
    keeps the raw phi in the update, which leaves a (1 - 1/sqrt(p)) residual
    on the preamble; it exists to demonstrate why the scaled form is used.
    """
    subset = pkt.tx.subset_in_slot(pkt.slot_index)
    ssum = book.subset_sum(subset)
    if scale_correction:
        # sqrt(p)*phi applied to the 1/sqrt(p)-normalized preamble reduces
        # to phi times the plain pilot sum.
        slot.preamble_part -= np.outer(phi, ssum)
        slot.payload_part -= np.outer(pkt.effective_scale * phi, pkt.symbols)
    else:
        slot.preamble_part -= np.outer(phi, ssum / pkt.effective_scale)
        slot.payload_part -= np.outer(phi, pkt.symbols)
    slot.sic_count += 1
    return slot


def outer_sic_estimate(slot: SlotSignal, symbols: np.ndarray) -> np.ndarray:
    """Payload-aided channel estimate: project Y onto the known payload."""
    nrm = np.vdot(symbols, symbols).real
    if nrm == 0.0:
        raise ValueError("zero-norm payload")
    return slot.payload_part @ np.conj(symbols) / nrm


def outer_sic_subtract(
    slot: SlotSignal,
    h_hat: np.ndarray,
    pkt: DecodedPacket,
    slot_index: int,
    book: PilotBook,
) -> SlotSignal:
    """Remove a replica using a payload-aided estimate of the full channel.
    No scale compensation here: h_hat estimates h itself, and the preamble
    is reconstructed with its mixture normalization."""
    preamble = build_preamble(pkt.tx.subset_in_slot(slot_index), book)
    slot.preamble_part -= np.outer(h_hat, preamble)
    slot.payload_part -= np.outer(h_hat, pkt.symbols)
    slot.sic_count += 1
    return slot


def process_slot(
    slot_index: int,
    frame: FrameState,
    cfg: ProtocolConfig,
    book: PilotBook,
    validator: Validator,
    resolver: Resolver,
    subtract: bool = True,
    phase: str = "inner",
) -> list[DecodedPacket]:
    """Pilot sweep with restart-on-success (subtract=True), or a single
    no-subtraction sweep (subtract=False). Returns newly decoded packets;
    they are also pushed onto the frame buffer and the resolved set."""
    slot = frame.slots[slot_index]
    decoded: list[DecodedPacket] = []
    j = 0
    while j < cfg.n_pilots:
        phi = estimate_channel_mf(slot, j, book)
        if not np.vdot(phi, phi).real > 0.0:
            j += 1
            continue
        hard = codec.qpsk_demap(estimate_payload_mrc(slot, phi))
        payload = validator(hard, slot_index, j)
        if payload is None:
            j += 1
            continue
        tx = resolver(payload)
        placement = tx.placement()
        if slot_index not in placement or j not in placement[slot_index]:
            # validation fluke: the replayed choices do not cover this
            # decode site, so the packet cannot be reconstructed here
            j += 1
            continue
        if tx.user_id in frame.slot_decoded[slot_index]:
            j += 1
            continue
        pkt = DecodedPacket(
            payload_bits=payload,
            tx=tx,
            slot_index=slot_index,
            pilot_index=j,
            sic_iteration=slot.sic_count,
            effective_scale=float(np.sqrt(len(placement[slot_index]))),
            phase=phase,
            symbols=codec.encode_payload(payload),
        )
        frame.slot_decoded[slot_index].add(tx.user_id)
        frame.resolved_users.add(tx.user_id)
        frame.decoded_buffer.append(pkt)
        if frame.trace is not None:
            frame.trace.append(
                TraceEvent(slot_index, j, pkt.sic_iteration, tx.user_id, phase)
            )
        decoded.append(pkt)
        if subtract:
            inner_sic_subtract(slot, phi, pkt, book)
            frame.subtracted.add((tx.user_id, slot_index))
            j = 0  # restart the sweep on the cleaned slot
        else:
            j += 1
    return decoded


def run_frame(
    transmissions: list[UserTransmission],
    channels: dict[tuple[int, int], np.ndarray],
    cfg: ProtocolConfig,
    book: PilotBook,
    noise_rng: np.random.Generator,
    validator: Validator | None = None,
    resolver: Resolver | None = None,
    collect_trace: bool = False,
) -> FrameState:
    """Synthesize and process one frame in time order, then (Nested modes)
    drain the outer-SIC buffer. channels maps (user_id, slot) -> h."""
    mode = cfg.receiver_mode
    if validator is None:
        validator = make_codec_validator()
    if resolver is None:
        resolver = make_replay_resolver(cfg)

    frame = FrameState(
        slots=[None] * cfg.n_slots,
        slot_decoded=[set() for _ in range(cfg.n_slots)],
        trace=[] if collect_trace else None,
    )
    symbol_cache = {tx.user_id: codec.encode_payload(tx.payload_bits) for tx in transmissions}

    for n in range(cfg.n_slots):
        contributions = []
        for tx in transmissions:
            if n in tx.slot_indices and not frame.is_suppressed(tx.user_id, n):
                contributions.append((tx, symbol_cache[tx.user_id], channels[(tx.user_id, n)]))
        frame.slots[n] = synthesize_slot(n, contributions, cfg, book, noise_rng)
        new_pkts = process_slot(
            n, frame, cfg, book, validator, resolver, subtract=mode.uses_inner_sic
        )
        if mode.uses_ack:
            for pkt in new_pkts:
                frame.ack_slot.setdefault(pkt.tx.user_id, n)

    if mode.uses_outer_sic:
        _drain_outer(frame, cfg, book, validator, resolver)
    return frame


def _drain_outer(
    frame: FrameState,
    cfg: ProtocolConfig,
    book: PilotBook,
    validator: Validator,
    resolver: Resolver,
) -> None:
    while frame.decoded_buffer:
        pkt = frame.decoded_buffer.popleft()
        uid = pkt.tx.user_id
        for s in pkt.tx.slot_indices:
            if (uid, s) in frame.subtracted or frame.is_suppressed(uid, s):
                continue
            slot = frame.slots[s]
            h_hat = outer_sic_estimate(slot, pkt.symbols)
            outer_sic_subtract(slot, h_hat, pkt, s, book)
            frame.subtracted.add((uid, s))
            process_slot(
                s, frame, cfg, book, validator, resolver, subtract=True, phase="outer"
            )
