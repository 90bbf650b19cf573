"""Built-in verification suites behind the `verify` CLI subcommand: quick
deterministic checks per module, independent of the pytest tree."""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

from . import analysis, codec, collision
from .baseband import PilotBook, build_preamble, estimate_channel_mf, synthesize_slot
from .core import (
    ConfigError,
    DegreeDistribution,
    ProtocolConfig,
    ReceiverMode,
    derive_choices,
    validate_config,
)
from .harness import Engine, run_trial, trial_rng
from .receiver import make_table_resolver, run_frame

# Constructed three-user instance, shared with the pytest suite through the
# line format: inner SIC alone recovers only user 1 (singleton in slot 2);
# the outer phase then unlocks users 0 and 2 in slot 1, and finally user 2's
# replica in slot 0.
NESTED_CHAIN_INSTANCE = [
    "0 0:2,3 1:0,2",
    "1 1:0,1 2:0,1",
    "2 0:2,3 1:1,2",
]
NESTED_CHAIN_DIMS = (3, 4)  # (n_slots, n_pilots)
NESTED_CHAIN_SEED = 1       # realization without slicer capture on the mixtures


def _toy_config(**overrides) -> ProtocolConfig:
    base = dict(
        n_slots=4,
        n_pilots=8,
        n_antennas=32,
        payload_symbols=codec.PAYLOAD_SYMBOLS,
        lam=DegreeDistribution.concentrated(2),
        psi=DegreeDistribution.concentrated(2),
        snr_db=10.0,
        receiver_mode=ReceiverMode.NESTED,
        framed=True,
    )
    base.update(overrides)
    return ProtocolConfig(**base)


def _check_core(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    out = []
    cfg = _toy_config()
    payload = codec.make_payload(rng, 5)
    a = derive_choices(payload, cfg)
    b = derive_choices(payload, cfg)
    out.append(("choice replay is deterministic", a == b, f"{a.slot_indices}"))

    cfg1 = _toy_config(n_slots=1, lam=DegreeDistribution.concentrated(1))
    forced = all(
        derive_choices(codec.make_payload(rng, uid), cfg1).slot_indices == (0,)
        for uid in range(20)
    )
    out.append(("single slot forces slot 0", forced, ""))

    cfg_full = _toy_config(psi=DegreeDistribution.concentrated(8))
    full = all(
        derive_choices(codec.make_payload(rng, uid), cfg_full).pilot_subsets[0]
        == tuple(range(8))
        for uid in range(10)
    )
    out.append(("full-order mixture uses every pilot", full, ""))

    try:
        validate_config(_toy_config(n_pilots=100))
        ok = False
    except ConfigError as exc:
        ok = any("power of two" in v for v in exc.violations)
    out.append(("non-power-of-two pilot count rejected", ok, ""))
    return out


def _check_baseband(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    out = []
    book = PilotBook(16)
    gram = book.sequences @ book.sequences.T
    out.append(
        ("pilot rows orthogonal with energy N_P", np.array_equal(gram, 16 * np.eye(16)), "")
    )
    energies = [
        abs(np.sum(build_preamble(rng.choice(16, size=p, replace=False), book) ** 2) - 16)
        for p in (1, 2, 3, 5)
    ]
    out.append(("preamble energy equals N_P", max(energies) < 1e-10, f"max dev {max(energies):.1e}"))

    cfg = _toy_config(n_pilots=16, snr_db=float("inf"))
    tx = collision.synthetic_transmission(0, {0: (2, 5)}, codec.make_payload(rng, 0))
    h = (rng.standard_normal(32) + 1j * rng.standard_normal(32)) / np.sqrt(2)
    slot = synthesize_slot(0, [(tx, codec.encode_payload(tx.payload_bits), h)], cfg, book, rng)
    used = estimate_channel_mf(slot, 2, book)
    unused = estimate_channel_mf(slot, 3, book)
    ok = np.allclose(used, h / np.sqrt(2), atol=1e-12) and np.allclose(unused, 0, atol=1e-12)
    out.append(("noiseless matched filter recovers h/sqrt(p)", ok, ""))
    return out


def _check_codec(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    out = []
    out.append(("generator degree is n - k", codec.GENERATOR_DEGREE == 90, ""))
    ok = True
    for _ in range(50):
        info = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
        cw = codec.bch_encode(info)
        flips = rng.choice(codec.N_CODE, size=10, replace=False)
        cw[flips] ^= 1
        got = codec.bch_decode(cw)
        ok &= got is not None and bool((got == info).all())
    out.append(("corrects 10 errors (50 random patterns)", ok, ""))

    payload = codec.make_payload(rng, 3)
    flipped = payload.copy()
    flipped[17] ^= 1
    out.append(
        (
            "CRC round-trip and single-bit detection",
            codec.crc_check(payload) and not codec.crc_check(flipped),
            "",
        )
    )
    return out


def _check_receiver(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    from .receiver import DecodedPacket, inner_sic_subtract

    out = []
    book = PilotBook(8)
    cfg = _toy_config(n_pilots=8, snr_db=float("inf"), n_antennas=16)
    payload = codec.make_payload(rng, 0)
    tx = collision.synthetic_transmission(0, {0: (1, 4)}, payload)
    h = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / np.sqrt(2)
    symbols = codec.encode_payload(payload)

    def fresh_slot():
        return synthesize_slot(0, [(tx, symbols, h)], cfg, book, np.random.default_rng(0))

    def packet():
        return DecodedPacket(payload, tx, 0, 1, 0, np.sqrt(2.0), "inner", symbols)

    slot = fresh_slot()
    ref = np.linalg.norm(slot.preamble_part) ** 2
    phi = estimate_channel_mf(slot, 1, book)
    inner_sic_subtract(slot, phi, packet(), book, scale_correction=True)
    scaled = np.linalg.norm(slot.preamble_part) ** 2 + np.linalg.norm(slot.payload_part) ** 2

    slot = fresh_slot()
    phi = estimate_channel_mf(slot, 1, book)
    inner_sic_subtract(slot, phi, packet(), book, scale_correction=False)
    literal = np.linalg.norm(slot.preamble_part) ** 2
    expect_literal = 8 * np.linalg.norm(h) ** 2 * (1 - 1 / np.sqrt(2)) ** 2
    ok = scaled < 1e-10 * ref and abs(literal - expect_literal) < 1e-9 * expect_literal
    out.append(
        (
            "mixture-scale subtraction cancels exactly, literal form does not",
            ok,
            f"scaled {scaled:.2e}, literal {literal:.3f} vs {expect_literal:.3f}",
        )
    )

    # constructed chain: nested recovers everyone, inner-only just user 1.
    # Seed pinned so the 2-user pilot mixtures stay undecoded (two superposed
    # equal-power users can otherwise capture the hard-decision slicer).
    n_slots, n_pilots = NESTED_CHAIN_DIMS
    inst_rng = np.random.default_rng(NESTED_CHAIN_SEED)
    txs = collision.transmissions_from_lines(
        NESTED_CHAIN_INSTANCE, lambda uid: codec.make_payload(inst_rng, uid)
    )
    channels = {
        (tx.user_id, s): (
            inst_rng.standard_normal(32) + 1j * inst_rng.standard_normal(32)
        ) / np.sqrt(2)
        for tx in txs
        for s in tx.slot_indices
    }
    resolved = {}
    for mode in (ReceiverMode.INNER_ONLY, ReceiverMode.NESTED):
        c = _toy_config(
            n_slots=n_slots, n_pilots=n_pilots, snr_db=float("inf"), receiver_mode=mode
        )
        frame = run_frame(
            txs, channels, c, PilotBook(n_pilots),
            np.random.default_rng(NESTED_CHAIN_SEED + 500),
            resolver=make_table_resolver(txs),
        )
        resolved[mode] = frame.resolved_users
    ok = resolved[ReceiverMode.INNER_ONLY] == {1} and resolved[ReceiverMode.NESTED] == {0, 1, 2}
    out.append(("constructed instance peels only under outer SIC", ok, f"{resolved}"))
    return out


def _check_collision(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    out = []
    chain = [
        collision.synthetic_transmission(0, {0: (1, 2)}),
        collision.synthetic_transmission(1, {0: (2, 3)}),
        collision.synthetic_transmission(2, {0: (3, 0)}),
    ]
    grid = collision.build_grid(chain, 1, 4)
    nosic = collision.peel_frame(grid, ReceiverMode.NO_SIC)
    inner = collision.peel_frame(grid, ReceiverMode.INNER_ONLY)
    out.append(("in-slot chain peels under inner SIC", nosic == {0, 2} and inner == {0, 1, 2}, ""))

    cfg = _toy_config(n_slots=6, n_pilots=4)
    ok = True
    for t in range(20):
        txs = [
            derive_choices(codec.make_payload(rng, uid), cfg) for uid in range(8)
        ]
        g = collision.build_grid(txs, cfg.n_slots, cfg.n_pilots)
        r = {m: collision.peel_frame(g, m) for m in ReceiverMode}
        ok &= (
            r[ReceiverMode.NO_SIC] <= r[ReceiverMode.INNER_ONLY] <= r[ReceiverMode.NESTED]
        )
    out.append(("mode dominance on random frames", ok, ""))
    return out


def _check_analysis(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    out = []

    def two_sig(x):
        return float(f"{x:.1e}")

    q1 = analysis.BoundQuery(
        analysis.Scenario.FRAMED_NESTED, n_pilots=128, p=1, n_users=1800, r=2, n_slots=62
    )
    q2 = dataclasses.replace(q1, p=2)
    ok = (
        two_sig(analysis.plr_lower_bound(q1)) == 5.7e-5
        and two_sig(analysis.plr_lower_bound(q2)) == 1.4e-8
    )
    out.append(("framed loss floors match reference points", ok, ""))

    exact = collision.enumerate_nosic_slot_plr(5, 1, 3)
    formula = analysis.plr_slotted_nosic(DegreeDistribution.concentrated(1), 5, 3)
    div_formula = analysis.plr_slotted_nosic(DegreeDistribution.concentrated(2), 4, 2)
    div_exact = collision.enumerate_nosic_slot_plr(4, 2, 2)
    ok = abs(exact - formula) < 1e-12 and div_formula == 0.25 and abs(div_exact - 1 / 6) < 1e-12
    out.append(("single-pilot formula exact, order-2 divergence reproduced", ok, ""))
    return out


def _check_harness(rng: np.random.Generator) -> list[tuple[str, bool, str]]:
    out = []
    cfg = _toy_config(n_antennas=16, n_pilots=8)
    a = run_trial(cfg, 4, trial_rng(11, 4, 0), engine=Engine.PHY)
    b = run_trial(cfg, 4, trial_rng(11, 4, 0), engine=Engine.PHY)
    ok = (a.sent, a.lost, a.resolved) == (b.sent, b.lost, b.resolved)
    out.append(("trials replay bit-identically", ok, ""))
    return out


_CHECKS: list[tuple[str, Callable]] = [
    ("core", _check_core),
    ("baseband", _check_baseband),
    ("codec", _check_codec),
    ("receiver", _check_receiver),
    ("collision", _check_collision),
    ("analysis", _check_analysis),
    ("harness", _check_harness),
]


def run_all(seed: int = 0) -> list[tuple[str, str, bool, str]]:
    results = []
    for module, fn in _CHECKS:
        rng = np.random.default_rng(seed)
        for name, ok, detail in fn(rng):
            results.append((module, name, ok, detail))
    return results
