"""Monte Carlo engine: deterministic seeding, trial execution, parameter
sweeps with a loss-event stop rule, and CSV emission.

Every trial is seeded by hashing (master_seed, swept value, trial index)
through a SeedSequence, so any subset of a sweep is independently
reproducible and the aggregate is invariant to how trials are scheduled
across workers. Early stopping is evaluated only at fixed batch boundaries,
which keeps the executed trial set deterministic as well.
"""

from __future__ import annotations

import multiprocessing
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from . import analysis, codec, collision
from .baseband import PilotBook, rayleigh_channel
from .core import ProtocolConfig, UserTransmission, derive_choices, validate_config
from .receiver import FrameState, make_genie_validator, run_frame


class Engine(str, Enum):
    PHY = "Phy"
    COLLISION_ORACLE = "CollisionOracle"
    ANALYSIS = "Analysis"


@dataclass(frozen=True)
class SweepSpec:
    base: ProtocolConfig
    sweep_variable: str              # "k_a" (framed) or "k_s" (unframed)
    values: tuple[int, ...]
    trials: int
    master_seed: int
    engine: Engine = Engine.PHY
    min_loss_events: int | None = None  # stop a value early once reached
    genie_codec: bool = False           # documented approximation; off for acceptance

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sweep_variable not in ("k_a", "k_s"):
            raise ValueError("sweep_variable must be 'k_a' or 'k_s'")


@dataclass
class PlrEstimate:
    swept_value: int
    packets_sent: int
    packets_lost: int
    plr: float
    ci_low: float
    ci_high: float
    engine: Engine
    mode: str
    trials: int
    wall_time_s: float


@dataclass
class TrialResult:
    sent: int
    lost: int
    resolved: set[int]
    frame: FrameState | None = None


_BATCH_TRIALS = 64

_BOOK_CACHE: dict[int, PilotBook] = {}


def _pilot_book(n_pilots: int) -> PilotBook:
    book = _BOOK_CACHE.get(n_pilots)
    if book is None:
        book = PilotBook(n_pilots)
        _BOOK_CACHE[n_pilots] = book
    return book


def trial_rng(master_seed: int, swept_value: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, swept_value, trial_index])
    )


def sample_frame(
    cfg: ProtocolConfig, k_active: int, rng: np.random.Generator
) -> list[UserTransmission]:
    """Draw k_active uniform payloads (user ids embedded for uniqueness) and
    replay each user's frame choices from its bits."""
    return [
        derive_choices(codec.make_payload(rng, uid), cfg) for uid in range(k_active)
    ]


def run_trial(
    cfg: ProtocolConfig,
    k_active: int,
    rng: np.random.Generator,
    engine: Engine = Engine.PHY,
    genie_codec: bool = False,
    collect_trace: bool = False,
) -> TrialResult:
    """One frame realization end to end. Deterministic given the generator
    state: payloads first, then (PHY engine) channel vectors in user/slot
    order, then per-slot noise inside the frame processor."""
    if k_active == 0:
        return TrialResult(sent=0, lost=0, resolved=set())
    transmissions = sample_frame(cfg, k_active, rng)

    if engine is Engine.COLLISION_ORACLE:
        grid = collision.build_grid(transmissions, cfg.n_slots, cfg.n_pilots)
        resolved = collision.peel_frame(grid, cfg.receiver_mode)
        return TrialResult(sent=k_active, lost=k_active - len(resolved), resolved=resolved)

    if engine is not Engine.PHY:
        raise ValueError(f"engine {engine} does not run trials")

    book = _pilot_book(cfg.n_pilots)
    channels = {
        (tx.user_id, s): rayleigh_channel(rng, cfg.n_antennas)
        for tx in transmissions
        for s in tx.slot_indices
    }
    validator = make_genie_validator(transmissions) if genie_codec else None
    frame = run_frame(
        transmissions,
        channels,
        cfg,
        book,
        rng,
        validator=validator,
        collect_trace=collect_trace,
    )
    resolved = frame.resolved_users
    return TrialResult(
        sent=k_active,
        lost=k_active - len(resolved),
        resolved=resolved,
        frame=frame if collect_trace else None,
    )


def wilson_interval(losses: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """95% Wilson score interval; always contains the point estimate."""
    if n == 0:
        return 0.0, 1.0
    phat = losses / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = z * np.sqrt(phat * (1.0 - phat) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# TrialFn(swept_value, trial_index) -> (sent, lost); injectable for estimator
# sanity tests with a known Bernoulli loss process.
TrialFn = Callable[[int, int], tuple[int, int]]


def _spec_trial(spec: SweepSpec, value: int, index: int) -> tuple[int, int]:
    rng = trial_rng(spec.master_seed, value, index)
    res = run_trial(
        spec.base, value, rng, engine=spec.engine, genie_codec=spec.genie_codec
    )
    return res.sent, res.lost


_WORKER_SPEC: SweepSpec | None = None


def _worker_init(spec: SweepSpec) -> None:
    global _WORKER_SPEC
    _WORKER_SPEC = spec


def _worker_trial(args: tuple[int, int]) -> tuple[int, int]:
    value, index = args
    return _spec_trial(_WORKER_SPEC, value, index)


def _analysis_value(cfg: ProtocolConfig, k: int) -> float:
    if cfg.framed:
        return analysis.plr_framed_nosic(
            cfg.lam, cfg.psi, cfg.n_slots, cfg.n_pilots, k
        )
    return analysis.plr_slotted_nosic(cfg.psi, cfg.n_pilots, k)


def run_sweep(
    spec: SweepSpec,
    workers: int = 1,
    trial_fn: TrialFn | None = None,
) -> list[PlrEstimate]:
    """Aggregate trials per swept value. Counts depend only on (spec), never
    on the worker count; wall_time_s is the only nondeterministic column."""
    validate_config(spec.base)
    mode = spec.base.receiver_mode.value
    estimates: list[PlrEstimate] = []

    pool = None
    try:
        if workers > 1 and trial_fn is None:
            pool = multiprocessing.Pool(
                processes=workers, initializer=_worker_init, initargs=(spec,)
            )
        for value in spec.values:
            t0 = time.perf_counter()
            if spec.engine is Engine.ANALYSIS:
                plr = _analysis_value(spec.base, value)
                estimates.append(
                    PlrEstimate(
                        swept_value=value,
                        packets_sent=0,
                        packets_lost=0,
                        plr=plr,
                        ci_low=plr,
                        ci_high=plr,
                        engine=spec.engine,
                        mode=mode,
                        trials=0,
                        wall_time_s=time.perf_counter() - t0,
                    )
                )
                continue

            fn = trial_fn if trial_fn is not None else (
                lambda v, i: _spec_trial(spec, v, i)
            )
            sent = lost = done = 0
            while done < spec.trials:
                batch = list(range(done, min(done + _BATCH_TRIALS, spec.trials)))
                if pool is not None:
                    results = pool.map(_worker_trial, [(value, i) for i in batch])
                else:
                    results = [fn(value, i) for i in batch]
                for s, l in results:
                    sent += s
                    lost += l
                done = batch[-1] + 1
                if spec.min_loss_events is not None and lost >= spec.min_loss_events:
                    break
            plr = lost / sent if sent else 0.0
            ci_low, ci_high = wilson_interval(lost, sent)
            estimates.append(
                PlrEstimate(
                    swept_value=value,
                    packets_sent=sent,
                    packets_lost=lost,
                    plr=plr,
                    ci_low=ci_low,
                    ci_high=ci_high,
                    engine=spec.engine,
                    mode=mode,
                    trials=done,
                    wall_time_s=time.perf_counter() - t0,
                )
            )
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return estimates


# ---------------------------------------------------------------------------
# CSV emission: one flat schema for every engine and sweep style.
# ---------------------------------------------------------------------------

CSV_HEADER = (
    "engine,mode,N_s,N_P,M,r_or_lambda,p_or_psi,snr_db,swept_name,swept_value,"
    "trials,sent,lost,plr,ci_low,ci_high,wall_time_s"
)


def csv_rows(
    estimates: Iterable[PlrEstimate],
    cfg: ProtocolConfig,
    swept_name: str,
    mode_override: str | None = None,
) -> list[str]:
    rows = []
    for est in estimates:
        rows.append(
            ",".join(
                [
                    est.engine.value,
                    mode_override if mode_override is not None else est.mode,
                    str(cfg.n_slots),
                    str(cfg.n_pilots),
                    str(cfg.n_antennas),
                    cfg.lam.pgf_str(),
                    cfg.psi.pgf_str(),
                    f"{cfg.snr_db:g}",
                    swept_name,
                    str(est.swept_value),
                    str(est.trials),
                    str(est.packets_sent),
                    str(est.packets_lost),
                    f"{est.plr:.9g}",
                    f"{est.ci_low:.9g}",
                    f"{est.ci_high:.9g}",
                    f"{est.wall_time_s:.3f}",
                ]
            )
        )
    return rows


def write_csv(
    estimates: Sequence[PlrEstimate],
    cfg: ProtocolConfig,
    swept_name: str,
    out: TextIO,
) -> None:
    out.write(CSV_HEADER + "\n")
    for row in csv_rows(estimates, cfg, swept_name):
        out.write(row + "\n")


def parse_sweep(text: str) -> tuple[str, tuple[int, ...]]:
    """Parse 'k_a=100:2400:100' (inclusive stop) or 'k_s=4,8,16'."""
    name, _, rhs = text.partition("=")
    name = name.strip()
    if name not in ("k_a", "k_s"):
        raise ValueError(f"sweep variable must be k_a or k_s, got {name!r}")
    rhs = rhs.strip()
    if ":" in rhs:
        parts = rhs.split(":")
        if len(parts) != 3:
            raise ValueError(f"sweep range must be start:stop:step, got {rhs!r}")
        start, stop, step = (int(p) for p in parts)
        if step < 1:
            raise ValueError("sweep step must be >= 1")
        values = tuple(range(start, stop + 1, step))
    else:
        values = tuple(int(v) for v in rhs.split(","))
    if not values:
        raise ValueError("sweep produced no values")
    return name, values
