"""Protocol configuration, degree distributions, and the deterministic
derivation of each user's frame choices from its payload bits.

The payload bits seed a counter-based generator (Philox keyed by a hash of
the bits), so the receiver can replay every random choice a user made --
repetition degree, slot set, and per-slot pilot subsets -- from the decoded
payload alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from . import codec

PROB_TOL = 1e-12


class ConfigError(ValueError):
    """Invalid protocol configuration; carries one message per violation."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ReceiverMode(str, Enum):
    NO_SIC = "NoSic"
    INNER_ONLY = "InnerOnly"
    INNER_ACK = "InnerAck"
    NESTED = "Nested"
    NESTED_ACK = "NestedAck"

    @property
    def uses_inner_sic(self) -> bool:
        return self is not ReceiverMode.NO_SIC

    @property
    def uses_ack(self) -> bool:
        return self in (ReceiverMode.INNER_ACK, ReceiverMode.NESTED_ACK)

    @property
    def uses_outer_sic(self) -> bool:
        return self in (ReceiverMode.NESTED, ReceiverMode.NESTED_ACK)


@dataclass(frozen=True)
class DegreeDistribution:
    """Finite degree distribution {degree: probability}, e.g. {2: 0.5, 3: 0.5}."""

    coefficients: tuple[tuple[int, float], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float]) -> "DegreeDistribution":
        items = tuple(sorted((int(k), float(v)) for k, v in mapping.items()))
        return cls(items)

    @classmethod
    def concentrated(cls, degree: int) -> "DegreeDistribution":
        return cls(((int(degree), 1.0),))

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.coefficients)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.coefficients)

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    @property
    def is_concentrated(self) -> bool:
        return len(self.coefficients) == 1

    def mean_degree(self) -> float:
        return float(sum(k * v for k, v in self.coefficients))

    def violations(self, name: str, max_degree: int | None = None) -> list[str]:
        errs = []
        if not self.coefficients:
            errs.append(f"{name}: empty distribution")
            return errs
        if any(k < 1 for k in self.degrees):
            errs.append(f"{name}: degrees must be >= 1")
        if any(v < 0 or v > 1 for v in self.probabilities):
            errs.append(f"{name}: probabilities must lie in [0, 1]")
        if abs(sum(self.probabilities) - 1.0) > PROB_TOL:
            errs.append(f"{name}: probabilities sum to {sum(self.probabilities)!r}, not 1")
        if max_degree is not None and self.max_degree > max_degree:
            errs.append(f"{name}: support exceeds limit ({self.max_degree} > {max_degree})")
        return errs

    def pgf_str(self) -> str:
        """Compact generating-function string, e.g. 'x^2' or '0.5x^2+0.5x^3'."""
        terms = []
        for k, v in self.coefficients:
            coef = "" if v == 1.0 else f"{v:g}"
            terms.append(f"{coef}x^{k}")
        return "+".join(terms)


def mean_degree(d: DegreeDistribution) -> float:
    """Derivative of the generating function at 1: sum_k k * d_k."""
    return d.mean_degree()


@dataclass(frozen=True)
class ProtocolConfig:
    n_slots: int
    n_pilots: int
    n_antennas: int
    payload_symbols: int
    lam: DegreeDistribution
    psi: DegreeDistribution
    snr_db: float
    receiver_mode: ReceiverMode
    framed: bool = True

    @property
    def noise_variance(self) -> float:
        """Complex noise variance per symbol: channel variance is 1, so
        SNR per payload symbol per antenna is 1/sigma_z^2."""
        return float(10.0 ** (-self.snr_db / 10.0))


def validate_config(cfg: ProtocolConfig) -> ProtocolConfig:
    """Check every invariant; raise ConfigError listing all violations."""
    errs: list[str] = []
    if cfg.n_slots < 1:
        errs.append("n_slots: must be >= 1")
    if cfg.n_pilots < 1 or (cfg.n_pilots & (cfg.n_pilots - 1)) != 0:
        errs.append(f"n_pilots: {cfg.n_pilots} is not a power of two")
    if cfg.n_antennas < 1:
        errs.append("n_antennas: must be >= 1")
    if cfg.payload_symbols != codec.PAYLOAD_SYMBOLS:
        errs.append(
            f"payload_symbols: {cfg.payload_symbols} does not match the codec "
            f"output length {codec.PAYLOAD_SYMBOLS}"
        )
    errs.extend(cfg.lam.violations("lambda", max_degree=cfg.n_slots))
    errs.extend(cfg.psi.violations("psi", max_degree=cfg.n_pilots))
    if not cfg.framed:
        if cfg.lam.coefficients != ((1, 1.0),):
            errs.append("lambda: unframed analysis requires the concentrated r=1 distribution")
        if cfg.n_slots != 1:
            errs.append("n_slots: unframed analysis is single-slot (n_slots must be 1)")
    if np.isnan(cfg.snr_db):
        errs.append("snr_db: must be a number (use inf for the noiseless limit)")
    if errs:
        raise ConfigError(errs)
    return cfg


_CONFIG_FIELDS = (
    "n_slots",
    "n_pilots",
    "n_antennas",
    "payload_symbols",
    "lambda",
    "psi",
    "snr_db",
    "receiver_mode",
    "framed",
)


def config_from_dict(doc: Mapping[str, object]) -> ProtocolConfig:
    unknown = sorted(set(doc) - set(_CONFIG_FIELDS))
    if unknown:
        raise ConfigError([f"unknown field(s): {', '.join(unknown)}"])
    missing = sorted(set(_CONFIG_FIELDS) - set(doc) - {"framed"})
    if missing:
        raise ConfigError([f"missing field(s): {', '.join(missing)}"])
    try:
        mode = ReceiverMode(doc["receiver_mode"])
    except ValueError:
        valid = ", ".join(m.value for m in ReceiverMode)
        raise ConfigError([f"receiver_mode: {doc['receiver_mode']!r} not one of {valid}"]) from None
    cfg = ProtocolConfig(
        n_slots=int(doc["n_slots"]),
        n_pilots=int(doc["n_pilots"]),
        n_antennas=int(doc["n_antennas"]),
        payload_symbols=int(doc["payload_symbols"]),
        lam=DegreeDistribution.from_mapping(doc["lambda"]),
        psi=DegreeDistribution.from_mapping(doc["psi"]),
        snr_db=float(doc["snr_db"]),
        receiver_mode=mode,
        framed=bool(doc.get("framed", True)),
    )
    return validate_config(cfg)


def load_config(path: str) -> ProtocolConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class UserTransmission:
    """One user's payload plus every frame choice derived from it.

    slot_indices is sorted; pilot_subsets[i] is the (sorted) pilot subset
    used in slot_indices[i]. The whole tuple is a pure function of
    (payload_bits, config)."""

    user_id: int
    payload_bits: np.ndarray
    repetition_degree: int
    slot_indices: tuple[int, ...]
    pilot_subsets: tuple[tuple[int, ...], ...]

    def __eq__(self, other) -> bool:
        if not isinstance(other, UserTransmission):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.repetition_degree == other.repetition_degree
            and self.slot_indices == other.slot_indices
            and self.pilot_subsets == other.pilot_subsets
            and np.array_equal(self.payload_bits, other.payload_bits)
        )

    def placement(self) -> dict[int, tuple[int, ...]]:
        return dict(zip(self.slot_indices, self.pilot_subsets))

    def subset_in_slot(self, slot: int) -> tuple[int, ...]:
        try:
            return self.pilot_subsets[self.slot_indices.index(slot)]
        except ValueError:
            raise KeyError(f"user {self.user_id} has no replica in slot {slot}") from None

    def choice_key(self) -> tuple:
        """Full (slots, subsets) tuple; identical keys are unresolvable."""
        return (self.slot_indices, self.pilot_subsets)


def _inverse_cdf(dist: DegreeDistribution, u: float) -> int:
    acc = 0.0
    for k, v in dist.coefficients:
        acc += v
        if u < acc:
            return k
    return dist.coefficients[-1][0]


def _partial_fisher_yates(n: int, k: int, uniforms, offset: int) -> tuple[int, ...]:
    """Uniform k-subset of range(n), consuming k uniforms from the given
    block starting at offset."""
    idx = list(range(n))
    for i in range(k):
        j = i + int(uniforms[offset + i] * (n - i))
        if j >= n:  # guard the u -> 1.0 rounding edge
            j = n - 1
        idx[i], idx[j] = idx[j], idx[i]
    return tuple(sorted(idx[:k]))


# The choice generator is counter-based (Philox) and keyed by a hash of the
# payload bits; a single module-level instance is re-keyed per derivation.
# Processes each own a copy; derive_choices is not thread-safe.
_PHILOX = np.random.Philox(key=0)
_CHOICE_GEN = np.random.Generator(_PHILOX)


def _rekey_choice_rng(payload_bits: np.ndarray) -> np.random.Generator:
    digest = hashlib.sha256(np.packbits(payload_bits).tobytes()).digest()
    _PHILOX.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.zeros(4, np.uint64),
            "key": np.frombuffer(digest[:16], dtype=np.uint64),
        },
        "buffer": np.zeros(4, np.uint64),
        "buffer_pos": 4,
        "has_uint32": 0,
        "uinteger": 0,
    }
    return _CHOICE_GEN


def derive_choices(payload_bits: np.ndarray, cfg: ProtocolConfig) -> UserTransmission:
    """Replayable choice derivation: repetition degree r ~ lambda, r distinct
    slots uniform without replacement, then per chosen slot an independent
    preamble order p ~ psi and a uniform p-subset of pilots.

    Draw layout is fixed (one uniform for r, then 2r uniforms for the slot
    selection and per-slot orders, then the pilot selections in sorted-slot
    order), so replaying the same payload bits reproduces every choice."""
    support_errs = cfg.lam.violations("lambda", max_degree=cfg.n_slots)
    support_errs += cfg.psi.violations("psi", max_degree=cfg.n_pilots)
    if support_errs:
        raise ConfigError(support_errs)
    bits = np.array(payload_bits, dtype=np.uint8)  # private immutable copy
    bits.flags.writeable = False
    rng = _rekey_choice_rng(bits)
    r = _inverse_cdf(cfg.lam, rng.random())
    block = rng.random(2 * r)
    slots = _partial_fisher_yates(cfg.n_slots, r, block, 0)
    orders = [_inverse_cdf(cfg.psi, block[r + i]) for i in range(r)]
    pilot_block = rng.random(sum(orders))
    subsets = []
    offset = 0
    for p in orders:
        subsets.append(_partial_fisher_yates(cfg.n_pilots, p, pilot_block, offset))
        offset += p
    return UserTransmission(
        user_id=codec.payload_user_id(bits),
        payload_bits=bits,
        repetition_degree=r,
        slot_indices=slots,
        pilot_subsets=tuple(subsets),
    )
