"""Pilot construction, Rayleigh block-fading channel, slot signal synthesis,
and the per-pilot matched-filter / MRC estimators.

A slot's received signal is the pair (P, Y): P is the M x N_P preamble
observation, Y the M x N_D payload observation. Each active user contributes
outer(h, preamble) to P and outer(h, x) to Y, on top of circularly-symmetric
complex Gaussian noise of per-entry variance sigma_z^2 = 10^(-snr_db/10).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import hadamard

from .core import ProtocolConfig, UserTransmission


class PilotBook:
    """N_P mutually orthogonal +-1 pilot rows (Sylvester Hadamard matrix)."""

    def __init__(self, n_pilots: int):
        if n_pilots < 1 or (n_pilots & (n_pilots - 1)) != 0:
            raise ValueError(f"n_pilots must be a power of two, got {n_pilots}")
        self.n_pilots = n_pilots
        self.sequences = hadamard(n_pilots).astype(np.float64)

    def row(self, j: int) -> np.ndarray:
        return self.sequences[j]

    def subset_sum(self, subset: Sequence[int]) -> np.ndarray:
        """Unnormalized sum of the selected pilot rows."""
        return self.sequences[list(subset)].sum(axis=0)


def build_preamble(pilot_subset: Sequence[int], book: PilotBook) -> np.ndarray:
    """Pilot-mixture preamble: (1/sqrt(p)) * sum of the p selected pilots.
    Orthogonality makes its energy exactly N_P regardless of p."""
    subset = list(pilot_subset)
    if not subset:
        raise ValueError("pilot subset must be nonempty")
    if len(set(subset)) != len(subset):
        raise ValueError("pilot subset must have distinct indices")
    return book.subset_sum(subset) / np.sqrt(len(subset))


def rayleigh_channel(rng: np.random.Generator, n_antennas: int) -> np.ndarray:
    """i.i.d. CN(0, 1) channel vector (unit variance per antenna)."""
    return (
        rng.standard_normal(n_antennas) + 1j * rng.standard_normal(n_antennas)
    ) / np.sqrt(2.0)


def complex_noise(rng: np.random.Generator, shape: tuple[int, ...], variance: float) -> np.ndarray:
    if variance == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class SlotSignal:
    """Received matrices for one slot; mutated in place by SIC subtractions."""

    preamble_part: np.ndarray  # (M, N_P) complex
    payload_part: np.ndarray   # (M, N_D) complex
    sic_count: int = 0


def synthesize_slot(
    slot_index: int,
    users: Iterable[tuple[UserTransmission, np.ndarray, np.ndarray]],
    cfg: ProtocolConfig,
    book: PilotBook,
    noise_rng: np.random.Generator,
) -> SlotSignal:
    """Superpose the given (transmission, payload symbols, channel) triples
    plus noise. Every user must occupy slot_index; noise is drawn first so a
    fixed generator state yields the same noise regardless of the user list."""
    m = cfg.n_antennas
    sigma2 = cfg.noise_variance
    preamble = complex_noise(noise_rng, (m, cfg.n_pilots), sigma2)
    payload = complex_noise(noise_rng, (m, cfg.payload_symbols), sigma2)
    for tx, symbols, h in users:
        subset = tx.subset_in_slot(slot_index)
        h = np.asarray(h)
        symbols = np.asarray(symbols)
        if h.shape != (m,):
            raise ValueError(f"channel vector shape {h.shape}, expected ({m},)")
        if symbols.shape != (cfg.payload_symbols,):
            raise ValueError(
                f"payload symbols shape {symbols.shape}, expected ({cfg.payload_symbols},)"
            )
        preamble += np.outer(h, build_preamble(subset, book))
        payload += np.outer(h, symbols)
    return SlotSignal(preamble_part=preamble, payload_part=payload)


def estimate_channel_mf(slot: SlotSignal, j: int, book: PilotBook) -> np.ndarray:
    """Matched-filter projection of the preamble observation onto pilot j.
    For a user with preamble order p using pilot j this contains h/sqrt(p);
    the mixture normalization is compensated at SIC time."""
    s = book.row(j)
    return slot.preamble_part @ s / book.n_pilots


def estimate_payload_mrc(slot: SlotSignal, phi: np.ndarray) -> np.ndarray:
    """MRC combine of the payload observation with the channel estimate phi.
    Scale-invariant QPSK slicing tolerates the sqrt(p) amplitude offset."""
    nrm = np.vdot(phi, phi).real
    if nrm == 0.0:
        raise ValueError("zero-norm channel estimate: pilot carries no energy")
    return (np.conj(phi) @ slot.payload_part) / nrm
