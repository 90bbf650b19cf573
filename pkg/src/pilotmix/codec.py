"""Binary BCH (511, 421, t=10) codec, CRC-16 packet validation, Gray-mapped QPSK.

Transmit chain per packet: 405 data bits (user id + random fill) -> CRC-16
attach -> 421 info bits -> systematic BCH encode -> 511 coded bits -> one
zero pad bit -> 512 bits -> 256 QPSK symbols of unit energy.
"""

from __future__ import annotations

import numpy as np

# Code geometry. The decoder is a bounded-distance hard-decision decoder
# (syndromes + Berlekamp-Massey + Chien search) over GF(2^9).
GF_M = 9
N_CODE = 511          # 2^9 - 1
K_INFO = 421
T_CORRECT = 10
PARITY_BITS = N_CODE - K_INFO   # 90

CRC_BITS = 16
DATA_BITS = K_INFO - CRC_BITS   # 405
USER_ID_BITS = 32

PAD_BITS = 1
CODED_BITS = N_CODE + PAD_BITS  # 512
PAYLOAD_SYMBOLS = CODED_BITS // 2  # 256

_PRIM_POLY = 0b1000010001  # x^9 + x^4 + 1, primitive over GF(2)
_CRC_POLY = 0x1021         # CRC-16/CCITT generator
_CRC_INIT = 0xFFFF

_QPSK_SCALE = 1.0 / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# GF(2^9) tables
# ---------------------------------------------------------------------------

def _build_gf_tables() -> tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(2 * N_CODE, dtype=np.int64)
    log = np.zeros(N_CODE + 1, dtype=np.int64)
    x = 1
    for i in range(N_CODE):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & (1 << GF_M):
            x ^= _PRIM_POLY
    exp[N_CODE:] = exp[:N_CODE]
    return exp, log


_GF_EXP, _GF_LOG = _build_gf_tables()


def _gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(_GF_EXP[_GF_LOG[a] + _GF_LOG[b]])


def _gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("inverse of 0 in GF(2^9)")
    return int(_GF_EXP[N_CODE - _GF_LOG[a]])


# ---------------------------------------------------------------------------
# Generator polynomial: lcm of minimal polynomials of alpha^1, alpha^3, ...,
# alpha^(2t-1). Polynomials over GF(2) are stored as Python ints, bit d =
# coefficient of x^d.
# ---------------------------------------------------------------------------

def _minimal_poly_mask(exponent: int) -> int:
    coset = []
    c = exponent
    while c not in coset:
        coset.append(c)
        c = (2 * c) % N_CODE
    # product of (x + alpha^c) over the cyclotomic coset, computed in GF(2^9)
    poly = [1]
    for c in coset:
        a = int(_GF_EXP[c])
        nxt = [0] * (len(poly) + 1)
        for d, co in enumerate(poly):
            nxt[d + 1] ^= co
            nxt[d] ^= _gf_mul(co, a)
        poly = nxt
    mask = 0
    for d, co in enumerate(poly):
        if co not in (0, 1):
            raise AssertionError("minimal polynomial has coefficients outside GF(2)")
        mask |= co << d
    return mask


def _poly_mul_gf2(a: int, b: int) -> int:
    out = 0
    while b:
        low = b & -b
        out ^= a << (low.bit_length() - 1)
        b ^= low
    return out


def _build_generator() -> int:
    masks = set()
    for i in range(1, 2 * T_CORRECT, 2):
        masks.add(_minimal_poly_mask(i))
    g = 1
    for m in masks:
        g = _poly_mul_gf2(g, m)
    return g


_GENERATOR = _build_generator()
GENERATOR_DEGREE = _GENERATOR.bit_length() - 1
if GENERATOR_DEGREE != PARITY_BITS:
    raise AssertionError(f"generator degree {GENERATOR_DEGREE}, expected {PARITY_BITS}")


def _gf2_mod(value: int, poly: int, degree: int) -> int:
    while value.bit_length() > degree:
        value ^= poly << (value.bit_length() - 1 - degree)
    return value


def _bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def _int_to_bits(value: int, n: int) -> np.ndarray:
    nbytes = (n + 7) // 8
    raw = np.frombuffer(value.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n]


# ---------------------------------------------------------------------------
# BCH encode / decode
# ---------------------------------------------------------------------------

def bch_encode(info: np.ndarray) -> np.ndarray:
    """Systematic encode: codeword[d] is the coefficient of x^d, with the
    info word occupying degrees 90..510 and parity degrees 0..89."""
    info = np.asarray(info, dtype=np.uint8)
    if info.shape != (K_INFO,):
        raise ValueError(f"info word must have {K_INFO} bits, got {info.shape}")
    parity = _gf2_mod(_bits_to_int(info) << PARITY_BITS, _GENERATOR, PARITY_BITS)
    cw = np.empty(N_CODE, dtype=np.uint8)
    cw[:PARITY_BITS] = _int_to_bits(parity, PARITY_BITS)
    cw[PARITY_BITS:] = info
    return cw


def _syndromes(positions: np.ndarray) -> np.ndarray:
    """S_i = r(alpha^i) for i = 1..2t, from the set positions of the word."""
    if positions.size == 0:
        return np.zeros(2 * T_CORRECT, dtype=np.int64)
    idx = (np.arange(1, 2 * T_CORRECT + 1, dtype=np.int64)[:, None] * positions[None, :]) % N_CODE
    return np.bitwise_xor.reduce(_GF_EXP[idx], axis=1)


def _berlekamp_massey(synd: np.ndarray) -> tuple[list[int], int]:
    c = [1]
    b = [1]
    lfsr_len = 0
    shift = 1
    prev_disc = 1
    for n in range(2 * T_CORRECT):
        disc = int(synd[n])
        for i in range(1, lfsr_len + 1):
            disc ^= _gf_mul(c[i], int(synd[n - i]))
        if disc == 0:
            shift += 1
            continue
        coef = _gf_mul(disc, _gf_inv(prev_disc))
        need = len(b) + shift
        if need > len(c):
            c = c + [0] * (need - len(c))
        if 2 * lfsr_len <= n:
            old_c = c.copy()
            for i, bi in enumerate(b):
                if bi:
                    c[i + shift] ^= _gf_mul(coef, bi)
            lfsr_len = n + 1 - lfsr_len
            b = old_c
            prev_disc = disc
            shift = 1
        else:
            for i, bi in enumerate(b):
                if bi:
                    c[i + shift] ^= _gf_mul(coef, bi)
            shift += 1
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c, lfsr_len


_CHIEN_M = np.arange(N_CODE, dtype=np.int64)


def _chien_roots(sigma: list[int]) -> np.ndarray:
    """Error positions l such that sigma(alpha^{-l}) = 0."""
    acc = np.full(N_CODE, sigma[0], dtype=np.int64)
    for d in range(1, len(sigma)):
        co = sigma[d]
        if co:
            acc ^= _GF_EXP[(_GF_LOG[co] + d * _CHIEN_M) % N_CODE]
    roots_m = np.flatnonzero(acc == 0)
    return (N_CODE - roots_m) % N_CODE


def bch_decode(received: np.ndarray) -> np.ndarray | None:
    """Bounded-distance decode. Returns the 421 info bits, or None when the
    syndrome is uncorrectable. A wrong codeword can still be returned for
    >t errors; the CRC layer is responsible for rejecting those."""
    received = np.asarray(received, dtype=np.uint8)
    if received.shape != (N_CODE,):
        raise ValueError(f"received word must have {N_CODE} bits, got {received.shape}")
    positions = np.flatnonzero(received).astype(np.int64)
    synd = _syndromes(positions)
    if not synd.any():
        return received[PARITY_BITS:].copy()
    sigma, lfsr_len = _berlekamp_massey(synd)
    if lfsr_len > T_CORRECT or len(sigma) - 1 != lfsr_len:
        return None
    err_pos = _chien_roots(sigma)
    if err_pos.size != lfsr_len:
        return None
    corrected = received.copy()
    corrected[err_pos] ^= 1
    if _syndromes(np.flatnonzero(corrected).astype(np.int64)).any():
        return None
    return corrected[PARITY_BITS:]


# ---------------------------------------------------------------------------
# CRC-16
# ---------------------------------------------------------------------------

def _build_crc_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint16)
    for byte in range(256):
        reg = byte << 8
        for _ in range(8):
            reg = ((reg << 1) ^ _CRC_POLY) if reg & 0x8000 else (reg << 1)
            reg &= 0xFFFF
        table[byte] = reg
    return table


_CRC_TABLE = _build_crc_table()


def _crc16(data_bits: np.ndarray) -> int:
    # data is processed as MSB-first bytes; trailing packbits zero padding is
    # part of the checksum definition and identical on both sides.
    crc = _CRC_INIT
    for byte in np.packbits(np.asarray(data_bits, dtype=np.uint8)):
        crc = ((crc << 8) & 0xFFFF) ^ int(_CRC_TABLE[(crc >> 8) ^ int(byte)])
    return crc


def crc_attach(data_bits: np.ndarray) -> np.ndarray:
    data_bits = np.asarray(data_bits, dtype=np.uint8)
    if data_bits.shape != (DATA_BITS,):
        raise ValueError(f"data field must have {DATA_BITS} bits, got {data_bits.shape}")
    crc = _crc16(data_bits)
    out = np.empty(K_INFO, dtype=np.uint8)
    out[:DATA_BITS] = data_bits
    out[DATA_BITS:] = _int_to_bits(crc, CRC_BITS)[::-1]  # MSB first
    return out


def crc_check(payload_bits: np.ndarray) -> bool:
    payload_bits = np.asarray(payload_bits, dtype=np.uint8)
    if payload_bits.shape != (K_INFO,):
        return False
    expect = _crc16(payload_bits[:DATA_BITS])
    got = _bits_to_int(payload_bits[DATA_BITS:][::-1])
    return expect == got


# ---------------------------------------------------------------------------
# QPSK with Gray mapping: bit pair (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1))/sqrt(2)
# so 00 -> (+1+1j)/sqrt(2). Decisions are sign-based, hence invariant to any
# positive real scaling of the symbols.
# ---------------------------------------------------------------------------

def qpsk_map(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    pairs = bits.reshape(-1, 2).astype(np.float64)
    return ((1.0 - 2.0 * pairs[:, 0]) + 1j * (1.0 - 2.0 * pairs[:, 1])) * _QPSK_SCALE


def qpsk_demap(symbols: np.ndarray) -> np.ndarray:
    symbols = np.asarray(symbols)
    out = np.empty(2 * symbols.size, dtype=np.uint8)
    out[0::2] = symbols.real < 0
    out[1::2] = symbols.imag < 0
    return out


# ---------------------------------------------------------------------------
# Packet-level helpers
# ---------------------------------------------------------------------------

def make_payload(rng: np.random.Generator, user_id: int) -> np.ndarray:
    """421-bit info word: 32-bit user id, random fill, CRC-16."""
    data = np.empty(DATA_BITS, dtype=np.uint8)
    data[:USER_ID_BITS] = _int_to_bits(user_id, USER_ID_BITS)[::-1]
    data[USER_ID_BITS:] = rng.integers(0, 2, size=DATA_BITS - USER_ID_BITS, dtype=np.uint8)
    return crc_attach(data)


def payload_user_id(payload_bits: np.ndarray) -> int:
    bits = np.asarray(payload_bits, dtype=np.uint8)
    return _bits_to_int(bits[:USER_ID_BITS][::-1])


def encode_payload(payload_bits: np.ndarray) -> np.ndarray:
    """Info word -> 256 unit-energy QPSK symbols (codeword plus one pad bit)."""
    coded = np.zeros(CODED_BITS, dtype=np.uint8)
    coded[:N_CODE] = bch_encode(payload_bits)
    return qpsk_map(coded)


def try_decode_hard_bits(hard_bits: np.ndarray) -> np.ndarray | None:
    """512 sliced bits -> validated info word, or None. Validity means the
    BCH decoder converged and the CRC over the info word checks out."""
    info = bch_decode(np.asarray(hard_bits, dtype=np.uint8)[:N_CODE])
    if info is None or not crc_check(info):
        return None
    return info
