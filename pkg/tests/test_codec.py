import numpy as np
import pytest

from pilotmix import codec


def flip(word, positions):
    out = word.copy()
    out[list(positions)] ^= 1
    return out


class TestBchEncode:
    def test_generator_degree(self):
        assert codec.GENERATOR_DEGREE == codec.N_CODE - codec.K_INFO == 90

    def test_all_zero_maps_to_all_zero(self):
        cw = codec.bch_encode(np.zeros(codec.K_INFO, dtype=np.uint8))
        assert not cw.any()

    def test_systematic(self, rng):
        info = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
        cw = codec.bch_encode(info)
        assert np.array_equal(cw[codec.PARITY_BITS :], info)

    def test_length_checked(self):
        with pytest.raises(ValueError):
            codec.bch_encode(np.zeros(400, dtype=np.uint8))

    def test_min_weight_sampled(self, rng):
        # any nonzero codeword (difference of two codewords) has weight >= 21
        for _ in range(200):
            a = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
            b = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
            if np.array_equal(a, b):
                continue
            diff = codec.bch_encode(a) ^ codec.bch_encode(b)
            assert diff.sum() >= 21


class TestBchDecode:
    def test_clean_round_trip(self, rng):
        for _ in range(20):
            info = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
            out = codec.bch_decode(codec.bch_encode(info))
            assert out is not None and np.array_equal(out, info)

    def test_single_error_exhaustive(self, rng):
        info = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
        cw = codec.bch_encode(info)
        for pos in range(codec.N_CODE):
            out = codec.bch_decode(flip(cw, [pos]))
            assert out is not None and np.array_equal(out, info)

    @pytest.mark.parametrize("weight", [2, 3, 5, 7, 9, 10])
    def test_random_patterns_up_to_t(self, weight, rng):
        for _ in range(60):
            info = rng.integers(0, 2, codec.K_INFO, dtype=np.uint8)
            cw = codec.bch_encode(info)
            pos = rng.choice(codec.N_CODE, size=weight, replace=False)
            out = codec.bch_decode(flip(cw, pos))
            assert out is not None and np.array_equal(out, info)

    def test_beyond_t_fails_or_crc_rejects(self, rng):
        # > t errors: either decode failure, or a wrong codeword which the
        # CRC must reject (false pass rate ~2^-16, none expected in 500)
        crc_passes = 0
        outcomes = {"fail": 0, "wrong": 0, "correct": 0}
        for _ in range(500):
            payload = codec.make_payload(rng, 1)
            cw = codec.bch_encode(payload)
            weight = int(rng.integers(11, 31))
            pos = rng.choice(codec.N_CODE, size=weight, replace=False)
            out = codec.bch_decode(flip(cw, pos))
            if out is None:
                outcomes["fail"] += 1
            elif np.array_equal(out, payload):
                outcomes["correct"] += 1
            else:
                outcomes["wrong"] += 1
                crc_passes += codec.crc_check(out)
        assert crc_passes == 0, outcomes
        assert outcomes["fail"] + outcomes["wrong"] == 500 - outcomes["correct"]


class TestCrc:
    def test_round_trip(self, rng):
        payload = codec.make_payload(rng, 9)
        assert codec.crc_check(payload)

    def test_single_bit_flips_detected_exhaustively(self, rng):
        payload = codec.make_payload(rng, 9)
        for pos in range(codec.K_INFO):
            assert not codec.crc_check(flip(payload, [pos]))

    def test_random_noise_pass_rate(self):
        # random info words pass at ~2^-16; Poisson 3-sigma window on 1e6
        rng = np.random.default_rng(23)
        words = rng.integers(0, 2, size=(1_000_000, codec.K_INFO), dtype=np.uint8)
        passes = sum(codec.crc_check(words[i]) for i in range(words.shape[0]))
        lam = words.shape[0] / 2**16
        lo = lam - 3 * np.sqrt(lam)
        hi = lam + 3 * np.sqrt(lam)
        assert lo <= passes <= hi, passes


class TestQpsk:
    def test_gray_anchor(self):
        assert codec.qpsk_map(np.array([0, 0], dtype=np.uint8))[0] == pytest.approx(
            (1 + 1j) / np.sqrt(2)
        )
        assert codec.qpsk_map(np.array([1, 0], dtype=np.uint8))[0] == pytest.approx(
            (-1 + 1j) / np.sqrt(2)
        )

    def test_unit_energy(self, rng):
        bits = rng.integers(0, 2, 512, dtype=np.uint8)
        assert np.allclose(np.abs(codec.qpsk_map(bits)) ** 2, 1.0)

    def test_map_demap_identity_bulk(self):
        rng = np.random.default_rng(29)
        bits = rng.integers(0, 2, size=100_000 * 2, dtype=np.uint8)
        assert np.array_equal(codec.qpsk_demap(codec.qpsk_map(bits)), bits)

    def test_scale_invariance(self, rng):
        bits = rng.integers(0, 2, 512, dtype=np.uint8)
        assert np.array_equal(codec.qpsk_demap(3.7 * codec.qpsk_map(bits)), bits)

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            codec.qpsk_map(np.zeros(5, dtype=np.uint8))


class TestPacketChain:
    def test_payload_layout(self, rng):
        payload = codec.make_payload(rng, 77)
        assert payload.shape == (codec.K_INFO,)
        assert codec.payload_user_id(payload) == 77
        assert codec.crc_check(payload)

    def test_symbols_shape_and_pad(self, rng):
        payload = codec.make_payload(rng, 1)
        symbols = codec.encode_payload(payload)
        assert symbols.shape == (codec.PAYLOAD_SYMBOLS,)
        # last bit is the zero pad
        assert codec.qpsk_demap(symbols)[codec.CODED_BITS - 1] == 0

    def test_noiseless_chain_identity(self, rng):
        for uid in range(20):
            payload = codec.make_payload(rng, uid)
            hard = codec.qpsk_demap(codec.encode_payload(payload))
            out = codec.try_decode_hard_bits(hard)
            assert out is not None and np.array_equal(out, payload)

    def test_chain_with_correctable_noise(self, rng):
        payload = codec.make_payload(rng, 5)
        hard = codec.qpsk_demap(codec.encode_payload(payload))
        hard[:10] ^= 1  # 10 coded-bit errors
        out = codec.try_decode_hard_bits(hard)
        assert out is not None and np.array_equal(out, payload)

    def test_garbage_rejected(self, rng):
        for _ in range(50):
            hard = rng.integers(0, 2, codec.CODED_BITS, dtype=np.uint8)
            assert codec.try_decode_hard_bits(hard) is None
