import math

import numpy as np
import pytest

from dparena.core import (
    BitString,
    Dataset,
    DatasetFormatError,
    ParameterError,
    PrivacyParams,
    RandomSource,
    adjacent,
    laplace_sample,
    load_dataset,
    load_sign_rows,
    neighbor_of,
    save_dataset,
    save_sign_rows,
)

DRAWS = 100_000


class TestLaplaceSampler:
    def test_median_is_zero(self):
        gen = RandomSource(1).generator()
        draws = laplace_sample(1.0, gen, size=DRAWS)
        assert abs(np.median(draws)) <= 0.02

    @pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
    def test_tail_probabilities(self, scale):
        # Analytic tail: P(|X| > z) = exp(-z/scale).
        gen = RandomSource(2).generator()
        draws = np.abs(laplace_sample(scale, gen, size=DRAWS))
        for z in (scale, 2 * scale):
            expected = math.exp(-z / scale)
            emp = np.mean(draws > z)
            sigma = math.sqrt(expected * (1 - expected) / DRAWS)
            assert abs(emp - expected) <= 3 * sigma

    @pytest.mark.parametrize("scale", [0.25, 3.0])
    def test_mean_absolute_value(self, scale):
        # E|X| = scale, and Var|X| = scale^2.
        gen = RandomSource(3).generator()
        draws = np.abs(laplace_sample(scale, gen, size=DRAWS))
        assert abs(draws.mean() - scale) <= 3 * scale / math.sqrt(DRAWS)

    def test_rejects_bad_scale(self):
        gen = RandomSource(0).generator()
        with pytest.raises(ParameterError):
            laplace_sample(0.0, gen)
        with pytest.raises(ParameterError):
            laplace_sample(-1.0, gen)

    def test_scalar_return(self):
        v = laplace_sample(1.0, RandomSource(0).generator())
        assert isinstance(v, float)


class TestRandomSource:
    def test_identical_streams_reproduce(self):
        a = RandomSource(42, 7).generator().random(100)
        b = RandomSource(42, 7).generator().random(100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RandomSource(42, 0).generator().random(100)
        b = RandomSource(42, 1).generator().random(100)
        assert not np.array_equal(a, b)

    def test_lanes_differ(self):
        src = RandomSource(42)
        assert not np.array_equal(src.generator(0).random(10), src.generator(1).random(10))

    def test_substream(self):
        assert RandomSource(1).substream(5) == RandomSource(1, 5)


class TestBitString:
    def test_text_roundtrip(self):
        s = BitString.from_text("+-+")
        assert s.signs() == (1, -1, 1)
        assert s.text() == "+-+"
        assert len(s) == 3
        assert BitString.from_signs(s.signs()) == s

    def test_prefix_relation(self):
        assert BitString.empty().is_prefix_of(BitString.from_text("+-"))
        assert BitString.from_text("+").is_prefix_of(BitString.from_text("+-"))
        assert not BitString.from_text("-").is_prefix_of(BitString.from_text("+-"))
        assert not BitString.from_text("+-+").is_prefix_of(BitString.from_text("+-"))

    def test_truncate_extend(self):
        s = BitString.from_text("+-+")
        assert s.truncated(2) == BitString.from_text("+-")
        assert s.truncated(0) == BitString.empty()
        assert BitString.from_text("+-").extended(1) == s
        with pytest.raises(ParameterError):
            s.truncated(4)

    def test_sort_key_orders_by_length_then_lex(self):
        strings = [BitString.from_text(t) for t in ("+", "", "-+", "--", "-")]
        ordered = sorted(strings, key=BitString.sort_key)
        assert [s.text() for s in ordered] == ["", "-", "+", "--", "-+"]

    def test_rejects_bad_symbols(self):
        with pytest.raises(ParameterError):
            BitString.from_signs([1, 0])
        with pytest.raises(ParameterError):
            BitString.from_text("+x")


class TestDataset:
    def test_sign_bit_validation(self):
        Dataset.sign_bits([1, -1, 1])
        with pytest.raises(ParameterError):
            Dataset.sign_bits([1, 0])

    def test_unit_real_validation(self):
        Dataset.unit_reals([0.0, 0.5, 1.0])
        with pytest.raises(ParameterError):
            Dataset.unit_reals([0.5, 1.5])

    def test_bit_string_validation(self):
        Dataset.bit_strings([BitString.from_text("+")])
        with pytest.raises(ParameterError):
            Dataset.bit_strings(["+"])

    def test_rows_are_read_only(self):
        x = Dataset.sign_bits([1, -1])
        with pytest.raises(ValueError):
            x.rows[0] = -1


class TestAdjacency:
    def test_reflexive(self):
        x = Dataset.sign_bits([1, 1, 1])
        assert adjacent(x, x)

    def test_single_difference(self):
        assert adjacent(Dataset.sign_bits([1, 1, 1]), Dataset.sign_bits([1, -1, 1]))

    def test_two_differences(self):
        assert not adjacent(Dataset.sign_bits([1, 1, 1]), Dataset.sign_bits([-1, -1, 1]))

    def test_symmetric_on_random_pairs(self):
        gen = RandomSource(5).generator()
        for _ in range(50):
            n = int(gen.integers(1, 20))
            a = Dataset.sign_bits(gen.integers(0, 2, size=n) * 2 - 1)
            b = Dataset.sign_bits(gen.integers(0, 2, size=n) * 2 - 1)
            assert adjacent(a, b) == adjacent(b, a)

    def test_mismatch_raises(self):
        with pytest.raises(ParameterError):
            adjacent(Dataset.sign_bits([1]), Dataset.sign_bits([1, 1]))
        with pytest.raises(ParameterError):
            adjacent(Dataset.sign_bits([1]), Dataset.unit_reals([0.5]))


class TestNeighborOf:
    def test_identity_replacement(self):
        x = Dataset.sign_bits([1, 1])
        y = neighbor_of(x, 0, 1)
        assert y == x
        assert adjacent(x, y)

    def test_replacement(self):
        x = Dataset.sign_bits([1, 1])
        y = neighbor_of(x, 1, -1)
        assert list(y.rows) == [1, -1]
        assert adjacent(x, y)

    def test_out_of_range(self):
        with pytest.raises(ParameterError):
            neighbor_of(Dataset.sign_bits([1, 1]), 2, -1)

    def test_bitstring_replacement(self):
        x = Dataset.bit_strings([BitString.from_text("+"), BitString.from_text("-")])
        y = neighbor_of(x, 0, BitString.from_text("--"))
        assert y.rows[0].text() == "--"
        assert adjacent(x, y)


class TestDatasetFiles:
    def test_bits_roundtrip(self, tmp_path):
        x = Dataset.sign_bits([1, -1, -1, 1])
        path = tmp_path / "data.bits"
        save_dataset(x, path)
        assert load_dataset(path) == x

    def test_reals_roundtrip(self, tmp_path):
        x = Dataset.unit_reals([0.25, 1.0, 0.0])
        path = tmp_path / "data.reals"
        save_dataset(x, path)
        assert load_dataset(path) == x

    def test_strings_roundtrip(self, tmp_path):
        x = Dataset.bit_strings(
            [BitString.from_text("+-"), BitString.empty(), BitString.from_text("-")]
        )
        path = tmp_path / "data.strings"
        save_dataset(x, path)
        assert load_dataset(path) == x

    def test_malformed_bits_token(self, tmp_path):
        path = tmp_path / "bad.bits"
        path.write_text("+1 -1 2\n")
        with pytest.raises(DatasetFormatError, match=r":1:.*token 3"):
            load_dataset(path)

    def test_malformed_real_line_numbered(self, tmp_path):
        path = tmp_path / "bad.reals"
        path.write_text("0.5\nnope\n")
        with pytest.raises(DatasetFormatError, match=r":2:"):
            load_dataset(path)

    def test_out_of_range_real(self, tmp_path):
        path = tmp_path / "bad.reals"
        path.write_text("0.5\n1.5\n")
        with pytest.raises(DatasetFormatError, match=r":2:"):
            load_dataset(path)

    def test_malformed_string_line(self, tmp_path):
        path = tmp_path / "bad.strings"
        path.write_text("+-\n+z\n")
        with pytest.raises(DatasetFormatError, match=r":2:"):
            load_dataset(path)

    def test_unknown_suffix(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1\n")
        with pytest.raises(DatasetFormatError):
            load_dataset(path)

    def test_sign_rows_roundtrip(self, tmp_path):
        rows = np.array([[1, -1], [-1, -1]], dtype=np.int8)
        path = tmp_path / "pool.signs"
        save_sign_rows(rows, path)
        assert np.array_equal(load_sign_rows(path), rows)

    def test_sign_rows_ragged(self, tmp_path):
        path = tmp_path / "pool.signs"
        path.write_text("+1 -1\n+1\n")
        with pytest.raises(DatasetFormatError, match=r":2:"):
            load_sign_rows(path)


class TestPrivacyParams:
    def test_valid(self):
        PrivacyParams(1.0, 0.0)
        PrivacyParams(0.5, 1e-6)

    @pytest.mark.parametrize("eps,delta", [(0.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (1.0, -0.1)])
    def test_invalid(self, eps, delta):
        with pytest.raises(ParameterError):
            PrivacyParams(eps, delta)
