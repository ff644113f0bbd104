import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdsim.fixedpoint import (DataType, FixedComplex, OverflowFlag,
                              ScalingPolicy, butterfly, cmul, dequantize, one,
                              quantize, sat_round, zero)

ALL_DTYPES = list(DataType)


class TestDataType:
    def test_widths_and_limits(self):
        assert DataType.C64.part_width == 32
        assert DataType.C32.part_width == 16
        assert DataType.C16.part_width == 8
        assert DataType.C64.max_points == 512
        assert DataType.C32.max_points == 1024
        assert DataType.C16.max_points == 2048

    def test_from_tag(self):
        assert DataType.from_tag("c32") is DataType.C32
        with pytest.raises(ValueError):
            DataType.from_tag("C128")


class TestSatRound:
    def test_zero(self):
        assert sat_round(0, 8) == 0

    def test_q1_7_sum_saturates(self):
        # 0.75 + 0.75 in Q1.7 clips to the largest positive code
        assert sat_round(0b0110_0000 + 0b0110_0000, 8) == 127

    def test_q1_15_product_rescale(self):
        # 0.5 * 0.5 in Q1.15, rescaled back to Q1.15
        assert sat_round(0x4000 * 0x4000, 16, shift=15) == 0x2000

    def test_negative_saturation(self):
        assert sat_round(-200, 8) == -128

    def test_ties_to_even(self):
        assert sat_round(1, 8, shift=1) == 0      # 0.5 -> 0
        assert sat_round(3, 8, shift=1) == 2      # 1.5 -> 2
        assert sat_round(-1, 8, shift=1) == 0     # -0.5 -> 0
        assert sat_round(-3, 8, shift=1) == -2    # -1.5 -> -2
        assert sat_round(5, 8, shift=2) == 1      # 1.25 -> 1

    def test_sticky_flag(self):
        flag = OverflowFlag()
        sat_round(1000, 8, flag=flag)
        assert flag.seen
        sat_round(0, 8, flag=flag)
        assert flag.seen  # stays set

    @given(st.integers(-1 << 40, 1 << 40), st.integers(-1 << 40, 1 << 40),
           st.sampled_from([0, 1, 7, 15]))
    def test_monotonic(self, x, y, shift):
        if x > y:
            x, y = y, x
        assert sat_round(x, 16, shift) <= sat_round(y, 16, shift)


def _raw(dtype):
    return st.integers(dtype.min_raw, dtype.max_raw)


def _fixed(dtype):
    return st.builds(lambda r, i: FixedComplex(r, i, dtype),
                     _raw(dtype), _raw(dtype))


class TestCmul:
    @pytest.mark.parametrize("dtype", ALL_DTYPES)
    def test_multiply_by_zero(self, dtype):
        x = FixedComplex(dtype.max_raw // 3, -dtype.max_raw // 5, dtype)
        assert cmul(x, zero(dtype)) == zero(dtype)

    @given(_fixed(DataType.C32))
    def test_near_identity(self, x):
        # one() is 1 - 2^-(w-1); each part may move by at most 1 ulp
        y = cmul(x, one(DataType.C32))
        assert abs(y.re - x.re) <= 1
        assert abs(y.im - x.im) <= 1

    def test_exact_quarter(self):
        a = quantize(0.5 + 0j, DataType.C32)
        b = quantize(0.5j, DataType.C32)
        got = cmul(a, b)
        assert (got.re, got.im) == (0, quantize(0.25j, DataType.C32).im)
        assert dequantize(got) == 0.25j

    def test_dtype_mismatch(self):
        with pytest.raises(ValueError):
            cmul(zero(DataType.C64), zero(DataType.C32))


class TestButterfly:
    @pytest.mark.parametrize("dtype", ALL_DTYPES)
    def test_symmetric_cancellation(self, dtype):
        a = quantize(0.25 + 0.125j, dtype)
        out0, out1 = butterfly(a, a, one(dtype),
                               ScalingPolicy.DIVIDE_BY_TWO_PER_STAGE)
        # (a + ~1*a)/2 ~ a ; (a - ~1*a)/2 == 0
        assert abs(out0.re - a.re) <= 1 and abs(out0.im - a.im) <= 1
        assert out1 == zero(dtype)

    @pytest.mark.parametrize("dtype", ALL_DTYPES)
    def test_saturation_path(self, dtype):
        flag = OverflowFlag()
        half = quantize(0.5 + 0j, dtype)
        out0, out1 = butterfly(half, half, one(dtype), ScalingPolicy.NONE,
                               flag)
        assert out0.re == dtype.max_raw and out0.im == 0
        assert out1 == zero(dtype)
        assert flag.seen

    @pytest.mark.parametrize("dtype", ALL_DTYPES)
    def test_quarter_turn_oracle(self, dtype):
        # hand oracle: a + w*b and a - w*b with w = -i exactly representable
        a = quantize(0.25 + 0j, dtype)
        b = quantize(0.25 + 0j, dtype)
        w = FixedComplex(0, -dtype.scale, dtype)  # exactly -1j
        expect0 = 0.25 - 0.25j
        expect1 = 0.25 + 0.25j
        out0, out1 = butterfly(a, b, w, ScalingPolicy.NONE)
        assert dequantize(out0) == expect0
        assert dequantize(out1) == expect1

    @given(_fixed(DataType.C16), _fixed(DataType.C16))
    def test_involution_recovers_operands(self, a, b):
        # out0 + out1 == 2a and out0 - out1 == 2*(w*b), exact when unsaturated
        dtype = DataType.C16
        w = FixedComplex(0, -dtype.scale, dtype)
        if max(abs(a.re), abs(a.im), abs(b.re), abs(b.im)) > dtype.max_raw // 2 - 1:
            return
        out0, out1 = butterfly(a, b, w, ScalingPolicy.NONE)
        t = cmul(w, b)
        assert out0.re + out1.re == 2 * a.re
        assert out0.im + out1.im == 2 * a.im
        assert out0.re - out1.re == 2 * t.re
        assert out0.im - out1.im == 2 * t.im

    @given(_fixed(DataType.C32), _fixed(DataType.C32),
           st.floats(0, 2 * math.pi, allow_nan=False))
    @settings(max_examples=300)
    def test_no_saturation_when_scaled(self, a, b, phase):
        # |parts| <= 0.5 plus per-stage halving can never clip
        dtype = DataType.C32
        cap = dtype.scale // 2
        a = FixedComplex(max(min(a.re, cap), -cap), max(min(a.im, cap), -cap), dtype)
        b = FixedComplex(max(min(b.re, cap), -cap), max(min(b.im, cap), -cap), dtype)
        w = quantize(complex(math.cos(phase), math.sin(phase)), dtype)
        if w.re * w.re + w.im * w.im > dtype.scale ** 2:
            return
        flag = OverflowFlag()
        butterfly(a, b, w, ScalingPolicy.DIVIDE_BY_TWO_PER_STAGE, flag)
        assert not flag.seen


class TestQuantize:
    def test_zero(self):
        assert quantize(0, DataType.C16) == zero(DataType.C16)

    def test_negative_one_exact(self):
        assert quantize(-1.0, DataType.C32).re == -(1 << 15)

    def test_rounding_oracle(self):
        # independent oracle: nearest Q1.31 integer to 0.3 * 2^31
        want = round(0.3 * 2 ** 31)
        assert quantize(0.3, DataType.C64).re == want

    def test_positive_one_saturates(self):
        assert quantize(1.0, DataType.C16).re == DataType.C16.max_raw

    @given(st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False),
           st.sampled_from(ALL_DTYPES))
    def test_round_trip_error_bound(self, re, im, dtype):
        q = quantize(complex(re, im), dtype)
        back = dequantize(q)
        bound = 2 ** -(dtype.part_width - 1) / 2 + 1e-15
        if re < 1.0 - bound and im < 1.0 - bound:  # saturation region excluded
            assert abs(back.real - re) <= bound
            assert abs(back.imag - im) <= bound

    @given(_fixed(DataType.C16))
    def test_idempotent_on_grid(self, x):
        assert quantize(dequantize(x), x.dtype) == x

    def test_out_of_range_raw_rejected(self):
        with pytest.raises(ValueError):
            FixedComplex(DataType.C16.max_raw + 1, 0, DataType.C16)
