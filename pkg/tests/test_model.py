import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gsmdetect.model import (
    MAX_TRUNCATION,
    FamilyKind,
    ProblemSpec,
    RngStream,
    SequenceFamily,
    Signal,
    SignalClass,
    class_contains,
    default_truncation,
    generator_identity,
    make_spec,
    sequence_value,
    simulate,
)


class TestSequenceValue:
    def test_direct_is_one(self):
        assert sequence_value(SequenceFamily.direct(), 7) == 1.0

    def test_polynomial_decay(self):
        assert sequence_value(SequenceFamily.polynomial_decay(1.0), 4) == 0.25

    def test_polynomial_growth(self):
        assert sequence_value(SequenceFamily.polynomial_growth(2.0), 3) == 9.0

    def test_exponential_kinds(self):
        assert sequence_value(SequenceFamily.exponential_decay(0.5), 2) == pytest.approx(math.exp(-1.0))
        assert sequence_value(SequenceFamily.exponential_growth(0.5), 2) == pytest.approx(math.e)

    def test_explicit_out_of_range(self):
        fam = SequenceFamily.explicit([1.0, 2.0])
        assert sequence_value(fam, 2) == 2.0
        with pytest.raises(IndexError):
            sequence_value(fam, 3)

    def test_index_must_be_positive(self):
        with pytest.raises(ValueError):
            sequence_value(SequenceFamily.direct(), 0)

    @pytest.mark.parametrize("kind", [FamilyKind.POLYNOMIAL_DECAY, FamilyKind.POLYNOMIAL_GROWTH])
    def test_parametric_needs_positive_parameter(self, kind):
        with pytest.raises(ValueError):
            SequenceFamily(kind, 0.0)

    def test_explicit_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            SequenceFamily.explicit([1.0, 0.0])

    @given(st.floats(0.1, 4.0), st.integers(2, 300))
    def test_monotone_families(self, p, n):
        up = SequenceFamily.polynomial_growth(p).evaluate(n)
        down = SequenceFamily.polynomial_decay(p).evaluate(n)
        assert np.all(np.diff(up) >= 0) and np.all(np.diff(down) <= 0)
        assert np.all(up > 0) and np.all(down > 0)


class TestProblemSpec:
    def test_truncation_bounds(self):
        with pytest.raises(ValueError):
            make_spec("direct", 1, 0, 0.1, 1)
        with pytest.raises(ValueError):
            make_spec("direct", 1, 0, 0.1, MAX_TRUNCATION + 1)

    def test_rejects_decreasing_a(self):
        with pytest.raises(ValueError):
            ProblemSpec(SequenceFamily.explicit([2.0, 1.0]), SequenceFamily.direct(), 1.0, 2)

    def test_rejects_short_explicit(self):
        with pytest.raises(ValueError):
            ProblemSpec(SequenceFamily.explicit([1.0, 2.0]), SequenceFamily.direct(), 1.0, 3)

    def test_rejects_overflowing_operator(self):
        with pytest.raises(ValueError):
            make_spec("severe", 1, 1, 0.1, 1000)  # exp(-1000) underflows to 0

    def test_arrays_are_read_only(self, mild11):
        with pytest.raises(ValueError):
            mild11.a[0] = 5.0

    def test_record_round_trip(self, mild11, toy2):
        for spec in (mild11, toy2):
            assert ProblemSpec.from_record(spec.to_record()) == spec

    def test_t_zero_mild_is_direct(self):
        spec = make_spec("mild", 1, 0, 0.1, 10)
        assert np.all(spec.b == 1.0)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            make_spec("weird", 1, 1, 0.1, 10)


class TestSimulate:
    def test_noiseless_limit(self, mild11):
        spec = mild11.with_noise(0.0)
        theta = Signal(np.linspace(0, 1, spec.N))
        np.testing.assert_array_equal(simulate(spec, theta, RngStream(1)), spec.b * theta.coefficients)

    def test_null_mean(self):
        spec = make_spec("direct", 1, 0, 1.0, 5)
        gen = RngStream(11).generator()
        Y = np.array([simulate(spec, Signal.zeros(5), gen) for _ in range(100_000)])
        assert np.all(np.abs(Y.mean(axis=0)) < 3e-2)

    def test_variance_direct(self):
        spec = make_spec("direct", 1, 0, 0.5, 3)
        theta = Signal([2.0, 0.0, 0.0])
        gen = RngStream(12).generator()
        y1 = np.array([simulate(spec, theta, gen)[0] for _ in range(100_000)])
        assert abs(y1.var(ddof=1) - 0.25) / 0.25 < 0.05
        assert abs(y1.mean() - 2.0) < 3 * 0.5 / math.sqrt(1e5)

    def test_length_mismatch(self, mild11):
        with pytest.raises(ValueError):
            simulate(mild11, Signal.zeros(3), RngStream(0))

    def test_deterministic(self, mild11):
        theta = Signal(np.full(mild11.N, 0.01))
        a = simulate(mild11, theta, RngStream(5, 2))
        b = simulate(mild11, theta, RngStream(5, 2))
        assert a.tobytes() == b.tobytes()

    def test_index_order_consumption(self, mild11):
        y = simulate(mild11, Signal.zeros(mild11.N), RngStream(3))
        xi = RngStream(3).generator().standard_normal(mild11.N)
        np.testing.assert_array_equal(y, mild11.eps * xi)


class TestRngStream:
    def test_streams_differ_and_are_uncorrelated(self):
        x = RngStream(7, 0).generator().standard_normal(200_000)
        y = RngStream(7, 1).generator().standard_normal(200_000)
        assert not np.array_equal(x, y)
        assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(200_000)

    def test_child_streams(self):
        root = RngStream(7)
        assert root.child(0) != root.child(1)
        assert root.child(0).generator().random() == RngStream(7, 0, (0,)).generator().random()

    def test_seed_range(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(2**64)

    def test_identity_string(self):
        assert generator_identity().startswith("numpy.random.PCG64 (numpy ")


class TestSignalClass:
    def test_zero_on_boundary(self, toy2):
        assert class_contains(SignalClass(toy2, 0.0), Signal.zeros(2))

    def test_hand_example(self, toy2):
        theta = Signal([1 / math.sqrt(3), 1 / math.sqrt(6)])
        assert class_contains(SignalClass(toy2, 0.7), theta)

    def test_ellipsoid_violated(self, toy2):
        for r in (0.0, 0.5, 1.0):
            assert not class_contains(SignalClass(toy2, r), Signal([1.1, 0.0]))

    def test_length_mismatch(self, toy2):
        with pytest.raises(ValueError):
            class_contains(SignalClass(toy2, 0.1), Signal.zeros(3))

    def test_nonempty_boundary(self, mild11):
        theta = np.zeros(mild11.N)
        theta[0] = 1.0 / mild11.a[0]
        assert class_contains(SignalClass(mild11, 1.0), Signal(theta))
        assert SignalClass(mild11, 1.0).nonempty
        assert not SignalClass(mild11, 1.0 + 1e-9).nonempty
        assert not class_contains(SignalClass(mild11, 1.0 + 1e-9), Signal(theta))

    @given(st.lists(st.floats(-0.3, 0.3), min_size=2, max_size=2), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_radius(self, coords, r, frac):
        spec = ProblemSpec(SequenceFamily.explicit([1.0, 2.0]), SequenceFamily.direct(), 1.0, 2)
        theta = Signal(coords)
        if class_contains(SignalClass(spec, r), theta):
            assert class_contains(SignalClass(spec, r * frac), theta)


class TestDefaultTruncation:
    def test_tail_budget(self):
        fam = SequenceFamily.polynomial_growth(1.0)
        n = default_truncation(fam, 0.1)
        assert n**-2 <= 1e-3 * 0.01 < (n - 1) ** -2

    def test_explicit_uses_length(self):
        assert default_truncation(SequenceFamily.explicit([1, 2, 3]), 0.5) == 3

    def test_cap(self):
        assert default_truncation(SequenceFamily.polynomial_growth(0.1), 1e-3) == MAX_TRUNCATION
