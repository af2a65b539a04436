import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from blockquant.montecarlo import SimulationConfig, simulate_error_pair
from blockquant.formats import Format
from blockquant.tensorio import (
    MAGIC,
    MagicMismatchError,
    NonFiniteValueError,
    RaggedCSVError,
    TensorFormatError,
    TruncatedTensorError,
    WeightTensor,
    analyze_layer_pair,
    layer_pair_errors,
    load_tensor,
    save_tensor,
    synthetic_layer_pair,
)

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


class TestRawbin:
    def test_layout(self, tmp_path):
        path = tmp_path / "t.bin"
        save_tensor(np.array([[1.0, -2.0, 0.5]], dtype=np.float32), path)
        raw = path.read_bytes()
        assert raw[:8] == b"BQTENSR1"
        assert struct.unpack("<QQ", raw[8:24]) == (1, 3)
        assert struct.unpack("<3f", raw[24:]) == (1.0, -2.0, 0.5)

    @given(arrays(np.float32, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=f32))
    def test_round_trip_bit_exact(self, x):
        import tempfile, os
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "x.bin")
            save_tensor(WeightTensor("x", x), path)
            t = load_tensor(path)
        assert t.values.dtype == np.float32 and t.shape == x.shape
        assert t.values.tobytes() == x.astype("<f4").tobytes()
        assert t.name == "x"

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.bin"
        save_tensor(np.ones((3, 4), dtype=np.float32), path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(TruncatedTensorError, match=r"expected 48 bytes.*got 43"):
            load_tensor(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.bin"
        path.write_bytes(MAGIC + b"\x01")
        with pytest.raises(TruncatedTensorError):
            load_tensor(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.bin"
        path.write_bytes(b"NOTATENS" + struct.pack("<QQ", 1, 1) + b"\0\0\0\0")
        with pytest.raises(MagicMismatchError):
            load_tensor(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "t.bin"
        save_tensor(np.ones((1, 2), dtype=np.float32), path)
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(TensorFormatError, match="trailing"):
            load_tensor(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "t.bin"
        path.write_bytes(MAGIC + struct.pack("<QQ", 1, 2) + struct.pack("<2f", 1.0, math.inf))
        with pytest.raises(NonFiniteValueError, match="col 1"):
            load_tensor(path)

    def test_distinct_error_types(self):
        kinds = {MagicMismatchError, TruncatedTensorError, RaggedCSVError, NonFiniteValueError}
        assert len(kinds) == 4 and all(issubclass(k, TensorFormatError) for k in kinds)


class TestCsv:
    def test_example(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0,2.0\n3.0,4.0")
        t = load_tensor(path)
        assert t.shape == (2, 2)
        assert t.values.ravel().tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_ragged(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(RaggedCSVError, match=":2:"):
            load_tensor(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,nan\n")
        with pytest.raises(NonFiniteValueError):
            load_tensor(path)

    def test_garbage_and_empty(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,abc\n")
        with pytest.raises(TensorFormatError):
            load_tensor(path)
        path.write_text("\n\n")
        with pytest.raises(TensorFormatError):
            load_tensor(path)

    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
    def test_round_trip_value_exact(self, x):
        import tempfile, os
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "x.csv")
            save_tensor(x, path)
            np.testing.assert_array_equal(load_tensor(path).values, x)

    def test_explicit_format(self, tmp_path):
        path = tmp_path / "data.txt"
        save_tensor(np.eye(2), path, fmt="csv")
        np.testing.assert_array_equal(load_tensor(path, "csv").values, np.eye(2))
        with pytest.raises(ValueError):
            load_tensor(path, "npy")


class TestWeightTensor:
    def test_invariants(self):
        with pytest.raises(ValueError):
            WeightTensor("v", np.ones(3))
        with pytest.raises(NonFiniteValueError):
            WeightTensor("v", np.array([[np.nan]]))


class TestLayerPair:
    def test_synthetic_within_bounds(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((64, 6400))
        b = rng.standard_normal((6400, 64))
        r = analyze_layer_pair(a, b, 64, 4)
        assert r.samples == 64 * 100
        for var, bound in ((r.var_sbfp, r.bound_sbfp), (r.var_bfp, r.bound_bfp)):
            assert var <= bound * (1 + 3 * r.rel_std_error)
        assert r.rho == r.var_bfp / r.var_sbfp

    def test_representable_zero_errors(self):
        rng = np.random.default_rng(1)
        m = rng.integers(-7, 8, size=(8, 32))
        m[:, ::4] = 7  # every block of 4 hits alpha
        a = 0.25 * m
        es, eb = layer_pair_errors(a, a.T.copy(), 4, 4)
        assert es.size == 8 * 8
        assert not np.any(es) and not np.any(eb)

    def test_diagonal_pairing(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 8))
        b = rng.standard_normal((8, 5))
        es, _ = layer_pair_errors(a, b, 4, 4)
        from blockquant.formats import BlockFormatSpec, dot_error
        spec = BlockFormatSpec("sbfp", 4, 4)
        ref = [dot_error(a[i, j:j + 4], b[j:j + 4, i], spec) for i in range(3) for j in (0, 4)]
        np.testing.assert_allclose(es, ref, rtol=1e-12, atol=1e-14)

    def test_tail_columns_ignored(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 10))
        b = rng.standard_normal((10, 4))
        assert analyze_layer_pair(a, b, 4, 4).samples == 4 * 2

    def test_few_blocks_exposed(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((4, 6400))
        b = rng.standard_normal((6400, 4))
        small, big = analyze_layer_pair(a, b, 16, 4), analyze_layer_pair(a, b, 2048, 4)
        assert big.samples == 12 and small.samples == 1600
        assert big.rel_std_error > 10 * small.rel_std_error
        with pytest.raises(ValueError):
            analyze_layer_pair(a[:1], b[:, :1], 4096, 4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="inner"):
            analyze_layer_pair(np.ones((3, 8)), np.ones((7, 3)), 4, 4)

    def test_center(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((16, 256))
        b = rng.standard_normal((256, 16))
        shifted = analyze_layer_pair(a + 3.0, b - 1.0, 32, 4, center=True)
        plain = analyze_layer_pair(a - a.mean(), b - b.mean(), 32, 4)
        assert shifted.sigma_a == pytest.approx(plain.sigma_a, rel=1e-12)
        assert shifted.var_sbfp == pytest.approx(plain.var_sbfp, rel=1e-6)

    def test_sigma_estimate(self):
        a, b = synthetic_layer_pair(0, seed=7, rows=200, inner=6400, sigma=0.05)
        r = analyze_layer_pair(a, b, 64, 4)
        assert abs(r.sigma_a / 0.05 - 1) < 0.01 and abs(r.sigma_b / 0.05 - 1) < 0.01

    def test_matches_monte_carlo(self):
        a, b = synthetic_layer_pair(3, rows=1600, inner=6400)
        r = analyze_layer_pair(a, b, 64, 4)
        mc = simulate_error_pair(SimulationConfig("sbfp", 64, 4, trials=100_000, seed=99))
        for kind, var in ((Format.SBFP, r.var_sbfp), (Format.BFP, r.var_bfp)):
            se_layer = var * r.rel_std_error
            se_mc = mc[kind].std_error_of_variance / 64
            assert abs(var - mc[kind].variance / 64) <= 3 * math.hypot(se_layer, se_mc)

    def test_synthetic_shapes_and_determinism(self):
        a, b = synthetic_layer_pair(1, seed=2, rows=16, inner=64)
        assert a.shape == (16, 64) and b.shape == (64, 16)
        assert a.values.dtype == np.float32
        a2, _ = synthetic_layer_pair(1, seed=2, rows=16, inner=64)
        c, _ = synthetic_layer_pair(2, seed=2, rows=16, inner=64)
        assert np.array_equal(a.values, a2.values) and not np.array_equal(a.values, c.values)
