import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from provekit.averaging import (Checkpoint, average, digest, read_checkpoint,
                                sweep, write_checkpoint)
from provekit.errors import (AlphaOutOfRange, DigestMismatch, FormatError,
                             KeyMismatch, ShapeMismatch)


def random_checkpoint(seed, shapes=((4,), (2, 3), (2, 2, 2))):
    rng = np.random.default_rng(seed)
    return Checkpoint({
        f"layer{i}.weight": rng.normal(size=s).astype(np.float32)
        for i, s in enumerate(shapes)
    })


@pytest.fixture
def pair():
    return random_checkpoint(0), random_checkpoint(1)


class TestAverage:
    def test_midpoint_is_elementwise_mean(self, pair):
        base, tuned = pair
        mid = average(base, tuned, 0.5)
        for name in base.tensors:
            expected = (base.tensors[name].astype(np.float64)
                        + tuned.tensors[name].astype(np.float64)) / 2
            np.testing.assert_allclose(mid.tensors[name], expected, rtol=1e-6)

    def test_endpoints_bitwise(self, pair):
        base, tuned = pair
        for alpha, src in ((0.0, base), (1.0, tuned)):
            out = average(base, tuned, alpha)
            for name in src.tensors:
                assert out.tensors[name].tobytes() == src.tensors[name].tobytes()

    @given(st.integers(0, 16).map(lambda k: k / 16))
    @settings(max_examples=17, deadline=None)
    def test_commutation(self, alpha):
        base, tuned = random_checkpoint(0), random_checkpoint(1)
        ab = average(base, tuned, alpha)
        ba = average(tuned, base, 1.0 - alpha)
        for name in ab.tensors:
            np.testing.assert_array_equal(ab.tensors[name], ba.tensors[name])

    def test_metadata_records_parents(self, pair):
        base, tuned = pair
        out = average(base, tuned, 0.7)
        assert out.metadata["alpha"] == repr(0.7)
        assert out.metadata["base_digest"] == digest(base)
        assert out.metadata["tuned_digest"] == digest(tuned)

    def test_alpha_range(self, pair):
        base, tuned = pair
        for bad in (-0.1, 1.1):
            with pytest.raises(AlphaOutOfRange):
                average(base, tuned, bad)

    def test_key_mismatch(self, pair):
        base, _ = pair
        other = random_checkpoint(1, shapes=((4,),))
        with pytest.raises(KeyMismatch):
            average(base, other, 0.5)

    def test_shape_mismatch(self, pair):
        base, _ = pair
        other = random_checkpoint(1, shapes=((5,), (2, 3), (2, 2, 2)))
        with pytest.raises(ShapeMismatch):
            average(base, other, 0.5)

    def test_sweep(self, pair):
        base, tuned = pair
        out = sweep(base, tuned, [0.6, 0.7, 0.8, 0.9])
        assert [c.metadata["alpha"] for c in out] == ["0.6", "0.7", "0.8", "0.9"]

    def test_non_float32_rejected(self):
        with pytest.raises(FormatError):
            Checkpoint({"w": np.zeros(3, dtype=np.float64)})


class TestFileFormat:
    def test_round_trip_bit_exact(self, pair, tmp_path):
        base, _ = pair
        path = tmp_path / "ckpt.gpck"
        write_checkpoint(base, path)
        back = read_checkpoint(path)
        assert digest(back) == digest(base)
        assert list(back.tensors) == list(base.tensors)
        for name in base.tensors:
            assert back.tensors[name].tobytes() == base.tensors[name].tobytes()
            assert back.tensors[name].shape == base.tensors[name].shape

    def test_write_is_deterministic(self, pair, tmp_path):
        base, _ = pair
        p1, p2 = tmp_path / "a.gpck", tmp_path / "b.gpck"
        write_checkpoint(base, p1)
        write_checkpoint(base, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic(self, pair, tmp_path):
        base, _ = pair
        path = tmp_path / "ckpt.gpck"
        write_checkpoint(base, path)
        assert path.read_bytes()[:4] == b"GPCK"

    def test_metadata_survives(self, pair, tmp_path):
        base, tuned = pair
        out = average(base, tuned, 0.7)
        path = tmp_path / "avg.gpck"
        write_checkpoint(out, path)
        assert read_checkpoint(path).metadata == out.metadata

    def test_corrupt_payload_detected(self, pair, tmp_path):
        base, _ = pair
        path = tmp_path / "ckpt.gpck"
        write_checkpoint(base, path)
        blob = bytearray(path.read_bytes())
        blob[-40] ^= 0xFF  # flip a payload byte, not the digest itself
        path.write_bytes(bytes(blob))
        with pytest.raises(DigestMismatch):
            read_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.gpck"
        path.write_bytes(b"NOPE" + bytes(60))
        with pytest.raises(FormatError) as err:
            read_checkpoint(path)
        assert err.value.offset == 0

    def test_truncated_file(self, pair, tmp_path):
        base, _ = pair
        path = tmp_path / "ckpt.gpck"
        write_checkpoint(base, path)
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(FormatError):
            read_checkpoint(path)

    def test_digest_covers_whole_file(self, pair, tmp_path):
        base, _ = pair
        path = tmp_path / "ckpt.gpck"
        write_checkpoint(base, path)
        blob = path.read_bytes()
        assert blob[-32:] == hashlib.sha256(blob[:-32]).digest()
