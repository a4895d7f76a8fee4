import numpy as np
import pytest

from nldenoise.noise import (
    NoiseSpec,
    add_awgn,
    add_box_correlated,
    add_salt_pepper_uniform,
)
from nldenoise.video import Video


def _zeros(shape=(4, 1, 500, 500)):
    return Video(np.zeros(shape, dtype=np.float32))


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            NoiseSpec(kind="poisson", sigma=1.0)

    def test_gaussian_requires_sigma(self):
        with pytest.raises(ValueError, match="sigma"):
            NoiseSpec(kind="awgn")

    def test_sp_requires_fraction(self):
        with pytest.raises(ValueError, match="fraction"):
            NoiseSpec(kind="salt_pepper_uniform")

    def test_exclusive_fields(self):
        with pytest.raises(ValueError):
            NoiseSpec(kind="awgn", sigma=1.0, fraction=0.5)
        with pytest.raises(ValueError):
            NoiseSpec(kind="salt_pepper_uniform", fraction=0.5, sigma=1.0)


class TestAwgn:
    def test_sigma_zero_is_identity(self, small_video):
        assert add_awgn(small_video, 0.0, 7) == small_video

    def test_deterministic(self, small_video):
        a = add_awgn(small_video, 20.0, 3)
        b = add_awgn(small_video, 20.0, 3)
        assert a == b
        assert a != add_awgn(small_video, 20.0, 4)

    def test_sample_std(self):
        v = add_awgn(_zeros(), 20.0, 11)
        assert 19.6 <= v.data.std() <= 20.4

    def test_mean_preserved(self):
        n = 4 * 500 * 500
        v = add_awgn(_zeros(), 20.0, 5)
        assert abs(v.data.mean()) <= 3 * 20.0 / np.sqrt(n)

    def test_frames_independent(self):
        v = add_awgn(_zeros(), 20.0, 13)
        a = v.data[0].reshape(-1).astype(np.float64)
        b = v.data[1].reshape(-1).astype(np.float64)
        rho = np.corrcoef(a, b)[0, 1]
        assert abs(rho) < 0.01

    def test_not_clamped(self):
        v = add_awgn(_zeros((1, 1, 200, 200)), 20.0, 1)
        assert v.data.min() < 0.0


class TestBoxCorrelated:
    def test_sigma_zero_is_identity(self, small_video):
        assert add_box_correlated(small_video, 0.0, 7) == small_video

    def test_interior_std(self):
        v = add_box_correlated(_zeros(), 20.0, 2)
        interior = v.data[:, :, 2:-2, 2:-2]
        assert 19.5 <= interior.std() <= 20.5

    def test_horizontal_neighbor_correlation(self):
        # box windows shifted by one column share 6 of 9 cells
        v = add_box_correlated(_zeros((4, 1, 600, 600)), 20.0, 3)
        interior = v.data[:, :, 2:-2, 2:-2].astype(np.float64)
        a = interior[..., :-1].reshape(-1)
        b = interior[..., 1:].reshape(-1)
        assert a.size >= 10**6
        rho = np.corrcoef(a, b)[0, 1]
        assert abs(rho - 6.0 / 9.0) <= 0.02

    def test_deterministic(self, small_video):
        assert add_box_correlated(small_video, 20.0, 9) == add_box_correlated(
            small_video, 20.0, 9
        )


class TestSaltPepperUniform:
    def test_fraction_zero_is_identity(self, small_video):
        assert add_salt_pepper_uniform(small_video, 0.0, 7) == small_video

    def test_replacement_count(self):
        v = Video(np.full((1, 1, 1000, 1000), 300.0, dtype=np.float32))
        out = add_salt_pepper_uniform(v, 0.25, 17)
        replaced = int(np.count_nonzero(out.data != 300.0))
        assert 247000 <= replaced <= 253000

    def test_full_replacement_in_range(self):
        v = Video(np.full((1, 1, 300, 300), 300.0, dtype=np.float32))
        out = add_salt_pepper_uniform(v, 1.0, 23)
        assert out.data.min() >= 0.0
        assert out.data.max() <= 255.0

    def test_untouched_pixels_exact(self, small_video):
        out = add_salt_pepper_uniform(small_video, 0.3, 5)
        same = out.data == small_video.data
        assert same.any()
        # replaced pixels are uniform draws, everything else is bit-identical
        assert np.all(same | (out.data <= 255.0))

    def test_deterministic(self, small_video):
        assert add_salt_pepper_uniform(small_video, 0.25, 5) == add_salt_pepper_uniform(
            small_video, 0.25, 5
        )


class TestApplyDispatch:
    def test_apply_matches_direct_call(self, small_video):
        spec = NoiseSpec(kind="awgn", sigma=10.0, seed=21)
        assert spec.apply(small_video) == add_awgn(small_video, 10.0, 21)

    def test_seed_override(self, small_video):
        spec = NoiseSpec(kind="awgn", sigma=10.0, seed=21)
        assert spec.apply(small_video, seed=99) == add_awgn(small_video, 10.0, 99)

    def test_tuple_seeds_give_distinct_streams(self, small_video):
        a = add_awgn(small_video, 10.0, (1, 2, 3))
        b = add_awgn(small_video, 10.0, (1, 2, 4))
        assert a != b
