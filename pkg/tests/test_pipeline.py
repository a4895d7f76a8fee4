import numpy as np
import pytest

from nldenoise.metrics import psnr
from nldenoise.network import Network, NetworkConfig
from nldenoise.noise import add_awgn
from nldenoise.pipeline import compute_features, denoise_sequence, nl_mean_sequence
from nldenoise.search import SearchConfig
from nldenoise.synthetic import make_static_clip
from nldenoise.video import Video


def _cfg(wt=3):
    return SearchConfig(patch_size=3, spatial_window=5, temporal_window=wt,
                        num_neighbors=wt, mode="one_per_frame")


class TestDenoiseSequence:
    def test_zero_network_identity(self, small_video):
        net = Network(NetworkConfig(in_channels=3, out_channels=1, stage1_width=4,
                                    stage1_depth=2, trunk_width=4, trunk_depth=2), seed=0)
        out_conv = net.layers[-1]
        out_conv.w[...] = 0.0
        out_conv.b[...] = 0.0
        out = denoise_sequence(small_video, net, _cfg())
        assert out == small_video

    def test_channel_mismatch_mentions_both(self, small_video):
        net = Network(NetworkConfig(in_channels=5, out_channels=1, stage1_width=4,
                                    stage1_depth=2, trunk_width=4, trunk_depth=2), seed=0)
        with pytest.raises(ValueError) as err:
            denoise_sequence(small_video, net, _cfg())
        assert "5" in str(err.value) and "3" in str(err.value)

    def test_no_patch_skips_search(self, small_video):
        net = Network(NetworkConfig(in_channels=1, out_channels=1, trunk_width=4,
                                    trunk_depth=2, no_patch=True), seed=0)
        out = denoise_sequence(small_video, net, _cfg(), frames=[2])
        assert out.frames == 1

    def test_frame_subset(self, small_video):
        net = Network(NetworkConfig(in_channels=3, out_channels=1, stage1_width=4,
                                    stage1_depth=2, trunk_width=4, trunk_depth=2), seed=0)
        full = denoise_sequence(small_video, net, _cfg())
        sub = denoise_sequence(small_video, net, _cfg(), frames=[1, 3])
        assert np.array_equal(sub.data[0], full.data[1])
        assert np.array_equal(sub.data[1], full.data[3])


class TestFeaturesAndMean:
    def test_compute_features_no_patch_is_video(self, small_video):
        feats = compute_features(small_video, _cfg(), no_patch=True)
        assert np.array_equal(feats, small_video.data)

    def test_nl_mean_improves_static_noisy_clip(self):
        clean = make_static_clip(11, 7, 40, 40)
        noisy = add_awgn(clean, 20.0, 3)
        out = nl_mean_sequence(noisy, _cfg(wt=7), frames=[3])
        assert psnr(clean.data[3], out.data[0]) > psnr(clean.data[3], noisy.data[3]) + 4.0
