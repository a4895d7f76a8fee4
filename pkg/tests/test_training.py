import numpy as np
import pytest

from nldenoise.network import Network, NetworkConfig
from nldenoise.noise import NoiseSpec
from nldenoise.search import SearchConfig
from nldenoise.synthetic import make_static_clip, make_translating_clip
from nldenoise.training import (
    AdamState,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    log_to_csv,
    lr_for_epoch,
    make_epoch_dataset,
    train,
)
from nldenoise.video import Video


def _toy_cfg(**overrides):
    base = dict(
        noise=NoiseSpec(kind="awgn", sigma=20.0, seed=0),
        search=SearchConfig(patch_size=3, spatial_window=5, temporal_window=3,
                            num_neighbors=3, mode="one_per_frame"),
        network=NetworkConfig(in_channels=3, out_channels=1, stage1_width=4,
                              stage1_depth=2, trunk_width=4, trunk_depth=2),
        crop_size=8,
        batch_size=4,
        batches_per_epoch=3,
        epochs=2,
        lr_schedule=((0, 1e-3),),
        seed=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


def _clips(n=2, t=6, hw=24):
    return [make_static_clip((1, i), t, hw, hw) for i in range(n)]


class TestAdam:
    def test_zero_gradients_leave_params(self):
        params = {"w": np.ones((3, 3), dtype=np.float32)}
        grads = {"w": np.zeros((3, 3), dtype=np.float32)}
        state = AdamState.for_params(params)
        adam_step(params, grads, state, 1e-2)
        assert state.step == 1
        assert np.array_equal(params["w"], np.ones((3, 3), dtype=np.float32))

    def test_matches_scalar_simulation(self):
        rng = np.random.default_rng(0)
        g_seq = rng.standard_normal(50)
        params = {"w": np.array([0.5])}
        state = AdamState.for_params(params)
        # independent scalar re-implementation
        w, m, v = 0.5, 0.0, 0.0
        b1, b2, eps, rate = 0.9, 0.999, 1e-8, 1e-2
        for t, g in enumerate(g_seq, start=1):
            adam_step(params, {"w": np.array([g])}, state, rate)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mh = m / (1 - b1**t)
            vh = v / (1 - b2**t)
            w -= rate * mh / (np.sqrt(vh) + eps)
            assert params["w"][0] == pytest.approx(w, rel=1e-10)

    def test_constant_gradient_step_magnitude_approaches_rate(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params)
        rate = 1e-3
        prev = params["w"][0]
        for _ in range(200):
            adam_step(params, {"w": np.array([2.5])}, state, rate)
        delta = prev - params["w"][0]
        assert abs(delta / 200) == pytest.approx(rate, rel=1e-3)

    def test_deterministic(self):
        def run():
            params = {"w": np.linspace(0, 1, 5)}
            state = AdamState.for_params(params)
            for t in range(20):
                adam_step(params, {"w": np.sin(np.arange(5) + t)}, state, 1e-2)
            return params["w"]

        assert np.array_equal(run(), run())


class TestSchedule:
    def test_paper_schedule(self):
        sched = ((0, 1e-3), (12, 1e-4), (17, 1e-6))
        assert lr_for_epoch(sched, 0) == 1e-3
        assert lr_for_epoch(sched, 11) == 1e-3
        assert lr_for_epoch(sched, 12) == 1e-4
        assert lr_for_epoch(sched, 16) == 1e-4
        assert lr_for_epoch(sched, 17) == 1e-6
        assert lr_for_epoch(sched, 19) == 1e-6

    def test_schedule_must_start_at_zero(self):
        with pytest.raises(ValueError, match="epoch 0"):
            _toy_cfg(lr_schedule=((1, 1e-3),))


class TestEpochDataset:
    def test_temporal_margin_excludes_ends(self):
        clip = make_static_clip(3, 16, 60, 60)
        cfg = _toy_cfg(
            search=SearchConfig(patch_size=3, spatial_window=5, temporal_window=15,
                                num_neighbors=15, mode="one_per_frame"),
            network=NetworkConfig(in_channels=15, out_channels=1, stage1_width=4,
                                  stage1_depth=2, trunk_width=4, trunk_depth=2),
        )
        data = make_epoch_dataset([clip], cfg, epoch=0)
        # only frames 7 and 8 admit the 15-frame window
        assert data.clips[0].features.shape[0] == 2

    def test_fresh_noise_each_epoch_reproducibly(self):
        clips = _clips()
        cfg = _toy_cfg()
        a0 = make_epoch_dataset(clips, cfg, epoch=0)
        b0 = make_epoch_dataset(clips, cfg, epoch=0)
        a1 = make_epoch_dataset(clips, cfg, epoch=1)
        assert np.array_equal(a0.clips[0].features, b0.clips[0].features)
        assert not np.array_equal(a0.clips[0].features, a1.clips[0].features)

    def test_crop_channel_zero_is_noisy_video(self):
        clips = _clips(n=1)
        cfg = _toy_cfg()
        data = make_epoch_dataset(clips, cfg, epoch=0)
        noisy = cfg.noise.apply(clips[0], seed=(cfg.seed, 0, 0))
        rng = np.random.default_rng(0)
        x, y = data.sample_batch(rng, 6)
        assert x.shape == (6, 3, 8, 8)
        assert y.shape == (6, 1, 8, 8)
        # feature channel 0 values all come from the noisy clip
        assert np.all(np.isin(x[:, 0], noisy.data))

    def test_targets_are_noise_residuals(self):
        clips = _clips(n=1)
        cfg = _toy_cfg()
        data = make_epoch_dataset(clips, cfg, epoch=0)
        noisy = cfg.noise.apply(clips[0], seed=(cfg.seed, 0, 0))
        residual = noisy.data - clips[0].data
        hwt = cfg.search.temporal_window // 2
        np.testing.assert_array_equal(
            data.clips[0].targets, residual[hwt : clips[0].frames - hwt]
        )

    def test_no_valid_crops_errors_with_clip_index(self):
        tiny = make_static_clip(5, 3, 10, 10)
        with pytest.raises(ValueError, match="clip 0"):
            make_epoch_dataset([tiny], _toy_cfg(crop_size=44), epoch=0)

    def test_sampling_stays_inside_margins(self):
        clips = _clips(n=1, hw=20)
        cfg = _toy_cfg(crop_size=10)
        data = make_epoch_dataset(clips, cfg, epoch=0)
        clip = data.clips[0]
        # margins: spatial window half-width on each side
        assert clip.y_lo == 2 and clip.x_lo == 2
        assert clip.ny == 20 - 4 - 10 + 1


class TestTrainLoop:
    def test_zero_rate_leaves_weights_at_init(self):
        clips = _clips()
        cfg = _toy_cfg(lr_schedule=((0, 0.0),))
        net, log = train(clips, cfg)
        fresh = Network(cfg.network, seed=np.random.SeedSequence((cfg.seed, (1 << 40) + 1)))
        for name, arr in fresh.named_params().items():
            if name.endswith(("weight", "bias", "gamma", "beta")):
                assert np.array_equal(net.named_params()[name], arr), name

    def test_reproducible_bitwise(self):
        clips = _clips()
        cfg = _toy_cfg()
        net1, log1 = train(clips, cfg)
        net2, log2 = train(clips, cfg)
        for name, arr in net1.named_params().items():
            assert np.array_equal(arr, net2.named_params()[name]), name
        assert [r.train_loss for r in log1] == [r.train_loss for r in log2]

    def test_loss_decreases_on_fixed_batch(self):
        # smoke property: 10 optimizer steps on one batch, at most one non-decrease
        from nldenoise.network import loss_mse, loss_mse_grad
        from nldenoise.training import AdamState, adam_step

        clips = _clips()
        cfg = _toy_cfg(crop_size=16, batch_size=8)
        data = make_epoch_dataset(clips, cfg, epoch=0)
        x, y = data.sample_batch(np.random.default_rng(3), 8)
        net = Network(cfg.network, seed=0)
        state = AdamState.for_params(
            {k: net.named_params()[k] for k in net.trainable_names()}
        )
        losses = []
        for _ in range(10):
            r = net.forward(x, training=True)
            losses.append(loss_mse(r, y))
            net.backward(loss_mse_grad(r, y).astype(np.float32))
            adam_step(
                {k: net.named_params()[k] for k in net.trainable_names()},
                net.named_grads(), state, 1e-3,
            )
        increases = sum(1 for a, b in zip(losses, losses[1:]) if b >= a)
        assert increases <= 1, losses

    def test_validation_psnr_logged(self):
        clips = _clips()
        cfg = _toy_cfg(epochs=1)
        _, log = train(clips, cfg, val_videos=_clips(n=1))
        assert len(log) == 1
        assert np.isfinite(log[0].val_psnr)

    def test_divergence_aborts_with_diagnostic(self):
        clips = _clips()
        cfg = _toy_cfg(lr_schedule=((0, 1e18),), batches_per_epoch=30)
        with pytest.raises(TrainingDiverged, match="epoch 0"):
            train(clips, cfg)

    def test_log_csv_header(self):
        clips = _clips()
        _, log = train(clips, _toy_cfg(epochs=1))
        csv = log_to_csv(log)
        assert csv.startswith("epoch,lr,train_loss,val_psnr")

    def test_translating_clips_train(self):
        clips = [make_translating_clip((2, 0), 6, 24, 24, velocity=(1, 0))]
        net, log = train(clips, _toy_cfg(epochs=1))
        assert np.isfinite(log[0].train_loss)
