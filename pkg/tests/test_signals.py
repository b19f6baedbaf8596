import numpy as np
import pytest

from spectralsr.signals import (
    Dataset,
    FrequencyScene,
    SceneConfig,
    minmax_normalize,
    read_dataset,
    read_records,
    render_target,
    sample_scene,
    scenes_from_json,
    scenes_to_json,
    spectrum_grid,
    synthesize,
    wrapped_distance,
    write_dataset,
    write_records,
)


def test_wrapped_distance_basic_and_wraparound():
    assert wrapped_distance(0.1, 0.3) == pytest.approx(0.2)
    assert wrapped_distance(-0.49, 0.49) == pytest.approx(0.02)
    assert wrapped_distance(0.25, 0.25) == 0.0


def test_scene_validates_shapes():
    with pytest.raises(ValueError):
        FrequencyScene([0.1, 0.2], [1.0])
    with pytest.raises(ValueError):
        FrequencyScene([], [])


def test_sample_scene_respects_config():
    cfg = SceneConfig(l_min=3, l_max=5, n_sr=256, min_separation=0.01)
    rng = np.random.default_rng(0)
    for _ in range(50):
        scene = sample_scene(rng, cfg)
        assert 3 <= scene.count <= 5
        assert np.all(scene.freqs >= -0.5) and np.all(scene.freqs < 0.5)
        mods = np.abs(scene.amps)
        assert np.all(mods >= 0.1 - 1e-12) and np.all(mods <= 1.0 + 1e-12)
        f = scene.freqs
        for i in range(len(f)):
            for j in range(i + 1, len(f)):
                assert wrapped_distance(f[i], f[j]) >= 0.01


def test_sample_scene_infeasible_spacing_raises():
    # 10 tones at spacing 0.2 cannot fit on the unit circle
    cfg = SceneConfig(l_min=10, l_max=10, min_separation=0.2, max_tries=200)
    with pytest.raises(RuntimeError, match="scene sampling failed"):
        sample_scene(np.random.default_rng(1), cfg)


def test_synthesize_noiseless_matches_oracle():
    scene = FrequencyScene([0.11, -0.27], [1.0 + 0.5j, 0.3j])
    s = synthesize(scene, 32)
    t = np.arange(32)
    ref = (1.0 + 0.5j) * np.exp(2j * np.pi * 0.11 * t) + 0.3j * np.exp(
        2j * np.pi * -0.27 * t
    )
    assert np.allclose(s, ref, atol=1e-12)


def test_synthesize_realizes_requested_snr():
    scene = FrequencyScene([0.123], [1.0])
    rng = np.random.default_rng(2)
    n = 20000
    noisy = synthesize(scene, n, snr_db=10.0, rng=rng)
    clean = synthesize(scene, n)
    snr_hat = np.mean(np.abs(clean) ** 2) / np.mean(np.abs(noisy - clean) ** 2)
    assert 10.0 * np.log10(snr_hat) == pytest.approx(10.0, abs=0.2)


def test_synthesize_needs_rng_for_noise():
    scene = FrequencyScene([0.1], [1.0])
    with pytest.raises(ValueError):
        synthesize(scene, 16, snr_db=5.0)


def test_spectrum_grid_endpoints():
    g = spectrum_grid(8)
    assert g[0] == -0.5
    assert g[-1] == pytest.approx(0.5 - 1.0 / 8)


def test_render_target_peak_height_and_width():
    n_sr = 512
    grid = spectrum_grid(n_sr)
    f = grid[100]  # exactly on a bin
    scene = FrequencyScene([f], [0.7j])  # modulus 0.7
    sigma = 2.0 / n_sr
    target = render_target(scene, n_sr, sigma_f=sigma)
    assert target[100] == pytest.approx(0.7, rel=1e-6)
    # one sigma away the lobe is down by exp(-1/2)
    d = wrapped_distance(grid, f)
    k = int(np.argmin(np.abs(d - sigma)))
    assert target[k] == pytest.approx(0.7 * np.exp(-0.5), rel=1e-2)


def test_render_target_wraps_across_band_edge():
    n_sr = 256
    scene = FrequencyScene([-0.5], [1.0])
    target = render_target(scene, n_sr, sigma_f=4.0 / n_sr)
    # the lobe should be symmetric around bin 0 through wraparound
    assert target[-1] == pytest.approx(target[1], rel=1e-10)


def test_minmax_normalize_contract():
    rng = np.random.default_rng(3)
    x = rng.normal(size=16) + 1j * rng.normal(size=16)
    y = minmax_normalize(x)
    assert abs(y.mean()) < 1e-12
    assert np.abs(y).max() == pytest.approx(1.0)
    assert np.allclose(minmax_normalize(y), y, atol=1e-12)  # idempotent
    assert np.all(minmax_normalize(np.full(8, 3.0 + 1j)) == 0)


def test_scene_json_round_trip():
    scenes = [
        FrequencyScene([0.1, -0.2], [1.0 + 2j, -0.5]),
        FrequencyScene([0.33], [0.25j]),
    ]
    text = scenes_to_json(scenes, note="x")
    back, payload = scenes_from_json(text)
    assert payload["note"] == "x"
    for a, b in zip(scenes, back):
        assert np.allclose(a.freqs, b.freqs)
        assert np.allclose(a.amps, b.amps)


def test_records_round_trip_complex_and_real(tmp_path):
    rng = np.random.default_rng(4)
    cpx = rng.normal(size=(3, 8)) + 1j * rng.normal(size=(3, 8))
    real = rng.normal(size=(2, 5))
    p1, p2 = tmp_path / "c.bin", tmp_path / "r.bin"
    write_records(p1, cpx)
    write_records(p2, real)
    assert np.array_equal(read_records(p1), cpx)
    assert np.array_equal(read_records(p2), real)


def test_read_records_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="bad magic"):
        read_records(p)


def test_read_records_detects_truncation(tmp_path):
    p = tmp_path / "t.bin"
    write_records(p, np.ones((2, 4)))
    raw = p.read_bytes()
    p.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="payload bytes"):
        read_records(p)


def test_dataset_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    scenes = [FrequencyScene([0.1], [1.0]), FrequencyScene([0.2, 0.3], [1j, 2.0])]
    signals = rng.normal(size=(2, 16)) + 1j * rng.normal(size=(2, 16))
    path = tmp_path / "d.bin"
    write_dataset(path, Dataset(scenes, signals, {"snr_db": 20.0}))
    back = read_dataset(path)
    assert back.meta["snr_db"] == 20.0
    assert np.array_equal(back.signals, signals)
    assert len(back.scenes) == 2
    assert np.allclose(back.scenes[1].amps, [1j, 2.0])
