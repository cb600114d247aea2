import numpy as np
import pytest

import n2i


def blob(n=64):
    y, x = np.mgrid[:n, :n] - (n - 1) / 2
    return 0.01 * np.exp(-(x**2 + y**2) / (2 * (n / 6) ** 2))


def test_paganin_inverts_propagation():
    t = blob()
    back = n2i.paganin_retrieve(n2i.phase_propagate_forward(t))
    assert np.max(np.abs(back - t)) < 1e-8 * np.max(np.abs(t))


def test_fbp_of_radon_recovers_slice():
    s = blob(64) / 0.01
    angles = n2i.uniform_angles(180)
    rec = n2i.fbp_reconstruct(n2i.radon_forward(s, angles), angles)
    assert rec.shape == s.shape
    assert np.sqrt(np.mean((rec - s) ** 2)) < 0.05


def test_backproject_is_adjoint():
    rng = np.random.default_rng(0)
    angles = n2i.uniform_angles(30)
    x = rng.standard_normal((32, 32))
    y = rng.standard_normal((30, 32))
    lhs = np.sum(n2i.radon_forward(x, angles) * y)
    rhs = np.sum(x * n2i.backproject(y, angles, 32))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_subsample_shapes_and_codes():
    img = np.arange(64.0).reshape(8, 8)
    g1, g2, codes = n2i.subsample(img, seed=3)
    assert g1.shape == g2.shape == codes.shape == (4, 4)
    assert codes.max() < 8
    assert np.all(g1 != g2)


def test_simulate_and_metrics():
    out = n2i.simulate(size=64, rows=16, n_phi=60, seed=1)
    assert out["noisy"].shape == (60, 16, 64)
    assert out["phantom"].shape == (16, 64, 64)
    a = out["clean"][0]
    assert n2i.ssim(a, a) == pytest.approx(1.0)
    assert n2i.psnr(out["noisy"][0], a) > 10


def test_baselines_keep_constants():
    c = np.full((16, 16), 3.5)
    assert np.allclose(n2i.gaussian_filter(c, 2.0), c)
    img, converged, iters = n2i.tv_denoise(c, 0.1, 10)
    assert np.allclose(img, c)


def test_denoiser_and_volume_round_trip(tmp_path):
    d = n2i.Denoiser(depth=2, base_channels=4, seed=2)
    out = d.denoise(blob(30))
    assert out.shape == (30, 30)
    d.save(tmp_path / "m.ckpt")
    assert n2i.Denoiser.load(tmp_path / "m.ckpt").parameter_count == d.parameter_count

    n2i.write_volume(tmp_path / "v.n2ivol", out, "y,x", 2e-4)
    arr, axes, pitch, meta = n2i.read_volume(tmp_path / "v.n2ivol")
    assert axes == "y,x" and pitch == 2e-4 and meta == {}
    assert np.array_equal(arr, out.astype(np.float32))


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        n2i.gamma_schedule(3, "nonsense")
    with pytest.raises(OSError):
        n2i.read_volume("/nonexistent.n2ivol")
    assert n2i.gamma_schedule(50) == 1.0
