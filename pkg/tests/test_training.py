import numpy as np
import pytest

from basisdiff.denoisers import (ConstantDenoiser, DiracMixtureDenoiser,
                                 TinyNetwork, precondition_wrap)
from basisdiff.fields import Field, Rng
from basisdiff.process import DiffusionProcess, DiracDataset
from basisdiff.schedules import make_vp_schedule
from basisdiff.bases import pixel_basis
from basisdiff.training import (Adam, Sgd, TrainConfig, compute_loss, train,
                                weight_from_mask, write_loss_trace)


def _pixel_process(d=2, eta=0.0):
    return DiffusionProcess(make_vp_schedule(), pixel_basis((d,)), eta)


def test_weight_from_mask_frozen_example():
    w = weight_from_mask(Field([1.0, 0.0]), Field([2.0, 0.5]))
    assert np.array_equal(w.values, [1.0, 5.0])


def test_weight_from_mask_division_guard():
    w = weight_from_mask(Field([1.0, 0.0]), Field([2.0, 0.0]))
    assert np.array_equal(w.values, [1.0, 1.0])


def test_weight_from_mask_validation():
    with pytest.raises(ValueError):
        weight_from_mask(Field([0.5, 0.0]), Field([1.0, 1.0]))
    with pytest.raises(ValueError):
        weight_from_mask(Field([1.0]), Field([1.0, 1.0]))


def test_config_validation():
    TrainConfig(steps=1, lr=0.0)  # zero rate is legal
    with pytest.raises(ValueError):
        TrainConfig(steps=0)
    with pytest.raises(ValueError):
        TrainConfig(steps=1, batch=0)
    with pytest.raises(ValueError):
        TrainConfig(steps=1, lr=-1e-3)
    with pytest.raises(ValueError):
        TrainConfig(steps=1, objective="nope")
    with pytest.raises(ValueError):
        TrainConfig(steps=1, time_dist="sometimes")
    with pytest.raises(ValueError):
        TrainConfig(steps=1, optimizer="lbfgs")


def test_sgd_and_adam_single_step():
    params = np.array([1.0, -2.0])
    grad = np.array([0.5, 0.25])
    Sgd(0.1).step(params, grad)
    assert np.allclose(params, [1.0 - 0.05, -2.0 - 0.025], rtol=1e-15)
    params = np.array([1.0, -2.0])
    opt = Adam(0.1, eps=1e-8)
    opt.step(params, grad)
    # first step with bias correction: update = lr * g / (|g| + eps)
    expect = np.array([1.0, -2.0]) - 0.1 * grad / (np.abs(grad) + 1e-8)
    assert np.allclose(params, expect, rtol=1e-12)


def test_mse_x0_on_parameterless_denoiser():
    p = _pixel_process()
    x0 = Field([0.5, -0.5])
    loss, grad = compute_loss("mse-x0", ConstantDenoiser(x0), p, x0, 40.0, Rng(1))
    assert loss == 0.0 and grad.size == 0


def test_objective_wrapper_pairing_enforced():
    p = _pixel_process()
    x0 = Field([0.0, 0.0])
    noise_den = precondition_wrap(TinyNetwork([3, 4, 2], Rng(2)), p, "predict-noise")
    x0_den = precondition_wrap(TinyNetwork([3, 4, 2], Rng(2)), p, "predict-x0")
    with pytest.raises(ValueError):
        compute_loss("x0-pred", noise_den, p, x0, 10.0, Rng(3))
    with pytest.raises(ValueError):
        compute_loss("noise-pred", x0_den, p, x0, 10.0, Rng(3))
    with pytest.raises(ValueError):
        compute_loss("weighted-noise-pred", noise_den, p, x0, 10.0, Rng(3))
    with pytest.raises(ValueError):
        compute_loss("noise-pred", ConstantDenoiser(x0), p, x0, 10.0, Rng(3))
    with pytest.raises(ValueError):
        compute_loss("banana", noise_den, p, x0, 10.0, Rng(3))


def test_compute_loss_reproducible_from_seed():
    p = _pixel_process()
    den = precondition_wrap(TinyNetwork([3, 6, 2], Rng(4)), p, "predict-noise")
    x0 = Field([0.7, 0.1])
    a = compute_loss("noise-pred", den, p, x0, 35.0, Rng(5))
    b = compute_loss("noise-pred", den, p, x0, 35.0, Rng(5))
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


def test_zero_mask_weight_reduces_to_plain_loss():
    p = _pixel_process()
    den = precondition_wrap(TinyNetwork([3, 6, 2], Rng(6)), p, "predict-noise")
    x0 = Field([0.3, -0.2])
    mask = Field([0.0, 0.0])
    plain = compute_loss("noise-pred", den, p, x0, 22.0, Rng(7))
    weighted = compute_loss("weighted-noise-pred", den, p, x0, 22.0, Rng(7),
                            mask=mask)
    assert plain[0] == weighted[0]
    assert np.array_equal(plain[1], weighted[1])


@pytest.mark.parametrize("objective,wrap,masked", [
    ("mse-x0", "predict-noise", False),
    ("noise-pred", "predict-noise", False),
    ("weighted-noise-pred", "predict-noise", True),
    ("x0-pred", "predict-x0", False),
])
def test_loss_gradient_matches_finite_differences(objective, wrap, masked):
    p = _pixel_process(3)
    net = TinyNetwork([4, 5, 3], Rng(8))
    den = precondition_wrap(net, p, wrap)
    x0 = Field([0.4, -0.6, 0.2])
    mask = Field([1.0, 0.0, 0.0]) if masked else None
    t = 47.0

    def loss_at(seed=99):
        return compute_loss(objective, den, p, x0, t, Rng(seed), mask=mask)

    _, grad = loss_at()
    h = 1e-6
    idx = Rng(9).integers(0, net.n_params, 10)
    for i in idx:
        keep = net.params[i]
        net.params[i] = keep + h
        up = loss_at()[0]
        net.params[i] = keep - h
        dn = loss_at()[0]
        net.params[i] = keep
        fd = (up - dn) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_training_reduces_loss():
    p = _pixel_process(2)
    ds = DiracDataset([Field([0.6, -0.3])])
    net = TinyNetwork([3, 10, 2], Rng(10))
    cfg = TrainConfig(steps=800, batch=2, lr=5e-3, objective="noise-pred", seed=1)
    _, trace = train(net, p, ds, cfg)
    assert len(trace) == 800
    assert np.mean(trace[-100:]) < np.mean(trace[:100])


def test_zero_learning_rate_is_a_no_op():
    p = _pixel_process(2)
    ds = DiracDataset([Field([0.6, -0.3])])
    net = TinyNetwork([3, 6, 2], Rng(11))
    before = net.params.copy()
    train(net, p, ds, TrainConfig(steps=20, lr=0.0, seed=2))
    assert np.array_equal(net.params, before)


def test_training_reproducible_from_seed():
    p = _pixel_process(2)
    ds = DiracDataset([Field([0.1, 0.9]), Field([-0.4, 0.2])])

    def run():
        net = TinyNetwork([3, 8, 2], Rng(12))
        cfg = TrainConfig(steps=60, batch=3, lr=2e-3, objective="x0-pred", seed=5)
        return train(net, p, ds, cfg)

    (net_a, trace_a), (net_b, trace_b) = run(), run()
    assert trace_a == trace_b
    assert np.array_equal(net_a.params, net_b.params)


def test_training_options_smoke():
    # sgd + discrete times + decay + averaged snapshot all run end to end
    p = _pixel_process(2)
    ds = DiracDataset([Field([0.5, 0.5])])
    net = TinyNetwork([3, 6, 2], Rng(13))
    cfg = TrainConfig(steps=40, lr=1e-3, optimizer="sgd", time_dist="discrete",
                      lr_decay=0.5, lr_decay_every=10, ema_decay=0.9, seed=6)
    _, trace = train(net, p, ds, cfg)
    assert len(trace) == 40 and np.all(np.isfinite(trace))
    assert np.all(np.isfinite(net.params))


def test_masked_training_smoke():
    p = _pixel_process(2)
    ds = DiracDataset([Field([0.5, -0.5])])
    net = TinyNetwork([3, 6, 2], Rng(14))
    cfg = TrainConfig(steps=30, objective="weighted-noise-pred", seed=7)
    _, trace = train(net, p, ds, cfg, mask=Field([1.0, 0.0]))
    assert len(trace) == 30 and np.all(np.isfinite(trace))


def test_trained_network_cannot_beat_exact_posterior_mean():
    # the posterior-mean denoiser minimizes expected mse-x0; a trained net
    # must not fall below it beyond Monte Carlo resolution
    p = _pixel_process(2)
    pts = [Field([0.8, 0.0]), Field([-0.8, 0.4])]
    ds = DiracDataset(pts)
    net = TinyNetwork([3, 10, 2], Rng(15))
    train(net, p, ds, TrainConfig(steps=500, lr=3e-3, objective="noise-pred",
                                  seed=8))
    net_den = precondition_wrap(net, p, "predict-noise")
    exact_den = DiracMixtureDenoiser(ds, p)
    rng = Rng(16)
    diffs = []
    for k in range(3000):
        x0 = pts[k % 2]
        t = 100.0 * (1.0 - float(rng.uniform()))
        seed = 1000 + k
        l_net, _ = compute_loss("mse-x0", net_den, p, x0, t, Rng(seed))
        l_exact, _ = compute_loss("mse-x0", exact_den, p, x0, t, Rng(seed))
        diffs.append(l_net - l_exact)
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / np.sqrt(diffs.size)
    assert diffs.mean() > -2.0 * se


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts():
    p = _pixel_process(2)
    ds = DiracDataset([Field([0.5, 0.5])])
    net = TinyNetwork([3, 6, 2], Rng(17))
    net.params[:] = 1e200  # forces overflow in the forward pass
    with pytest.raises(RuntimeError):
        train(net, p, ds, TrainConfig(steps=5, seed=9))


def test_write_loss_trace(tmp_path):
    path = tmp_path / "loss.csv"
    write_loss_trace([1.5, 0.25], path)
    lines = path.read_text().splitlines()
    assert lines == ["step,loss", "0,1.5", "1,0.25"]
