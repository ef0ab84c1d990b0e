"""Training loop and loss variants for the tiny denoising network.

One step follows the standard recipe: draw a data point, draw a time, draw
the structured noise, form x_t, evaluate the network through its
preconditioning wrapper, and descend on one of four objectives:

* mse-x0              ||D(x_t; t) - x0||^2 on any denoiser
* noise-pred          ||F(.) - N||^2 on the raw network output
* weighted-noise-pred noise-pred with a mask-derived pixel weight
* x0-pred             ||F(.) - x0||^2 on the raw network output

Losses are plain squared norms (sums, not means).  Gradients come from the
network's explicit backward pass; the optimizers implement their update
rules inline so every arithmetic step is visible to the gradient tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoisers import Denoiser, PreconditionedDenoiser, TinyNetwork, precondition_wrap
from .fields import Field, Rng
from .process import DiffusionProcess, DiracDataset

OBJECTIVES = ("mse-x0", "noise-pred", "weighted-noise-pred", "x0-pred")


@dataclass
class TrainConfig:
    steps: int
    batch: int = 1
    lr: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    objective: str = "noise-pred"
    time_dist: str = "continuous"
    seed: int = 0
    lr_decay: float = 1.0
    lr_decay_every: int = 0
    ema_decay: float = 0.0

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1:
            raise ValueError("steps and batch must be at least 1")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.time_dist not in ("continuous", "discrete"):
            raise ValueError("time_dist must be 'continuous' or 'discrete'")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        params -= self.lr * grad


class Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = None
        self._v = None
        self._k = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self._m is None:
            self._m = np.zeros_like(params)
            self._v = np.zeros_like(params)
        self._k += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad * grad
        m_hat = self._m / (1.0 - self.beta1 ** self._k)
        v_hat = self._v / (1.0 - self.beta2 ** self._k)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _validate_mask(mask: Field, shape) -> np.ndarray:
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match {shape}")
    m = mask.flat()
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValueError("mask entries must be 0 or 1")
    return m


def weight_from_mask(mask: Field, noise: Field) -> Field:
    """Pixel weight 1 + (1-m) * max|m N| / max|(1-m) N|.

    max is over pixels of the absolute value; when the non-mask noise
    maximum is zero the second term is defined as zero.
    """
    m = _validate_mask(mask, noise.shape)
    n = noise.flat()
    num = float(np.max(np.abs(m * n)))
    den = float(np.max(np.abs((1.0 - m) * n)))
    ratio = 0.0 if den == 0.0 else num / den
    return Field((1.0 + (1.0 - m) * ratio).reshape(noise.shape))


def compute_loss(objective: str, den: Denoiser, p: DiffusionProcess,
                 x0: Field, t: float, rng: Rng, mask: Field = None,
                 degraded: Field = None):
    """One-sample loss and parameter gradient.

    Draws the noise internally from rng, so calling twice with identically
    seeded Rng objects reproduces the same (loss, gradient) pair.  Returns a
    zero-length gradient for denoisers without trainable parameters.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    if objective == "weighted-noise-pred" and mask is None:
        raise ValueError("weighted-noise-pred requires a mask")
    conditioning = None
    if p.basis.mode == "sample-dependent":
        if degraded is None:
            raise ValueError("sample-dependent basis requires a degraded partner")
        conditioning = (x0, degraded)

    noise = p.sample_noise(rng, conditioning)
    s, _, sig, _ = p.schedule.evaluate(t)
    x_t = Field(s * x0.flat() + (s * sig) * noise.flat(), shape=p.shape)

    if objective == "mse-x0":
        if isinstance(den, PreconditionedDenoiser):
            f_out, acts = den.net_forward(x_t, t)
            d_out = x_t.flat() / s - sig * f_out \
                if den.objective == "predict-noise" else f_out
            resid = d_out - x0.flat()
            grad = den.net.backward(acts, 2.0 * den.out_gain(t) * resid)
        else:
            resid = den.denoise(x_t, t).flat() - x0.flat()
            grad = np.zeros(0)
        return float(resid @ resid), grad

    if not isinstance(den, PreconditionedDenoiser):
        raise ValueError(f"objective {objective!r} needs a preconditioned network")
    if objective == "x0-pred":
        if den.objective != "predict-x0":
            raise ValueError("x0-pred training requires a predict-x0 wrapper")
        target = x0.flat()
    else:
        if den.objective != "predict-noise":
            raise ValueError("noise-pred training requires a predict-noise wrapper")
        target = noise.flat()

    f_out, acts = den.net_forward(x_t, t)
    resid = f_out - target
    if objective == "weighted-noise-pred":
        w = weight_from_mask(mask, noise).flat()
        loss = float(resid @ (w * resid))
        grad = den.net.backward(acts, 2.0 * w * resid)
    else:
        loss = float(resid @ resid)
        grad = den.net.backward(acts, 2.0 * resid)
    return loss, grad


def _draw_time(rng: Rng, cfg: TrainConfig, T: float) -> float:
    if cfg.time_dist == "continuous":
        # u in [0,1) mapped to (0, T]
        return T * (1.0 - float(rng.uniform()))
    return float(rng.integers(1, int(round(T)) + 1))


def train(net: TinyNetwork, p: DiffusionProcess, ds: DiracDataset,
          cfg: TrainConfig, mask: Field = None):
    """Run the training loop; returns (net, per-step mean loss trace).

    The network is wrapped per the objective (predict-x0 for x0-pred,
    predict-noise otherwise).  All randomness comes from Rng(cfg.seed, 1),
    so a fixed config reproduces its trace exactly.
    """
    if len(ds) < 1:
        raise ValueError("dataset must be nonempty")
    wrap = "predict-x0" if cfg.objective == "x0-pred" else "predict-noise"
    den = precondition_wrap(net, p, wrap)
    if cfg.optimizer == "adam":
        opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    else:
        opt = Sgd(cfg.lr)
    rng = Rng(cfg.seed, 1)
    ema = net.params.copy() if cfg.ema_decay > 0.0 else None

    trace = []
    lr = cfg.lr
    for step in range(cfg.steps):
        loss_sum = 0.0
        grad = np.zeros_like(net.params)
        for _ in range(cfg.batch):
            i = rng.integers(0, len(ds))
            x0 = ds.points[i]
            degraded = ds.degraded[i] if ds.degraded is not None else None
            t = _draw_time(rng, cfg, p.schedule.T)
            loss, g = compute_loss(cfg.objective, den, p, x0, t, rng,
                                   mask=mask, degraded=degraded)
            loss_sum += loss
            grad += g
        mean_loss = loss_sum / cfg.batch
        if not np.isfinite(mean_loss):
            raise RuntimeError(f"non-finite loss {mean_loss} at step {step}")
        if cfg.lr_decay_every > 0 and step > 0 and step % cfg.lr_decay_every == 0:
            lr *= cfg.lr_decay
            opt.lr = lr
        opt.step(net.params, grad / cfg.batch)
        if ema is not None:
            ema = cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * net.params
        trace.append(mean_loss)
    if ema is not None:
        net.params[:] = ema
    return net, trace


def write_loss_trace(trace, path) -> None:
    """CSV with header step,loss; floats via repr for stable round-trips."""
    lines = ["step,loss"]
    lines += [f"{i},{repr(v)}" for i, v in enumerate(trace)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
