"""Denoisers D(x; t) -> x0 estimate, and the tiny trainable network behind them.

Three variants share one calling convention:

* constant-oracle: returns a fixed field (the conditional optimum when the
  data distribution is a single point).
* analytic-dirac: the exact posterior mean under a finite point dataset,
  computed with log-stabilized mixture weights.
* preconditioned-network: wraps a small fully-connected network F through
  skip/scale coefficients so that either "F predicts the diffused noise" or
  "F predicts x0 directly" yields a denoiser.

The network is plain numpy with explicit backpropagation; no autodiff.
"""

from __future__ import annotations

import struct

import numpy as np

from .bases import CovarianceOp
from .fields import Field, Rng, field_from_bytes, field_to_bytes
from .process import DiffusionProcess, DiracDataset


class Denoiser:
    variant = "abstract"

    def denoise(self, x: Field, t: float) -> Field:
        raise NotImplementedError


class ConstantDenoiser(Denoiser):
    """D(x; t) = y for every input; realizes the single-point optimum."""

    variant = "constant-oracle"

    def __init__(self, y: Field):
        self.y = y

    def denoise(self, x: Field, t: float) -> Field:
        if x.shape != self.y.shape:
            raise ValueError(f"shape mismatch: {x.shape} vs {self.y.shape}")
        return self.y


class DiracMixtureDenoiser(Denoiser):
    """Exact posterior mean sum_i w_i y_i under a finite point dataset."""

    variant = "analytic-dirac"

    def __init__(self, dataset: DiracDataset, process: DiffusionProcess):
        if process.basis.mode != "fixed":
            raise ValueError("analytic denoiser requires a fixed-mode basis")
        if dataset.shape != process.shape:
            raise ValueError("dataset shape does not match the process")
        self.dataset = dataset
        self.process = process
        self._cov_op = CovarianceOp(process.basis)

    def denoise(self, x: Field, t: float) -> Field:
        w, pts, _ = self.process._dirac_log_weights(
            self.dataset, t, x.flat(), self._cov_op)
        return Field((w @ pts).reshape(self.process.shape))

    def denoise_batch(self, states: np.ndarray, t: float) -> np.ndarray:
        """(n, d) -> (n, d) posterior means; vectorized Monte Carlo path."""
        p = self.process
        s, _, sig, _ = p.schedule.evaluate(t)
        rows = p.basis.elements(None)
        shift = (p.eta * s * sig / (p.eta + 1.0)) * rows.sum(axis=0)
        cov_scale = (s * sig / (p.eta + 1.0)) ** 2
        if cov_scale == 0.0:
            raise ValueError("mixture weights undefined at sigma = 0")
        pts = self.dataset.stacked()
        quad = np.empty((states.shape[0], pts.shape[0]))
        for i, y in enumerate(pts):
            r = states - s * y[None, :] - shift[None, :]
            quad[:, i] = np.sum(r.T * self._cov_op.solve_flat(r.T), axis=0)
        logw = -0.5 * quad / cov_scale
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        w /= w.sum(axis=1, keepdims=True)
        return w @ pts


class TinyNetwork:
    """Fully-connected tanh network on flat float64 vectors.

    Parameters live in one flat vector so optimizers, serialization and the
    finite-difference gradient check all treat the network as a plain array.
    Hidden layers use tanh; the output layer is linear.
    """

    def __init__(self, widths, rng: Rng):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError("need at least input and output widths, all >= 1")
        self.widths = widths
        self._layout = []
        offset = 0
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            self._layout.append((offset, fan_out, fan_in))
            offset += fan_out * fan_in + fan_out
        self.params = np.zeros(offset)
        for (off, fan_out, fan_in) in self._layout:
            w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(1.0 / fan_in)
            self.params[off:off + fan_out * fan_in] = w.reshape(-1)

    @property
    def n_params(self) -> int:
        return self.params.size

    def _layers(self):
        for (off, fan_out, fan_in) in self._layout:
            w = self.params[off:off + fan_out * fan_in].reshape(fan_out, fan_in)
            b = self.params[off + fan_out * fan_in:off + fan_out * (fan_in + 1)]
            yield w, b

    def forward(self, z: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(z)
        return out

    def forward_cached(self, z: np.ndarray):
        """Forward pass keeping post-activation values for backward()."""
        acts = [np.asarray(z, dtype=np.float64)]
        layers = list(self._layers())
        a = acts[0]
        for i, (w, b) in enumerate(layers):
            pre = a @ w.T + b
            a = pre if i == len(layers) - 1 else np.tanh(pre)
            acts.append(a)
        return a, acts

    def backward(self, acts, grad_out: np.ndarray) -> np.ndarray:
        """Gradient of sum(grad_out * output) w.r.t. the flat parameters."""
        grad = np.zeros_like(self.params)
        layers = list(self._layers())
        delta = np.asarray(grad_out, dtype=np.float64)
        for i in range(len(layers) - 1, -1, -1):
            w, _ = layers[i]
            a_prev = acts[i]
            off, fan_out, fan_in = self._layout[i]
            if delta.ndim == 1:
                gw = np.outer(delta, a_prev)
                gb = delta
            else:
                gw = delta.T @ a_prev
                gb = delta.sum(axis=0)
            grad[off:off + fan_out * fan_in] = gw.reshape(-1)
            grad[off + fan_out * fan_in:off + fan_out * (fan_in + 1)] = gb
            if i > 0:
                delta = (delta @ w) * (1.0 - acts[i] ** 2)
        return grad


class PreconditionedDenoiser(Denoiser):
    """D(x;t) = c_skip x + c_out F(c_in x, c_noise) around a TinyNetwork.

    objective "predict-noise": c_skip = 1/s, c_out = -sigma, so a perfect
    noise estimate inverts the forward map exactly.  objective "predict-x0":
    c_skip = 0, c_out = 1.  In both cases c_in = 1/sqrt(1 + sigma^2) and
    c_noise = t/T; the time feature is appended as one extra input scalar.
    """

    variant = "preconditioned-network"
    objectives = ("predict-noise", "predict-x0")

    def __init__(self, net: TinyNetwork, process: DiffusionProcess,
                 objective: str):
        if objective not in self.objectives:
            raise ValueError(f"unknown objective {objective!r}")
        d = int(np.prod(process.shape))
        if net.widths[0] != d + 1 or net.widths[-1] != d:
            raise ValueError(
                f"network widths {net.widths} do not match data dim {d} "
                "(+1 time feature)")
        self.net = net
        self.process = process
        self.objective = objective

    def _net_input(self, x_flat: np.ndarray, t: float) -> np.ndarray:
        sig = self.process.schedule.sigma(t)
        c_in = 1.0 / np.sqrt(1.0 + sig * sig)
        c_noise = t / self.process.schedule.T
        return np.concatenate([c_in * x_flat, [c_noise]])

    def net_forward(self, x: Field, t: float):
        """(F output, activation cache) for the training path."""
        z = self._net_input(x.flat(), t)
        return self.net.forward_cached(z)

    def out_gain(self, t: float) -> float:
        """dD/dF, the c_out coefficient of the wrapper."""
        if self.objective == "predict-noise":
            return -self.process.schedule.sigma(t)
        return 1.0

    def denoise(self, x: Field, t: float) -> Field:
        f_out, _ = self.net_forward(x, t)
        s, _, sig, _ = self.process.schedule.evaluate(t)
        if self.objective == "predict-noise":
            out = x.flat() / s - sig * f_out
        else:
            out = f_out
        return Field(out.reshape(self.process.shape))


def precondition_wrap(net: TinyNetwork, p: DiffusionProcess,
                      objective: str) -> PreconditionedDenoiser:
    return PreconditionedDenoiser(net, p, objective)


def analytic_dirac_denoiser(ds: DiracDataset,
                            p: DiffusionProcess) -> DiracMixtureDenoiser:
    return DiracMixtureDenoiser(ds, p)


def save_network(net: TinyNetwork, path) -> None:
    """Architecture header (widths) + flat parameters in field format."""
    head = struct.pack("<Q", len(net.widths))
    head += struct.pack(f"<{len(net.widths)}Q", *net.widths)
    with open(path, "wb") as fh:
        fh.write(head + field_to_bytes(Field(net.params)))


def load_network(path) -> TinyNetwork:
    with open(path, "rb") as fh:
        buf = fh.read()
    (n,) = struct.unpack_from("<Q", buf, 0)
    widths = struct.unpack_from(f"<{n}Q", buf, 8)
    params = field_from_bytes(buf[8 + 8 * n:])
    net = TinyNetwork(widths, Rng(0))
    if params.size != net.n_params:
        raise ValueError("parameter payload does not match the architecture")
    net.params[:] = params.flat()
    return net
