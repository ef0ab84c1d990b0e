"""Self-checking suites for the diffusion machinery.

Every suite re-derives a closed-form or statistical prediction through an
independent route (quadrature, finite differences, Monte Carlo, or a separate
hand-coded formula) and compares it against the library implementation.  All
randomness is drawn from fixed streams keyed on the suite seed, so a report is
a pure function of (suite name, seed): running the same suite twice yields
byte-identical JSON.

Statistical checks use z-scores with a 4-sigma acceptance bound; identity
checks use explicit numerical tolerances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bases import BasisSet, CovarianceOp, pixel_basis
from .denoisers import ConstantDenoiser, analytic_dirac_denoiser
from .fields import Field, Rng
from .process import DiffusionProcess, DiracDataset
from .samplers import make_time_grid, sample_euler, sample_reference
from .schedules import Schedule, make_ddpm_schedule, make_vp_schedule

SUITE_NAMES = (
    "coefficients",
    "moments",
    "score",
    "cancellation",
    "marginal",
    "optimality",
    "sampler",
    "edm-reduction",
)

# Z-score bound for Monte Carlo checks.
Z_BOUND = 4.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    seed: int

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "seed": int(self.seed),
        }


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    seed: int
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": int(self.seed),
            "passed": bool(self.passed),
            "n_checks": len(self.checks),
            "checks": [c.as_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)


def _upper(name: str, value: float, threshold: float, seed: int) -> CheckResult:
    """Check that passes when value <= threshold."""
    return CheckResult(name, bool(value <= threshold), float(value), float(threshold), seed)


def _lower(name: str, value: float, threshold: float, seed: int) -> CheckResult:
    """Check that passes when value >= threshold."""
    return CheckResult(name, bool(value >= threshold), float(value), float(threshold), seed)


def _random_full_rank_rows(d: int, rng: Rng, cond_cap: float = 1.0e4) -> np.ndarray:
    """d x d basis rows, resampled until H^T H is comfortably conditioned.

    Identity checks compare quantities that pass through a linear solve, so the
    achievable agreement degrades with cond(Sigma); the cap keeps roundoff far
    below the test tolerances.
    """
    while True:
        rows = rng.standard_normal((d, d))
        if np.linalg.cond(rows.T @ rows) <= cond_cap:
            return rows


# ---------------------------------------------------------------------------
# coefficients: SDE drift/diffusion reproduce the closed-form kernel moments
# ---------------------------------------------------------------------------


def _integrate_mean_ode(sched: Schedule, eta: float, bsum: np.ndarray,
                        x0: np.ndarray, t_targets, n_steps: int):
    """RK4 for d(mean)/dt = f*mean + phi, reparametrised as t = u^2.

    For eta > 0 the drift offset phi ~ sigma'(t) diverges like t^(-1/2) at
    t = 0, which defeats a uniform-step integrator in t.  In u = sqrt(t) the
    right side 2u*phi(u^2) has the finite limit
    (eta s(0)/(eta+1)) * sqrt(d sigma^2/dt |_0) * sum_m h_m, used at u = 0.
    """
    t_cap = sched.T
    lim0 = (eta * sched.s(0.0) / (eta + 1.0)) * math.sqrt(sched.dsigma2_dt(0.0)) * bsum

    def rhs(u, mu):
        if u == 0.0:
            return lim0
        t = min(u * u, t_cap)
        s, s_p, _, sig_p = sched.evaluate(t)
        phi = (eta * s * sig_p / (eta + 1.0)) * bsum
        return 2.0 * u * ((s_p / s) * mu + phi)

    knots = [0.0] + [math.sqrt(t) for t in t_targets]
    return _rk4_path(rhs, x0.astype(float), knots, n_steps)


def _integrate_variance_ode(sched: Schedule, eta: float, sigma_mat: np.ndarray,
                            t_targets, n_steps: int):
    """RK4 for dV/dt = 2 f V + g^2 Sigma from V(0) = 0 (regular at t = 0)."""
    t_cap = sched.T

    def rhs(t, v):
        t = min(t, t_cap)
        s = sched.s(t)
        f = sched.s_prime(t) / s
        g2 = (s / (eta + 1.0)) ** 2 * sched.dsigma2_dt(t)
        return 2.0 * f * v + g2 * sigma_mat

    knots = [0.0] + list(t_targets)
    return _rk4_path(rhs, np.zeros_like(sigma_mat), knots, n_steps)


def _rk4_path(rhs, state, knots, n_steps: int):
    """Classical RK4 over consecutive knot intervals; returns state at each knot[1:]."""
    out = []
    total = knots[-1] - knots[0]
    x = state
    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, int(round(n_steps * (b - a) / total)))
        ts = np.linspace(a, b, n + 1)
        for i in range(n):
            t = ts[i]
            h = ts[i + 1] - ts[i]
            k1 = rhs(t, x)
            k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = rhs(t + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(x)
    return out


def _coefficient_case(tag: str, sched: Schedule, eta: float, rows: np.ndarray,
                      rng: Rng, seed: int, n_steps: int = 10_000):
    d = rows.shape[1]
    x0 = rng.standard_normal((d,))
    bsum = rows.sum(axis=0)
    sigma_mat = rows.T @ rows
    t_targets = (sched.T / 2.0, sched.T)

    means = _integrate_mean_ode(sched, eta, bsum, x0, t_targets, n_steps)
    variances = _integrate_variance_ode(sched, eta, sigma_mat, t_targets, n_steps)

    mean_err = 0.0
    var_err = 0.0
    for t, mu_num, v_num in zip(t_targets, means, variances):
        s = sched.s(t)
        sig = sched.sigma(t)
        mu_ref = s * x0 + (eta * s * sig / (eta + 1.0)) * bsum
        v_ref = (s * sig / (eta + 1.0)) ** 2 * sigma_mat
        mean_err = max(mean_err, np.linalg.norm(mu_num - mu_ref) / np.linalg.norm(mu_ref))
        var_err = max(var_err, np.linalg.norm(v_num - v_ref) / np.linalg.norm(v_ref))
    return [
        _upper(f"coefficients/{tag}/mean-rel-err", mean_err, 1.0e-6, seed),
        _upper(f"coefficients/{tag}/variance-rel-err", var_err, 1.0e-6, seed),
    ]


def _checks_coefficients(seed: int):
    rng = Rng(seed, 10)
    vp = make_vp_schedule()
    ddpm = make_ddpm_schedule()
    pixel = np.eye(3)
    rand = _random_full_rank_rows(3, rng.derive(11))

    checks = []
    for eta in (0.0, 10.0):
        checks += _coefficient_case(f"vp-pixel-eta{eta:g}", vp, eta, pixel, rng, seed)
        checks += _coefficient_case(f"vp-random-eta{eta:g}", vp, eta, rand, rng, seed)
    # scaled schedule (s != 1) exercises the f = s'/s term
    checks += _coefficient_case("ddpm-random-eta10", ddpm, 10.0, rand, rng, seed)
    return checks


# ---------------------------------------------------------------------------
# moments: Euler-Maruyama terminal cloud matches the kernel mean/covariance
# ---------------------------------------------------------------------------


def _em_chain_moments(p: DiffusionProcess, x0: Field, n_steps: int):
    """Exact mean/covariance of the Euler-Maruyama chain at the last knot.

    The update is linear in x with deterministic coefficients and independent
    Gaussian increments, so the chain moments follow closed recursions:
    mean <- (1 + f dt) mean + phi dt and C <- (1 + f dt)^2 C + g^2 dt Sigma.
    Their gap to the continuous-time kernel is the O(dt) bias the moment
    check must allow for.
    """
    from .schedules import sde_coefficients

    sched = p.schedule
    rows = p.basis.elements(None)
    bsum = Field(rows.sum(axis=0).reshape(p.shape))
    sigma_mat = rows.T @ rows
    times = np.linspace(sched.T / 1000.0, sched.T, n_steps + 1)
    mom0 = p.conditional_moments(x0, times[0])
    mean = mom0.mean.flat().copy()
    cov = mom0.cov_scale * sigma_mat
    for i in range(n_steps):
        t, dt = times[i], times[i + 1] - times[i]
        c = sde_coefficients(sched, p.eta, bsum, t)
        a = 1.0 + c.f * dt
        mean = a * mean + c.phi.flat() * dt
        cov = a * a * cov + (c.g * c.g * dt) * sigma_mat
    return mean, cov


def _checks_moments(seed: int, n_paths: int = 10_000, n_steps: int = 512):
    rng = Rng(seed, 20)
    sched = make_vp_schedule()
    rows = rng.standard_normal((2, 4))
    basis = BasisSet.from_elements(rows, (4,))
    x0 = Field(rng.standard_normal((4,)))

    checks = []
    for stream, eta in ((21, 0.0), (22, 10.0)):
        p = DiffusionProcess(sched, basis, eta=eta)
        paths = p._sde_batch(x0, n_steps, n_paths, Rng(seed, stream))
        mom = p.conditional_moments(x0, sched.T)
        mu = mom.mean.flat()
        cov = mom.cov_scale * (rows.T @ rows)
        # discretization bias: gap between the exact chain moments and Eq. form
        chain_mu, chain_cov = _em_chain_moments(p, x0, n_steps)
        bias_mu = np.abs(chain_mu - mu)
        bias_cov = np.abs(chain_cov - cov)

        sample_mean = paths.mean(axis=0)
        se_mean = np.sqrt(np.diag(cov) / n_paths)
        z_mean = (np.abs(sample_mean - mu) - bias_mu) / se_mean

        centred = paths - mu
        sample_cov = centred.T @ centred / n_paths
        # SE of a Gaussian sample-covariance entry: sqrt((C_ii C_jj + C_ij^2)/n)
        dvar = np.outer(np.diag(cov), np.diag(cov))
        se_cov = np.sqrt((dvar + cov ** 2) / n_paths)
        z_cov = (np.abs(sample_cov - cov) - bias_cov) / se_cov

        checks.append(_upper(f"moments/eta{eta:g}/mean-z", float(z_mean.max()), Z_BOUND, seed))
        checks.append(_upper(f"moments/eta{eta:g}/cov-z", float(z_cov.max()), Z_BOUND, seed))
    return checks


# ---------------------------------------------------------------------------
# score: analytic scores against finite differences of explicit log-densities
# ---------------------------------------------------------------------------


def _fd_gradient(logpdf, x: np.ndarray, h_scale: float = 1.0e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        h = h_scale * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (logpdf(xp) - logpdf(xm)) / (2.0 * h)
    return g


def _checks_score(seed: int, probes_per_case: int = 13):
    from scipy.stats import multivariate_normal

    sched = make_vp_schedule()
    checks = []

    # conditional score: single Gaussian kernel
    rng = Rng(seed, 30)
    rows = _random_full_rank_rows(3, rng.derive(31))
    basis = BasisSet.from_elements(rows, (3,))
    cond_err = 0.0
    for eta in (0.0, 10.0):
        p = DiffusionProcess(sched, basis, eta=eta)
        x0 = Field(rng.standard_normal((3,)))
        for _ in range(probes_per_case):
            t = float(sched.T * (0.1 + 0.9 * rng.uniform()))
            x = p.forward_sample(x0, t, rng)
            mom = p.conditional_moments(x0, t)
            cov = mom.cov_scale * (rows.T @ rows)

            def logpdf(v, mean=mom.mean.flat(), cov=cov):
                r = v - mean
                return -0.5 * float(r @ np.linalg.solve(cov, r))

            fd = _fd_gradient(logpdf, x.flat())
            sc = p.conditional_score(x0, t, x).flat()
            cond_err = max(cond_err, np.linalg.norm(sc - fd) / np.linalg.norm(fd))
    checks.append(_upper("score/conditional-vs-fd", cond_err, 1.0e-5, seed))

    # marginal score: explicit Gaussian mixture via scipy
    rows2 = _random_full_rank_rows(2, rng.derive(32))
    basis2 = BasisSet.from_elements(rows2, (2,))
    marg_err = 0.0
    for eta in (0.0, 10.0):
        p = DiffusionProcess(sched, basis2, eta=eta)
        pts = [Field(2.0 * rng.standard_normal((2,))) for _ in range(3)]
        ds = DiracDataset(pts)
        for _ in range(probes_per_case):
            t = float(sched.T * (0.1 + 0.9 * rng.uniform()))
            x = p.forward_sample(pts[rng.integers(0, 3)], t, rng)
            mats = [(p.conditional_moments(y, t).mean.flat(),
                     p.conditional_moments(y, t).cov_scale * (rows2.T @ rows2))
                    for y in pts]

            def logpdf(v, mats=mats):
                logs = [multivariate_normal.logpdf(v, mean=m, cov=c) for m, c in mats]
                mx = max(logs)
                return mx + math.log(sum(math.exp(l - mx) for l in logs))

            fd = _fd_gradient(logpdf, x.flat())
            sc = p.marginal_score_dirac(ds, t, x).flat()
            marg_err = max(marg_err, np.linalg.norm(sc - fd) / np.linalg.norm(fd))
    checks.append(_upper("score/marginal-vs-fd", marg_err, 1.0e-5, seed))

    # at the kernel mean the conditional score vanishes identically
    p0 = DiffusionProcess(sched, basis, eta=10.0)
    y = Field(rng.standard_normal((3,)))
    peak = p0.conditional_score(y, sched.T / 2.0, p0.conditional_moments(y, sched.T / 2.0).mean)
    checks.append(_upper("score/zero-at-mean", float(np.abs(peak.flat()).max()), 1.0e-12, seed))
    return checks


# ---------------------------------------------------------------------------
# cancellation: simplified flow equals raw flow with the analytic denoiser
# ---------------------------------------------------------------------------


def _checks_cancellation(seed: int, draws_per_case: int = 17):
    sched = make_vp_schedule()
    rng = Rng(seed, 40)
    checks = []
    for d in (2, 3, 4):
        rows = _random_full_rank_rows(d, rng.derive(41 + d))
        basis = BasisSet.from_elements(rows, (d,))
        x0 = Field(rng.standard_normal((d,)))
        worst = 0.0
        for eta in (0.0, 10.0):
            p = DiffusionProcess(sched, basis, eta=eta)
            den = ConstantDenoiser(x0)
            for _ in range(draws_per_case):
                t = float(sched.T * (0.005 + 0.995 * rng.uniform()))
                x = Field(2.0 * rng.standard_normal((d,)))
                raw = p.pfode_rhs_conditional(x0, t, x)
                simp = p.pfode_rhs(den, t, x)
                scale = max(1.0, float(np.abs(raw.flat()).max()))
                worst = max(worst, float(np.abs(raw.flat() - simp.flat()).max()) / scale)
        checks.append(_upper(f"cancellation/d{d}/max-abs-diff", worst, 1.0e-10, seed))
    return checks


# ---------------------------------------------------------------------------
# marginal: mixture-score flow equals simplified flow with the mixture denoiser
# ---------------------------------------------------------------------------


def _checks_marginal(seed: int, draws_per_case: int = 25):
    sched = make_vp_schedule()
    rng = Rng(seed, 50)
    checks = []
    for d in (2, 3):
        rows = _random_full_rank_rows(d, rng.derive(51 + d))
        basis = BasisSet.from_elements(rows, (d,))
        pts = [Field(2.0 * rng.standard_normal((d,))) for _ in range(3)]
        ds = DiracDataset(pts)
        worst = 0.0
        for eta in (0.0, 10.0):
            p = DiffusionProcess(sched, basis, eta=eta)
            den = analytic_dirac_denoiser(ds, p)
            for _ in range(draws_per_case):
                t = float(sched.T * (0.01 + 0.99 * rng.uniform()))
                x = Field(2.0 * rng.standard_normal((d,)))
                raw = p.pfode_rhs_marginal(ds, t, x)
                simp = p.pfode_rhs(den, t, x)
                scale = max(1.0, float(np.abs(raw.flat()).max()))
                worst = max(worst, float(np.abs(raw.flat() - simp.flat()).max()) / scale)
        checks.append(_upper(f"marginal/d{d}/max-abs-diff", worst, 1.0e-10, seed))
    return checks


# ---------------------------------------------------------------------------
# optimality: the analytic denoiser minimises the population reconstruction loss
# ---------------------------------------------------------------------------


def _checks_optimality(seed: int, n_samples: int = 100_000, n_directions: int = 100):
    sched = make_vp_schedule()
    rng = Rng(seed, 60)
    rows = _random_full_rank_rows(2, rng.derive(61))
    basis = BasisSet.from_elements(rows, (2,))
    p = DiffusionProcess(sched, basis, eta=0.0)
    pts = np.array([[-1.5, 0.0], [1.5, 0.5], [0.0, 1.8]])
    ds = DiracDataset([Field(row) for row in pts])
    den = analytic_dirac_denoiser(ds, p)
    t = sched.T / 5.0

    draw = Rng(seed, 62)
    idx = draw.integers(0, len(pts), (n_samples,))
    y = pts[idx]
    s = sched.s(t)
    sig = sched.sigma(t)
    noise = p._noise_batch(n_samples, draw)
    x = s * y + (s * sig) * noise
    d_opt = den.denoise_batch(x, t)
    resid = d_opt - y

    # Perturbing the denoiser by a constant delta changes each per-sample loss
    # by exactly 2 delta . resid + |delta|^2; common random numbers keep the
    # comparison noise far below the |delta|^2 optimality gap.
    dir_rng = Rng(seed, 63)
    delta_mag = 1.0e-2
    min_margin = math.inf
    for _ in range(n_directions):
        v = dir_rng.standard_normal((2,))
        delta = delta_mag * v / np.linalg.norm(v)
        diff = 2.0 * (resid @ delta) + delta_mag ** 2
        se = diff.std(ddof=1) / math.sqrt(n_samples)
        min_margin = min(min_margin, float(diff.mean() / se))
    checks = [_lower("optimality/min-margin-sigmas", min_margin, 2.0, seed)]

    # posterior weights stay normalised and non-negative
    wrng = Rng(seed, 64)
    worst_norm = 0.0
    worst_neg = 0.0
    for _ in range(20):
        tt = float(sched.T * (0.02 + 0.98 * wrng.uniform()))
        xx = wrng.standard_normal((2,))
        w, _, _ = p._dirac_log_weights(ds, tt, xx, CovarianceOp(basis))
        worst_norm = max(worst_norm, abs(float(w.sum()) - 1.0))
        worst_neg = max(worst_neg, float(max(0.0, -w.min())))
    checks.append(_upper("optimality/weight-normalisation", worst_norm, 1.0e-12, seed))
    checks.append(_upper("optimality/weight-nonnegative", worst_neg, 0.0, seed))
    return checks


# ---------------------------------------------------------------------------
# sampler: Euler convergence order, constant-denoiser closed form, round trip
# ---------------------------------------------------------------------------


def _checks_sampler(seed: int):
    sched = make_vp_schedule()
    rows = np.array([[1.0, 0.0], [0.3, 1.0]])
    basis = BasisSet.from_elements(rows, (2,))
    p = DiffusionProcess(sched, basis, eta=0.0)
    pts = [Field(np.array([-1.0, 0.5])), Field(np.array([1.2, -0.3])), Field(np.array([0.2, 1.5]))]
    den = analytic_dirac_denoiser(DiracDataset(pts), p)

    # fixed, well-scaled toy states: these are identity/convergence checks,
    # so randomizing them would only add failure modes unrelated to the code
    x_top = Field(np.array([0.9, -1.4]))
    ref = sample_reference(p, den, x_top, 4096)
    e_coarse = float(np.linalg.norm(
        sample_euler(p, den, x_top, make_time_grid(sched.T, 100)).flat() - ref.flat()))
    e_fine = float(np.linalg.norm(
        sample_euler(p, den, x_top, make_time_grid(sched.T, 1000)).flat() - ref.flat()))
    ratio = e_coarse / e_fine
    checks = [
        _lower("sampler/euler-error-ratio-min", ratio, 5.0, seed),
        _upper("sampler/euler-error-ratio-max", ratio, 20.0, seed),
    ]

    # constant denoiser: x(t) = c + (sigma(t)/sigma(T)) (x_T - c) for s = 1
    c = Field(np.array([1.2, -0.8]))
    cden = ConstantDenoiser(c)
    grid = make_time_grid(sched.T, 10_000)
    closed = c.flat() + (sched.sigma(grid[-1]) / sched.sigma(sched.T)) * (x_top.flat() - c.flat())
    num = sample_euler(p, cden, x_top, grid).flat()
    rel = float(np.linalg.norm(num - closed) / np.linalg.norm(closed))
    checks.append(_upper("sampler/constant-denoiser-euler", rel, 1.0e-4, seed))

    ref_t = make_time_grid(sched.T, 1000)
    closed_ref = c.flat() + (sched.sigma(ref_t[-1]) / sched.sigma(sched.T)) * (x_top.flat() - c.flat())
    num_ref = sample_reference(p, cden, x_top, 1000).flat()
    rel_ref = float(np.linalg.norm(num_ref - closed_ref) / np.linalg.norm(closed_ref))
    checks.append(_upper("sampler/constant-denoiser-reference", rel_ref, 1.0e-8, seed))

    # round trip: noise a data point forward, integrate back down, and land
    # on the PFODE limit as computed by the reference integrator
    y = pts[1]
    x_noised = p.forward_sample(y, sched.T, Rng(seed, 71))
    back = sample_euler(p, den, x_noised, make_time_grid(sched.T, 1000))
    limit = sample_reference(p, den, x_noised, 4096)
    rt = float(np.linalg.norm(back.flat() - limit.flat())
               / np.linalg.norm(limit.flat()))
    checks.append(_upper("sampler/round-trip-rel-err", rt, 1.0e-2, seed))
    return checks


# ---------------------------------------------------------------------------
# edm-reduction: eta = 0 + pixel basis collapses to the standard formulation
# ---------------------------------------------------------------------------


def _edm_flow_rhs(sched: Schedule, den, x: Field, t: float) -> np.ndarray:
    """Independently coded standard flow: (s'/s + sig'/sig) x - (sig' s / sig) D(x/s; t)."""
    s, s_p, sig, sig_p = sched.evaluate(t)
    d = den.denoise(Field(x.values / s), t)
    return (s_p / s + sig_p / sig) * x.values - (sig_p * s / sig) * d.values


def _checks_edm_reduction(seed: int, n_draws: int = 100_000):
    sched = make_vp_schedule()
    basis = pixel_basis((2, 2))
    p = DiffusionProcess(sched, basis, eta=0.0)
    rng = Rng(seed, 80)

    # with eta = 0 and the pixel basis the injected noise is iid standard normal
    noise = p._noise_batch(n_draws, rng)
    zs = []
    zs.append(np.abs(noise.mean(axis=0)) * math.sqrt(n_draws))
    zs.append(np.abs(noise.var(axis=0) - 1.0) / math.sqrt(2.0 / n_draws))
    # raw-moment standard errors under N(0,1): Var(X^3) = 15, Var(X^4) = 96
    m3 = (noise ** 3).mean(axis=0)
    zs.append(np.abs(m3) / math.sqrt(15.0 / n_draws))
    m4 = (noise ** 4).mean(axis=0) - 3.0
    zs.append(np.abs(m4) / math.sqrt(96.0 / n_draws))
    cov = noise.T @ noise / n_draws
    off = cov[~np.eye(4, dtype=bool)]
    zs.append(np.abs(off) * math.sqrt(n_draws))
    checks = [_upper("edm-reduction/noise-normality-z", float(np.concatenate(zs).max()),
                     Z_BOUND, seed)]

    # forward kernel matches x0 + sigma * eps moments
    x0 = Field(rng.standard_normal((2, 2)))
    t = sched.T / 2.0
    sig = sched.sigma(t)
    batch = p._forward_batch(x0, t, n_draws, rng.derive(81))
    z_mean = np.abs(batch.mean(axis=0) - x0.flat()) / (sig / math.sqrt(n_draws))
    z_var = np.abs(batch.var(axis=0) - sig ** 2) / (sig ** 2 * math.sqrt(2.0 / n_draws))
    checks.append(_upper("edm-reduction/forward-kernel-z",
                         float(max(z_mean.max(), z_var.max())), Z_BOUND, seed))

    # per-step agreement between the generic flow and the standard expression
    pts = [Field(rng.standard_normal((2, 2))) for _ in range(2)]
    den = analytic_dirac_denoiser(DiracDataset(pts), p)
    worst = 0.0
    for _ in range(20):
        t = float(sched.T * (0.01 + 0.99 * rng.uniform()))
        x = Field(rng.standard_normal((2, 2)))
        mine = p.pfode_rhs(den, t, x).flat()
        std = _edm_flow_rhs(sched, den, x, t).reshape(-1)
        worst = max(worst, float(np.abs(mine - std).max()))
    checks.append(_upper("edm-reduction/flow-rhs-max-diff", worst, 1.0e-12, seed))
    return checks


# ---------------------------------------------------------------------------
# suite driver
# ---------------------------------------------------------------------------

_SUITE_FNS = {
    "coefficients": _checks_coefficients,
    "moments": _checks_moments,
    "score": _checks_score,
    "cancellation": _checks_cancellation,
    "marginal": _checks_marginal,
    "optimality": _checks_optimality,
    "sampler": _checks_sampler,
    "edm-reduction": _checks_edm_reduction,
}


def run_suite(name: str, seed: int = 7) -> SuiteReport:
    """Run one named suite (or "all") and return its report."""
    if name == "all":
        checks = []
        for suite in SUITE_NAMES:
            checks.extend(_SUITE_FNS[suite](seed))
        return SuiteReport("all", seed, tuple(checks))
    if name not in _SUITE_FNS:
        raise ValueError(f"unknown suite {name!r}; expected one of "
                         f"{', '.join(SUITE_NAMES + ('all',))}")
    return SuiteReport(name, seed, tuple(_SUITE_FNS[name](seed)))
