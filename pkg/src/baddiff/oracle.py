# SPDX-License-Identifier: MIT
#
# Copyright (c) 2026 The baddiff authors

# Independent ground truth for the closed-form process math and for the
# denoiser's gradients.
#
# Nothing in this module calls the coefficient helpers of
# `baddiff.schedule` or `baddiff.diffusion`: schedule products are
# accumulated step by step and posteriors come from joint-Gaussian
# conditioning of one transition against the previous marginal.  The
# processes are isotropic, so scalar states suffice.

import math
import typing
from collections import namedtuple

import numpy as np

from baddiff import denoiser as baddiff_denoiser
from baddiff import diffusion as baddiff_diffusion
from baddiff import error as baddiff_error
from baddiff import logging as baddiff_logging
from baddiff import poisoning as baddiff_poisoning
from baddiff import schedule as baddiff_schedule
from baddiff import training as baddiff_training
from baddiff import utils as baddiff_utils

_logger = baddiff_logging._get_logger(__name__)

POSTERIOR_TOLERANCE = 1e-9
MC_Z_TOLERANCE = 4.0
GRADIENT_TOLERANCE = 1e-4
CLEAN_BRANCH_TOLERANCE = 1e-12

# Gradients smaller than this are compared in absolute terms.
_GRADIENT_SCALE_FLOOR = 1e-4


class Gaussian1D:
    def __init__(self, mean: float, var: float):
        self._mean = baddiff_utils._check_real(mean)
        self._var = baddiff_utils._check_positive_real(var, "variance")

    @property
    def mean(self) -> float:
        return self._mean

    @property
    def var(self) -> float:
        return self._var

    def __repr__(self) -> str:
        return "Gaussian1D(mean={!r}, var={!r})".format(self._mean, self._var)


def condition_pair(
    prior: Gaussian1D, gamma: float, shift: float, noise_var: float, observed: float
) -> Gaussian1D:
    """Posterior of x given x′ = γ·x + shift + noise, noise ~ N(0, noise_var)."""
    baddiff_utils._check_type(prior, Gaussian1D)
    noise_var = baddiff_utils._check_positive_real(noise_var, "noise variance")
    predicted_var = gamma * gamma * prior.var + noise_var
    cross = gamma * prior.var
    innovation = observed - (gamma * prior.mean + shift)
    return Gaussian1D(
        prior.mean + cross / predicted_var * innovation,
        prior.var - cross * cross / predicted_var,
    )


def _alpha_bar(betas, t):
    # running product, ᾱ_0 = 1
    prod = 1.0

    for beta in betas[:t]:
        prod *= 1.0 - float(beta)

    return prod


def backdoor_marginal(betas, t: int, x0_prime: float, r: float) -> Gaussian1D:
    """Distribution of x_t′ given x0′ and r, for t ≥ 1."""
    ab = _alpha_bar(betas, t)
    return Gaussian1D(math.sqrt(ab) * x0_prime + (1.0 - math.sqrt(ab)) * r, 1.0 - ab)


def posterior_backdoor(betas, t: int, x0_prime: float, r: float, x_t: float) -> Gaussian1D:
    """q(x_{t−1}′ | x_t′, x0′) for t ≥ 2 by conditioning."""
    if t < 2:
        raise baddiff_error.DegenerateStepError("conditioning needs t ≥ 2")

    prior = backdoor_marginal(betas, t - 1, x0_prime, r)
    beta = float(betas[t - 1])
    gamma = math.sqrt(1.0 - beta)
    return condition_pair(prior, gamma, (1.0 - gamma) * r, beta, x_t)


MarginalCheck = namedtuple("MarginalCheck", ["mean", "var", "z_mean", "z_var"])


def mc_marginal_check(
    s: baddiff_schedule.NoiseSchedule,
    x0_prime: float,
    r: float,
    t: int,
    n: int,
    rng: typing.Optional[np.random.Generator] = None,
) -> MarginalCheck:
    """Compose `t` backdoored transitions on `n` chains and compare with the marginal."""
    baddiff_utils._check_type(s, baddiff_schedule.NoiseSchedule)
    t = baddiff_utils._check_timestep(t, s.T)
    n = baddiff_utils._check_int(n)

    if n < 2:
        raise baddiff_error.ParameterError("a Monte Carlo check needs at least two draws")

    rng = rng if rng is not None else np.random.default_rng(0)
    betas = [float(b) for b in s.betas]
    x = np.full(n, float(x0_prime))

    for k in range(t):
        gamma = math.sqrt(1.0 - betas[k])
        x = gamma * x + (1.0 - gamma) * r + math.sqrt(betas[k]) * rng.standard_normal(n)

    expected = backdoor_marginal(betas, t, float(x0_prime), float(r))
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    z_mean = (mean - expected.mean) / math.sqrt(expected.var / n)
    z_var = (var - expected.var) / (expected.var * math.sqrt(2.0 / (n - 1)))
    return MarginalCheck(mean, var, z_mean, z_var)


def finite_difference_gradient(
    params, loss_fn: typing.Callable, coordinate: int, h: float = 1e-6
) -> float:
    """Central difference (L(θ + h·e_i) − L(θ − h·e_i)) / 2h.

    `params` is either a `DenoiserParams` (coordinates index its flat
    vector) or an array.
    """
    h = baddiff_utils._check_positive_real(h, "step")
    coordinate = baddiff_utils._check_non_negative_int(coordinate, "coordinate")

    if isinstance(params, baddiff_denoiser.DenoiserParams):
        arch = params.architecture
        vec = params.flat()

        def rebuild(v):
            return baddiff_denoiser.DenoiserParams.from_flat(arch, v)

    else:
        vec = np.array(params, dtype=np.float64).reshape(-1)
        shape = np.shape(params)

        def rebuild(v):
            return v.reshape(shape)

    if coordinate >= vec.size:
        raise baddiff_error.ParameterError(
            "coordinate {} out of range for {} parameters".format(coordinate, vec.size)
        )

    plus = vec.copy()
    plus[coordinate] += h
    minus = vec.copy()
    minus[coordinate] -= h
    return (float(loss_fn(rebuild(plus))) - float(loss_fn(rebuild(minus)))) / (2.0 * h)


def _reference_embedding(t, k):
    half = k // 2
    freqs = [math.pow(10000.0, -i / half) for i in range(half)]
    return [math.sin(t * f) for f in freqs] + [math.cos(t * f) for f in freqs]


def _reference_silu(z):
    return 0.5 * z * (1.0 + np.tanh(0.5 * z))


def reference_forward(params: baddiff_denoiser.DenoiserParams, x_t, t) -> np.ndarray:
    """ε_θ evaluated one sample at a time with explicit matrix–vector products."""
    baddiff_utils._check_type(params, baddiff_denoiser.DenoiserParams)
    arch = params.architecture
    x_t = np.asarray(x_t, dtype=np.float64)
    single = x_t.shape == arch.data_shape
    batch = x_t[None] if single else x_t
    ts = np.broadcast_to(np.asarray(t), (batch.shape[0],))
    out = np.empty_like(batch)
    last = len(params.weights) - 1

    for n in range(batch.shape[0]):
        emb = _reference_embedding(float(ts[n]), arch.embed_dim)
        h = np.concatenate([batch[n].reshape(-1), emb])

        for i in range(len(params.weights)):
            z = np.dot(params.weights[i], h) + params.biases[i]
            h = z if i == last else _reference_silu(z)

        out[n] = h.reshape(arch.data_shape)

    return out[0] if single else out


def reference_ddpm_loss(params: baddiff_denoiser.DenoiserParams, x0, t, eps, s) -> float:
    """Plain denoising loss mean ‖ε − ε_θ(√ᾱ_t x0 + √(1 − ᾱ_t) ε, t)‖²."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    betas = [float(b) for b in s.betas]
    total = 0.0

    for n in range(x0.shape[0]):
        ab = _alpha_bar(betas, int(t[n]))
        x_t = math.sqrt(ab) * x0[n] + math.sqrt(1.0 - ab) * eps[n]
        diff = reference_forward(params, x_t, int(t[n])) - eps[n]
        total += float(np.sum(diff * diff))

    return total / x0.size


OracleCase = namedtuple("OracleCase", ["betas", "t", "x0_prime", "r", "x_t"])


def random_case(rng: np.random.Generator) -> OracleCase:
    """A random linear schedule with T in 2..50 and scalar states in [−3, 3]."""
    T = int(rng.integers(2, 51))
    lo, hi = sorted(np.exp(rng.uniform(math.log(1e-4), math.log(0.3), size=2)))
    betas = np.linspace(lo, hi, T)
    t = int(rng.integers(2, T + 1))
    x0, r, x_t = rng.uniform(-3.0, 3.0, size=3)
    return OracleCase(betas, t, float(x0), float(r), float(x_t))


VerificationRow = namedtuple("VerificationRow", ["name", "max_error", "tolerance", "passed"])


def _row(name, err, tol):
    row = VerificationRow(name, float(err), tol, bool(err <= tol))
    _logger.info("%s: max error %.3e (tolerance %.1e)", name, err, tol)
    return row


def _check_posteriors(rng, cases):
    mean_err = var_err = eps_err = 0.0

    for _ in range(cases):
        case = random_case(rng)
        s = baddiff_schedule.NoiseSchedule.from_betas(case.betas)
        oracle = posterior_backdoor(case.betas, case.t, case.x0_prime, case.r, case.x_t)
        mean = baddiff_diffusion.posterior_mean_backdoor(s, case.x_t, case.x0_prime, case.r, case.t)
        eps = baddiff_diffusion.solve_eps_backdoor(s, case.x_t, case.x0_prime, case.r, case.t)
        eps_mean = baddiff_diffusion.posterior_mean_backdoor_eps_form(
            s, case.x_t, case.r, eps, case.t
        )
        mean_err = max(mean_err, abs(float(mean) - oracle.mean))
        var_err = max(var_err, abs(float(s.beta_tildes[case.t - 1]) - oracle.var))
        eps_err = max(eps_err, abs(float(eps_mean) - oracle.mean))

    return [
        _row("posterior mean", mean_err, POSTERIOR_TOLERANCE),
        _row("posterior variance", var_err, POSTERIOR_TOLERANCE),
        _row("posterior mean, noise form", eps_err, POSTERIOR_TOLERANCE),
    ]


def _check_marginals(rng, cases, n):
    worst = 0.0

    for _ in range(cases):
        case = random_case(rng)
        s = baddiff_schedule.NoiseSchedule.from_betas(case.betas)
        t = int(rng.integers(1, s.T + 1))
        check = mc_marginal_check(s, case.x0_prime, case.r, t, n, rng)
        worst = max(worst, abs(check.z_mean), abs(check.z_var))

    return _row("process consistency (|z|)", worst, MC_Z_TOLERANCE)


def _gradient_fixture(rng):
    arch = baddiff_denoiser.Architecture(
        baddiff_denoiser.DenoiserMode.VECTOR, (2,), hidden=(16, 16), embed_dim=8
    )
    params = baddiff_denoiser.init_params(arch, seed=int(rng.integers(2**31)))
    trigger = baddiff_poisoning.make_trigger(baddiff_poisoning.TriggerKind.COORDINATE, (2,))
    target = baddiff_poisoning.make_target(baddiff_poisoning.TargetKind.POINT, (2,))
    spec = baddiff_poisoning.PoisonSpec(trigger, target, 0.5)
    s = baddiff_schedule.make_linear_schedule(20, 1e-3, 0.2)
    x = rng.uniform(-1.0, 1.0, size=(8, 2))
    poisoned = np.arange(8) % 2 == 1
    return params, spec, s, x, poisoned


def _check_gradient(rng, coords):
    params, spec, s, x, poisoned = _gradient_fixture(rng)
    t, eps = baddiff_training.draw_timesteps_and_noise(rng, s, x.shape)
    inputs, targets = baddiff_training.build_training_pairs(x, poisoned, spec, s, t, eps)
    _, grads = baddiff_denoiser.loss_gradient(params, inputs, targets, t)
    analytic = grads.flat()

    def loss_fn(p):
        return baddiff_denoiser.loss_gradient(p, inputs, targets, t)[0]

    worst = 0.0

    for i in rng.choice(params.param_count, size=min(coords, params.param_count), replace=False):
        numeric = finite_difference_gradient(params, loss_fn, int(i))
        scale = max(abs(analytic[i]), abs(numeric), _GRADIENT_SCALE_FLOOR)
        worst = max(worst, abs(analytic[i] - numeric) / scale)

    return _row("combined loss gradient (relative)", worst, GRADIENT_TOLERANCE)


def _check_clean_branch(rng):
    params, _, s, x, _ = _gradient_fixture(rng)
    seed = int(rng.integers(2**31))
    batch = baddiff_training.Batch(x, np.zeros(x.shape[0], dtype=bool))
    loss, _ = baddiff_training.poisoned_loss_batch(
        params, batch, None, s, np.random.default_rng(seed)
    )
    t, eps = baddiff_training.draw_timesteps_and_noise(np.random.default_rng(seed), s, x.shape)
    reference = reference_ddpm_loss(params, x, t, eps, s)
    return _row("clean-branch loss", abs(loss - reference), CLEAN_BRANCH_TOLERANCE)


def run_verification(seed: int = 0, quick: bool = False) -> typing.List[VerificationRow]:
    """Run every oracle check and return one row per check."""
    rng = np.random.default_rng(baddiff_utils._check_int(seed))
    rows = _check_posteriors(rng, 100 if quick else 1000)
    rows.append(_check_marginals(rng, 5 if quick else 20, 10**4 if quick else 10**5))
    rows.append(_check_gradient(rng, 40 if quick else 200))
    rows.append(_check_clean_branch(rng))
    return rows
