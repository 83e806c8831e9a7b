"""Measurement-model estimation of expectations and time correlations.

An observable is shifted and scaled into a two-outcome measurement whose
success probability is Tr(O+ rho); sample counts follow the two-sided
Hoeffding bound n = ceil(ln(2/eps) / (2 delta^2)).  Time-dependent
correlators Tr(rho [O1, O2(t)]) are evaluated exactly in the Heisenberg
picture, and the impulsive linear-response experiment checks that the
first-order prediction i*lam*Tr(rho [O1, O2(t)]) matches the unitary-kick
response up to O(lam^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matcore import DensityMatrix, HermitianOperator, eigh, matrix_exp_herm, op2norm


@dataclass(frozen=True)
class NormalizedObservable:
    """Observable mapped onto a positive operator with spectrum in [0, 1].

    original = gain * shifted - shift * identity, exactly.
    """

    original: HermitianOperator
    shifted: HermitianOperator
    shift: float
    gain: float
    eigen_range: tuple[float, float]


def normalize_observable(o: HermitianOperator) -> NormalizedObservable:
    """Shift/scale an observable so its spectrum lands in [0, 1].

    Mixed-sign spectra map through (O + |min| 1)/(max + |min|); single-sign
    spectra are just divided by their extreme eigenvalue.
    """
    w = np.linalg.eigvalsh(o.matrix)
    lo, hi = float(w[0]), float(w[-1])
    if max(abs(lo), abs(hi)) < 1e-300:
        raise ValueError("zero observable cannot be normalized")
    eye = np.eye(o.dim)
    if lo < 0.0 < hi:
        gain = hi + abs(lo)
        shift = abs(lo)
        shifted = (o.matrix + shift * eye) / gain
    elif lo >= 0.0:
        gain, shift = hi, 0.0
        shifted = o.matrix / gain
    else:
        gain, shift = lo, 0.0
        shifted = o.matrix / gain
    return NormalizedObservable(
        original=o,
        shifted=HermitianOperator(shifted),
        shift=shift,
        gain=gain,
        eigen_range=(lo, hi),
    )


@dataclass(frozen=True)
class SamplingPlan:
    """Two-outcome sampling budget for precision delta, failure odds epsilon."""

    delta: float
    epsilon: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def sample_count(delta: float, epsilon: float) -> SamplingPlan:
    """Hoeffding sample count n = ceil(ln(2/epsilon) / (2 delta^2))."""
    if not (0.0 < delta < 1.0 and 0.0 < epsilon < 1.0):
        raise ValueError("need 0 < delta < 1 and 0 < epsilon < 1")
    n = max(1, math.ceil(math.log(2.0 / epsilon) / (2.0 * delta**2)))
    return SamplingPlan(delta=delta, epsilon=epsilon, n_samples=n)


@dataclass(frozen=True)
class ExpectationEstimate:
    """Sampled estimate of Tr(O rho) with its confidence half-width."""

    estimate: float
    true_probability: float
    p_hat: float
    half_width: float
    plan: SamplingPlan


def estimate_expectation(
    rho: DensityMatrix,
    o: HermitianOperator | NormalizedObservable,
    plan: SamplingPlan,
    rng: np.random.Generator,
) -> ExpectationEstimate:
    """Simulate the two-outcome measurement n times and map back to Tr(O rho).

    Outcomes are Bernoulli draws on p = Tr(O+ rho); only single-shot
    statistics enter, so no measurement back-action is modeled.
    """
    norm = o if isinstance(o, NormalizedObservable) else normalize_observable(o)
    if norm.shifted.dim != rho.dim:
        raise ValueError("dimension mismatch between state and observable")
    p = float(np.real(np.trace(norm.shifted.matrix @ rho.matrix)))
    if p < -1e-9 or p > 1.0 + 1e-9:
        raise ValueError(f"measurement probability {p} outside [0, 1]; normalization broken")
    p_clipped = min(max(p, 0.0), 1.0)
    hits = int(rng.binomial(plan.n_samples, p_clipped))
    p_hat = hits / plan.n_samples
    return ExpectationEstimate(
        estimate=norm.gain * p_hat - norm.shift,
        true_probability=p,
        p_hat=p_hat,
        half_width=plan.delta * abs(norm.gain),
        plan=plan,
    )


def heisenberg(o: HermitianOperator, h_s: HermitianOperator, t: float) -> np.ndarray:
    """O(t) = e^{iHt} O e^{-iHt}."""
    u = matrix_exp_herm(h_s, 1j * t)
    return u @ o.matrix @ u.conj().T


def correlation_2pt(
    rho: DensityMatrix,
    o1: HermitianOperator,
    o2: HermitianOperator,
    h_s: HermitianOperator,
    t: float,
) -> complex:
    """Tr(rho [O1, O2(t)]), exact."""
    o2t = heisenberg(o2, h_s, t)
    comm = o1.matrix @ o2t - o2t @ o1.matrix
    return complex(np.trace(rho.matrix @ comm))


def correlation_kpt(rho: DensityMatrix, ops, h_s: HermitianOperator) -> complex:
    """Tr(O1(t1) O2(t2) ... Ok(tk) rho) for (observable, time) pairs, exact."""
    if not ops:
        raise ValueError("need at least one operator")
    prod = np.eye(rho.dim, dtype=complex)
    for o, t in ops:
        prod = prod @ heisenberg(o, h_s, t)
    return complex(np.trace(prod @ rho.matrix))


@dataclass(frozen=True)
class LinearResponseResult:
    """Measured kick response, its first-order prediction, and the residual."""

    delta_o2: float
    prediction: float
    residual: float


def linear_response_experiment(
    h_s: HermitianOperator,
    rho_beta: DensityMatrix,
    o1: HermitianOperator,
    o2: HermitianOperator,
    lambda_kick: float,
    t: float,
) -> LinearResponseResult:
    """Impulsive perturbation: kick by e^{-i lam O1}, evolve t, measure O2.

    The first-order prediction is i * lam * Tr(rho_beta [O1, O2(t)]); the
    residual scales as lam^2.
    """
    kick = matrix_exp_herm(o1, -1j * lambda_kick)
    rho_kicked = kick @ rho_beta.matrix @ kick.conj().T
    u = matrix_exp_herm(h_s, -1j * t)
    rho_t = u @ rho_kicked @ u.conj().T
    measured = float(np.real(np.trace(o2.matrix @ rho_t)))
    baseline = float(np.real(np.trace(o2.matrix @ rho_beta.matrix)))
    delta_o2 = measured - baseline
    prediction = complex(1j * lambda_kick * correlation_2pt(rho_beta, o1, o2, h_s, t))
    if abs(prediction.imag) > 1e-9 * max(1.0, abs(prediction)):
        raise ValueError("response prediction should be real for Hermitian inputs")
    return LinearResponseResult(
        delta_o2=delta_o2,
        prediction=prediction.real,
        residual=abs(delta_o2 - prediction.real),
    )


def group_commuting(ops: list[HermitianOperator], tol: float = 1e-12) -> list[list[int]]:
    """Greedy grouping of mutually commuting observables (by index)."""
    groups: list[list[int]] = []
    for i, o in enumerate(ops):
        placed = False
        for g in groups:
            if all(op2norm(o.matrix @ ops[j].matrix - ops[j].matrix @ o.matrix) < tol for j in g):
                g.append(i)
                placed = True
                break
        if not placed:
            groups.append([i])
    return groups


def estimate_sum_grouped(
    rho: DensityMatrix,
    ops: list[HermitianOperator],
    plan: SamplingPlan,
    rng: np.random.Generator,
) -> tuple[float, list[list[int]]]:
    """Estimate Tr(rho sum_i O_i), measuring each commuting group jointly.

    Within a group the observables share an eigenbasis; one batch of basis
    samples (drawn from the populations of rho in that basis) serves every
    member, mirroring one measurement per preparation.
    """
    groups = group_commuting(ops)
    total = 0.0
    for g in groups:
        # a random combination has the group's common eigenbasis generically
        weights = rng.normal(size=len(g))
        combo = sum(w * ops[j].matrix for w, j in zip(weights, g))
        basis = eigh(HermitianOperator((combo + combo.conj().T) / 2)).eigenvectors
        probs = np.real(np.einsum("ji,jk,ki->i", basis.conj(), rho.matrix, basis))
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
        counts = rng.multinomial(plan.n_samples, probs)
        for j in g:
            diag = np.real(np.einsum("ji,jk,ki->i", basis.conj(), ops[j].matrix, basis))
            total += float(np.dot(counts, diag) / plan.n_samples)
    return total, groups
