"""Weak-coupling analysis of the equilibration channel.

The channel splits, in the system eigenbasis, into a diagonal (population)
sector and a nondiagonal (coherence) sector.  This module extracts the
second-order part of the channel, diagonalizes the population block to get
the mixing eigenvalue kappa_D and a perturbative fixed point, reads the
coherence decay factors off the nondiagonal diagonal, evaluates the
closed-form second-order kernels against the finite bath, and builds the
scaled-limit (vanishing coupling, long time, constant lambda^2 t) Markov
kernel with its validity conditions.

Closed-form kernels, with x = omega - E_n + E_l and K_t(x) = (1-cos tx)/x^2:

    Q_mn(t)  = 2 * sum_peaks w * [ |S_mn|^2 K_t(omega - E_n + E_m)
                - delta_mn * sum_l |S_nl|^2 K_t(omega - E_n + E_l) ]
    nu_nm(t) = sum_peaks w * [ 2 S_nn S_mm K_t(omega)
                - f(t, omega, E_n) - conj(f(t, omega, E_m)) ]
    f        = sum_l |S_ln|^2 [ K_t(x) + i t (1 - sinc(tx)) / x ]

The bath correlation h(t) = <B B_t> of a finite bath is a finite sum of
spectral peaks; its peak weights obey the thermal symmetry
htilde(-omega) = exp(-beta*omega) * htilde(omega), which is exactly what
makes the scaled-limit kernel obey detailed balance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .channels import (
    AmbiguousFixedPointError,
    ChannelFactory,
    Superoperator,
    channel_spectrum,
    unitary_channel,
)
from .hamiltonians import (
    DegenerateSpectrumError,
    JointModel,
    LocalHamiltonian,
    assemble,
    gibbs_populations,
)
from .matcore import (
    DensityMatrix,
    HermitianOperator,
    SpectralDecomposition,
    eigh,
    kron,
    maximally_mixed,
    op2norm,
    trace_norm,
)

MIN_SPECTRAL_GAP = 1e-8


class KmsViolationError(ValueError):
    """Supplied spectral density breaks the thermal frequency symmetry."""


class ConditionViolationWarning(UserWarning):
    """A validity-condition margin exceeds 1; the kernel may leave [0, 1]."""


def _require_nondegenerate(energies: np.ndarray):
    e = np.sort(np.asarray(energies, dtype=float))
    if len(e) > 1 and np.min(np.diff(e)) < MIN_SPECTRAL_GAP:
        raise DegenerateSpectrumError(
            f"spectrum has a gap below {MIN_SPECTRAL_GAP}; analysis requires distinct levels"
        )


def extract_s2bar(s: Superoperator, h_s: HermitianOperator, t: float, lam: float) -> Superoperator:
    """Second-order-and-up channel part (S - S0)/lambda^2 in the eigenbasis.

    S0 is conjugation by e^{iH_s t}.  The returned matrix lives in the H_s
    eigenbasis (ascending eigenvalue order), where the population block sits
    on the index pairs (n, n).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    dec = eigh(h_s)
    v = dec.eigenvectors
    u_s = (v * np.exp(1j * t * dec.eigenvalues)[None, :]) @ v.conj().T
    s0 = unitary_channel(u_s).matrix
    diff = (s.matrix - s0) / lam**2
    w = kron(v, v.conj())
    return Superoperator(s.dim_n, w.conj().T @ diff @ w)


@dataclass(frozen=True)
class SectorAnalysis:
    """Population-block and coherence-sector data of one channel instant."""

    d_block: np.ndarray
    nd_eigenvalues: np.ndarray
    kappa_d: float
    kappa_nd: float
    perturbative_fixed_point: DensityMatrix
    fixed_point_populations: np.ndarray
    rate_d: float
    rate_nd: float
    d_block_defective: bool
    d_column_sum_error: float


def sector_analysis(
    s2bar: Superoperator,
    h_spec: SpectralDecomposition,
    lam: float,
    t: float,
    c_bar: float,
) -> SectorAnalysis:
    """Diagonalize the population block and read off both sector rates.

    The population block B (columns summing to zero) lifts the unit
    eigenvalue degeneracy: channel eigenvalues there are 1 + lambda^2 * b_i,
    kappa_D is the second largest modulus, and the b ~ 0 eigenvector is the
    perturbative fixed point.  Coherence eigenvalues are read from the
    diagonal of the nondiagonal sector.  Rates are (1 - |kappa|)/c_bar.
    """
    energies = np.asarray(h_spec.eigenvalues, dtype=float)
    _require_nondegenerate(energies)
    n = s2bar.dim_n
    diag_idx = np.arange(n) * n + np.arange(n)
    d_block = s2bar.matrix[np.ix_(diag_idx, diag_idx)]
    col_err = float(np.max(np.abs(d_block.sum(axis=0)))) * lam**2

    vals, vecs = np.linalg.eig(d_block)
    try:
        cond = float(np.linalg.cond(vecs))
    except np.linalg.LinAlgError:
        cond = float("inf")
    defective = not np.isfinite(cond) or cond > 1e8

    i0 = int(np.argmin(np.abs(vals)))
    mu_d = 1.0 + lam**2 * vals
    rest = np.delete(np.arange(n), i0)
    kappa_d = float(np.max(np.abs(mu_d[rest]))) if len(rest) else 0.0

    p = np.real(vecs[:, i0])
    if p.sum() < 0:
        p = -p
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total <= 0:
        raise DegenerateSpectrumError("population-block fixed point degenerated to zero")
    p = p / total
    v = h_spec.eigenvectors
    rho0 = (v * p[None, :]) @ v.conj().T
    fixed = DensityMatrix((rho0 + rho0.conj().T) / 2.0)

    phase = np.exp(1j * t * (energies[:, None] - energies[None, :]))
    mu_nd = phase + lam**2 * s2bar.matrix[np.arange(n * n), np.arange(n * n)].reshape(n, n)
    off = ~np.eye(n, dtype=bool)
    kappa_nd = float(np.max(np.abs(mu_nd[off]))) if n > 1 else 0.0

    rate_d = (1.0 - kappa_d) / c_bar if c_bar > 0 else float("nan")
    rate_nd = (1.0 - kappa_nd) / c_bar if c_bar > 0 else float("nan")
    return SectorAnalysis(
        d_block=d_block,
        nd_eigenvalues=mu_nd,
        kappa_d=kappa_d,
        kappa_nd=kappa_nd,
        perturbative_fixed_point=fixed,
        fixed_point_populations=p,
        rate_d=rate_d,
        rate_nd=rate_nd,
        d_block_defective=defective,
        d_column_sum_error=col_err,
    )


@dataclass(frozen=True)
class BathCorrelation:
    """Spectral peaks of h(t) = <B B_t>: frequency and nonnegative weight."""

    frequencies: np.ndarray
    weights: np.ndarray

    def h(self, t: float) -> complex:
        return complex(np.sum(self.weights * np.exp(1j * t * self.frequencies)))

    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def consolidated(self, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """Merge peaks with matching frequencies (within tol)."""
        order = np.argsort(self.frequencies)
        freqs = self.frequencies[order]
        ws = self.weights[order]
        out_f, out_w = [], []
        for f, w in zip(freqs, ws):
            if out_f and abs(f - out_f[-1]) <= tol:
                out_w[-1] += w
            else:
                out_f.append(f)
                out_w.append(w)
        return np.asarray(out_f), np.asarray(out_w)


def bath_correlation(h_b: LocalHamiltonian, b_op: HermitianOperator, beta: float) -> BathCorrelation:
    """Exact peak decomposition of the bath autocorrelation.

    For bath eigenpairs (omega_k, |k>) and occupation e^{-beta omega_k}/Z_b,
    the pair (k, l) contributes the frequency omega_l - omega_k with weight
    |B_kl|^2 e^{-beta omega_k}/Z_b; summing weights gives Tr(B^2 rho_b) and
    the weights obey the thermal symmetry required for detailed balance.
    """
    dec = eigh(assemble(h_b))
    omegas = dec.eigenvalues
    b_eig = dec.eigenvectors.conj().T @ b_op.matrix @ dec.eigenvectors
    occ = gibbs_populations(omegas, beta)
    freqs = (omegas[None, :] - omegas[:, None]).ravel()  # omega_l - omega_k
    weights = (np.abs(b_eig) ** 2 * occ[:, None]).ravel()
    return BathCorrelation(frequencies=freqs, weights=weights)


def _kern(x: np.ndarray, t: float) -> np.ndarray:
    """(1 - cos(t x)) / x^2, stable through x = 0 where it equals t^2/2."""
    return (t**2 / 2.0) * np.sinc(t * x / (2.0 * np.pi)) ** 2


def _imf(x: np.ndarray, t: float) -> np.ndarray:
    """t (1 - sinc(t x)) / x, stable through x = 0 where it vanishes."""
    u = t * np.asarray(x, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-4
    us = u[small]
    out[small] = us / 6.0 - us**3 / 120.0
    ub = u[~small]
    out[~small] = (1.0 - np.sin(ub) / ub) / ub
    return t**2 * out


def second_order_Q_nu(
    energies: np.ndarray,
    s_elements: np.ndarray,
    corr: BathCorrelation,
    t: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Finite-time second-order population kernel Q and coherence factors nu.

    ``s_elements`` is the coupling operator in the system eigenbasis;
    Q columns sum to zero (trace preservation at second order).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    e = np.asarray(energies, dtype=float)
    s = np.asarray(s_elements, dtype=complex)
    n = len(e)
    w = corr.weights
    om = corr.frequencies
    # x[p, m, n] = omega_p - E_n + E_m
    x = om[:, None, None] - e[None, None, :] + e[None, :, None]
    ksum = np.einsum("p,pmn->mn", w, _kern(x, t))
    gain = (np.abs(s) ** 2) * ksum
    q = 2.0 * (gain - np.diag(gain.sum(axis=0)))

    f_im = np.einsum("p,pln->ln", w, _imf(x, t))
    f_n = np.einsum("ln,ln->n", np.abs(s) ** 2, ksum + 1j * f_im)
    k0 = float(np.dot(w, _kern(om, t)))
    s_diag = np.real(np.diag(s))
    nu = 2.0 * np.outer(s_diag, s_diag) * k0 - f_n[:, None] - np.conj(f_n)[None, :]
    return np.real(q), nu


def default_spectral_density(beta: float, scale: float = 1.0):
    """Smooth thermal density: scale * e^{beta*omega/2} * sech((beta/2 + 1) * omega).

    Satisfies htilde(-omega) = e^{-beta*omega} * htilde(omega) identically and
    decays like e^{-|omega|} at large frequency for every beta >= 0.  Written
    as 2*exp(-logaddexp(omega, -(beta+1)*omega)) so it never overflows.
    """

    def htilde(omega):
        w = np.asarray(omega, dtype=float)
        out = 2.0 * scale * np.exp(-np.logaddexp(w, -(beta + 1.0) * w))
        return out if out.ndim else float(out)

    return htilde


def check_kms(htilde, beta: float, probes: np.ndarray, tol: float = 1e-10):
    """Raise unless htilde(-w) = e^{-beta*w} htilde(w) at every probe frequency."""
    for w in np.atleast_1d(probes):
        lhs = float(htilde(-w))
        rhs = math.exp(-beta * w) * float(htilde(w))
        if abs(lhs - rhs) > tol * max(1.0, abs(lhs), abs(rhs)):
            raise KmsViolationError(
                f"htilde violates the thermal symmetry at omega={w}: {lhs} vs {rhs}"
            )


def principal_value_integral(f, pole: float) -> float:
    """PV integral of f(omega)/(omega - pole) over the real line.

    Evaluated as the symmetric-exclusion limit in closed form:
    integral over u in (0, inf) of [f(pole + u) - f(pole - u)] / u,
    whose integrand is regular at u = 0.
    """

    def integrand(u):
        return (f(pole + u) - f(pole - u)) / u

    val, _ = quad(integrand, 0.0, np.inf, limit=400)
    return float(val)


@dataclass(frozen=True)
class ConditionRecord:
    """Validity-condition margins of a scaled-limit kernel (must stay < 1)."""

    condition1: float
    condition2: float
    c_value: float

    @property
    def satisfied(self) -> bool:
        return self.condition1 < 1.0 and self.condition2 < 1.0


@dataclass(frozen=True)
class IdealizedKernel:
    """Scaled-limit population chain, coherence decay factors, and margins."""

    p_matrix: "np.ndarray"
    mu_offdiag: np.ndarray
    conditions: ConditionRecord
    energies: np.ndarray
    beta: float
    lambda2t: float

    def to_json_dict(self) -> dict:
        from .serialize import complex_to_pairs

        return {
            "P": self.p_matrix.tolist(),
            "mu": complex_to_pairs(self.mu_offdiag),
            "conditions": {
                "condition1": self.conditions.condition1,
                "condition2": self.conditions.condition2,
                "c": self.conditions.c_value,
            },
            "energies": self.energies.tolist(),
            "beta": self.beta,
            "lambda2t": self.lambda2t,
        }


def idealized_limit(
    energies: np.ndarray,
    s_elements: np.ndarray,
    htilde,
    beta: float,
    lambda2t: float,
) -> IdealizedKernel:
    """Scaled-limit kernel: vanishing coupling, long time, lambda^2 t fixed.

    Population transitions n -> m get probability
    lambda^2 t * 2*pi * |S_mn|^2 * htilde(E_n - E_m) with the diagonal
    absorbing the complement, which is column-stochastic by construction and
    obeys detailed balance whenever htilde obeys the thermal symmetry.
    Coherence factors carry the real decay from the same golden-rule sums and
    a principal-value phase.  The rotating phase e^{it(E_n - E_m)} is left
    out of mu_offdiag: t alone is not fixed in this limit and the phase
    affects neither |mu| nor conjugate pairing.
    """
    e = np.asarray(energies, dtype=float)
    _require_nondegenerate(e)
    s = np.asarray(s_elements, dtype=complex)
    n = len(e)
    gaps = e[None, :] - e[:, None]  # gaps[m, n] = E_n - E_m
    check_kms(htilde, beta, np.unique(np.abs(gaps[gaps != 0])) if n > 1 else np.array([1.0]))

    hvals = np.asarray(htilde(gaps), dtype=float)
    gain = lambda2t * 2.0 * np.pi * (np.abs(s) ** 2) * hvals
    off = gain.copy()
    np.fill_diagonal(off, 0.0)
    p = np.eye(n) - np.diag(off.sum(axis=0)) + off

    # golden-rule sums Re g and the principal-value phase
    re_g = np.array([float(np.sum(np.abs(s[:, i]) ** 2 * hvals[:, i])) for i in range(n)])
    pv = np.zeros(n)
    for i in range(n):
        for l in range(n):
            w2 = float(np.abs(s[l, i]) ** 2)
            if w2 > 0:
                pv[i] += w2 * principal_value_integral(htilde, e[i] - e[l])
    s_diag = np.real(np.diag(s))
    h0 = float(htilde(0.0))
    z = lambda2t * (
        2.0 * np.pi * np.outer(s_diag, s_diag) * h0
        - np.pi * (re_g[:, None] + re_g[None, :])
        - 1j * (pv[:, None] - pv[None, :])
    )
    mu = 1.0 + z

    cond1 = float(lambda2t * 2.0 * np.pi * np.max(re_g))
    cond2 = float(
        lambda2t
        * np.pi
        * np.max(np.abs(-np.outer(s_diag, s_diag) * h0 + (re_g[:, None] + re_g[None, :]) / 2.0))
    )
    record = ConditionRecord(condition1=cond1, condition2=cond2, c_value=cond1)
    if not record.satisfied:
        warnings.warn(
            f"validity margins exceed 1 (cond1={cond1:.3f}, cond2={cond2:.3f}); "
            "the kernel may leave [0, 1]",
            ConditionViolationWarning,
            stacklevel=2,
        )
    return IdealizedKernel(
        p_matrix=p, mu_offdiag=mu, conditions=record, energies=e, beta=beta, lambda2t=lambda2t
    )


@dataclass(frozen=True)
class ValidityRecord:
    """Ensemble-level rescaled coupling c(t) and dimensionless temperature."""

    c: float
    c1: float | None
    beta_prime: float


def validity_conditions(n: int, k: int, lam: float, t: float, beta: float = 0.0) -> ValidityRecord:
    """Rescaled coupling c(t) for the sampled ensemble at scale 1.

    c(t) = lambda^2 t * (16 pi / 3 sqrt(3)) * C(k,2) * sqrt(C(n,2)) for n > 1;
    for a single-qubit system the constant becomes 8 pi sqrt(2) / (3 sqrt(3)).
    beta_prime = beta * W_s uses the ensemble-mean spectral width.
    """
    if n < 1 or k < 2:
        raise ValueError("requires n >= 1 and k >= 2")
    lam2t = lam**2 * t
    pairs_k = math.comb(k, 2)
    if n == 1:
        c1 = lam2t * (8.0 * math.pi * math.sqrt(2.0) / (3.0 * math.sqrt(3.0))) * pairs_k
        c = c1
        c1_field: float | None = c1
    else:
        c = lam2t * (16.0 * math.pi / (3.0 * math.sqrt(3.0))) * pairs_k * math.sqrt(math.comb(n, 2))
        c1_field = None
    from .hamiltonians import ensemble_spectral_width

    return ValidityRecord(c=c, c1=c1_field, beta_prime=beta * ensemble_spectral_width(n))


def c_factor(n: int, k: int) -> float:
    """c(t) / (lambda^2 t) for the sampled ensemble."""
    return validity_conditions(n, k, 1.0, 1.0).c


@dataclass(frozen=True)
class ZenoProbe:
    """Fixed-point distances to the maximally mixed state along a t schedule."""

    t_schedule: np.ndarray
    lambdas: np.ndarray
    distances: np.ndarray
    monotone_decreasing: bool
    uniqueness_assertable: bool
    commutator_norm: float


def inverse_zeno_probe(
    model: JointModel,
    lambda2t: float,
    t_schedule,
    beta: float,
) -> ZenoProbe:
    """Strong brief coupling: hold lambda^2 t fixed while t shrinks.

    At each schedule point the exact channel's fixed point is compared to the
    maximally mixed state; when S and H_s share no eigenbasis (checked via
    the commutator) the distances must shrink as t -> 0.
    """
    ts = np.asarray(sorted(t_schedule, reverse=True), dtype=float)
    if np.any(ts <= 0):
        raise ValueError("schedule times must be positive")
    hs = assemble(model.h_s).matrix
    s_mat = assemble(model.s_op).matrix
    comm = float(op2norm(hs @ s_mat - s_mat @ hs))
    es = np.linalg.eigvalsh(hs)
    ev_s = np.linalg.eigvalsh(s_mat)
    nondegenerate = (
        (len(es) < 2 or np.min(np.diff(np.sort(es))) > MIN_SPECTRAL_GAP)
        and (len(ev_s) < 2 or np.min(np.diff(np.sort(ev_s))) > MIN_SPECTRAL_GAP)
    )
    assertable = comm > 1e-10 and nondegenerate

    b2 = None
    dists = []
    lams = []
    mixed = maximally_mixed(2**model.n).matrix
    for t in ts:
        lam = math.sqrt(lambda2t / t)
        lams.append(lam)
        probe_model = JointModel(
            h_s=model.h_s, h_b=model.h_b, s_op=model.s_op, b_op=model.b_op, lam=lam
        )
        factory = ChannelFactory(probe_model, beta)
        if b2 is None:
            rho_b = factory.rho_bath
            b_mat = assemble(model.b_op).matrix
            b2 = float(np.real(np.trace(b_mat @ b_mat @ rho_b)))
            if b2 <= 0:
                raise ValueError("bath coupling second moment must be positive")
        try:
            spec = channel_spectrum(factory.at_time(t))
            dists.append(trace_norm(spec.fixed_point.matrix - mixed))
        except AmbiguousFixedPointError:
            # shared eigenspaces leave a whole family of fixed points
            dists.append(float("nan"))
    dists = np.asarray(dists)
    monotone = bool(np.all(np.isfinite(dists)) and np.all(np.diff(dists) < 0))
    return ZenoProbe(
        t_schedule=ts,
        lambdas=np.asarray(lams),
        distances=dists,
        monotone_decreasing=monotone,
        uniqueness_assertable=assertable,
        commutator_norm=comm,
    )


def sector_analysis_to_json_dict(sa: SectorAnalysis) -> dict:
    from .serialize import complex_to_pairs

    return {
        "d_block": complex_to_pairs(sa.d_block),
        "mu_nd": complex_to_pairs(sa.nd_eigenvalues),
        "kappa_d": sa.kappa_d,
        "kappa_nd": sa.kappa_nd,
        "rates": {"rate_d": sa.rate_d, "rate_nd": sa.rate_nd},
        "fixed_point_populations": sa.fixed_point_populations.tolist(),
    }
