"""Eigenvalue-estimation Markov chain over the system spectrum.

The second preparation route runs at the population level: estimate the
system's eigenvalue with an m-bit register, propose a fresh bath level, and
partially swap with Boltzmann acceptance.  With exact eigenvalue readout the
chain over levels is

    P(n -> m) = 1/N                      for E_m < E_n
              = e^{-beta (E_m - E_n)}/N  for E_m > E_n

with the diagonal absorbing the rejected weight so columns sum to one; its
unique stationary vector is the Gibbs distribution, exactly.  A finite
register blurs the readout by the squared Dirichlet kernel p(s|n), and the
realized chain is the kernel-sandwiched version of the outcome-level rule.
All chains here are column-stochastic: entry [m][n] is P(n -> m).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .channels import IterationTrace, NonConvergenceWarning
from .matcore import DensityMatrix, HermitianOperator, eigh, op2norm

COLUMN_SUM_TOL = 1e-10
ENTRY_TOL = 1e-12
UNIT_EIGENVALUE_TOL = 1e-9


class AmbiguousStationaryError(RuntimeError):
    """The chain has more than one unit-modulus eigenvalue."""


class DegenerateRescaleError(ValueError):
    """All energies coincide; the register rescaling is undefined."""


@dataclass(frozen=True)
class MarkovMatrix:
    """Column-stochastic transition matrix, P[m][n] = P(n -> m)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got {m.shape}")
        if m.min() < -ENTRY_TOL:
            raise ValueError(f"negative transition probability {m.min():.3e}")
        colsum_err = np.max(np.abs(m.sum(axis=0) - 1.0))
        if colsum_err > COLUMN_SUM_TOL:
            raise ValueError(f"column sums deviate from 1 by {colsum_err:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self, path):
        """One row per entry: row index, column index, probability."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["to", "from", "probability"])
            for i in range(self.dim):
                for j in range(self.dim):
                    w.writerow([i, j, repr(float(self.matrix[i, j]))])


@dataclass(frozen=True)
class PhaseKernel:
    """m-bit eigenvalue-readout distribution p(s|n) over register outcomes.

    Energies are mapped through E' = f1*E + f2 into [0, 2*pi); row n of ``p``
    is the outcome distribution of eigenstate n.
    """

    m_bits: int
    f1: float
    f2: float
    p: np.ndarray
    energies: np.ndarray

    @property
    def n_states(self) -> int:
        return self.p.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.p.shape[1]

    def outcome_energies(self) -> np.ndarray:
        """Raw-energy positions of the register outcomes."""
        s = np.arange(self.n_outcomes)
        return (2.0 * np.pi * s / self.n_outcomes - self.f2) / self.f1

    def bath_outcome_distribution(self) -> np.ndarray:
        """Outcome distribution of a maximally mixed (fresh bath) copy."""
        return self.p.mean(axis=0)

    def posterior(self) -> np.ndarray:
        """q[n, s] = p(state n | outcome s) under the uniform state prior.

        Columns never produced by any state are left at zero.
        """
        col = self.p.sum(axis=0)
        q = np.zeros_like(self.p)
        hit = col > 0
        q[:, hit] = self.p[:, hit] / col[hit]
        return q

    def to_json(self) -> str:
        return json.dumps(
            {
                "m_bits": self.m_bits,
                "f1": self.f1,
                "f2": self.f2,
                "p": self.p.tolist(),
                "energies": self.energies.tolist(),
            }
        )


def phase_kernel(energies, m_bits: int, estimate_slack: float = 0.0) -> PhaseKernel:
    """Squared-Dirichlet readout kernel of the m-bit estimation register.

    p(s|n) = |2^-m sum_l e^{i l (E'_n - 2 pi s / 2^m)}|^2, in closed form
    sin^2(M x / 2) / (M^2 sin^2(x / 2)) with the removable singularity at
    x = 0 set to 1.  ``estimate_slack`` widens the assumed spectral window on
    both sides by that fraction of the true range (mis-estimation studies).
    """
    if m_bits < 1:
        raise ValueError("m_bits must be >= 1")
    e = np.asarray(energies, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError("energies must be finite")
    lo, hi = float(e.min()), float(e.max())
    span = hi - lo
    if span < 1e-300:
        raise DegenerateRescaleError("all energies equal; rescale factor undefined")
    lo -= estimate_slack * span
    hi += estimate_slack * span
    m = 2**m_bits
    f1 = 2.0 * np.pi * (1.0 - 1.0 / m) / (hi - lo)
    f2 = -f1 * lo
    e_prime = f1 * e + f2
    s = np.arange(m)
    x = e_prime[:, None] - 2.0 * np.pi * s[None, :] / m
    half = x / 2.0
    denom = np.sin(half)
    num = np.sin(m * half)
    p = np.empty_like(x)
    tiny = np.abs(denom) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (num / (m * denom)) ** 2
    p[tiny] = 1.0
    return PhaseKernel(m_bits=m_bits, f1=f1, f2=f2, p=p, energies=e)


def _partial_swap_chain(energies: np.ndarray, beta: float, proposal: np.ndarray) -> np.ndarray:
    """Column-stochastic partial-swap rule with an arbitrary proposal law.

    Off-diagonal P(s -> t) = proposal[t] * min-style acceptance (certain when
    the proposed level is lower, Boltzmann suppressed when higher); the
    diagonal takes the complement.
    """
    e = np.asarray(energies, dtype=float)
    n = len(e)
    diff = e[:, None] - e[None, :]  # diff[t, s] = E_t - E_s
    accept = np.where(diff < 0, 1.0, np.exp(-beta * np.maximum(diff, 0.0)))
    p = proposal[:, None] * accept
    np.fill_diagonal(p, 0.0)
    diag = 1.0 - p.sum(axis=0)
    return p + np.diag(diag)


def exact_chain(energies, beta: float) -> MarkovMatrix:
    """Partial-swap chain with exact eigenvalue readout (uniform proposals).

    Satisfies detailed balance P(n->m) e^{-beta E_n} = P(m->n) e^{-beta E_m}
    exactly, entry by entry, and every entry is strictly positive for finite
    beta, so the Gibbs distribution is the unique stationary vector.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    e = np.asarray(energies, dtype=float)
    n = len(e)
    if n < 2:
        raise ValueError("need at least two levels")
    gaps = np.abs(e[:, None] - e[None, :])[~np.eye(n, dtype=bool)]
    if gaps.min() == 0.0:
        raise ValueError("energies must be distinct")
    return MarkovMatrix(_partial_swap_chain(e, beta, np.full(n, 1.0 / n)))


def outcome_chain(kernel: PhaseKernel, beta: float) -> MarkovMatrix:
    """Partial-swap rule over register outcomes.

    The fresh bath copy is maximally mixed, so it proposes outcome t with the
    kernel-blurred probability mean_n p(t|n); acceptance compares the raw
    energies the outcomes decode to.  With a delta kernel this collapses to
    the exact chain on the populated outcomes.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return MarkovMatrix(
        _partial_swap_chain(kernel.outcome_energies(), beta, kernel.bath_outcome_distribution())
    )


def approximate_chain(exact: MarkovMatrix, kernel: PhaseKernel) -> MarkovMatrix:
    """Kernel-blurred chain P'(n -> m) = sum_{s,t} p(s|n) P(s->t) p(m|t).

    ``exact`` is the chain over the kernel's outcome labels (for a delta
    kernel, the level chain itself); the result acts on eigenstate labels.
    """
    if exact.dim != kernel.n_outcomes:
        raise ValueError(
            f"chain dimension {exact.dim} does not match kernel outcomes {kernel.n_outcomes}"
        )
    q = kernel.posterior()
    p_prime = q @ exact.matrix @ kernel.p.T
    return MarkovMatrix(p_prime)


def blurred_chain(energies, beta: float, m_bits: int, estimate_slack: float = 0.0) -> MarkovMatrix:
    """Full pipeline: kernel, outcome-level swap chain, kernel sandwich."""
    kernel = phase_kernel(energies, m_bits, estimate_slack)
    return approximate_chain(outcome_chain(kernel, beta), kernel)


def stationary_distribution(p: MarkovMatrix, require_unique: bool = True) -> np.ndarray:
    """Probability vector pi with P pi = pi, solved exactly via a bordered system.

    Uniqueness is checked on the spectrum: a second eigenvalue within 1e-9 of
    modulus 1 raises AmbiguousStationaryError (unless require_unique=False,
    which returns one unit eigenvector).
    """
    m = p.matrix
    n = p.dim
    vals = np.linalg.eigvals(m)
    near_unit = np.sum(np.abs(np.abs(vals) - 1.0) < UNIT_EIGENVALUE_TOL)
    if near_unit > 1:
        if require_unique:
            raise AmbiguousStationaryError(
                f"{int(near_unit)} eigenvalues of modulus ~1; stationary vector not unique"
            )
        w, v = np.linalg.eig(m)
        idx = int(np.argmin(np.abs(w - 1.0)))
        pi = np.real(v[:, idx])
        pi = np.clip(pi if pi.sum() > 0 else -pi, 0.0, None)
        return pi / pi.sum()
    a = m - np.eye(n) + np.ones((n, n))
    pi = np.linalg.solve(a, np.ones(n))
    resid = float(np.abs(m @ pi - pi).sum())
    if resid > 1e-12:
        raise AmbiguousStationaryError(f"stationary solve residual {resid:.3e} exceeds 1e-12")
    return pi


@dataclass(frozen=True)
class ChainPerturbation:
    """Linearized sensitivity of the stationary state to a chain perturbation.

    Y inverts (1 - P) on the complement of the stationary direction; the
    trace-distance bound is sqrt(N) * x / (1 - x) with
    x = |||E|||_2 / |1 - kappa|, valid while x < 1.  ``kappa`` is the
    eigenvalue of P (excluding the stationary one) closest to 1, which is
    what sets |||Y|||_2 in the diagonalizing basis.
    """

    e_matrix: np.ndarray
    y_matrix: np.ndarray
    kappa: float
    bound: float
    actual_l1: float
    valid: bool
    e_norm: float


def chain_perturbation_bound(p: MarkovMatrix, p_prime: MarkovMatrix) -> ChainPerturbation:
    """Compare the blurred chain against the reference and bound the shift."""
    if p.dim != p_prime.dim:
        raise ValueError("chains must share a dimension")
    n = p.dim
    pi = stationary_distribution(p)
    pi_prime = stationary_distribution(p_prime)
    p_inf = np.outer(pi, np.ones(n))
    y = np.linalg.inv(np.eye(n) - p.matrix + p_inf) - p_inf

    vals = np.linalg.eigvals(p.matrix)
    order = np.argsort(np.abs(vals - 1.0))
    rest = vals[order[1:]]
    kappa_c = rest[np.argmin(np.abs(1.0 - rest))]
    kappa = float(np.real(kappa_c))

    e = p_prime.matrix - p.matrix
    e_norm = op2norm(e)
    gap = abs(1.0 - kappa_c)
    x = e_norm / gap if gap > 0 else float("inf")
    valid = x < 1.0
    bound = math.sqrt(n) * x / (1.0 - x) if valid else float("inf")
    return ChainPerturbation(
        e_matrix=e,
        y_matrix=y,
        kappa=kappa,
        bound=bound,
        actual_l1=float(np.abs(pi_prime - pi).sum()),
        valid=valid,
        e_norm=e_norm,
    )


def run_algorithm_two(
    h_s: HermitianOperator,
    beta: float,
    m_bits: int,
    r_max: int,
    epsilon: float,
    window: int = 5,
) -> IterationTrace:
    """Iterate the blurred chain from the maximally mixed populations.

    States are recorded as diagonal density matrices in the eigenbasis of
    h_s; the trace-distance deltas reduce to l1 distances of populations.
    """
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    energies = eigh(h_s).eigenvalues
    if np.min(np.diff(energies)) < 1e-12:
        raise ValueError("spectrum must be non-degenerate")
    chain = blurred_chain(energies, beta, m_bits)
    n = len(energies)
    pops = np.full(n, 1.0 / n)
    trace = IterationTrace(states=[DensityMatrix(np.diag(pops))], deltas=[])
    streak = 0
    for r in range(1, r_max + 1):
        nxt = chain.matrix @ pops
        delta = float(np.abs(nxt - pops).sum())
        trace.states.append(DensityMatrix(np.diag(nxt / nxt.sum())))
        trace.deltas.append(delta)
        streak = streak + 1 if delta <= epsilon else 0
        pops = nxt
        if streak >= window:
            trace.converged = True
            trace.converged_round = r - window + 1
            break
    if not trace.converged:
        warnings.warn(
            f"no convergence within {r_max} rounds (final delta {trace.final_delta:.3e})",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return trace


def chain_summary_json(p: MarkovMatrix, pert: ChainPerturbation | None = None) -> str:
    """JSON summary of a chain (and optionally its perturbation record)."""
    out: dict = {
        "dim": p.dim,
        "column_sum_max_error": float(np.max(np.abs(p.matrix.sum(axis=0) - 1.0))),
        "min_entry": float(p.matrix.min()),
    }
    try:
        out["stationary"] = stationary_distribution(p).tolist()
    except AmbiguousStationaryError:
        out["stationary"] = None
    if pert is not None:
        out["perturbation"] = {
            "kappa": pert.kappa,
            "e_norm": pert.e_norm,
            "bound": pert.bound,
            "actual_l1": pert.actual_l1,
            "valid": pert.valid,
        }
    return json.dumps(out)
