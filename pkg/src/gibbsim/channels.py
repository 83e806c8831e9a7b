"""Exact system-bath equilibration channels and their matrix representation.

One interaction round is the trace-preserving completely positive map

    S(chi) = Tr_b[ e^{iHt} (chi (x) rho_{b,beta}) e^{-iHt} ],

with H = H_s (x) 1 + 1 (x) H_b + lambda S (x) B.  The channel is represented
as an N^2 x N^2 matrix acting on row-major vectorized operators: the matrix
entry at (m*N+n, k*N+l) is S_{mn,kl}, i.e. the (m, n) component of the image
of the matrix unit |k><l|.  Equivalently the matrix column k*N+l is the
vectorized image of that matrix unit; the builder computes all N^2 unit
probes in one contraction.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .hamiltonians import JointModel, assemble, bath_gibbs_product
from .matcore import (
    DensityMatrix,
    HermitianOperator,
    SpectralDecomposition,
    computational_zero,
    eig_general,
    eigh,
    kron,
    trace_norm,
    trace_out_bath,
)
from .serialize import complex_to_pairs, pairs_to_complex

#: Joint dimension guard: refuse to densify above 2**DIM_CAP_QUBITS.
DIM_CAP_QUBITS = 12

UNIT_EIGENVALUE_TOL = 1e-9


class DimensionCapError(ValueError):
    """Joint system-bath space would exceed the configured dense-size cap."""


class AmbiguousFixedPointError(RuntimeError):
    """More than one channel eigenvalue sits within tolerance of 1."""


class NonConvergenceWarning(UserWarning):
    """Iteration hit its round cap before the convergence window closed."""


@dataclass(frozen=True)
class Superoperator:
    """N^2 x N^2 matrix of a linear map on operators (row-major convention)."""

    dim_n: int
    matrix: np.ndarray

    def __post_init__(self):
        n2 = self.dim_n**2
        if self.matrix.shape != (n2, n2):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({n2}, {n2})")

    def apply(self, chi: np.ndarray) -> np.ndarray:
        """Image of the operator chi under the map."""
        n = self.dim_n
        return (self.matrix @ np.asarray(chi, dtype=complex).ravel()).reshape(n, n)

    def apply_density(self, rho: DensityMatrix) -> DensityMatrix:
        out = self.apply(rho.matrix)
        return DensityMatrix((out + out.conj().T) / 2.0)

    def to_json(self) -> str:
        return json.dumps({"dim_n": self.dim_n, "matrix": complex_to_pairs(self.matrix)})

    @staticmethod
    def from_json(text: str) -> "Superoperator":
        d = json.loads(text)
        return Superoperator(d["dim_n"], pairs_to_complex(d["matrix"]))


def identity_channel(n: int) -> Superoperator:
    return Superoperator(n, np.eye(n * n, dtype=complex))


def depolarizing_channel(n: int) -> Superoperator:
    """chi -> Tr(chi) * I/N."""
    m = np.zeros((n * n, n * n), dtype=complex)
    for out in range(n):
        for k in range(n):
            m[out * n + out, k * n + k] = 1.0 / n
    return Superoperator(n, m)


def unitary_channel(u: np.ndarray) -> Superoperator:
    """Conjugation chi -> U chi U^dagger."""
    u = np.asarray(u, dtype=complex)
    return Superoperator(u.shape[0], np.kron(u, u.conj()))


def kraus_channel(ops) -> Superoperator:
    """Channel matrix sum_i kron(A_i, conj(A_i)) from operation elements."""
    ops = [np.asarray(a, dtype=complex) for a in ops]
    n = ops[0].shape[0]
    m = np.zeros((n * n, n * n), dtype=complex)
    for a in ops:
        m += np.kron(a, a.conj())
    return Superoperator(n, m)


def build_joint_hamiltonian(model: JointModel, dim_cap_qubits: int = DIM_CAP_QUBITS) -> HermitianOperator:
    """H_s (x) 1_K + 1_N (x) H_b + lambda * S (x) B, dense."""
    if model.n + model.k > dim_cap_qubits:
        raise DimensionCapError(
            f"joint space of {model.n + model.k} qubits exceeds the cap of {dim_cap_qubits}"
        )
    hs = assemble(model.h_s).matrix
    hb = assemble(model.h_b).matrix
    s = assemble(model.s_op).matrix
    b = assemble(model.b_op).matrix
    n_dim, k_dim = hs.shape[0], hb.shape[0]
    h = (
        kron(hs, np.eye(k_dim))
        + kron(np.eye(n_dim), hb)
        + model.lam * kron(s, b)
    )
    return HermitianOperator(h)


class ChannelFactory:
    """Caches the joint eigendecomposition so channels at many interaction
    times come out of two matrix multiplications plus one contraction each."""

    def __init__(self, model: JointModel, beta: float, dim_cap_qubits: int = DIM_CAP_QUBITS):
        if beta < 0:
            raise ValueError("beta must be nonnegative")
        self.model = model
        self.beta = beta
        self.n_dim = 2**model.n
        self.k_dim = 2**model.k
        self._joint = eigh(build_joint_hamiltonian(model, dim_cap_qubits))
        self._rho_b = bath_gibbs_product(model.h_b, beta).state.matrix

    @property
    def rho_bath(self) -> np.ndarray:
        """Bath equilibrium state used on every round."""
        return self._rho_b

    def unitary(self, t: float) -> np.ndarray:
        """e^{iHt} on the joint space."""
        v = self._joint.eigenvectors
        phases = np.exp(1j * t * self._joint.eigenvalues)
        return (v * phases[None, :]) @ v.conj().T

    def at_time(self, t: float) -> Superoperator:
        """Exact channel matrix for interaction time t.

        Contracts the bath state against the joint propagator so that every
        matrix column equals the vectorized image of the corresponding matrix
        unit (verified against direct unit probes in the test suite).
        """
        if t < 0:
            raise ValueError("t must be nonnegative")
        n, k = self.n_dim, self.k_dim
        u4 = self.unitary(t).reshape(n, k, n, k)
        tmp = np.einsum("mika,ab->mikb", u4, self._rho_b, optimize=True)
        s4 = np.einsum("mikb,nilb->mnkl", tmp, u4.conj(), optimize=True)
        return Superoperator(n, np.ascontiguousarray(s4.reshape(n * n, n * n)))

    def apply_once(self, rho: DensityMatrix, t: float) -> DensityMatrix:
        """One interaction round by direct conjugation and partial trace."""
        u = self.unitary(t)
        joint = kron(rho.matrix, self._rho_b)
        out = trace_out_bath(u @ joint @ u.conj().T, self.n_dim, self.k_dim)
        return DensityMatrix((out + out.conj().T) / 2.0)


def build_superoperator(model: JointModel, t: float, beta: float) -> Superoperator:
    """Exact channel matrix of one interaction round at time t."""
    return ChannelFactory(model, beta).at_time(t)


def choi_matrix(s: Superoperator) -> np.ndarray:
    """Choi matrix sum_{kl} |k><l| (x) S(|k><l|); PSD iff S is completely positive."""
    n = s.dim_n
    s4 = s.matrix.reshape(n, n, n, n)
    return np.transpose(s4, (2, 0, 3, 1)).reshape(n * n, n * n)


@dataclass(frozen=True)
class TcpReport:
    """Worst-case violations of the trace-preserving/positivity structure."""

    column_sum_error: float
    cross_sum_error: float
    spectral_radius: float
    choi_min_eigenvalue: float
    positivity_violation: float
    conjugate_pair_error: float
    hermiticity_preservation_error: float

    def ok(self, tol: float = 1e-9) -> bool:
        return (
            self.column_sum_error < tol
            and self.cross_sum_error < tol
            and self.spectral_radius <= 1.0 + tol
            and self.choi_min_eigenvalue > -tol
            and self.positivity_violation < tol
            and self.conjugate_pair_error < tol
            and self.hermiticity_preservation_error < tol
        )


def verify_tcp(s: Superoperator, n_probes: int = 8, seed: int = 0) -> TcpReport:
    """Diagnostic sweep of the channel axioms on the matrix representation.

    Checks column sums S_{mm,nn} (must be 1), cross sums S_{mm,kl} for k != l
    (must be 0), spectral radius <= 1, conjugate pairing of the spectrum,
    positivity and Hermiticity preservation on random probes.
    """
    n = s.dim_n
    s4 = s.matrix.reshape(n, n, n, n)
    diag_out = np.einsum("mmkl->kl", s4)
    col_err = float(np.max(np.abs(np.diag(diag_out) - 1.0)))
    off = diag_out - np.diag(np.diag(diag_out))
    cross_err = float(np.max(np.abs(off))) if n > 1 else 0.0

    vals = np.linalg.eigvals(s.matrix)
    radius = float(np.max(np.abs(vals)))
    # every eigenvalue's conjugate must also be in the spectrum
    pair_err = float(np.max([np.min(np.abs(vals - mu.conjugate())) for mu in vals]))

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    pos_violation = 0.0
    herm_err = 0.0
    for _ in range(n_probes):
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        rho = g @ g.conj().T
        rho /= np.trace(rho)
        out = s.apply(rho)
        herm_err = max(herm_err, float(np.max(np.abs(out - out.conj().T))))
        lo = float(np.linalg.eigvalsh((out + out.conj().T) / 2.0)[0])
        pos_violation = max(pos_violation, max(0.0, -lo))
    choi = choi_matrix(s)
    return TcpReport(
        column_sum_error=col_err,
        cross_sum_error=cross_err,
        spectral_radius=radius,
        choi_min_eigenvalue=float(np.linalg.eigvalsh((choi + choi.conj().T) / 2.0)[0]),
        positivity_violation=pos_violation,
        conjugate_pair_error=pair_err,
        hermiticity_preservation_error=herm_err,
    )


@dataclass(frozen=True)
class ChannelSpectrum:
    """Spectral data of a channel: fixed point and mixing eigenvalue kappa."""

    decomposition: SpectralDecomposition
    fixed_point: DensityMatrix
    kappa: complex
    defective: bool


def channel_spectrum(s: Superoperator) -> ChannelSpectrum:
    """Fixed point (eigenvalue-1 eigenvector, Hermitized and normalized) and
    the second-largest-modulus eigenvalue kappa.

    Raises AmbiguousFixedPointError when two or more eigenvalues sit within
    1e-9 of 1, since the fixed point is then not unique.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dec = eig_general(s.matrix, warn_defective=False)
    dist_to_one = np.abs(dec.eigenvalues - 1.0)
    order = np.argsort(dist_to_one)
    if len(order) > 1 and dist_to_one[order[1]] < UNIT_EIGENVALUE_TOL:
        raise AmbiguousFixedPointError(
            f"{int(np.sum(dist_to_one < UNIT_EIGENVALUE_TOL))} eigenvalues within "
            f"{UNIT_EIGENVALUE_TOL} of 1; fixed point is not unique"
        )
    unit = order[0]
    n = s.dim_n
    chi = dec.eigenvectors[:, unit].reshape(n, n)
    chi = (chi + chi.conj().T) / 2.0
    tr = np.trace(chi).real
    if abs(tr) < 1e-12:
        raise AmbiguousFixedPointError("unit eigenvector has vanishing trace")
    rho0 = chi / tr
    # exact-arithmetic result is PSD; scrub eigensolver noise before validating
    w, v = np.linalg.eigh(rho0)
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    fixed = DensityMatrix((v * w[None, :]) @ v.conj().T)
    rest = np.delete(np.arange(len(dec.eigenvalues)), unit)
    kappa = complex(dec.eigenvalues[rest[np.argmax(np.abs(dec.eigenvalues[rest]))]]) if len(rest) else 0.0j
    return ChannelSpectrum(
        decomposition=dec, fixed_point=fixed, kappa=kappa, defective=dec.defective
    )


@dataclass
class IterationTrace:
    """States, per-round trace-distance deltas, and optional observable series."""

    states: list[DensityMatrix]
    deltas: list[float]
    observable_series: list[float] | None = None
    converged: bool = False
    converged_round: int | None = None

    @property
    def final_delta(self) -> float:
        return self.deltas[-1] if self.deltas else float("nan")

    @property
    def populations(self) -> np.ndarray:
        """Real diagonals of the recorded states, one row per round."""
        return np.array([st.populations() for st in self.states])

    def to_json(self) -> str:
        return json.dumps(
            {
                "states": [complex_to_pairs(st.matrix) for st in self.states],
                "deltas": self.deltas,
                "observable_series": self.observable_series,
                "converged": self.converged,
                "converged_round": self.converged_round,
            }
        )

    @staticmethod
    def from_json(text: str) -> "IterationTrace":
        d = json.loads(text)
        return IterationTrace(
            states=[DensityMatrix(pairs_to_complex(m)) for m in d["states"]],
            deltas=list(d["deltas"]),
            observable_series=d["observable_series"],
            converged=d["converged"],
            converged_round=d["converged_round"],
        )


def iterate_map(
    step,
    rho0: DensityMatrix,
    r_max: int,
    epsilon: float,
    observable: HermitianOperator | None = None,
    window: int = 5,
) -> IterationTrace:
    """Repeat ``rho -> step(rho)`` until ``window`` consecutive trace-distance
    deltas fall at or below epsilon, or r_max rounds elapse."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    trace = IterationTrace(states=[rho0], deltas=[])
    if observable is not None:
        trace.observable_series = [float(np.real(np.trace(observable.matrix @ rho0.matrix)))]
    rho = rho0
    streak = 0
    for r in range(1, r_max + 1):
        rho_next = step(rho)
        delta = trace_norm(rho_next.matrix - rho.matrix)
        trace.states.append(rho_next)
        trace.deltas.append(delta)
        if observable is not None:
            trace.observable_series.append(
                float(np.real(np.trace(observable.matrix @ rho_next.matrix)))
            )
        streak = streak + 1 if delta <= epsilon else 0
        rho = rho_next
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


def iterate_algorithm_one(
    model: JointModel,
    t: float,
    beta: float,
    r_max: int,
    epsilon: float,
    observable: HermitianOperator | None = None,
    window: int = 5,
) -> IterationTrace:
    """Repeated interaction rounds from the computational zero state.

    Each round couples the system to a fresh bath copy for time t and
    discards it, i.e. applies the same exact channel again.
    """
    factory = ChannelFactory(model, beta)
    s = factory.at_time(t)
    return iterate_map(
        s.apply_density,
        computational_zero(factory.n_dim),
        r_max=r_max,
        epsilon=epsilon,
        observable=observable,
        window=window,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Observed distance decay of channel iteration against C * r * |kappa|^r."""

    distances: np.ndarray
    kappa_abs: float
    fitted_c: float
    bound_satisfied: bool
    slope: float
    log_kappa: float


def convergence_bound_check(
    s: Superoperator,
    rho: DensityMatrix,
    r: int,
    fit_range: tuple[int, int] | None = None,
) -> ConvergenceReport:
    """Iterate the channel r times and compare the distance to the fixed point
    against C * r * |kappa|^r; also fit the log-distance slope."""
    spec = channel_spectrum(s)
    rho0 = spec.fixed_point.matrix
    kappa_abs = abs(spec.kappa)
    cur = rho.matrix
    dists = []
    for _ in range(1, r + 1):
        cur = s.apply(cur)
        dists.append(trace_norm(cur - rho0))
    dists = np.array(dists)
    rs = np.arange(1, r + 1)
    with np.errstate(divide="ignore"):
        envelope = rs * np.power(kappa_abs, rs.astype(float))
    usable = (envelope > 1e-300) & (dists > 1e-300)
    fitted_c = float(np.max(dists[usable] / envelope[usable])) if usable.any() else 0.0
    bound_ok = bool(np.all(dists[usable] <= fitted_c * envelope[usable] * (1 + 1e-9)))
    if fit_range is None:
        fit_range = (max(1, r // 3), r)
    lo, hi = fit_range
    sel = (rs >= lo) & (rs <= hi) & (dists > 1e-13)
    if sel.sum() >= 2:
        slope = float(np.polyfit(rs[sel], np.log(dists[sel]), 1)[0])
    else:
        slope = float("nan")
    return ConvergenceReport(
        distances=dists,
        kappa_abs=kappa_abs,
        fitted_c=fitted_c,
        bound_satisfied=bound_ok,
        slope=slope,
        log_kappa=float(np.log(kappa_abs)) if kappa_abs > 0 else float("-inf"),
    )


def dephase(rho: DensityMatrix, h_s: HermitianOperator, a: int) -> DensityMatrix:
    """Average of a conjugations (1/a) sum_{s=0}^{a-1} e^{iH s} rho e^{-iH s}.

    As a grows, off-diagonal elements in the H_s eigenbasis average toward
    zero for incommensurate gaps; diagonal states are left untouched.
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    dec = eigh(h_s)
    v = dec.eigenvectors
    chi = v.conj().T @ rho.matrix @ v
    gaps = dec.eigenvalues[:, None] - dec.eigenvalues[None, :]
    z = np.exp(1j * gaps)
    # geometric sum (1/a) sum_s z^s, with the z == 1 diagonal handled exactly
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = (1.0 - z**a) / (a * (1.0 - z))
    factor[np.abs(1.0 - z) < 1e-8] = 1.0
    out = v @ (chi * factor) @ v.conj().T
    return DensityMatrix((out + out.conj().T) / 2.0)
