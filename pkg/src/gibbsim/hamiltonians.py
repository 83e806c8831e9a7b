"""Random local Hamiltonians, Gibbs states, and the system-bath model.

System Hamiltonians are sums of 2-qubit blocks over all qubit pairs, baths
are sums of independent single-qubit terms, and the linear coupling is
``lambda * S (x) B`` with S and B drawn from the same measure.  The sampling
measure draws diagonal block entries uniformly in [-a, a] and off-diagonal
entries with modulus uniform in [0, a] and phase uniform in [0, 2*pi).

Randomness: every draw runs off a counter-based Philox generator keyed by
``SeedSequence((seed, *stream))``, so ensembles are reproducible per build
and sub-streams are independent of scheduling.  Cross-platform bit equality
of sampled values is not promised across numpy versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .matcore import (
    DensityMatrix,
    HermitianOperator,
    eigh,
    kron,
    matrix_exp_herm,
)
from .serialize import complex_to_pairs, pairs_to_complex

#: Minimum eigenvalue gap below which a sampled system spectrum counts as
#: degenerate and is redrawn (the eigenbasis analysis requires distinct E_n).
DEGENERACY_GAP = 1e-8


class DegenerateSpectrumError(ValueError):
    """A spectrum that must be non-degenerate has a gap below tolerance."""


def substream(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for the sub-stream (seed, *stream)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) & 0xFFFFFFFFFFFFFFFF for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class SamplingSpec:
    """Scale and seeding of the random-block measure."""

    scale_a: float
    seed: int
    locality_c: int = 4

    def __post_init__(self):
        if self.scale_a < 0:
            raise ValueError("scale_a must be nonnegative")


@dataclass(frozen=True)
class LocalTerm:
    """One block acting on an ordered tuple of qubits."""

    support: tuple[int, ...]
    block: HermitianOperator

    def __post_init__(self):
        if len(set(self.support)) != len(self.support):
            raise ValueError(f"support indices must be distinct, got {self.support}")
        if self.block.dim != 2 ** len(self.support):
            raise ValueError(
                f"block dim {self.block.dim} does not match 2^{len(self.support)}"
            )


@dataclass(frozen=True)
class LocalHamiltonian:
    """Sum of local terms on n qubits; every block has dimension locality_c."""

    n_qubits: int
    terms: tuple[LocalTerm, ...]
    locality_c: int

    def __post_init__(self):
        for t in self.terms:
            if 2 ** len(t.support) != self.locality_c:
                raise ValueError("term locality does not match locality_c")
            if any(q < 0 or q >= self.n_qubits for q in t.support):
                raise ValueError(f"support {t.support} out of range for {self.n_qubits} qubits")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "locality_c": self.locality_c,
            "terms": [
                {"support": list(t.support), "block": complex_to_pairs(t.block.matrix)}
                for t in self.terms
            ],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "LocalHamiltonian":
        terms = tuple(
            LocalTerm(tuple(t["support"]), HermitianOperator(pairs_to_complex(t["block"])))
            for t in d["terms"]
        )
        return LocalHamiltonian(d["n_qubits"], terms, d["locality_c"])


def sample_local_term(
    spec: SamplingSpec, support: tuple[int, ...], rng_stream: np.random.Generator
) -> LocalTerm:
    """Draw one Hermitian block on ``support`` from the measure at spec.scale_a.

    Diagonal entries uniform in [-a, a]; above-diagonal moduli uniform in
    [0, a] with phases uniform in [0, 2*pi); below-diagonal by Hermiticity.
    """
    d = 2 ** len(support)
    a = spec.scale_a
    block = np.zeros((d, d), dtype=complex)
    block[np.diag_indices(d)] = rng_stream.uniform(-a, a, size=d)
    iu, ju = np.triu_indices(d, k=1)
    mod = rng_stream.uniform(0.0, a, size=len(iu))
    phase = rng_stream.uniform(0.0, 2.0 * np.pi, size=len(iu))
    block[iu, ju] = mod * np.exp(1j * phase)
    block[ju, iu] = np.conj(block[iu, ju])
    return LocalTerm(tuple(support), HermitianOperator(block))


def embed_block(block: np.ndarray, support: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Place ``block`` on the given qubits with identity elsewhere.

    Qubit 0 is the leftmost (most significant) tensor factor.
    """
    rest = [q for q in range(n_qubits) if q not in support]
    order = list(support) + rest
    full = np.kron(block, np.eye(2 ** len(rest), dtype=complex))
    t = full.reshape([2] * (2 * n_qubits))
    perm = [order.index(q) for q in range(n_qubits)]
    t = np.transpose(t, perm + [n_qubits + p for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


def assemble(h: LocalHamiltonian) -> HermitianOperator:
    """Dense sum of all embedded terms."""
    total = np.zeros((h.dim, h.dim), dtype=complex)
    for t in h.terms:
        total += embed_block(t.block.matrix, t.support, h.n_qubits)
    return HermitianOperator(total)


def _pair_supports(n: int) -> list[tuple[int, ...]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def sample_system(n: int, spec: SamplingSpec, rng: np.random.Generator | None = None) -> LocalHamiltonian:
    """All-pairs 2-qubit Hamiltonian on n qubits (single-qubit term for n=1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = substream(spec.seed)
    if n == 1:
        term = sample_local_term(
            SamplingSpec(spec.scale_a, spec.seed, locality_c=2), (0,), rng
        )
        return LocalHamiltonian(1, (term,), locality_c=2)
    terms = tuple(sample_local_term(spec, s, rng) for s in _pair_supports(n))
    return LocalHamiltonian(n, terms, locality_c=4)


def sample_bath(k: int, spec: SamplingSpec, rng: np.random.Generator | None = None) -> LocalHamiltonian:
    """Non-interacting bath: one single-qubit term per bath qubit."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if rng is None:
        rng = substream(spec.seed)
    one_qubit = SamplingSpec(spec.scale_a, spec.seed, locality_c=2)
    terms = tuple(sample_local_term(one_qubit, (q,), rng) for q in range(k))
    return LocalHamiltonian(k, terms, locality_c=2)


def bath_scale(n: int, k: int) -> float:
    """Bath sampling scale that matches the bath's spectral variance to the system's."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if n == 1:
        return math.sqrt(1.0 / k)
    return math.sqrt(2.0 * math.comb(n, 2) / k)


def spectral_width(h: LocalHamiltonian) -> float:
    """Realized RMS eigenvalue sqrt(Tr(H^2)/dim) of the assembled operator."""
    m = assemble(h).matrix
    return float(np.sqrt(np.sum(np.abs(m) ** 2) / m.shape[0]))


def ensemble_spectral_width(n: int) -> float:
    """Ensemble-mean width of the system measure at scale 1."""
    if n == 1:
        return math.sqrt(2.0 / 3.0)
    return math.sqrt(4.0 / 3.0 * math.comb(n, 2))


def gibbs_state(h: HermitianOperator, beta: float) -> DensityMatrix:
    """exp(-beta*H)/Z, computed on the eigenbasis with an overflow-safe shift."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    dec = eigh(h)
    w = np.exp(-beta * (dec.eigenvalues - dec.eigenvalues.min()))
    p = w / w.sum()
    rho = (dec.eigenvectors * p[None, :]) @ dec.eigenvectors.conj().T
    return DensityMatrix((rho + rho.conj().T) / 2.0)


def gibbs_populations(energies: np.ndarray, beta: float) -> np.ndarray:
    """Boltzmann weights e^{-beta*E}/Z over a spectrum."""
    e = np.asarray(energies, dtype=float)
    w = np.exp(-beta * (e - e.min()))
    return w / w.sum()


@dataclass(frozen=True)
class ProductGibbs:
    """Product-form bath equilibrium state and its modeled preparation cost."""

    state: DensityMatrix
    circuit_cost: int


def bath_gibbs_product(h_b: LocalHamiltonian, beta: float) -> ProductGibbs:
    """Tensor product of per-qubit Gibbs states for a single-qubit-sum bath.

    Matches the full Gibbs state of the assembled bath exactly (the terms do
    not interact) and costs 2k elementary qubit operations to prepare.
    """
    k = h_b.n_qubits
    by_qubit: dict[int, LocalTerm] = {}
    for t in h_b.terms:
        if len(t.support) != 1:
            raise ValueError("bath terms must be single-qubit")
        if t.support[0] in by_qubit:
            raise ValueError(f"duplicate bath term on qubit {t.support[0]}")
        by_qubit[t.support[0]] = t
    if sorted(by_qubit) != list(range(k)):
        raise ValueError("bath terms must cover every qubit exactly once")
    factors = [gibbs_state(by_qubit[q].block, beta).matrix for q in range(k)]
    state = reduce(kron, factors) if k > 1 else factors[0]
    return ProductGibbs(DensityMatrix(state), circuit_cost=2 * k)


def trotter_product(terms, sigma: complex, n_steps: int) -> np.ndarray:
    """(prod_i exp(sigma*H_i/n))^n; error falls off as O(1/n_steps)."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    mats = [t if isinstance(t, HermitianOperator) else HermitianOperator(t) for t in terms]
    if len({m.dim for m in mats}) != 1:
        raise ValueError("all terms must share one dimension")
    step = np.eye(mats[0].dim, dtype=complex)
    for m in mats:
        step = step @ matrix_exp_herm(m, sigma / n_steps)
    return np.linalg.matrix_power(step, n_steps)


@dataclass(frozen=True)
class JointModel:
    """System, bath, and linear coupling lambda * S (x) B.

    ``b_op`` is centered so that Tr(B rho_{b,beta}) = 0 at the beta the model
    was built for; a nonzero bath mean would only shift the system
    Hamiltonian by a multiple of S.
    """

    h_s: LocalHamiltonian
    h_b: LocalHamiltonian
    s_op: LocalHamiltonian
    b_op: LocalHamiltonian
    lam: float

    def __post_init__(self):
        if self.s_op.n_qubits != self.h_s.n_qubits:
            raise ValueError("s_op must act on the system qubits")
        if self.b_op.n_qubits != self.h_b.n_qubits:
            raise ValueError("b_op must act on the bath qubits")

    @property
    def n(self) -> int:
        return self.h_s.n_qubits

    @property
    def k(self) -> int:
        return self.h_b.n_qubits

    def bath_mean_coupling(self, beta: float) -> float:
        """Tr(B rho_{b,beta}) for this model's bath."""
        rho_b = bath_gibbs_product(self.h_b, beta).state.matrix
        return float(np.real(np.trace(assemble(self.b_op).matrix @ rho_b)))


def _center_bath_operator(b_op: LocalHamiltonian, h_b: LocalHamiltonian, beta: float) -> LocalHamiltonian:
    """Subtract a multiple of identity so Tr(B rho_{b,beta}) = 0 exactly."""
    rho_b = bath_gibbs_product(h_b, beta).state.matrix
    mean = float(np.real(np.trace(assemble(b_op).matrix @ rho_b)))
    shift = mean / len(b_op.terms)
    terms = tuple(
        LocalTerm(t.support, HermitianOperator(t.block.matrix - shift * np.eye(t.block.dim)))
        for t in b_op.terms
    )
    return LocalHamiltonian(b_op.n_qubits, terms, b_op.locality_c)


def sample_interaction(
    n: int,
    k: int,
    h_b: LocalHamiltonian,
    beta: float,
    seed: int,
    rng: np.random.Generator | None = None,
) -> tuple[LocalHamiltonian, LocalHamiltonian]:
    """Draw coupling operators S (system) and B (bath) at scale 1, B centered.

    Both are all-pairs 2-qubit sums from the same measure as the
    Hamiltonians (single-qubit fallback when the side has one qubit).
    """
    if rng is None:
        rng = substream(seed, 1)
    spec = SamplingSpec(scale_a=1.0, seed=seed)
    s_op = sample_system(n, spec, rng)
    b_raw = sample_system(k, spec, rng)
    b_op = _center_bath_operator(b_raw, h_b, beta)
    return s_op, b_op


def sample_nondegenerate_system(
    n: int,
    spec: SamplingSpec,
    rng: np.random.Generator | None = None,
    max_attempts: int = 100,
) -> tuple[LocalHamiltonian, int]:
    """Sample a system Hamiltonian, redrawing while the spectrum is degenerate.

    Returns the Hamiltonian and the number of redraws that were needed.
    """
    if rng is None:
        rng = substream(spec.seed)
    for attempt in range(max_attempts):
        h = sample_system(n, spec, rng)
        energies = eigh(assemble(h)).eigenvalues
        if len(energies) == 1 or np.min(np.diff(energies)) >= DEGENERACY_GAP:
            return h, attempt
    raise DegenerateSpectrumError(
        f"no non-degenerate spectrum after {max_attempts} draws"
    )


def sample_joint_model(
    n: int,
    k: int,
    lam: float,
    beta: float,
    seed: int,
    h_s: LocalHamiltonian | None = None,
    s_op: LocalHamiltonian | None = None,
    b_raw: LocalHamiltonian | None = None,
    rng: np.random.Generator | None = None,
) -> JointModel:
    """Draw a full system-bath model at the matched bath scale.

    Pass ``h_s``/``s_op``/``b_raw`` to hold parts fixed across draws (sweep
    modes); whatever is passed as ``b_raw`` is re-centered against the drawn
    bath at this beta.
    """
    if rng is None:
        rng = substream(seed, 0)
    if h_s is None:
        h_s, _ = sample_nondegenerate_system(n, SamplingSpec(1.0, seed), rng)
    h_b = sample_bath(k, SamplingSpec(bath_scale(n, k), seed), rng)
    spec1 = SamplingSpec(1.0, seed)
    if s_op is None:
        s_op = sample_system(n, spec1, rng)
    if b_raw is None:
        b_raw = sample_system(k, spec1, rng)
    b_op = _center_bath_operator(b_raw, h_b, beta)
    return JointModel(h_s=h_s, h_b=h_b, s_op=s_op, b_op=b_op, lam=lam)
