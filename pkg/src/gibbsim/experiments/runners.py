"""Experiment runners: seeded ensemble sweeps over baths, chains, and states.

Every runner consumes an ExperimentConfig and returns an ExperimentResult
holding flat CSV rows (deterministically ordered by sample index) plus a
JSON-ready summary.  Per-sample randomness comes from counter-based
sub-streams keyed by (seed, purpose, sample, attempt), so results do not
depend on scheduling and repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import markov2 as mk
from ..channels import AmbiguousFixedPointError, ChannelFactory
from ..hamiltonians import (
    DegenerateSpectrumError,
    SamplingSpec,
    _center_bath_operator,
    assemble,
    bath_scale,
    gibbs_populations,
    sample_bath,
    sample_nondegenerate_system,
    sample_system,
    substream,
    spectral_width,
    JointModel,
)
from ..matcore import (
    ConvergenceError,
    HermitianOperator,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    eigh,
    trace_norm,
)
from ..observables import correlation_2pt, linear_response_experiment
from ..perturbation import c_factor, extract_s2bar, inverse_zeno_probe, sector_analysis
from ..hamiltonians import gibbs_state
from .config import ConfigError, ExperimentConfig

MAX_SAMPLE_ATTEMPTS = 5

# sub-stream purposes
_STREAM_SYSTEM = 0
_STREAM_INTERACTION = 1
_STREAM_BATH = 2
_STREAM_DM = 4
_STREAM_CHAIN = 5


class NumericalFailure(RuntimeError):
    """A sample kept failing numerically after the retry budget."""


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def to_json_dict(self) -> dict:
        return {"edges": self.edges.tolist(), "counts": self.counts.tolist()}


def clipped_histogram(values, edges) -> Histogram:
    """Histogram whose counts always sum to len(values) (outliers clipped in)."""
    v = np.clip(np.asarray(values, dtype=float), edges[0], edges[-1])
    counts, _ = np.histogram(v, bins=edges)
    return Histogram(edges=np.asarray(edges), counts=counts)


@dataclass
class ExperimentResult:
    kind: str
    columns: list[str]
    rows: list[dict]
    summary: dict


def _map_indexed(fn, count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _aggregate(values: np.ndarray) -> dict:
    v = np.asarray(values, dtype=float)
    out = {"mean": float(np.mean(v)), "median": float(np.median(v))}
    out["stderr"] = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return out


# ---------------------------------------------------------------------------
# bath ensembles (also the core of the beta sweep)


@dataclass
class SampleRecord:
    index: int
    d_bar: float
    r_d_bar: float
    r_nd_bar: float
    kappa_d_mean: float
    kappa_nd_mean: float
    resamples: int


@dataclass
class EnsembleStats:
    beta: float
    beta_prime: float
    records: list[SampleRecord]
    aggregates: dict
    histograms: dict[str, Histogram]
    resample_events: int


def _time_grid(cfg: ExperimentConfig) -> tuple[np.ndarray, float]:
    """Grid of rescaled couplings c over c_interval (excluding an exact 0)."""
    lo, hi = cfg.c_interval
    if lo == 0.0:
        cs = np.linspace(lo, hi, cfg.t_points + 1)[1:]
    else:
        cs = np.linspace(lo, hi, cfg.t_points)
    return cs, (lo + hi) / 2.0


def _ensemble_sample(
    cfg: ExperimentConfig,
    beta: float,
    index: int,
    h_s_local,
    h_s_dense,
    h_spec,
    gibbs_pops: np.ndarray,
    fixed_s_op,
    fixed_b_raw,
) -> SampleRecord:
    n, k, lam = cfg.n, cfg.k, cfg.coupling
    cs, c_bar = _time_grid(cfg)

    if lam == 0.0:
        # decoupled rounds never move the eigenbasis populations of |0...0>
        p0 = np.abs(h_spec.eigenvectors[0, :]) ** 2
        d = float(np.abs(p0 - gibbs_pops).sum())
        return SampleRecord(index, d, 0.0, 0.0, 1.0, 1.0, 0)

    ts = cs / (lam**2 * c_factor(n, k))
    last_error: Exception | None = None
    for attempt in range(MAX_SAMPLE_ATTEMPTS):
        rng_bath = substream(cfg.seed, _STREAM_BATH, index, attempt)
        h_b = sample_bath(k, SamplingSpec(bath_scale(n, k), cfg.seed), rng_bath)
        if cfg.sweep_mode == "resample_interaction":
            rng_int = substream(cfg.seed, _STREAM_INTERACTION, index, attempt)
            s_op = sample_system(n, SamplingSpec(1.0, cfg.seed), rng_int)
            b_raw = sample_system(k, SamplingSpec(1.0, cfg.seed), rng_int)
        else:
            s_op, b_raw = fixed_s_op, fixed_b_raw
        try:
            b_op = _center_bath_operator(b_raw, h_b, beta)
            model = JointModel(h_s=h_s_local, h_b=h_b, s_op=s_op, b_op=b_op, lam=lam)
            factory = ChannelFactory(model, beta)
            d_t = np.empty(len(ts))
            rd_t = np.empty(len(ts))
            rnd_t = np.empty(len(ts))
            kd_t = np.empty(len(ts))
            knd_t = np.empty(len(ts))
            for j, t in enumerate(ts):
                s2 = extract_s2bar(factory.at_time(t), h_s_dense, t, lam)
                sa = sector_analysis(s2, h_spec, lam, t, c_bar)
                d_t[j] = float(np.abs(sa.fixed_point_populations - gibbs_pops).sum())
                rd_t[j] = sa.rate_d
                rnd_t[j] = sa.rate_nd
                kd_t[j] = sa.kappa_d
                knd_t[j] = sa.kappa_nd
            span = cs[-1] - cs[0] if len(cs) > 1 else 1.0

            def avg(y):
                return float(np.trapezoid(y, cs) / span) if len(cs) > 1 else float(y[0])

            return SampleRecord(
                index=index,
                d_bar=avg(d_t),
                r_d_bar=avg(rd_t),
                r_nd_bar=avg(rnd_t),
                kappa_d_mean=avg(kd_t),
                kappa_nd_mean=avg(knd_t),
                resamples=attempt,
            )
        except (DegenerateSpectrumError, AmbiguousFixedPointError, ConvergenceError,
                np.linalg.LinAlgError) as exc:
            last_error = exc
    raise NumericalFailure(
        f"sample {index} failed {MAX_SAMPLE_ATTEMPTS} times; last error: {last_error}"
    )


def _fixed_draws(cfg: ExperimentConfig):
    rng_sys = substream(cfg.seed, _STREAM_SYSTEM)
    h_s_local, _ = sample_nondegenerate_system(cfg.n, SamplingSpec(1.0, cfg.seed), rng_sys)
    h_s_dense = assemble(h_s_local)
    h_spec = eigh(h_s_dense)
    w_s = spectral_width(h_s_local)
    rng_fix = substream(cfg.seed, _STREAM_INTERACTION, 0xFFFF)
    fixed_s = sample_system(cfg.n, SamplingSpec(1.0, cfg.seed), rng_fix)
    fixed_b = sample_system(cfg.k, SamplingSpec(1.0, cfg.seed), rng_fix)
    return h_s_local, h_s_dense, h_spec, w_s, fixed_s, fixed_b


def _run_ensemble_at_beta(cfg: ExperimentConfig, beta: float, shared) -> EnsembleStats:
    h_s_local, h_s_dense, h_spec, w_s, fixed_s, fixed_b = shared
    gibbs_pops = gibbs_populations(h_spec.eigenvalues, beta)

    def work(i: int) -> SampleRecord:
        return _ensemble_sample(
            cfg, beta, i, h_s_local, h_s_dense, h_spec, gibbs_pops, fixed_s, fixed_b
        )

    records = _map_indexed(work, cfg.samples, cfg.threads)
    _, c_bar = _time_grid(cfg)
    rate_hi = 1.0 / c_bar
    d_vals = np.array([r.d_bar for r in records])
    rd_vals = np.array([r.r_d_bar for r in records])
    rnd_vals = np.array([r.r_nd_bar for r in records])
    histograms = {
        "d_bar": clipped_histogram(d_vals, np.linspace(0.0, 2.0, 41)),
        "r_d_bar": clipped_histogram(rd_vals, np.linspace(0.0, rate_hi, 41)),
        "r_nd_bar": clipped_histogram(rnd_vals, np.linspace(0.0, rate_hi, 41)),
    }
    aggregates = {
        "d_bar": _aggregate(d_vals),
        "r_d_bar": _aggregate(rd_vals),
        "r_nd_bar": _aggregate(rnd_vals),
    }
    return EnsembleStats(
        beta=beta,
        beta_prime=beta * w_s,
        records=records,
        aggregates=aggregates,
        histograms=histograms,
        resample_events=sum(r.resamples for r in records),
    )


_ENSEMBLE_COLUMNS = [
    "beta", "beta_prime", "sample", "d_bar", "r_d_bar", "r_nd_bar",
    "kappa_d_mean", "kappa_nd_mean", "resamples",
]


def _stats_rows(stats: EnsembleStats) -> list[dict]:
    return [
        {
            "beta": stats.beta,
            "beta_prime": stats.beta_prime,
            "sample": r.index,
            "d_bar": r.d_bar,
            "r_d_bar": r.r_d_bar,
            "r_nd_bar": r.r_nd_bar,
            "kappa_d_mean": r.kappa_d_mean,
            "kappa_nd_mean": r.kappa_nd_mean,
            "resamples": r.resamples,
        }
        for r in stats.records
    ]


def _stats_summary(stats: EnsembleStats) -> dict:
    return {
        "beta": stats.beta,
        "beta_prime": stats.beta_prime,
        "count": len(stats.records),
        "resample_events": stats.resample_events,
        "aggregates": stats.aggregates,
        "histograms": {k: h.to_json_dict() for k, h in stats.histograms.items()},
    }


def run_bath_ensemble(cfg: ExperimentConfig) -> ExperimentResult:
    """Fixed system; per-sample bath (and, per sweep mode, interaction) draws."""
    shared = _fixed_draws(cfg)
    stats = _run_ensemble_at_beta(cfg, cfg.beta[0], shared)
    return ExperimentResult(
        kind=cfg.kind,
        columns=_ENSEMBLE_COLUMNS,
        rows=_stats_rows(stats),
        summary={
            "config": cfg.to_json_dict(),
            "system_hamiltonian": shared[0].to_json_dict(),
            **_stats_summary(stats),
        },
    )


def run_beta_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Bath ensemble repeated across the beta list (same bath sub-streams)."""
    shared = _fixed_draws(cfg)
    rows: list[dict] = []
    per_beta = []
    for beta in cfg.beta:
        stats = _run_ensemble_at_beta(cfg, beta, shared)
        rows.extend(_stats_rows(stats))
        per_beta.append(_stats_summary(stats))
    return ExperimentResult(
        kind=cfg.kind,
        columns=_ENSEMBLE_COLUMNS,
        rows=rows,
        summary={
            "config": cfg.to_json_dict(),
            "system_hamiltonian": shared[0].to_json_dict(),
            "per_beta": per_beta,
        },
    )


# ---------------------------------------------------------------------------
# density-of-states histogram


def run_dos_histogram(cfg: ExperimentConfig) -> ExperimentResult:
    """Pooled spectra of sampled system and (variance-matched) bath draws."""
    a_b = bath_scale(cfg.n, cfg.k)
    sys_vals = np.empty((cfg.samples, 2**cfg.n))
    bath_vals = np.empty((cfg.samples, 2**cfg.k))
    for i in range(cfg.samples):
        rng_s = substream(cfg.seed, _STREAM_SYSTEM, i)
        rng_b = substream(cfg.seed, _STREAM_BATH, i)
        sys_vals[i] = np.linalg.eigvalsh(
            assemble(sample_system(cfg.n, SamplingSpec(1.0, cfg.seed), rng_s)).matrix
        )
        bath_vals[i] = np.linalg.eigvalsh(
            assemble(sample_bath(cfg.k, SamplingSpec(a_b, cfg.seed), rng_b)).matrix
        )
    rows = []
    for i in range(cfg.samples):
        for e in sys_vals[i]:
            rows.append({"sample": i, "part": "system", "eigenvalue": float(e)})
        for e in bath_vals[i]:
            rows.append({"sample": i, "part": "bath", "eigenvalue": float(e)})

    from ..hamiltonians import ensemble_spectral_width

    w = ensemble_spectral_width(cfg.n)
    edges = np.linspace(-4.5 * w, 4.5 * w, 91)
    sys_flat, bath_flat = sys_vals.ravel(), bath_vals.ravel()

    def stats(v):
        return {
            "count": int(v.size),
            "mean": float(np.mean(v)),
            "variance": float(np.var(v)),
            "skew_z": float(
                np.mean(v**3) / max(np.std(v) ** 3, 1e-300) * math.sqrt(v.size / 6.0)
            ),
        }

    summary = {
        "config": cfg.to_json_dict(),
        "system": stats(sys_flat),
        "bath": stats(bath_flat),
        "variance_ratio": float(np.var(sys_flat) / np.var(bath_flat)),
        "histograms": {
            "system": clipped_histogram(sys_flat, edges).to_json_dict(),
            "bath": clipped_histogram(bath_flat, edges).to_json_dict(),
        },
    }
    return ExperimentResult(
        kind=cfg.kind, columns=["sample", "part", "eigenvalue"], rows=rows, summary=summary
    )


# ---------------------------------------------------------------------------
# random density-matrix distances (trace-norm scale calibration)


def _random_density(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Eigenvalues uniform on the simplex; eigenbasis Haar via phase-fixed QR."""
    lam = rng.exponential(1.0, size=dim)
    lam = lam / lam.sum()
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    q = q * (d / np.abs(d))[None, :]
    return (q * lam[None, :]) @ q.conj().T


def run_random_dm_distance(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    per_dim = {}
    for dim in cfg.dims:
        def work(i: int) -> float:
            rng = substream(cfg.seed, _STREAM_DM, dim, i)
            rho1 = _random_density(dim, rng)
            rho2 = _random_density(dim, rng)
            return trace_norm(rho1 - rho2)

        dists = np.array(_map_indexed(work, cfg.samples, cfg.threads))
        rows.extend(
            {"dim": dim, "sample": i, "distance": float(d)} for i, d in enumerate(dists)
        )
        per_dim[str(dim)] = _aggregate(dists)
    return ExperimentResult(
        kind=cfg.kind,
        columns=["dim", "sample", "distance"],
        rows=rows,
        summary={"config": cfg.to_json_dict(), "per_dim": per_dim},
    )


# ---------------------------------------------------------------------------
# strong brief coupling probe


def run_zeno_probe(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    monotone_flags = []
    for i in range(cfg.samples):
        rng = substream(cfg.seed, _STREAM_SYSTEM, i)
        from ..hamiltonians import sample_joint_model

        model = sample_joint_model(
            cfg.n, cfg.k, lam=1.0, beta=cfg.beta[0], seed=cfg.seed, rng=rng
        )
        probe = inverse_zeno_probe(model, cfg.lambda2t, cfg.t_schedule, cfg.beta[0])
        monotone_flags.append(probe.monotone_decreasing and probe.uniqueness_assertable)
        for t, lam, dist in zip(probe.t_schedule, probe.lambdas, probe.distances):
            rows.append(
                {
                    "sample": i,
                    "t": float(t),
                    "lambda": float(lam),
                    "distance": float(dist),
                    "monotone": int(probe.monotone_decreasing),
                    "assertable": int(probe.uniqueness_assertable),
                }
            )
    summary = {
        "config": cfg.to_json_dict(),
        "monotone_fraction": float(np.mean(monotone_flags)),
        "count": cfg.samples,
    }
    return ExperimentResult(
        kind=cfg.kind,
        columns=["sample", "t", "lambda", "distance", "monotone", "assertable"],
        rows=rows,
        summary=summary,
    )


# ---------------------------------------------------------------------------
# eigenvalue-estimation chain sweep


def run_chain2_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    rows = []
    worst = {"stationary_error": 0.0, "bound_violations": 0}
    for i in range(cfg.samples):
        rng = substream(cfg.seed, _STREAM_CHAIN, i)
        h_local, _ = sample_nondegenerate_system(cfg.n, SamplingSpec(1.0, cfg.seed), rng)
        energies = eigh(assemble(h_local)).eigenvalues
        for beta in cfg.beta:
            p_exact = mk.exact_chain(energies, beta)
            pi = mk.stationary_distribution(p_exact)
            gibbs = gibbs_populations(energies, beta)
            stat_err = float(np.abs(pi - gibbs).sum())
            worst["stationary_error"] = max(worst["stationary_error"], stat_err)
            rows.append(
                {
                    "sample": i, "beta": beta, "m_bits": 0, "stationary_error_l1": stat_err,
                    "deviation_l1": 0.0, "bound": 0.0, "bound_valid": 1,
                    "e_norm": 0.0, "kappa": float(np.nan),
                }
            )
            for m in cfg.m_bits:
                p_blur = mk.blurred_chain(energies, beta, m)
                pert = mk.chain_perturbation_bound(p_exact, p_blur)
                if pert.valid and pert.actual_l1 > pert.bound:
                    worst["bound_violations"] += 1
                rows.append(
                    {
                        "sample": i, "beta": beta, "m_bits": m,
                        "stationary_error_l1": stat_err,
                        "deviation_l1": pert.actual_l1,
                        "bound": pert.bound if pert.valid else float("inf"),
                        "bound_valid": int(pert.valid),
                        "e_norm": pert.e_norm,
                        "kappa": pert.kappa,
                    }
                )
    summary = {"config": cfg.to_json_dict(), **worst}
    return ExperimentResult(
        kind=cfg.kind,
        columns=[
            "sample", "beta", "m_bits", "stationary_error_l1", "deviation_l1",
            "bound", "bound_valid", "e_norm", "kappa",
        ],
        rows=rows,
        summary=summary,
    )


# ---------------------------------------------------------------------------
# correlation sweep


def run_correlation_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Two-point correlator and kick response of a single-qubit thermal state."""
    if cfg.n != 1:
        raise ConfigError("correlation_sweep runs on a single qubit (n = 1)")
    h = HermitianOperator(PAULI_Z)
    o1 = HermitianOperator(PAULI_X + PAULI_Y)
    o2 = HermitianOperator(PAULI_X + PAULI_Z)
    beta = cfg.beta[0]
    rho = gibbs_state(h, beta)
    ts = np.linspace(0.0, cfg.t_max, cfg.t_points)
    rows = []
    for t in ts:
        corr = correlation_2pt(rho, o1, o2, h, float(t))
        lr = linear_response_experiment(h, rho, o1, o2, cfg.kick, float(t))
        rows.append(
            {
                "t": float(t),
                "re": corr.real,
                "im": corr.imag,
                "prediction": lr.prediction,
                "residual": lr.residual,
            }
        )
    summary = {
        "config": cfg.to_json_dict(),
        "beta": beta,
        "kick": cfg.kick,
        "max_residual": max(r["residual"] for r in rows),
    }
    return ExperimentResult(
        kind=cfg.kind,
        columns=["t", "re", "im", "prediction", "residual"],
        rows=rows,
        summary=summary,
    )


_RUNNERS = {
    "dos_histogram": run_dos_histogram,
    "bath_ensemble": run_bath_ensemble,
    "beta_sweep": run_beta_sweep,
    "zeno_probe": run_zeno_probe,
    "chain2_sweep": run_chain2_sweep,
    "random_dm_distance": run_random_dm_distance,
    "correlation_sweep": run_correlation_sweep,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return _RUNNERS[cfg.kind](cfg)
