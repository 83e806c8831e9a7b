"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Run with  pytest tests/test_acceptance.py -s  to see the per-criterion lines.
Tolerances are fixed here and nowhere else.
"""

import time

import numpy as np
import pytest

from gibbsim import channels as ch
from gibbsim import hamiltonians as hams
from gibbsim import markov2 as mk
from gibbsim import matcore as mc
from gibbsim import observables as obs
from gibbsim import perturbation as pert
from gibbsim.experiments import default_config, run_experiment


def report(name: str, detail: str = ""):
    print(f"ACCEPTANCE {name}: PASS {detail}")


def test_table_distance_calibration():
    """Mean trace distance of random density-matrix pairs at N=4 and N=16."""
    t0 = time.time()
    cfg = default_config("random_dm_distance").override(samples=1000, seed=0)
    res = run_experiment(cfg)
    per = res.summary["per_dim"]
    elapsed = time.time() - t0
    assert per["4"]["mean"] == pytest.approx(0.90388, abs=0.03)
    assert per["16"]["mean"] == pytest.approx(1.00294, abs=0.02)
    assert elapsed < 60.0
    report(
        "random-state distance table",
        f"(N=4: {per['4']['mean']:.5f}, N=16: {per['16']['mean']:.5f}, {elapsed:.1f}s)",
    )


def test_tcp_property_suite():
    """50 random interaction channels satisfy every map axiom to 1e-9."""
    rng = np.random.default_rng(7)
    worst = {"col": 0.0, "cross": 0.0, "radius": 1.0, "choi": 0.0, "pair": 0.0}
    for i in range(50):
        n = int(rng.integers(1, 3))
        k = int(rng.integers(1, 4))
        lam = float(rng.uniform(0.0, 0.2))
        t = float(rng.uniform(0.0, 2.0))
        beta = float(rng.uniform(0.0, 3.0))
        model = hams.sample_joint_model(n=n, k=k, lam=lam, beta=beta, seed=1000 + i)
        rep = ch.verify_tcp(ch.build_superoperator(model, t, beta))
        worst["col"] = max(worst["col"], rep.column_sum_error)
        worst["cross"] = max(worst["cross"], rep.cross_sum_error)
        worst["radius"] = max(worst["radius"], rep.spectral_radius)
        worst["choi"] = min(worst["choi"], rep.choi_min_eigenvalue)
        worst["pair"] = max(worst["pair"], rep.conjugate_pair_error)
    assert worst["col"] < 1e-9
    assert worst["cross"] < 1e-9
    assert worst["radius"] <= 1.0 + 1e-9
    assert worst["choi"] > -1e-9
    assert worst["pair"] < 1e-9
    report(
        "channel axiom suite",
        f"(worst col {worst['col']:.1e}, cross {worst['cross']:.1e}, "
        f"radius-1 {worst['radius']-1:.1e}, choi {worst['choi']:.1e}, pair {worst['pair']:.1e})",
    )


def test_first_order_vanishing():
    """With a centered bath coupling, ||S - S0|| scales as lambda^2."""
    slopes = []
    for seed in range(10):
        n = 1 + seed % 2
        k = 2 + seed % 2
        t, beta = 1.0, 2.0
        model0 = hams.sample_joint_model(n=n, k=k, lam=1.0, beta=beta, seed=200 + seed)
        dec = mc.eigh(hams.assemble(model0.h_s))
        u_s = (dec.eigenvectors * np.exp(1j * t * dec.eigenvalues)[None, :]) @ dec.eigenvectors.conj().T
        s0 = ch.unitary_channel(u_s).matrix
        lams = [0.02, 0.04, 0.08]
        ds = []
        for lam in lams:
            m = hams.JointModel(model0.h_s, model0.h_b, model0.s_op, model0.b_op, lam)
            ds.append(mc.op2norm(ch.build_superoperator(m, t, beta).matrix - s0))
        slopes.append(float(np.polyfit(np.log(lams), np.log(ds), 1)[0]))
    assert all(abs(s - 2.0) <= 0.1 for s in slopes)
    report("first-order vanishing", f"(slopes in [{min(slopes):.3f}, {max(slopes):.3f}])")


def test_idealized_limit_structure():
    """Scaled-limit kernels: stochastic, positive, detailed-balanced, Gibbs-fixed."""
    rng = np.random.default_rng(11)
    worst_db, worst_stat = 0.0, 0.0
    for _ in range(20):
        n = int(rng.integers(2, 6))
        e = np.sort(rng.uniform(-2, 2, n))
        while n > 1 and np.min(np.diff(e)) < 1e-3:
            e = np.sort(rng.uniform(-2, 2, n))
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        s = (a + a.conj().T) / 2
        beta = float(rng.uniform(0.2, 3.0))
        kern = pert.idealized_limit(e, s, pert.default_spectral_density(beta), beta, 0.002)
        assert kern.conditions.condition1 < 1.0
        p = kern.p_matrix
        assert np.all(p > 0.0)
        assert np.max(np.abs(p.sum(axis=0) - 1.0)) < 1e-12
        g = hams.gibbs_populations(e, beta)
        worst_db = max(worst_db, float(np.max(np.abs(p * g[None, :] - p.T * g[:, None]))))
        worst_stat = max(worst_stat, float(np.max(np.abs(p @ g - g))))
    assert worst_db < 1e-10
    assert worst_stat < 1e-10
    report(
        "scaled-limit kernel structure",
        f"(worst detailed balance {worst_db:.1e}, stationarity {worst_stat:.1e})",
    )


def test_perturbation_matches_exact_channel():
    """Closed-form second-order population kernel vs the exact channel, 5%."""
    lam, t, beta = 0.01, 1.3, 1.5
    model = hams.sample_joint_model(n=1, k=2, lam=lam, beta=beta, seed=9)
    hs = hams.assemble(model.h_s)
    dec = mc.eigh(hs)
    s_eig = dec.eigenvectors.conj().T @ hams.assemble(model.s_op).matrix @ dec.eigenvectors
    corr = pert.bath_correlation(model.h_b, hams.assemble(model.b_op), beta)
    q, _ = pert.second_order_Q_nu(dec.eigenvalues, s_eig, corr, t)
    s2bar = pert.extract_s2bar(ch.build_superoperator(model, t, beta), hs, t, lam)
    idx = np.arange(2) * 2 + np.arange(2)
    d_exact = np.real(s2bar.matrix[np.ix_(idx, idx)])
    rel = float(np.linalg.norm(q - d_exact) / np.linalg.norm(d_exact))
    assert rel < 0.05
    report("second-order kernel vs exact channel", f"(relative error {rel:.2e})")


def test_algorithm_two_exactness():
    """Exact chain hits Gibbs to 1e-12; blurred deviation respects the bound."""
    rng = np.random.default_rng(2024)
    worst_stat, valid, violations = 0.0, 0, 0
    for _ in range(20):
        n_levels = int(rng.integers(4, 17))
        e = np.sort(rng.uniform(-2, 2, n_levels))
        while np.min(np.diff(e)) < 1e-3:
            e = np.sort(rng.uniform(-2, 2, n_levels))
        for beta in (0.5, 2.0, 5.0):
            p = mk.exact_chain(e, beta)
            pi = mk.stationary_distribution(p)
            g = hams.gibbs_populations(e, beta)
            worst_stat = max(worst_stat, float(np.abs(pi - g).sum()))
            rec = mk.chain_perturbation_bound(p, mk.blurred_chain(e, beta, 6))
            if rec.valid:
                valid += 1
                if rec.actual_l1 > rec.bound:
                    violations += 1
    assert worst_stat < 1e-12
    assert violations == 0
    report(
        "estimation-chain exactness",
        f"(worst Gibbs error {worst_stat:.1e}, bound valid {valid}/60, violations 0)",
    )


def test_inverse_zeno_trend():
    """Strong brief coupling drives the fixed point toward maximal mixing."""
    count = 0
    for seed in range(10):
        model = hams.sample_joint_model(n=1, k=2, lam=1.0, beta=1.0, seed=100 + seed)
        probe = pert.inverse_zeno_probe(model, 0.5, [0.4, 0.2, 0.1, 0.05], beta=1.0)
        assert probe.uniqueness_assertable
        assert probe.monotone_decreasing
        count += 1
    report("inverse-Zeno trend", f"({count}/10 strictly decreasing)")


def test_correlation_oracle_and_linear_response():
    """Closed-form thermal commutator and quadratic kick residual."""
    h = mc.HermitianOperator(mc.PAULI_Z)
    x = mc.HermitianOperator(mc.PAULI_X)
    worst = 0.0
    for beta in (0.5, 1.0, 3.0):
        rho = hams.gibbs_state(h, beta)
        for t in np.linspace(0.0, 2.0 * np.pi, 25):
            got = obs.correlation_2pt(rho, x, x, h, float(t))
            worst = max(worst, abs(got - 2j * np.sin(2 * t) * np.tanh(beta)))
    assert worst < 1e-10

    rho = hams.gibbs_state(h, 1.0)
    o1 = mc.HermitianOperator(mc.PAULI_X + mc.PAULI_Y)
    o2 = mc.HermitianOperator(mc.PAULI_X + mc.PAULI_Z)
    lams = np.array([0.04, 0.02, 0.01, 0.005])
    res = [obs.linear_response_experiment(h, rho, o1, o2, l, 0.9).residual for l in lams]
    slope = float(np.polyfit(np.log(lams), np.log(res), 1)[0])
    assert abs(slope - 2.0) <= 0.2
    report(
        "correlation oracle",
        f"(worst closed-form error {worst:.1e}, response slope {slope:.3f})",
    )


def test_estimator_calibration():
    """Hoeffding-sized estimator fails at most 8% of the time at eps = 5%."""
    delta, eps = 0.05, 0.05
    plan = obs.sample_count(delta, eps)
    assert plan.n_samples == int(np.ceil(np.log(2 / eps) / (2 * delta**2)))
    rho = mc.maximally_mixed(2)
    o = mc.HermitianOperator(mc.PAULI_Z)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([5])))
    failures = sum(
        1
        for _ in range(500)
        if abs(obs.estimate_expectation(rho, o, plan, rng).estimate) > delta * 2.0
    )
    assert failures / 500 <= 0.08
    report(
        "estimator calibration",
        f"(n={plan.n_samples}, failure fraction {failures / 500:.3f})",
    )


def test_ensemble_qualitative_claims():
    """Sector-rate ordering, bath-size benefit, temperature difficulty."""
    t0 = time.time()
    lam = 0.01  # weak coupling keeps the population-sector analysis quantitative
    cfg = default_config("bath_ensemble").override(samples=100, seed=3, coupling=lam)
    agg = run_experiment(cfg).summary["aggregates"]
    assert agg["r_nd_bar"]["median"] > agg["r_d_bar"]["median"]

    d_by_k = {}
    for k in (2, 4):
        cfg_k = default_config("bath_ensemble").override(
            samples=100, seed=3, coupling=lam, k=k
        )
        d_by_k[k] = run_experiment(cfg_k).summary["aggregates"]["d_bar"]["mean"]
    assert d_by_k[4] < d_by_k[2]

    cfg_b = default_config("beta_sweep").override(
        samples=100, seed=3, coupling=lam, k=2, beta=(0.5, 2.0, 5.0)
    )
    d_by_beta = [
        pb["aggregates"]["d_bar"]["mean"] for pb in run_experiment(cfg_b).summary["per_beta"]
    ]
    assert d_by_beta[0] < d_by_beta[1] < d_by_beta[2]
    elapsed = time.time() - t0
    assert elapsed < 600.0
    report(
        "ensemble qualitative claims",
        f"(D k2->k4 {d_by_k[2]:.3f}->{d_by_k[4]:.3f}, "
        f"D by beta {['%.3f' % d for d in d_by_beta]}, {elapsed:.0f}s)",
    )


def test_trotter_error_halving():
    """First-order product-formula error drops by ~2 when steps double."""
    target = mc.matrix_exp_herm(mc.HermitianOperator(mc.PAULI_X + mc.PAULI_Z), -1j)
    e40 = mc.op2norm(hams.trotter_product([mc.PAULI_X, mc.PAULI_Z], -1j, 40) - target)
    e80 = mc.op2norm(hams.trotter_product([mc.PAULI_X, mc.PAULI_Z], -1j, 80) - target)
    ratio = e40 / e80
    assert 1.7 <= ratio <= 2.3
    report("product-formula error halving", f"(ratio {ratio:.3f})")
