import math

import numpy as np
import pytest

from gibbsim import hamiltonians as hams
from gibbsim import matcore as mc


def spec(a=1.0, seed=0, c=4):
    return hams.SamplingSpec(scale_a=a, seed=seed, locality_c=c)


def embed_oracle(block, support, n):
    """Independent embedding: loop over basis states with bit arithmetic."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    rest = [q for q in range(n) if q not in support]
    for a in range(dim):
        for b in range(dim):
            # qubit q of basis index x is bit (n-1-q)
            bits_a = [(a >> (n - 1 - q)) & 1 for q in range(n)]
            bits_b = [(b >> (n - 1 - q)) & 1 for q in range(n)]
            if any(bits_a[q] != bits_b[q] for q in rest):
                continue
            ia = int("".join(str(bits_a[q]) for q in support), 2) if support else 0
            ib = int("".join(str(bits_b[q]) for q in support), 2) if support else 0
            out[a, b] = block[ia, ib]
    return out


class TestSampleLocalTerm:
    def test_zero_scale(self):
        term = hams.sample_local_term(spec(a=0.0), (0, 1), hams.substream(0))
        np.testing.assert_allclose(term.block.matrix, 0.0)

    def test_qubit_eigenvalue_second_moment(self):
        # target E[e^2] = 2 a^2 / 3 for 2x2 blocks
        g = hams.substream(42)
        a = 0.7
        s2 = spec(a=a, c=2)
        vals = []
        for _ in range(100_000):
            t = hams.sample_local_term(s2, (0,), g)
            vals.extend(np.linalg.eigvalsh(t.block.matrix))
        vals = np.asarray(vals)
        target = 2 * a**2 / 3
        se = np.std(vals**2, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals**2) - target) < 3 * se

    def test_offdiagonal_second_moment(self):
        # |h01| uniform on [0, a]: E[|h01|^2] = a^2/3
        g = hams.substream(43)
        a = 1.3
        s2 = spec(a=a, c=2)
        mods2 = np.array(
            [abs(hams.sample_local_term(s2, (0,), g).block.matrix[0, 1]) ** 2 for _ in range(100_000)]
        )
        target = a**2 / 3
        se = np.std(mods2, ddof=1) / math.sqrt(len(mods2))
        assert abs(np.mean(mods2) - target) < 3 * se


class TestAssemble:
    def test_single_term_embedding(self):
        g = hams.substream(1)
        term = hams.sample_local_term(spec(c=2), (0,), g)
        h = hams.LocalHamiltonian(2, (term,), locality_c=2)
        np.testing.assert_allclose(
            hams.assemble(h).matrix, np.kron(term.block.matrix, np.eye(2)), atol=1e-14
        )

    def test_commuting_single_qubit_sums(self):
        g = hams.substream(2)
        t0 = hams.sample_local_term(spec(c=2), (0,), g)
        t1 = hams.sample_local_term(spec(c=2), (1,), g)
        h = hams.LocalHamiltonian(2, (t0, t1), locality_c=2)
        e0 = np.linalg.eigvalsh(t0.block.matrix)
        e1 = np.linalg.eigvalsh(t1.block.matrix)
        expected = np.sort([x + y for x in e0 for y in e1])
        np.testing.assert_allclose(
            np.linalg.eigvalsh(hams.assemble(h).matrix), expected, atol=1e-12
        )

    def test_three_qubit_all_pairs_against_oracle(self):
        h = hams.sample_system(3, spec(seed=5))
        expected = np.zeros((8, 8), dtype=complex)
        for t in h.terms:
            expected += embed_oracle(t.block.matrix, t.support, 3)
        np.testing.assert_allclose(hams.assemble(h).matrix, expected, atol=1e-13)

    def test_out_of_range_support_rejected(self):
        g = hams.substream(3)
        term = hams.sample_local_term(spec(c=2), (5,), g)
        with pytest.raises(ValueError):
            hams.LocalHamiltonian(2, (term,), locality_c=2)


class TestSampleSystem:
    def test_pair_counts(self):
        assert len(hams.sample_system(2, spec()).terms) == 1
        assert len(hams.sample_system(4, spec()).terms) == 6

    def test_ensemble_variance(self):
        # target Tr(H^2)/N = (4/3) * C(3,2) = 4 at a=1
        g = hams.substream(44)
        vals = []
        for _ in range(1000):
            m = hams.assemble(hams.sample_system(3, spec(), g)).matrix
            vals.append(np.sum(np.abs(m) ** 2) / m.shape[0])
        vals = np.asarray(vals)
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - 4.0) < 3 * se

    def test_ensemble_mean_trace_zero(self):
        g = hams.substream(45)
        traces = [
            np.real(np.trace(hams.assemble(hams.sample_system(2, spec(), g)).matrix))
            for _ in range(2000)
        ]
        se = np.std(traces, ddof=1) / math.sqrt(len(traces))
        assert abs(np.mean(traces)) < 3 * se


class TestBathScale:
    def test_values(self):
        assert hams.bath_scale(2, 2) == pytest.approx(1.0)
        assert hams.bath_scale(2, 3) == pytest.approx(math.sqrt(2 / 3))
        assert hams.bath_scale(1, 4) == pytest.approx(0.5)

    def test_matched_variances(self):
        # system and bath spectral variances agree in ensemble mean
        n, k = 3, 4
        a_b = hams.bath_scale(n, k)
        g = hams.substream(46)
        sys_vals, bath_vals = [], []
        for _ in range(800):
            ms = hams.assemble(hams.sample_system(n, spec(), g)).matrix
            mb = hams.assemble(hams.sample_bath(k, spec(a=a_b), g)).matrix
            sys_vals.append(np.sum(np.abs(ms) ** 2) / ms.shape[0])
            bath_vals.append(np.sum(np.abs(mb) ** 2) / mb.shape[0])
        diff = np.asarray(sys_vals) - np.asarray(bath_vals)
        se = np.std(diff, ddof=1) / math.sqrt(len(diff))
        assert abs(np.mean(diff)) < 3 * se


class TestSpectralWidth:
    def test_zero_hamiltonian(self):
        h = hams.LocalHamiltonian(1, (), locality_c=2)
        assert hams.spectral_width(h) == 0.0

    def test_sigma_z(self):
        term = hams.LocalTerm((0,), mc.HermitianOperator(mc.PAULI_Z))
        h = hams.LocalHamiltonian(1, (term,), locality_c=2)
        assert hams.spectral_width(h) == pytest.approx(1.0)

    def test_bath_width_ensemble(self):
        # target mean width^2 = 2 k a_b^2 / 3
        k, a_b = 3, 0.8
        g = hams.substream(47)
        vals = [hams.spectral_width(hams.sample_bath(k, spec(a=a_b), g)) ** 2 for _ in range(1000)]
        vals = np.asarray(vals)
        target = 2 * k * a_b**2 / 3
        se = np.std(vals, ddof=1) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - target) < 3 * se


class TestGibbsState:
    def test_infinite_temperature(self):
        h = mc.HermitianOperator(np.diag([0.0, 1.0, 2.0, 5.0]))
        np.testing.assert_allclose(hams.gibbs_state(h, 0.0).matrix, np.eye(4) / 4, atol=1e-12)

    def test_two_level_closed_form(self):
        e, beta = 1.7, 0.9
        rho = hams.gibbs_state(mc.HermitianOperator(np.diag([0.0, e])), beta)
        z = 1 + math.exp(-beta * e)
        np.testing.assert_allclose(rho.matrix, np.diag([1 / z, math.exp(-beta * e) / z]), atol=1e-12)

    def test_low_temperature_ground_projector(self):
        g = hams.substream(48)
        a = g.normal(size=(8, 8)) + 1j * g.normal(size=(8, 8))
        h = mc.HermitianOperator((a + a.conj().T) / 2)
        dec = mc.eigh(h)
        ground = np.outer(dec.eigenvectors[:, 0], dec.eigenvectors[:, 0].conj())
        rho = hams.gibbs_state(h, 50.0)
        assert mc.trace_norm(rho.matrix - ground) < 1e-6

    def test_invariants_across_beta(self):
        g = hams.substream(49)
        a = g.normal(size=(4, 4)) + 1j * g.normal(size=(4, 4))
        h = mc.HermitianOperator((a + a.conj().T) / 2)
        for beta in [0.0, 0.5, 5.0, 100.0]:
            hams.gibbs_state(h, beta)  # DensityMatrix validates on construction


class TestBathGibbsProduct:
    def test_single_qubit_reduces(self):
        g = hams.substream(50)
        hb = hams.sample_bath(1, spec(a=0.9), g)
        out = hams.bath_gibbs_product(hb, 1.1)
        np.testing.assert_allclose(
            out.state.matrix, hams.gibbs_state(hams.assemble(hb), 1.1).matrix, atol=1e-12
        )
        assert out.circuit_cost == 2

    def test_matches_full_gibbs(self):
        g = hams.substream(51)
        hb = hams.sample_bath(3, spec(a=1.2), g)
        out = hams.bath_gibbs_product(hb, 2.3)
        full = hams.gibbs_state(hams.assemble(hb), 2.3)
        assert np.max(np.abs(out.state.matrix - full.matrix)) < 1e-10

    def test_circuit_cost(self):
        g = hams.substream(52)
        hb = hams.sample_bath(5, spec(a=1.0), g)
        assert hams.bath_gibbs_product(hb, 0.7).circuit_cost == 10

    def test_rejects_multi_qubit_terms(self):
        g = hams.substream(53)
        term = hams.sample_local_term(spec(), (0, 1), g)
        hb = hams.LocalHamiltonian(2, (term,), locality_c=4)
        with pytest.raises(ValueError):
            hams.bath_gibbs_product(hb, 1.0)


class TestTrotter:
    def test_commuting_exact_single_step(self):
        h1, h2 = np.diag([1.0, -1.0]), np.diag([0.3, 0.8])
        out = hams.trotter_product([h1, h2], -1j * 0.9, 1)
        expected = mc.matrix_exp_herm(mc.HermitianOperator(h1 + h2), -1j * 0.9)
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_single_term_exact(self):
        g = hams.substream(54)
        a = g.normal(size=(4, 4)) + 1j * g.normal(size=(4, 4))
        h = (a + a.conj().T) / 2
        out = hams.trotter_product([h], -1j * 1.4, 17)
        np.testing.assert_allclose(
            out, mc.matrix_exp_herm(mc.HermitianOperator(h), -1j * 1.4), atol=1e-11
        )

    def test_first_order_error_scaling(self):
        target = mc.matrix_exp_herm(mc.HermitianOperator(mc.PAULI_X + mc.PAULI_Z), -1j)
        e40 = mc.op2norm(hams.trotter_product([mc.PAULI_X, mc.PAULI_Z], -1j, 40) - target)
        e80 = mc.op2norm(hams.trotter_product([mc.PAULI_X, mc.PAULI_Z], -1j, 80) - target)
        assert 0.4 <= e80 / e40 <= 0.6


class TestJsonRoundTrip:
    def test_local_hamiltonian(self):
        h = hams.sample_system(3, spec(seed=7))
        back = hams.LocalHamiltonian.from_json_dict(h.to_json_dict())
        np.testing.assert_allclose(hams.assemble(back).matrix, hams.assemble(h).matrix)


class TestJointModel:
    def test_centering_zeroes_bath_mean(self):
        model = hams.sample_joint_model(n=2, k=3, lam=0.1, beta=1.5, seed=11)
        assert abs(model.bath_mean_coupling(1.5)) < 1e-10

    def test_degeneracy_guard_returns_gapped_spectrum(self):
        h, _ = hams.sample_nondegenerate_system(2, spec(seed=13))
        e = mc.eigh(hams.assemble(h)).eigenvalues
        assert np.min(np.diff(e)) >= hams.DEGENERACY_GAP

    def test_dimension_checks(self):
        model = hams.sample_joint_model(n=1, k=2, lam=0.1, beta=1.0, seed=3)
        with pytest.raises(ValueError):
            hams.JointModel(model.h_s, model.h_b, model.s_op, model.s_op, 0.1)
