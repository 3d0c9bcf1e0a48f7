import itertools

import numpy as np
import pytest

from qutrit_bench.core import DensityOperator, PureState, born_probability, normalize
from qutrit_bench.errors import ConfigurationError
from qutrit_bench.protocols import (
    BOB_TRIT_OF_PATH,
    EveModel,
    coin_toss_prepared_state,
    herald_state,
    mub_bases,
    qber_thresholds,
    run_coin_toss,
    run_qkd,
)
from qutrit_bench.source import ArmPhases, CouplerRatios, InterferometerConfig


class TestMubBases:
    def test_four_bases(self):
        bases = mub_bases()
        assert [b.id for b in bases] == ["computational", "fourier0", "fourier1", "fourier2"]

    def test_each_gram_matrix_is_identity(self):
        for basis in mub_bases():
            gram = basis.vectors @ basis.vectors.conj().T
            assert np.max(np.abs(gram - np.eye(3))) < 1e-12

    def test_all_54_cross_overlaps_are_one_third(self):
        bases = mub_bases()
        checked = 0
        for b1, b2 in itertools.combinations(bases, 2):
            for v in b1.vectors:
                for w in b2.vectors:
                    overlap = abs(np.vdot(v, w)) ** 2
                    assert overlap == pytest.approx(1.0 / 3.0, abs=1e-12)
                    checked += 1
        assert checked == 54


class TestHeraldState:
    def test_central_zero_phases_uniform(self):
        st = herald_state("central", 0, InterferometerConfig())
        assert np.max(np.abs(np.abs(st.amplitudes) - 1.0 / np.sqrt(3.0))) < 1e-12
        # up to a global phase this is (|s> + |m> + |l>)/sqrt(3)
        rel = st.amplitudes / st.amplitudes[0]
        assert np.max(np.abs(rel - 1.0)) < 1e-12

    def test_left_herald_spans_bob_short_medium(self):
        st = herald_state("left", 0, InterferometerConfig())
        assert abs(st.amplitudes[2]) == 0.0  # Bob's long path cannot fire
        assert abs(st.amplitudes[0]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
        assert abs(st.amplitudes[1]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_right_herald_spans_bob_medium_long(self):
        st = herald_state("right", 0, InterferometerConfig())
        assert abs(st.amplitudes[0]) == 0.0
        assert abs(st.amplitudes[1]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
        assert abs(st.amplitudes[2]) == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    def test_detector_index_shifts_relative_phase(self):
        cfg = InterferometerConfig()
        rel = []
        for j in range(3):
            st = herald_state("left", j, cfg)
            rel.append(np.angle(st.amplitudes[1] / st.amplitudes[0]))
        diffs = np.diff(rel)
        for d in diffs:
            assert abs((d - 2 * np.pi / 3 + np.pi) % (2 * np.pi) - np.pi) < 1e-12

    def test_central_herald_follows_alice_dials(self):
        cfg = InterferometerConfig(alice=ArmPhases(phi_m=0.8, phi_l=-0.4))
        st = herald_state("central", 0, cfg)
        assert np.angle(st.amplitudes[1] / st.amplitudes[0]) == pytest.approx(0.8, abs=1e-12)
        assert np.angle(st.amplitudes[2] / st.amplitudes[0]) == pytest.approx(-0.4, abs=1e-12)

    def test_asymmetric_ratios_reweight_herald(self):
        cfg = InterferometerConfig(bob_ratios=CouplerRatios(0.6, 0.4, 0.0))
        st = herald_state("central", 0, cfg)
        assert abs(st.amplitudes[2]) == 0.0


class TestQkd:
    def test_noiseless_qber_is_exactly_zero(self):
        for seed in (0, 1, 2, 3, 4):
            summary = run_qkd(rounds=30000, mode="four_basis", lam=1.0, seed=seed)
            assert summary.qber == 0.0
            assert all(v == "secure" for v in summary.verdicts.values())

    def test_qber_follows_white_noise_curve(self):
        # analytic: matched MUBs disagree only on the noise fraction, 2(1-lam)/3
        for lam in (0.25, 0.5, 0.75, 1.0):
            summary = run_qkd(rounds=400000, mode="two_basis", lam=lam, seed=5)
            expected = 2.0 * (1.0 - lam) / 3.0
            n = summary.sifted_count
            sigma = np.sqrt(max(expected * (1 - expected), 1e-12) / n)
            assert abs(summary.qber - expected) < 3.0 * sigma + 1e-9

    def test_headline_regime_qber(self):
        summary = run_qkd(rounds=1200000, mode="four_basis", lam=0.9688, seed=6)
        assert summary.sifted_count > 90000
        assert summary.qber == pytest.approx(0.0208, abs=0.003)
        assert all(v == "secure" for v in summary.verdicts.values())

    def test_intercept_resend_four_basis(self):
        summary = run_qkd(
            rounds=600000,
            mode="four_basis",
            lam=1.0,
            eve=EveModel.intercept_resend(),
            seed=7,
        )
        assert summary.qber == pytest.approx(0.5, abs=0.01)
        assert all(v == "insecure" for v in summary.verdicts.values())

    def test_intercept_resend_two_basis(self):
        summary = run_qkd(
            rounds=600000,
            mode="two_basis",
            lam=1.0,
            eve=EveModel.intercept_resend(("computational", "fourier0")),
            seed=8,
        )
        assert summary.qber == pytest.approx(1.0 / 3.0, abs=0.01)

    def test_postselection_keeps_a_third(self):
        summary = run_qkd(rounds=300000, mode="four_basis", lam=1.0, seed=9)
        sigma = np.sqrt((1 / 3) * (2 / 3) / summary.rounds)
        assert abs(summary.postselect_ratio - 1 / 3) < 3 * sigma
        assert summary.postselect_ratio_ok

    def test_sift_ratio_matches_pool_size(self):
        summary = run_qkd(rounds=300000, mode="four_basis", lam=1.0, seed=10)
        assert summary.sift_ratio == pytest.approx(0.25, abs=0.01)
        summary = run_qkd(rounds=300000, mode="phase_only_three", lam=1.0, seed=10)
        assert summary.sift_ratio == pytest.approx(1 / 3, abs=0.01)

    def test_single_basis_eve_pools_equivalent(self):
        # intercept-resend damage is symmetric in which basis Eve favors
        qbers = []
        for name in ("computational", "fourier0", "fourier1", "fourier2"):
            summary = run_qkd(
                rounds=400000,
                mode="four_basis",
                lam=1.0,
                eve=EveModel.intercept_resend((name,)),
                seed=11,
            )
            qbers.append((summary.qber, summary.sifted_count))
        for (q1, n1), (q2, n2) in itertools.combinations(qbers, 2):
            sigma = np.sqrt(q1 * (1 - q1) / n1 + q2 * (1 - q2) / n2)
            assert abs(q1 - q2) < 3.0 * sigma

    def test_trace_file(self, tmp_path):
        path = tmp_path / "rounds.csv"
        summary = run_qkd(rounds=3000, mode="two_basis", lam=1.0, seed=12, trace_path=path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "round,alice_basis,bob_basis,alice_trit,bob_trit,sifted"
        n_kept = len(lines) - 1
        assert n_kept == round(summary.postselect_ratio * summary.rounds)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            run_qkd(rounds=0)
        with pytest.raises(ConfigurationError):
            run_qkd(rounds=10, mode="five_basis")
        with pytest.raises(ConfigurationError):
            EveModel.intercept_resend(())


class TestQberThresholds:
    def test_values(self):
        thresholds = qber_thresholds()
        assert thresholds["qutrit_2basis_individual"] == pytest.approx(0.2113, abs=1e-4)
        assert thresholds["qutrit_4basis_individual"] == pytest.approx(0.2267, abs=1e-4)
        assert thresholds["qubit_coherent_reference"] == pytest.approx(0.11, abs=1e-4)
        assert thresholds["qutrit_coherent"] == pytest.approx(0.1596, abs=1e-4)

    def test_two_basis_closed_form(self):
        # cross-check: (1 - 1/sqrt(3))/2 = 0.21132...
        assert qber_thresholds()["qutrit_2basis_individual"] == pytest.approx(
            (1.0 - 1.0 / np.sqrt(3.0)) / 2.0, abs=5e-5
        )


class TestCoinToss:
    def test_prepared_states_match_expected_forms(self):
        # left heralds send (|0> +- |1>)/sqrt(2); right heralds (|0> +- |2>)/sqrt(2)
        for sign in (+1, -1):
            left = coin_toss_prepared_state("left", sign)
            expected = normalize(PureState(np.array([1.0, sign, 0.0], dtype=complex)))
            assert np.max(np.abs(left.amplitudes - expected.amplitudes)) < 1e-12
            right = coin_toss_prepared_state("right", sign)
            expected = normalize(PureState(np.array([1.0, 0.0, sign], dtype=complex)))
            assert np.max(np.abs(right.amplitudes - expected.amplitudes)) < 1e-12

    def test_relabeling_is_consistent_with_heralds(self):
        # Bob's left-herald support {s, m} relabels to trits {1, 0}
        st = herald_state("left", 0, InterferometerConfig())
        support_paths = [p for p in range(3) if abs(st.amplitudes[p]) > 1e-12]
        trits = sorted(BOB_TRIT_OF_PATH[p] for p in support_paths)
        assert trits == [0, 1]
        st = herald_state("right", 0, InterferometerConfig())
        support_paths = [p for p in range(3) if abs(st.amplitudes[p]) > 1e-12]
        trits = sorted(BOB_TRIT_OF_PATH[p] for p in support_paths)
        assert trits == [0, 2]

    def test_noiseless_honest_run(self):
        summary = run_coin_toss(rounds=100000, lam=1.0, seed=1)
        assert summary.agreement_rate == 1.0
        sigma = 1.0 / np.sqrt(summary.rounds)
        assert abs(summary.outcome_bias) < 3 * sigma
        sigma_frac = np.sqrt(0.25 / summary.rounds)
        assert abs(summary.left_fraction - 0.5) < 3 * sigma_frac

    def test_noisy_agreement_matches_born_oracle(self):
        lam = 0.7
        # oracle: Born probability on the mixed herald state confined to the
        # two-dimensional subspace
        h = coin_toss_prepared_state("left", +1)
        support = np.abs(h.amplitudes) > 0
        rho = DensityOperator(
            lam * h.projector() + (1 - lam) * np.diag(support.astype(complex)) / 2.0
        )
        expected = born_probability(rho, h)
        assert expected == pytest.approx((1 + lam) / 2, abs=1e-12)
        summary = run_coin_toss(rounds=200000, lam=lam, seed=2)
        sigma = np.sqrt(expected * (1 - expected) / summary.rounds)
        assert abs(summary.agreement_rate - expected) < 3 * sigma
        assert summary.agreement_rate < 1.0

    def test_determinism(self):
        a = run_coin_toss(rounds=5000, lam=0.9, seed=3)
        b = run_coin_toss(rounds=5000, lam=0.9, seed=3)
        assert a == b

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            run_coin_toss(rounds=0)
        with pytest.raises(ConfigurationError):
            run_coin_toss(rounds=10, lam=1.5)
