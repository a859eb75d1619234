import math

import numpy as np
import pytest

from qtri.bloch import Direction, X_AXIS, Z_AXIS, random_direction, spin_state
from qtri.errors import SizeLimitError
from qtri.estimators import simulate_local_measurement
from qtri.protocol import (
    EstimateRecord,
    GroundTruth,
    OutcomeRecord,
    ProtocolConfig,
    Transcript,
    alice_measure,
    alice_rng,
    bob_collapsed_state,
    bob_rng,
    parse_pattern,
    pattern_from_outcomes,
    pattern_state,
    sample_truth,
    transcript_to_json,
)


class TestAliceMeasure:
    def test_empty(self):
        cfg = ProtocolConfig(0, 1)
        assert alice_measure(GroundTruth(Z_AXIS), cfg, alice_rng(1)) == []

    def test_seed_replay(self):
        cfg = ProtocolConfig(200, 42)
        first = alice_measure(GroundTruth(Z_AXIS), cfg, alice_rng(42))
        second = alice_measure(GroundTruth(Z_AXIS), cfg, alice_rng(42))
        assert first == second

    def test_outcomes_independent_of_truth(self):
        cfg = ProtocolConfig(500, 9)
        a = alice_measure(GroundTruth(Z_AXIS), cfg, alice_rng(9))
        b = alice_measure(GroundTruth(X_AXIS), cfg, alice_rng(9))
        assert a == b

    def test_sample_mean_bound(self):
        n = 10_000
        cfg = ProtocolConfig(n, 7)
        outs = alice_measure(GroundTruth(Z_AXIS), cfg, alice_rng(7))
        mean = sum(o.alice_outcome for o in outs) / n
        assert abs(mean) < 4.0 / math.sqrt(n)

    def test_outcome_blindness_binomial(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        n = 100_000
        cfg = ProtocolConfig(n, 3)
        outs = alice_measure(GroundTruth(Z_AXIS), cfg, alice_rng(3))
        ups = sum(1 for o in outs if o.alice_outcome == +1)
        p = scipy_stats.binomtest(ups, n, 0.5, alternative="two-sided").pvalue
        assert p >= 1e-6


class TestBobCollapse:
    def test_singlet_anticorrelation_states(self):
        assert np.allclose(bob_collapsed_state(+1, Z_AXIS), [0.0, 1.0])
        assert np.allclose(bob_collapsed_state(-1, Z_AXIS), [1.0, 0.0])

    def test_measuring_along_axis_negates(self):
        rng = np.random.default_rng(21)
        for _ in range(2000):
            a_z = random_direction(rng)
            alice = 1 if rng.random() < 0.5 else -1
            bob = simulate_local_measurement(alice, a_z, a_z, rng)
            assert bob == -alice

    def test_against_joint_singlet_simulation(self):
        # independent route: measure the actual two-qubit singlet state
        rng = np.random.default_rng(22)
        singlet = np.zeros(4, dtype=complex)
        singlet[1], singlet[2] = 1.0 / math.sqrt(2), -1.0 / math.sqrt(2)  # |ud> - |du>
        joint = singlet.reshape(2, 2)  # joint[i, j] = amplitude of |i>_A |j>_B
        for _ in range(50):
            a_z = random_direction(rng)
            up = spin_state(a_z, "up")
            for alice_outcome, alice_state in ((+1, up), (-1, spin_state(a_z, "down"))):
                bob_state = alice_state.conj() @ joint  # <alice| (x) I acting on the singlet
                prob = np.linalg.norm(bob_state) ** 2
                assert prob == pytest.approx(0.5, abs=1e-12)
                bob_state = bob_state / np.linalg.norm(bob_state)
                expected = bob_collapsed_state(alice_outcome, a_z)
                overlap = abs(np.vdot(expected, bob_state))
                assert overlap == pytest.approx(1.0, abs=1e-10)


class TestPatternState:
    def test_single_up(self):
        assert np.allclose(pattern_state("u", Z_AXIS), [1.0, 0.0])

    def test_up_down_basis_vector(self):
        assert np.allclose(pattern_state("ud", Z_AXIS), [0.0, 1.0, 0.0, 0.0])

    def test_product_overlap(self):
        overlap = np.vdot(pattern_state("uu", Z_AXIS), pattern_state("uu", X_AXIS))
        assert abs(overlap) ** 2 == pytest.approx(0.25, abs=1e-12)

    def test_matches_explicit_tensor(self):
        rng = np.random.default_rng(23)
        for n_qubits in range(1, 5):
            d = random_direction(rng)
            explicit = np.array([1.0 + 0.0j])
            for _ in range(n_qubits):
                explicit = np.kron(explicit, spin_state(d, "up"))
            assert np.abs(pattern_state("u" * n_qubits, d) - explicit).max() <= 1e-14

    def test_unit_norm(self):
        rng = np.random.default_rng(24)
        for pattern in ("u", "ud", "uudd", "dudu"):
            psi = pattern_state(pattern, random_direction(rng))
            assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)

    def test_length_cap(self):
        with pytest.raises(SizeLimitError):
            pattern_state("u" * 9, Z_AXIS)

    def test_parse_variants(self):
        assert parse_pattern(["up", "down"]) == "ud"
        assert parse_pattern("UDu") == "udu"
        with pytest.raises(ValueError):
            parse_pattern("ux")

    def test_pattern_from_outcomes(self):
        assert pattern_from_outcomes([+1, -1, +1]) == "dud"


class TestTranscript:
    def make(self, seed=5):
        cfg = ProtocolConfig(6, seed)
        truth = sample_truth(cfg)
        outs = tuple(alice_measure(truth, cfg, alice_rng(seed)))
        est = EstimateRecord(Direction(0.0, 0.0, 1.0), "frame")
        return Transcript(cfg, outs, est, truth)

    def test_serialization_deterministic(self):
        assert transcript_to_json(self.make()) == transcript_to_json(self.make())

    def test_truth_never_serialized(self):
        t = self.make()
        text = transcript_to_json(t)
        for component in (t.truth.a_z.x, t.truth.a_z.y, t.truth.a_z.z):
            assert format(component, ".17g") not in text
            assert repr(component) not in text
        assert "truth" not in text

    def test_config_mismatch_rejected(self):
        cfg = ProtocolConfig(3, 1)
        with pytest.raises(ValueError):
            Transcript(cfg, (OutcomeRecord(0, 1),))

    def test_outcome_values_validated(self):
        with pytest.raises(ValueError):
            OutcomeRecord(0, 2)


class TestSampleTruth:
    def test_hemisphere_respected(self):
        for seed in range(30):
            cfg = ProtocolConfig(1, seed, hemisphere_hint=Z_AXIS)
            assert sample_truth(cfg).a_z.z > 0

    def test_deterministic(self):
        cfg = ProtocolConfig(1, 123)
        assert sample_truth(cfg) == sample_truth(cfg)

    def test_bob_stream_differs_from_alice(self):
        assert alice_rng(1).random() != bob_rng(1).random()
