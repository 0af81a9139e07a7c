import numpy as np
import pytest

from covest.distributions import RngStream
from covest.errors import InvalidDimension, SchemaMismatch
from covest.model import (
    ProblemSpec,
    build_mimo_spec,
    draw_scenario,
    expected_signal_energy,
    min_integer_dof,
    snr_of,
    spec_from_dict,
    spec_to_dict,
    training_sequence,
)


def scalar_spec(P0=0.8, R0=1.0, nu=3.0, N=1, U=None):
    U = np.zeros((1, N)) if U is None else U
    return ProblemSpec(
        H=np.array([[1.0]]), U=U, P0=np.array([[P0]]), R0=np.array([[R0]]),
        nu_x=nu, nu_w=nu, N=N,
    )


class TestMimoSetup:
    def test_dimensions(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        assert (spec.m, spec.n) == (16, 4)
        assert min_integer_dof(spec.n) == 6 and min_integer_dof(spec.m) == 18

    def test_noise_calibration_value(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        # tr{H H^T} = d ||S||_F^2 = 20, so sigma_w^2 = 20 / (16*4)
        assert np.isclose(spec.R0[0, 0], 0.3125, atol=1e-15)

    def test_scalar_degenerate_case(self):
        spec = build_mimo_spec(1, 1.0, 3.0, 3.0, 1, antenna_dim=1)
        assert spec.H.shape == (1, 1)
        assert np.isclose(spec.H[0, 0], np.sqrt(10.0))

    def test_rejects_small_K(self):
        with pytest.raises(InvalidDimension):
            build_mimo_spec(1, 1.0, 6.0, 18.0, 1, antenna_dim=2)

    def test_training_sequence_is_white(self):
        for K, d in ((8, 2), (16, 4), (5, 3)):
            S = training_sequence(K, d)
            assert np.allclose(S @ S.T, (10.0 / d) * np.eye(d), atol=1e-12)
            assert np.isclose(np.sum(S**2), 10.0)

    def test_kronecker_structure_entrywise(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        S = training_sequence(8, 2)
        d = 2
        for i in range(8):
            for a in range(d):
                for j in range(d):
                    for b in range(d):
                        expected = S[j, i] if a == b else 0.0
                        assert spec.H[i * d + a, j * d + b] == pytest.approx(expected, abs=0)

    def test_snr_round_trip(self):
        for s in (0.1, 1.0, 10.0):
            spec = build_mimo_spec(8, s, 6.0, 18.0, 4)
            assert abs(snr_of(spec) - s) < 1e-12 * s

    def test_snr_of_direct(self):
        spec = ProblemSpec(
            H=np.array([[1.0]]), U=np.zeros((1, 1)), P0=np.array([[2.0]]),
            R0=np.array([[4.0]]), nu_x=3.0, nu_w=3.0, N=1,
        )
        assert np.isclose(snr_of(spec), 0.5)


class TestSpecValidation:
    def test_rank_deficient_H(self):
        H = np.ones((3, 2))
        with pytest.raises(InvalidDimension):
            ProblemSpec(H=H, U=np.zeros((2, 1)), P0=np.eye(2), R0=np.eye(3),
                        nu_x=5.0, nu_w=6.0, N=1)

    def test_dof_bounds(self):
        with pytest.raises(ValueError):
            scalar_spec(nu=2.0)  # needs nu > p + 1 = 2

    def test_weights(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        assert spec.weights("cmap") == (6 + 4 + 1 + 4, 18 + 16 + 1 + 4)
        assert spec.weights("mmap") == (6 + 4, 18 + 4)
        with pytest.raises(ValueError):
            spec.weights("bogus")

    def test_scale_matrices(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        assert np.allclose(spec.C_x, (6 - 4 - 1) * spec.P0)
        assert np.allclose(spec.C_w, (18 - 16 - 1) * spec.R0)


class TestEnergy:
    def test_mimo_energy(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        assert np.isclose(expected_signal_energy(spec), 4.0)

    def test_isotropic(self):
        spec = ProblemSpec(H=np.eye(3), U=np.zeros((3, 1)), P0=np.eye(3),
                           R0=np.eye(3), nu_x=5.0, nu_w=5.0, N=1)
        assert np.isclose(expected_signal_energy(spec), 3.0)

    def test_scalar_with_mean(self):
        spec = scalar_spec(P0=0.8, U=np.array([[3.0]]))
        assert np.isclose(expected_signal_energy(spec), 9.8)


class TestDrawScenario:
    def test_observation_identity(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        truth, Y = draw_scenario(spec, RngStream(0, 0))
        assert np.array_equal(Y, spec.H @ truth.X + truth.W)

    def test_determinism(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        t1, y1 = draw_scenario(spec, RngStream(9, 3))
        t2, y2 = draw_scenario(spec, RngStream(9, 3))
        assert np.array_equal(y1, y2)
        assert np.array_equal(t1.P, t2.P) and np.array_equal(t1.R, t2.R)

    def test_concentration_at_large_dof(self):
        spec = build_mimo_spec(8, 1.0, 1e5, 1e5, 4)
        truth, _ = draw_scenario(spec, RngStream(1, 0))
        assert np.linalg.norm(truth.P - spec.P0) < 0.05
        assert np.linalg.norm(truth.R - spec.R0) < 0.05

    def test_total_variance_scalar(self):
        spec = scalar_spec(P0=1.0, R0=1.0, nu=3.0)
        gen = RngStream(11).generator()
        xs = np.array([draw_scenario(spec, gen)[0].X[0, 0] for _ in range(100_000)])
        # law of total variance: Var(x) = E[P] = P0 = 1
        assert abs(xs.var() - 1.0) < 0.05

    def test_generative_energy_consistency(self):
        spec = build_mimo_spec(8, 1.0, 6.0, 18.0, 4)
        gen = RngStream(12).generator()
        sq = np.array([np.sum(draw_scenario(spec, gen)[0].X ** 2) for _ in range(10_000)])
        se = sq.std() / np.sqrt(len(sq))
        assert abs(sq.mean() - expected_signal_energy(spec)) < 3 * se


class TestJsonSchema:
    def test_round_trip(self):
        spec = build_mimo_spec(4, 2.0, 7.0, 11.5, 3)
        doc = spec_to_dict(spec)
        back = spec_from_dict(doc)
        assert np.array_equal(back.H, spec.H)
        assert np.array_equal(back.U, spec.U)
        assert back.nu_x == spec.nu_x and back.nu_w == spec.nu_w and back.N == spec.N

    def test_schema_version_checked(self):
        doc = spec_to_dict(build_mimo_spec(4, 1.0, 7.0, 11.0, 1))
        doc["schema_version"] = 99
        with pytest.raises(SchemaMismatch):
            spec_from_dict(doc)

    def test_missing_field_named(self):
        doc = spec_to_dict(build_mimo_spec(4, 1.0, 7.0, 11.0, 1))
        del doc["P0"]
        with pytest.raises(InvalidDimension, match="P0"):
            spec_from_dict(doc)
