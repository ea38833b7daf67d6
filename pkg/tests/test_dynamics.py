import numpy as np
import pytest

from tripletlab.dynamics import (
    GridSpec,
    StepParams,
    step,
    step_margin,
    step_nca,
    trajectory,
    vector_field,
)
from tripletlab.geometry import TripletCoord
from tripletlab.losses import LossKind, LossSpec, softmax_weight

from conftest import sphere_step_oracle

NCA = LossSpec(kind=LossKind.NCA)
MARGIN02 = LossSpec(kind=LossKind.MARGIN, margin=0.2)


def nca_params_for_beta(coord, beta, g=1.0, p=0.0):
    """StepParams whose internal beta equals the requested value."""
    return StepParams(
        learning_rate=beta / softmax_weight(coord),
        gamma=g,
        entanglement_p=p,
        loss=NCA,
    )


def assert_matches_oracle(upd, oracle, tol=1e-9):
    assert upd.s_ap_new == pytest.approx(oracle[0], abs=tol)
    assert upd.s_an_new == pytest.approx(oracle[1], abs=tol)
    assert upd.norm_a == pytest.approx(oracle[2], abs=tol)
    assert upd.norm_p == pytest.approx(oracle[3], abs=tol)
    assert upd.norm_n == pytest.approx(oracle[4], abs=tol)
    assert upd.d_sap == pytest.approx(oracle[5], abs=tol)
    assert upd.d_san == pytest.approx(oracle[6], abs=tol)


class TestStepNca:
    def test_zero_learning_rate_is_identity(self):
        upd = step_nca(TripletCoord(0.3, -0.4), StepParams(learning_rate=0.0))
        assert upd.d_sap == 0.0 and upd.d_san == 0.0
        assert upd.norm_a == upd.norm_p == upd.norm_n == 1.0

    def test_coincident_fixed_point(self):
        # (1,1) is the degenerate minimum; updates are colinear, deltas vanish
        upd = step_nca(
            TripletCoord(1.0, 1.0),
            StepParams(learning_rate=0.2, gamma=0.3, entanglement_p=0.0),
        )
        assert abs(upd.d_sap) < 1e-12
        assert abs(upd.d_san) < 1e-12

    def test_known_prenormalization_values(self):
        # s_pn = 1 at gamma=1: 0.6 / 0.4 before renormalization
        coord = TripletCoord(0.5, 0.5)
        upd = step_nca(coord, nca_params_for_beta(coord, 0.1))
        assert upd.s_ap_new == pytest.approx(0.6, abs=1e-12)
        assert upd.s_an_new == pytest.approx(0.4, abs=1e-12)
        assert_matches_oracle(upd, sphere_step_oracle(0.5, 0.5, 1.0, 0.1))

    def test_oracle_equivalence_sweep(self):
        rng = np.random.default_rng(42)
        for _ in range(2000):
            s_ap, s_an = rng.uniform(-1, 1, size=2)
            g = rng.uniform(-1, 1)
            beta = rng.uniform(0.0, 0.5)
            coord = TripletCoord(s_ap, s_an)
            upd = step_nca(coord, nca_params_for_beta(coord, beta, g=g))
            assert_matches_oracle(
                upd, sphere_step_oracle(s_ap, s_an, g, beta, "nca")
            )


class TestStepMargin:
    def test_inactive_hinge_no_motion(self):
        params = StepParams(learning_rate=0.1, loss=LossSpec(
            kind=LossKind.MARGIN, margin=0.0))
        upd = step_margin(TripletCoord(0.9, 0.1), params)
        assert upd.d_sap == 0.0 and upd.d_san == 0.0
        assert upd.s_ap_new == 0.9 and upd.s_an_new == 0.1

    def test_zero_step_is_identity(self):
        params = StepParams(learning_rate=0.0, loss=MARGIN02)
        upd = step_margin(TripletCoord(0.1, 0.9), params)
        assert upd.d_sap == 0.0 and upd.d_san == 0.0

    def test_active_matches_oracle(self):
        params = StepParams(learning_rate=0.01, gamma=1.0, loss=MARGIN02)
        upd = step_margin(TripletCoord(0.3, 0.7), params)
        assert_matches_oracle(
            upd, sphere_step_oracle(0.3, 0.7, 1.0, 0.02, "margin", 0.2)
        )

    def test_oracle_equivalence_sweep(self):
        rng = np.random.default_rng(43)
        for _ in range(2000):
            s_ap, s_an = rng.uniform(-1, 1, size=2)
            g = rng.uniform(-1, 1)
            lr = rng.uniform(0.0, 0.25)
            margin = rng.uniform(0.0, 1.0)
            params = StepParams(
                learning_rate=lr,
                gamma=g,
                loss=LossSpec(kind=LossKind.MARGIN, margin=margin),
            )
            upd = step_margin(TripletCoord(s_ap, s_an), params)
            assert_matches_oracle(
                upd,
                sphere_step_oracle(s_ap, s_an, g, 2 * lr, "margin", margin),
            )


class TestEntanglement:
    def test_zero_p_totals_equal_plain_deltas(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            coord = TripletCoord(*rng.uniform(-1, 1, 2))
            params = StepParams(
                learning_rate=0.1, gamma=rng.uniform(-1, 1),
                entanglement_p=0.0)
            upd = step_nca(coord, params)
            assert upd.d_sap_total == upd.d_sap
            assert upd.d_san_total == upd.d_san

    def test_coupling_uses_p_times_q(self):
        coord = TripletCoord(0.6, 0.5)
        base = step_nca(coord, StepParams(learning_rate=0.1, gamma=1.0))
        coupled = step_nca(
            coord,
            StepParams(learning_rate=0.1, gamma=1.0, entanglement_p=0.8),
        )
        q = 0.6 * 0.5
        assert coupled.d_sap_total == pytest.approx(
            base.d_sap + 0.8 * q * base.d_san, abs=1e-15
        )
        assert coupled.d_san_total == pytest.approx(
            base.d_san + 0.8 * q * base.d_sap, abs=1e-15
        )

    def test_fixed_point_for_all_gamma_p(self):
        for g in (-1.0, -0.5, 0.0, 0.5, 1.0):
            for p in (0.0, 0.5, 1.0):
                for params_loss, fn in ((NCA, step_nca), (MARGIN02, step_margin)):
                    params = StepParams(
                        learning_rate=0.15, gamma=g, entanglement_p=p,
                        loss=params_loss)
                    upd = fn(TripletCoord(1.0, 1.0), params)
                    assert abs(upd.d_sap_total) < 1e-12
                    assert abs(upd.d_san_total) < 1e-12


class TestVectorField:
    def test_grid_size_and_cells(self):
        field = vector_field(
            GridSpec(resolution=5), StepParams(learning_rate=0.05, loss=NCA)
        )
        assert len(field) == 25
        assert field.s_ap.min() == -1.0 and field.s_ap.max() == 1.0

    def test_resolution_validation(self):
        with pytest.raises(ValueError):
            GridSpec(resolution=1)

    def test_projection_kills_gradient_near_sap_one(self):
        """|d_sap| at s_ap > 0.99 stays under 1% of the field max."""
        field = vector_field(
            GridSpec(resolution=41),
            StepParams(learning_rate=0.05, gamma=1.0, entanglement_p=0.0,
                       loss=NCA),
        )
        edge = np.abs(field.d_sap[field.s_ap > 0.99])
        assert edge.size > 0
        assert edge.max() < 0.01 * np.abs(field.d_sap).max()

    def test_entangled_field_pushes_hard_region_up(self):
        """With full entanglement some hard-region cells gain s_an."""
        field = vector_field(
            GridSpec(resolution=41),
            StepParams(learning_rate=0.05, gamma=1.0, entanglement_p=1.0,
                       loss=NCA),
        )
        hard = field.s_an > field.s_ap
        assert np.any(field.d_san_total[hard] > 0)

    def test_corner_cell_is_fixed(self):
        field = vector_field(
            GridSpec(resolution=3),
            StepParams(learning_rate=0.1, gamma=1.0, entanglement_p=1.0,
                       loss=NCA),
        )
        at_corner = (field.s_ap == 1.0) & (field.s_an == 1.0)
        assert np.all(np.abs(field.d_sap_total[at_corner]) < 1e-12)
        assert np.all(np.abs(field.d_san_total[at_corner]) < 1e-12)

    def test_sct_dynamics_rejected(self):
        with pytest.raises(ValueError):
            step(
                TripletCoord(0.0, 0.0),
                StepParams(learning_rate=0.1,
                           loss=LossSpec(kind=LossKind.SCT)),
            )


class TestTrajectory:
    def test_fixed_point_is_constant(self):
        params = StepParams(learning_rate=0.1, gamma=0.5, entanglement_p=1.0)
        points = trajectory(TripletCoord(1.0, 1.0), params, steps=8)
        assert len(points) == 9
        for pt in points:
            assert pt.s_ap == pytest.approx(1.0, abs=1e-12)
            assert pt.s_an == pytest.approx(1.0, abs=1e-12)

    def test_single_step_composition(self):
        params = StepParams(learning_rate=0.1, gamma=1.0, entanglement_p=0.5)
        start = TripletCoord(0.2, 0.6)
        upd = step_nca(start, params)
        points = trajectory(start, params, steps=1)
        assert points[1].s_ap == pytest.approx(
            start.s_ap + upd.d_sap_total, abs=1e-15
        )
        assert points[1].s_an == pytest.approx(
            start.s_an + upd.d_san_total, abs=1e-15
        )

    def test_hard_corner_attracts_under_entanglement(self):
        """Near (1,1) with full entanglement the negative keeps gaining
        similarity: the degenerate-minimum pull."""
        params = StepParams(learning_rate=0.1, gamma=1.0, entanglement_p=1.0)
        points = trajectory(TripletCoord(0.8, 0.95), params, steps=10)
        s_an_values = [pt.s_an for pt in points]
        assert all(
            b >= a for a, b in zip(s_an_values, s_an_values[1:])
        )
        assert s_an_values[-1] > s_an_values[0]

    def test_clamped_to_square(self):
        params = StepParams(learning_rate=2.0, gamma=1.0)
        for pt in trajectory(TripletCoord(0.9, -0.9), params, steps=20):
            assert -1.0 <= pt.s_ap <= 1.0
            assert -1.0 <= pt.s_an <= 1.0

    def test_steps_validation(self):
        with pytest.raises(ValueError):
            trajectory(TripletCoord(0, 0), StepParams(learning_rate=0.1), 0)
