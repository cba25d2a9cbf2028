import numpy as np
import pytest

from kanlab.errors import (
    DivergenceError,
    InvalidInputError,
    RolloutDivergedError,
)
from kanlab.systems import (
    IKEDA_BOX,
    Dataset,
    FoodChain,
    FoodChainParams,
    IkedaMap,
    IkedaParams,
    Trajectory,
    food_chain_jacobian,
    food_chain_rhs,
    generate_trajectory,
    ikeda_jacobian,
    ikeda_step,
    model_error,
    rk4_step,
    rollout,
)

from test_network import identity_layer, random_net
from kanlab.network import KanNetwork


class TestIkedaMap:
    def test_origin_maps_to_unit(self):
        np.testing.assert_allclose(ikeda_step([0.0, 0.0]), [1.0, 0.0], atol=1e-15)

    def test_jacobian_determinant_is_mu_squared(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-2, 2, size=(1000, 2))
        dets = np.linalg.det(ikeda_jacobian(pts))
        np.testing.assert_allclose(dets, 0.81, atol=1e-10)

    def test_jacobian_at_origin_is_scaled_rotation(self):
        jac = ikeda_jacobian([0.0, 0.0])
        phi = 0.4 - 6.0
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        np.testing.assert_allclose(jac, 0.9 * rot, atol=1e-14)

    def test_jacobian_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        step = 1e-7
        for s in rng.uniform(-1.5, 1.5, size=(50, 2)):
            jac = ikeda_jacobian(s)
            fd = np.zeros((2, 2))
            for p in range(2):
                e = np.zeros(2)
                e[p] = step
                fd[:, p] = (ikeda_step(s + e) - ikeda_step(s - e)) / (2 * step)
            assert np.max(np.abs(jac - fd) / np.maximum(np.abs(fd), 1.0)) < 1e-6

    def test_orbit_stays_in_attractor_box(self):
        traj = generate_trajectory(IkedaMap(), np.array([0.1, 0.1]), 10000, transient=1000)
        assert len(traj) == 10000
        x, y = traj.states[:, 0], traj.states[:, 1]
        assert x.min() >= IKEDA_BOX[0, 0] and x.max() <= IKEDA_BOX[0, 1]
        assert y.min() >= IKEDA_BOX[1, 0] and y.max() <= IKEDA_BOX[1, 1]

    def test_invalid_mu(self):
        with pytest.raises(InvalidInputError):
            IkedaParams(mu=1.5)


class TestFoodChain:
    def test_equilibrium_at_carrying_capacity(self):
        p = FoodChainParams()
        np.testing.assert_allclose(food_chain_rhs([p.K, 0.0, 0.0], p), 0.0, atol=1e-15)

    def test_predator_only_decay(self):
        p = FoodChainParams()
        np.testing.assert_allclose(
            food_chain_rhs([0.0, 0.0, 0.7], p), [0.0, 0.0, -p.x_q * 0.7], atol=1e-15
        )

    def test_rhs_regression_value(self):
        # frozen from an independent transcription of the three formulas
        got = food_chain_rhs([0.5, 0.5, 0.5])
        np.testing.assert_allclose(
            got,
            [-0.05890218901152078, 0.046280148195194284, 0.01752],
            rtol=1e-14,
        )

    def test_jacobian_matches_finite_difference(self):
        rng = np.random.default_rng(2)
        step = 1e-7
        for s in rng.uniform(0.05, 1.0, size=(50, 3)):
            jac = food_chain_jacobian(s)
            fd = np.zeros((3, 3))
            for p in range(3):
                e = np.zeros(3)
                e[p] = step
                fd[:, p] = (food_chain_rhs(s + e) - food_chain_rhs(s - e)) / (2 * step)
            assert np.max(np.abs(jac - fd) / np.maximum(np.abs(fd), 1.0)) < 1e-6

    def test_jacobian_structural_entries(self):
        p = FoodChainParams()
        jac = food_chain_jacobian([p.K, 0.0, 0.0], p)
        assert jac[0, 0] == pytest.approx(-1.0)  # logistic derivative at N=K
        rng = np.random.default_rng(3)
        pts = rng.uniform(0.01, 1.0, size=(20, 3))
        np.testing.assert_array_equal(food_chain_jacobian(pts)[:, 2, 0], 0.0)

    def test_positive_octant_preserved(self):
        traj = generate_trajectory(
            FoodChain(), np.array([0.7, 0.2, 0.8]), 2000, transient=100.0, dt_sample=0.5
        )
        assert traj.states.min() >= -1e-9

    def test_parameter_validation(self):
        with pytest.raises(InvalidInputError):
            FoodChainParams(K=-1.0)


class TestRk4:
    def test_zero_field_fixed_point(self):
        s = np.array([1.0, -2.0])
        np.testing.assert_array_equal(rk4_step(lambda x: np.zeros_like(x), s, 0.3), s)

    def test_exponential_decay_taylor4(self):
        # one step of sdot = -s at dt = 0.1 equals the 4th-order Taylor factor
        out = rk4_step(lambda s: -s, np.array([1.0]), 0.1)
        taylor4 = 1 - 0.1 + 0.1**2 / 2 - 0.1**3 / 6 + 0.1**4 / 24
        assert out[0] == pytest.approx(taylor4, abs=1e-15)
        assert out[0] == pytest.approx(np.exp(-0.1), abs=1e-7)

    def test_fourth_order_self_convergence(self):
        # halving the step shrinks the endpoint error on the food chain ~16x
        fc = FoodChain()
        x0 = np.array([0.7, 0.2, 0.8])
        t_final = 10.0

        def integrate(h):
            s = x0
            for _ in range(int(round(t_final / h))):
                s = rk4_step(fc.rhs, s, h)
            return s

        ref = integrate(0.003125)
        err_h = np.linalg.norm(integrate(0.05) - ref)
        err_h2 = np.linalg.norm(integrate(0.025) - ref)
        ratio = err_h / err_h2
        assert 10.0 < ratio < 24.0


class TestGenerateTrajectory:
    def test_single_post_transient_state(self):
        ik = IkedaMap()
        traj = generate_trajectory(ik, np.array([0.1, 0.1]), 1, transient=5)
        manual = np.array([0.1, 0.1])
        for _ in range(5):
            manual = ikeda_step(manual)
        np.testing.assert_allclose(traj.states[0], manual, rtol=1e-12)

    def test_deterministic(self):
        fc = FoodChain()
        t1 = generate_trajectory(fc, np.array([0.7, 0.2, 0.8]), 100, transient=10.0, dt_sample=0.5)
        t2 = generate_trajectory(fc, np.array([0.7, 0.2, 0.8]), 100, transient=10.0, dt_sample=0.5)
        np.testing.assert_array_equal(t1.states, t2.states)

    def test_flow_requires_dt(self):
        with pytest.raises(InvalidInputError):
            generate_trajectory(FoodChain(), np.array([0.7, 0.2, 0.8]), 10)

    def test_substep_floor_enforced(self):
        with pytest.raises(InvalidInputError):
            generate_trajectory(
                FoodChain(), np.array([0.7, 0.2, 0.8]), 10, dt_sample=0.5, substeps=5
            )

    def test_escape_raises_divergence(self):
        class Doubling:
            kind = "map"
            dim = 1

            def step(self, s):
                with np.errstate(over="ignore"):
                    return s * 1e30

        with pytest.raises(DivergenceError):
            generate_trajectory(Doubling(), np.array([1.0]), 400)

    def test_dataset_pairs_align(self):
        traj = generate_trajectory(IkedaMap(), np.array([0.1, 0.1]), 500, transient=100)
        ds = Dataset.from_trajectory(traj)
        np.testing.assert_array_equal(ds.targets[:-1], ds.inputs[1:])
        assert len(ds) == 499

    def test_dataset_split_temporal(self):
        ds = Dataset(np.arange(20.0).reshape(10, 2), np.arange(20.0).reshape(10, 2) + 1)
        train, test = ds.split(0.8)
        assert len(train) == 8 and len(test) == 2
        np.testing.assert_array_equal(train.inputs, ds.inputs[:8])


class TestRollout:
    def test_identity_net_holds_position(self):
        net = KanNetwork([identity_layer(2)])
        traj = rollout(net, np.array([0.3, -0.4]), 50)
        assert len(traj) == 51
        drift = np.abs(np.diff(traj.states, axis=0)).max()
        assert drift < 1e-2

    def test_divergent_net_raises(self):
        net = random_net([2, 2], seed=1)
        net.layers[0].w_base[:] = 50.0  # silu blowup
        with pytest.raises(RolloutDivergedError) as err:
            rollout(net, np.array([1.0, 1.0]), 100, bound=10.0)
        assert err.value.step >= 1

    def test_model_error_zero_for_oracle(self):
        # when the "true" step is the network itself the errors vanish
        from kanlab.network import forward

        ik = IkedaMap()
        pts = generate_trajectory(ik, np.array([0.1, 0.1]), 200, transient=50).states
        net = KanNetwork([identity_layer(2)])
        sup, mean = model_error(net, lambda s: forward(net, s), pts)
        assert sup == 0.0 and mean == 0.0

    def test_model_error_sup_ge_mean(self):
        ik = IkedaMap()
        net = KanNetwork([identity_layer(2)])
        pts = generate_trajectory(ik, np.array([0.1, 0.1]), 200, transient=50).states
        sup, mean = model_error(net, ik.step, pts)
        assert sup >= mean > 0


class TestTrajectoryType:
    def test_flow_requires_positive_dt(self):
        with pytest.raises(InvalidInputError):
            Trajectory(np.zeros((5, 2)), "flow-samples", None)

    def test_rejects_nonfinite(self):
        states = np.zeros((5, 2))
        states[3, 1] = np.nan
        with pytest.raises(InvalidInputError):
            Trajectory(states)
