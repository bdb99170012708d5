"""Rewards, tau schedule, ledger, gradient estimators, epochs, and the
policy-gradient comparison trainer."""

import math

import numpy as np
import pytest

from npim.instances import IsingInstance, gen_sk
from npim.machine import Architecture, param_count, step_generator
from npim.training import (
    EnergyLedger,
    PerturbationSample,
    TrainConfig,
    TrainerState,
    apply_update,
    estimate_gradients,
    evaluate_mean_reward,
    initial_state,
    ledger_update,
    reinforce_epoch,
    reinforce_rollout,
    reward_objective,
    reward_success,
    tau_update,
    train,
    train_epoch,
)

ARCH = Architecture(t_c=2, d=1, m=1, variant="discrete")


def tiny_config(**overrides):
    defaults = dict(
        arch=ARCH,
        instances_per_epoch=2,
        trajectories_per_instance=3,
        epochs=2,
        t_total=8,
        seed=123,
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


class TestRewardSuccess:
    def test_exact_hit(self):
        assert reward_success(-100.0, -100.0) == 1.0

    def test_bad_trajectory_penalized(self):
        assert reward_success(-40.0, -100.0) == -0.5

    def test_middle_band_is_zero(self):
        assert reward_success(-80.0, -100.0) == 0.0

    def test_boundary_is_penalized(self):
        assert reward_success(-50.0, -100.0) == -0.5

    def test_tolerance_modes(self):
        e0 = -100.0
        assert reward_success(e0 + 1e-8, e0, exact=True) == 0.0
        assert reward_success(e0 + 1e-8, e0, exact=False) == 1.0

    def test_new_record_counts_as_hit(self):
        assert reward_success(-101.0, -100.0) == 1.0


class TestRewardObjective:
    def test_reference_hit(self):
        assert reward_objective(-50.0, -50.0, 0.005) == 1.0

    def test_clamped_at_zero(self):
        assert reward_objective(200.0, 0.0, 0.005) == 0.0

    def test_linear_midpoint(self):
        assert reward_objective(100.0, 0.0, 0.005) == pytest.approx(0.5)

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            reward_objective(0.0, 0.0, 0.0)


class TestTauSchedule:
    def test_bumps_on_schedule(self):
        cfg = tiny_config()
        state = TrainerState(np.zeros(1), np.eye(1), epoch=10, tau=0.005)
        tau_update(state, 0.6, cfg)
        assert state.tau == pytest.approx(0.0075)

    def test_low_mean_blocks(self):
        cfg = tiny_config()
        state = TrainerState(np.zeros(1), np.eye(1), epoch=10, tau=0.005)
        tau_update(state, 0.4, cfg)
        assert state.tau == 0.005

    def test_off_cadence_blocks(self):
        cfg = tiny_config()
        state = TrainerState(np.zeros(1), np.eye(1), epoch=7, tau=0.005)
        tau_update(state, 0.9, cfg)
        assert state.tau == 0.005


class TestLedger:
    def test_new_instance_initialized(self):
        ledger = EnergyLedger()
        ledger_update(ledger, "a", -5.0)
        assert ledger.best("a") == -5.0

    def test_worse_energy_ignored(self):
        ledger = EnergyLedger({"a": -10.0})
        ledger_update(ledger, "a", -8.0)
        assert ledger.best("a") == -10.0

    def test_better_energy_recorded(self):
        ledger = EnergyLedger({"a": -10.0})
        ledger_update(ledger, "a", -12.0)
        assert ledger.best("a") == -12.0

    def test_monotone_over_stream(self):
        rng = np.random.default_rng(0)
        ledger = EnergyLedger()
        seen = math.inf
        for e in rng.normal(size=100):
            ledger.update("x", float(e))
            assert ledger.best("x") <= seen
            seen = ledger.best("x")


class TestEstimators:
    def test_single_sample_identity_exploration(self):
        v = np.array([0.5, -1.0, 2.0])
        sample = PerturbationSample(v=v, reward=2.0, instance_id="a", trajectory_seed=0)
        g_x, g_l = estimate_gradients([sample], np.eye(3), "literal")
        np.testing.assert_allclose(g_x, 2.0 * v)
        np.testing.assert_allclose(g_l, 2.0 * np.outer(v, v) - np.eye(3))

    def test_constant_reward_modes(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=4)
        c = 3.0
        sample = PerturbationSample(v=v, reward=c, instance_id="a", trajectory_seed=0)
        _gx, g_lit = estimate_gradients([sample], np.eye(4), "literal")
        np.testing.assert_allclose(g_lit, c * np.outer(v, v) - np.eye(4))
        _gx, g_cen = estimate_gradients([sample], np.eye(4), "reward_centered")
        np.testing.assert_allclose(g_cen, c * (np.outer(v, v) - np.eye(4)))

    def test_constant_reward_expectation(self):
        rng = np.random.default_rng(2)
        k, p, c = 40000, 3, 2.0
        vs = rng.standard_normal((k, p))
        samples = [
            PerturbationSample(v=vs[i], reward=c, instance_id="a", trajectory_seed=i)
            for i in range(k)
        ]
        _gx, g_lit = estimate_gradients(samples, np.eye(p), "literal")
        np.testing.assert_allclose(g_lit, (c - 1.0) * np.eye(p), atol=0.1)
        _gx, g_cen = estimate_gradients(samples, np.eye(p), "reward_centered")
        np.testing.assert_allclose(g_cen, np.zeros((p, p)), atol=0.1)

    def test_linear_reward_recovers_gradient(self):
        rng = np.random.default_rng(3)
        p, k = 4, 20000
        a = np.array([1.0, -2.0, 0.5, 3.0])
        theta_l = 0.1 * np.eye(p)
        theta_x = rng.normal(size=p)
        vs = rng.standard_normal((k, p))
        rhos = (theta_x + vs @ theta_l.T) @ a
        samples = [
            PerturbationSample(v=vs[i], reward=float(rhos[i]), instance_id="a", trajectory_seed=i)
            for i in range(k)
        ]
        g_x, _gl = estimate_gradients(samples, theta_l, "literal")
        contrib = (np.linalg.inv(theta_l).T @ (vs * rhos[:, None]).T).T
        stderr = contrib.std(axis=0) / np.sqrt(k)
        assert np.all(np.abs(g_x - a) < 4.0 * stderr)

    def test_singular_exploration_rejected(self):
        sample = PerturbationSample(v=np.zeros(2), reward=1.0, instance_id="a", trajectory_seed=0)
        with pytest.raises(ValueError, match="singular"):
            estimate_gradients([sample], np.zeros((2, 2)))

    def test_empty_sample_list_rejected(self):
        with pytest.raises(ValueError, match="sample"):
            estimate_gradients([], np.eye(2))


class TestApplyUpdate:
    def test_zero_gradients_only_advance_epoch(self):
        cfg = tiny_config()
        p = param_count(cfg.arch)
        state = initial_state(cfg)
        theta_x = state.theta_x.copy()
        theta_l = state.theta_l.copy()
        apply_update(state, np.zeros(p), np.zeros((p, p)), cfg)
        np.testing.assert_array_equal(state.theta_x, theta_x)
        np.testing.assert_array_equal(state.theta_l, theta_l)
        assert state.epoch == 1

    def test_singular_update_is_floored(self):
        cfg = tiny_config(eta_l=1.0)
        p = param_count(cfg.arch)
        state = initial_state(cfg)
        g_l = -state.theta_l.copy()  # drives theta_l to exactly zero
        apply_update(state, np.zeros(p), g_l, cfg)
        svals = np.linalg.svd(state.theta_l, compute_uv=False)
        assert svals.min() == pytest.approx(cfg.eps_l)

    def test_zero_eta_x_freezes_mean(self):
        cfg = tiny_config(eta_x=0.0)
        p = param_count(cfg.arch)
        state = initial_state(cfg)
        theta_x = state.theta_x.copy()
        apply_update(state, np.ones(p), 0.1 * np.eye(p), cfg)
        np.testing.assert_array_equal(state.theta_x, theta_x)
        assert not np.array_equal(state.theta_l, cfg.sigma0 * np.eye(p))

    def test_nonfinite_gradients_abort(self):
        cfg = tiny_config()
        p = param_count(cfg.arch)
        state = initial_state(cfg)
        with pytest.raises(RuntimeError, match="non-finite"):
            apply_update(state, np.full(p, np.nan), np.zeros((p, p)), cfg)


class TestTrainEpoch:
    def test_trajectory_count(self):
        cfg = tiny_config()
        instances = [gen_sk(8, s) for s in range(4)]
        state = initial_state(cfg)
        report = train_epoch(state, instances, cfg, EnergyLedger())
        assert sum(count for _edge, count in report.reward_histogram) == 6

    def test_all_hits_give_mean_reward_one(self):
        # every config of the zero instance has energy 0, so every trajectory
        # matches the reference exactly (and triggers the degeneracy warning)
        cfg = tiny_config(exact_match=True)
        instances = [
            IsingInstance(4, np.zeros((4, 4)), np.zeros(4), id=f"z{k}") for k in range(2)
        ]
        state = initial_state(cfg)
        with pytest.warns(UserWarning, match="degenerate"):
            report = train_epoch(state, instances, cfg, EnergyLedger())
        assert report.mean_reward == 1.0

    def test_deterministic_repeat(self):
        cfg = tiny_config()
        instances = [gen_sk(8, s) for s in range(3)]
        ledger_a = EnergyLedger()
        state_a = initial_state(cfg)
        rep_a = train_epoch(state_a, instances, cfg, ledger_a)
        ledger_b = EnergyLedger()
        state_b = initial_state(cfg)
        rep_b = train_epoch(state_b, instances, cfg, ledger_b)
        assert rep_a.mean_reward == rep_b.mean_reward
        assert rep_a.grad_norm_x == rep_b.grad_norm_x
        np.testing.assert_array_equal(state_a.theta_x, state_b.theta_x)
        assert ledger_a.as_dict() == ledger_b.as_dict()

    def test_threads_do_not_change_results(self):
        cfg1 = tiny_config(instances_per_epoch=3)
        cfg2 = tiny_config(instances_per_epoch=3, threads=3)
        instances = [gen_sk(8, s) for s in range(3)]
        state1, state2 = initial_state(cfg1), initial_state(cfg2)
        rep1 = train_epoch(state1, instances, cfg1, EnergyLedger())
        rep2 = train_epoch(state2, instances, cfg2, EnergyLedger())
        assert rep1.mean_reward == rep2.mean_reward
        np.testing.assert_array_equal(state1.theta_x, state2.theta_x)

    def test_requires_enough_instances(self):
        cfg = tiny_config(instances_per_epoch=5)
        with pytest.raises(ValueError, match="instances"):
            train_epoch(initial_state(cfg), [gen_sk(8, 0)], cfg, EnergyLedger())

    def test_ledger_updated_after_rewards(self):
        cfg = tiny_config(instances_per_epoch=1, trajectories_per_instance=4)
        inst = gen_sk(8, 7)
        ledger = EnergyLedger({inst.id: -1e9})  # unreachable reference
        state = initial_state(cfg)
        report = train_epoch(state, [inst], cfg, ledger)
        # nothing can hit -1e9, so no trajectory scores 1, and the ledger
        # keeps its (non-increasing) record
        assert report.mean_reward <= 0.0
        assert ledger.best(inst.id) == -1e9
        assert report.ledger_updates == 0


class TestTrain:
    def test_fine_tune_zero_epochs_preserves_model(self, tmp_path):
        from npim.machine import save_model

        cfg = tiny_config()
        rng = np.random.default_rng(4)
        flat = rng.normal(size=param_count(cfg.arch))
        path = tmp_path / "m.json"
        save_model(
            path, cfg.arch, flat,
            {"epochs": 0, "reward_kind": "success", "instance_family": "sk", "seed": 0},
        )
        cfg2 = tiny_config(epochs=0, fine_tune_from=str(path))
        result = train(cfg2, [gen_sk(8, s) for s in range(2)])
        np.testing.assert_allclose(result.theta_x, flat, atol=1e-15)

    def test_incompatible_fine_tune_arch_rejected(self, tmp_path):
        from npim.machine import save_model

        other = Architecture(t_c=3, d=1, m=1, variant="discrete")
        path = tmp_path / "m.json"
        save_model(
            path, other, np.zeros(param_count(other)),
            {"epochs": 0, "reward_kind": "success", "instance_family": "sk", "seed": 0},
        )
        cfg = tiny_config(fine_tune_from=str(path))
        with pytest.raises(ValueError, match="incompatible"):
            train(cfg, [gen_sk(8, s) for s in range(2)])

    def test_initial_state_shapes(self):
        cfg = tiny_config()
        state = initial_state(cfg)
        p = param_count(cfg.arch)
        assert state.theta_x.shape == (p,)
        np.testing.assert_array_equal(state.theta_l, cfg.sigma0 * np.eye(p))
        assert state.tau == cfg.tau0

    def test_snapshots_and_reports(self):
        cfg = tiny_config(epochs=3)
        result = train(
            cfg, [gen_sk(8, s) for s in range(3)], snapshot_epochs=(1, 3)
        )
        assert sorted(result.snapshots) == [1, 3]
        assert len(result.reports) == 3
        assert [r.epoch for r in result.reports] == [1, 2, 3]

    def test_full_run_deterministic(self):
        cfg = tiny_config(epochs=3)
        instances = [gen_sk(8, s) for s in range(3)]
        a = train(cfg, instances)
        b = train(cfg, instances)
        np.testing.assert_array_equal(a.theta_x, b.theta_x)
        assert [r.mean_reward for r in a.reports] == [r.mean_reward for r in b.reports]

    def test_evaluate_identical_splits_score_identically(self):
        cfg = tiny_config()
        instances = [gen_sk(8, s) for s in range(3)]
        result = train(cfg, instances)
        r1 = evaluate_mean_reward(cfg.arch, result.theta_x, instances, cfg, runs=5)
        r2 = evaluate_mean_reward(cfg.arch, result.theta_x, list(instances), cfg, runs=5)
        assert r1 == r2


class TestReinforce:
    def test_continuous_variant_rejected(self):
        arch = Architecture(t_c=2, d=1, m=1, variant="continuous")
        inst = gen_sk(4, 0)
        with pytest.raises(ValueError, match="discrete"):
            reinforce_rollout(inst, arch, np.zeros(param_count(arch)), 5, np.arange(2))

    def test_single_decision_matches_bernoulli_score(self):
        # N=1, T=1: the only gradient path is the noise weight
        arch = Architecture(t_c=1, d=1, m=1, variant="discrete")
        inst = IsingInstance(1, np.zeros((1, 1)), np.zeros(1), id="one")
        w0 = 0.7
        flat = np.array([w0, 0.3, -0.4])
        seeds = np.array([5], dtype=np.uint64)
        gen = step_generator(5, 0)
        eta = gen.standard_normal(1)[0]
        u = gen.random(1)[0]
        tanh_a = np.tanh(w0 * eta)
        s = 1.0 if u < (1 + tanh_a) / 2 else -1.0
        _e, grads = reinforce_rollout(inst, arch, flat, 1, seeds)
        expected_w0 = (s - tanh_a) * eta
        np.testing.assert_allclose(grads[0], [expected_w0, 0.0, 0.0], atol=1e-12)

    def test_zero_reward_means_zero_update(self):
        # a sharp objective reward with an unreachable reference scores every
        # sampled trajectory exactly zero, so the update must vanish
        arch = Architecture(t_c=1, d=1, m=1, variant="discrete")
        inst = IsingInstance(1, np.zeros((1, 1)), np.array([2.0]), id="lin")
        cfg = TrainConfig(
            arch=arch,
            instances_per_epoch=1,
            trajectories_per_instance=4,
            epochs=1,
            t_total=3,
            seed=7,
            reward_kind="objective",
            tau0=1.0,
        )
        state = initial_state(cfg)
        state.theta_x = np.zeros(param_count(arch))
        ledger = EnergyLedger({"lin": -10.0})
        report = reinforce_epoch(state, [inst], cfg, ledger)
        assert report.mean_reward == 0.0
        np.testing.assert_array_equal(state.theta_x, np.zeros(param_count(arch)))
        assert state.epoch == 1

    def test_epoch_runs_and_is_deterministic(self):
        cfg = tiny_config(epochs=1)
        instances = [gen_sk(6, s) for s in range(3)]
        state_a = initial_state(cfg)
        rep_a = reinforce_epoch(state_a, instances, cfg, EnergyLedger())
        state_b = initial_state(cfg)
        rep_b = reinforce_epoch(state_b, instances, cfg, EnergyLedger())
        assert rep_a.mean_reward == rep_b.mean_reward
        np.testing.assert_array_equal(state_a.theta_x, state_b.theta_x)
        assert rep_a.grad_norm_l == 0.0

    def test_train_with_reinforce_trainer(self):
        cfg = tiny_config(epochs=2)
        result = train(cfg, [gen_sk(6, s) for s in range(3)], trainer="reinforce")
        assert len(result.reports) == 2


class TestConfigValidation:
    def test_bad_sizes(self):
        with pytest.raises(ValueError):
            tiny_config(instances_per_epoch=0)
        with pytest.raises(ValueError):
            tiny_config(t_total=0)

    def test_bad_reward_kind(self):
        with pytest.raises(ValueError):
            tiny_config(reward_kind="energy")

    def test_bad_centering(self):
        with pytest.raises(ValueError):
            tiny_config(centering="mean")

    def test_negative_step_size_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(eta_x=-0.1)
