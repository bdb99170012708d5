"""Success probability, time-to-solution, suites, and aggregation."""

import math

import numpy as np
import pytest

from npim.benchmark import (
    BenchEntry,
    BenchSuite,
    best_of_k,
    clopper_pearson_lower_full,
    load_gset_targets,
    make_runner,
    objective_meets_target,
    results_csv_rows,
    run_entry,
    run_suite,
    success_probability,
    time_to_solution,
)
from npim.instances import GraphAdjacency, IsingInstance, from_maxcut, gen_graph, gen_sk
from npim.machine import Architecture, ParameterTensor, SpinConfig, TrajectoryResult
from npim.machine import save_model


def stub_runner(objective_fn):
    """Runner returning a fixed-size result whose energy is objective_fn(seed)."""

    def runner(inst, t_total, seed):
        e = float(objective_fn(seed))
        return TrajectoryResult(
            best_energy=e,
            best_config=SpinConfig(np.ones(inst.n)),
            steps=t_total,
            seed=seed,
        )

    return runner


class TestTts:
    def test_cap_at_high_success(self):
        assert time_to_solution(100, 0.99) == 100.0
        assert time_to_solution(100, 1.0) == 100.0

    def test_zero_success_is_infinite(self):
        assert time_to_solution(100, 0.0) == math.inf

    def test_half_success_value(self):
        assert time_to_solution(100, 0.5) == pytest.approx(664.39, abs=0.01)

    def test_monotone_decreasing_in_p(self):
        values = [time_to_solution(50, p) for p in np.linspace(0.01, 0.98, 30)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_linear_in_t(self):
        assert time_to_solution(200, 0.3) == pytest.approx(2 * time_to_solution(100, 0.3))

    def test_at_least_t_below_cap(self):
        for p in (0.01, 0.5, 0.95):
            assert time_to_solution(100, p) >= 100.0

    def test_validation(self):
        with pytest.raises(ValueError):
            time_to_solution(10, 1.5)
        with pytest.raises(ValueError):
            time_to_solution(0, 0.5)


class TestClopperPearson:
    def test_full_success_bound(self):
        assert clopper_pearson_lower_full(10) == pytest.approx(0.05 ** 0.1)
        assert clopper_pearson_lower_full(1) == pytest.approx(0.05)


class TestSuccessProbability:
    def test_unreachable_target(self):
        inst = gen_sk(6, 0)
        entry = BenchEntry(instance=inst, readout="energy", t=10, target=-1e9)
        runner = stub_runner(lambda seed: -1.0)
        p, hits, runs = success_probability(runner, entry, 50, np.arange(50))
        assert (p, hits, runs) == (0.0, 0, 50)

    def test_binomial_statistics(self):
        inst = gen_sk(4, 0)
        entry = BenchEntry(instance=inst, readout="energy", t=10, target=-1.0)

        def objective(seed):
            return -2.0 if np.random.default_rng(seed).random() < 0.3 else 0.0

        runner = stub_runner(objective)
        runs = 10_000
        p, hits, _ = success_probability(runner, entry, runs, np.arange(runs))
        stderr = math.sqrt(0.3 * 0.7 / runs)
        assert abs(p - 0.3) < 3 * stderr

    def test_trivial_instance_with_field_following_machine(self):
        # J = 0: a single-layer machine that follows the field reaches the
        # aligned optimum by the second step, every run
        inst = IsingInstance(4, np.zeros((4, 4)), np.array([4.0, -2.0, 1.0, -3.0]), id="f")
        arch = Architecture(t_c=2, d=0, m=1, variant="continuous")
        theta = np.zeros((3, 1))
        theta[0, 0] = 0.05  # small noise kick
        theta[2, 0] = 1.0  # most recent field slot
        tensor = ParameterTensor(theta)

        from npim.machine import run_trajectory

        def runner(i, t_total, seed):
            return run_trajectory(i, arch, tensor, t_total, seed)

        target = -np.abs(inst.linear).sum()
        entry = BenchEntry(instance=inst, readout="energy", t=5, target=float(target))
        p, hits, runs = success_probability(runner, entry, 40, np.arange(40))
        assert p == 1.0


class TestBestOfK:
    def test_k_one_is_single_run(self):
        inst = gen_sk(4, 0)
        entry = BenchEntry(instance=inst, readout="energy", t=5)
        runner = stub_runner(lambda seed: -float(seed))
        seeds = np.array([3, 1, 2])
        assert best_of_k(runner, entry, 1, seeds) == -3.0

    def test_takes_best_over_k(self):
        inst = gen_sk(4, 0)
        entry = BenchEntry(instance=inst, readout="energy", t=5)
        runner = stub_runner(lambda seed: -float(seed))
        seeds = np.array([5, 30, 2, 7])
        assert best_of_k(runner, entry, 4, seeds) == -30.0

    def test_prefix_max_monotone(self):
        inst = gen_sk(4, 0)
        entry = BenchEntry(instance=inst, readout="energy", t=5)
        runner = stub_runner(lambda seed: -float(np.random.default_rng(seed).random()))
        seeds = np.arange(20)
        values = [best_of_k(runner, entry, k, seeds) for k in range(1, 21)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestRunEntry:
    def test_counts_and_result_shape(self):
        inst = gen_sk(5, 1)
        entry = BenchEntry(instance=inst, readout="energy", t=7, family="sk", target=-2.0)
        runner = stub_runner(lambda seed: -2.0 if seed % 2 == 0 else 0.0)
        res = run_entry(runner, entry, 10, np.arange(10), "stub")
        assert res.runs == 10
        assert res.hits == 5
        assert res.p_s == 0.5
        assert res.tts == pytest.approx(7 * math.log(0.01) / math.log(0.5))
        assert res.best_objective == -2.0
        assert res.p_s_lower is None

    def test_self_target_when_missing(self):
        inst = gen_sk(5, 1)
        entry = BenchEntry(instance=inst, readout="energy", t=7)
        runner = stub_runner(lambda seed: -float(seed % 3))
        res = run_entry(runner, entry, 9, np.arange(9), "stub")
        assert res.target == -2.0
        assert res.hits == 3

    def test_full_success_reports_lower_bound(self):
        inst = gen_sk(5, 1)
        entry = BenchEntry(instance=inst, readout="energy", t=7, target=0.0)
        runner = stub_runner(lambda seed: -1.0)
        res = run_entry(runner, entry, 20, np.arange(20), "stub")
        assert res.p_s == 1.0
        assert res.p_s_lower == pytest.approx(0.05 ** (1 / 20))

    def test_cut_readout_uses_graph(self):
        g = gen_graph(10, "random_unweighted", 3, density=0.4)
        inst = from_maxcut(g, id="g")
        entry = BenchEntry(instance=inst, readout="cut", t=30, family="r", graph=g)
        runner, label = make_runner({"machine": "cac"})
        res = run_entry(runner, entry, 5, np.arange(5), label)
        assert res.best_objective == int(res.best_objective)  # unweighted cut
        assert res.best_objective > 0

    def test_mis_readout_is_feasible_size(self):
        g = gen_graph(10, "random_unweighted", 4, density=0.4)
        from npim.instances import extract_feasible_set, from_mis

        inst = from_mis(g, id="m")
        entry = BenchEntry(instance=inst, readout="mis", t=30, graph=g)
        runner, label = make_runner({"machine": "cac"})
        res = run_entry(runner, entry, 5, np.arange(5), label)
        assert 1 <= res.best_objective <= 10

    def test_graph_required_for_cut(self):
        inst = gen_sk(5, 1)
        with pytest.raises(ValueError, match="graph"):
            BenchEntry(instance=inst, readout="cut", t=5)


class TestRunSuite:
    def _suite(self, n_inst=5, runs=100):
        entries = []
        for k in range(n_inst):
            inst = gen_sk(5, k)
            entries.append(
                BenchEntry(instance=inst, readout="energy", t=10, family="sk", target=-1.0)
            )
        return BenchSuite(machine={"machine": "cac"}, entries=entries, runs=runs)

    def test_one_result_per_instance(self):
        suite = self._suite(5, 20)
        runner = stub_runner(lambda seed: -2.0)
        results, summary = run_suite(suite, 0, runner=runner, machine_label="stub")
        assert len(results) == 5
        assert summary["families"]["sk"]["count"] == 5

    def test_median_aggregation(self):
        entries = []
        for k, p_hit in enumerate((1, 10, 100)):
            inst = gen_sk(4, k)
            entries.append(
                BenchEntry(instance=inst, readout="energy", t=1, family="f", target=-float(k))
            )
        suite = BenchSuite(machine={"machine": "cac"}, entries=entries, runs=4)

        # hit counts 4, 4, 0 -> TTS values t, t, inf; median = t
        def objective(seed):
            return -1.0

        results, summary = run_suite(suite, 0, runner=stub_runner(objective), machine_label="s")
        tts = [r.tts for r in results]
        assert summary["families"]["f"]["median_tts"] == float(np.median(tts))

    def test_median_of_three_values(self):
        assert float(np.median([1.0, 10.0, 100.0])) == 10.0

    def test_infinite_median_serialized(self):
        inst = gen_sk(4, 0)
        entry = BenchEntry(instance=inst, readout="energy", t=3, family="f", target=-1e9)
        suite = BenchSuite(machine={"machine": "cac"}, entries=[entry], runs=3)
        results, summary = run_suite(suite, 0, runner=stub_runner(lambda s: 0.0), machine_label="s")
        assert summary["families"]["f"]["median_tts"] == "inf"
        assert "inf" in results_csv_rows(results)[1]

    def test_best_of_in_summary(self):
        suite = BenchSuite(
            machine={"machine": "cac"},
            entries=self._suite(2, 5).entries,
            runs=5,
            best_of=7,
        )
        results, summary = run_suite(
            suite, 0, runner=stub_runner(lambda s: -float(s % 11)), machine_label="s"
        )
        assert summary["best_of"]["k"] == 7
        assert len(summary["best_of"]["per_instance"]) == 2

    def test_deterministic(self):
        suite = self._suite(3, 10)
        res_a, sum_a = run_suite(suite, 42)
        res_b, sum_b = run_suite(suite, 42)
        assert results_csv_rows(res_a) == results_csv_rows(res_b)
        assert sum_a == sum_b

    def test_threads_do_not_change_results(self):
        suite = self._suite(4, 10)
        res_a, _ = run_suite(suite, 7, threads=1)
        res_b, _ = run_suite(suite, 7, threads=4)
        assert results_csv_rows(res_a) == results_csv_rows(res_b)

    def test_empty_suite_rejected(self):
        with pytest.raises(ValueError, match="no instances"):
            BenchSuite(machine={"machine": "cac"}, entries=[], runs=5)

    def test_csv_header(self):
        rows = results_csv_rows([])
        assert rows[0] == "instance,family,n,machine,t,runs,hits,p_s,tts,best_objective,target"


class TestMakeRunner:
    def test_npim_runner_from_model_file(self, tmp_path):
        arch = Architecture(t_c=2, d=1, m=1, variant="discrete")
        from npim.machine import param_count

        path = tmp_path / "model.json"
        save_model(
            path, arch, np.zeros(param_count(arch)),
            {"epochs": 0, "reward_kind": "success", "instance_family": "sk", "seed": 0},
        )
        runner, label = make_runner({"machine": "npim", "model": str(path)})
        assert label == "npim"
        res = runner(gen_sk(5, 0), 4, 1)
        assert res.steps == 4

    def test_baseline_params_override(self):
        runner, label = make_runner({"machine": "aim", "params": {"alpha": 0.9}})
        assert label == "aim"
        res = runner(gen_sk(5, 0), 10, 3)
        assert math.isfinite(res.best_energy)

    def test_unknown_machine_rejected(self):
        with pytest.raises(ValueError, match="machine"):
            make_runner({"machine": "quantum"})

    def test_published_target_table(self):
        targets = load_gset_targets()["targets"]
        assert targets["G1"]["cut"] == 11624
        assert targets["G22"]["n"] == 2000
        assert len(targets) == 22
