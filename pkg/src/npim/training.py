"""Zeroth-order evolutionary trainer over machine parameters: reward-weighted
perturbation sampling, gradient estimators for the distribution mean and the
exploration matrix, reward schedules, the online best-energy ledger, and a
policy-gradient comparison trainer."""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .harness import (
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_PERTURB,
    STREAM_SELECT,
    STREAM_TRAJ,
    stable_id_hash,
    stream_rng,
    stream_seeds,
)
from .instances import IsingInstance, config_energies
from .machine import (
    Architecture,
    basis_row,
    fnl,
    load_model,
    param_count,
    run_batch,
    step_generator,
    unpack_theta,
)


@dataclass
class TrainerState:
    """Gaussian search distribution over flat parameters: mean theta_x and
    exploration/anisotropy matrix theta_l, plus the reward-sharpness tau."""

    theta_x: np.ndarray
    theta_l: np.ndarray
    epoch: int = 0
    tau: float = 0.005


@dataclass(frozen=True)
class TrainConfig:
    arch: Architecture
    instances_per_epoch: int
    trajectories_per_instance: int
    epochs: int
    t_total: int
    eta_x: float = 0.05
    eta_l: float = 0.01
    sigma0: float = 0.3
    eps_l: float = 1e-4
    reward_kind: str = "success"
    centering: str = "literal"
    tau0: float = 0.005
    tau_factor: float = 1.5
    tau_period: int = 10
    mean_threshold: float = 0.5
    exact_match: bool = False
    seed: int = 0
    fine_tune_from: str | None = None
    threads: int = 1

    def __post_init__(self):
        if min(self.instances_per_epoch, self.trajectories_per_instance) < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.t_total < 1:
            raise ValueError("t_total must be >= 1")
        if self.eta_x < 0 or self.eta_l < 0:
            raise ValueError("step sizes must be non-negative")
        if self.reward_kind not in ("success", "objective"):
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        if self.centering not in ("literal", "reward_centered"):
            raise ValueError(f"unknown centering {self.centering!r}")


class EnergyLedger:
    """Best energy ever observed per instance id; values only decrease."""

    def __init__(self, initial: dict[str, float] | None = None):
        self._best: dict[str, float] = dict(initial or {})

    def best(self, instance_id: str) -> float | None:
        return self._best.get(instance_id)

    def update(self, instance_id: str, e_opt: float) -> bool:
        """Record an observed energy; returns True when the entry improved."""
        current = self._best.get(instance_id)
        if current is None or e_opt < current:
            self._best[instance_id] = float(e_opt)
            return True
        return False

    def as_dict(self) -> dict[str, float]:
        return dict(self._best)

    def __len__(self) -> int:
        return len(self._best)

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._best


def ledger_update(ledger: EnergyLedger, instance_id: str, e_opt: float) -> EnergyLedger:
    ledger.update(instance_id, e_opt)
    return ledger


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------


def success_tolerance(e_0: float, exact: bool) -> float:
    return 0.0 if exact else 1e-9 * max(1.0, abs(e_0))


def reward_success(e_opt: float, e_0: float, *, exact: bool = False) -> float:
    """1 on reaching the reference energy, -1/2 for trajectories that do not
    even reach half of it, 0 otherwise."""
    if e_opt <= e_0 + success_tolerance(e_0, exact):
        return 1.0
    if e_opt >= 0.5 * e_0:
        return -0.5
    return 0.0


def reward_objective(e_opt: float, e_0: float, tau: float) -> float:
    """relu(1 - tau * (e_opt - e_0)); stays in [0, 1]."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return max(0.0, 1.0 - tau * (e_opt - e_0))


def tau_update(state: TrainerState, mean_reward: float, cfg: TrainConfig) -> TrainerState:
    """Sharpen the objective reward every tau_period epochs once the mean
    reward clears the threshold."""
    if state.epoch > 0 and state.epoch % cfg.tau_period == 0:
        if mean_reward > cfg.mean_threshold:
            state.tau *= cfg.tau_factor
    return state


# ---------------------------------------------------------------------------
# Gradient estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PerturbationSample:
    v: np.ndarray
    reward: float
    instance_id: str
    trajectory_seed: int


def estimate_gradients(
    samples: list[PerturbationSample],
    theta_l: np.ndarray,
    centering: str = "literal",
) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo gradients of the smoothed reward.

    g_x  = (theta_l^-1)^T mean(v rho)
    g_l  = (theta_l^-1)^T mean(v v^T rho - I)          (literal)
           (theta_l^-1)^T mean((v v^T - I) rho)        (reward_centered)

    Samples are reduced in list order, which callers keep fixed at
    (instance, trajectory) index order.
    """
    if not samples:
        raise ValueError("need at least one sample")
    if centering not in ("literal", "reward_centered"):
        raise ValueError(f"unknown centering {centering!r}")
    v = np.stack([s.v for s in samples])
    rho = np.array([s.reward for s in samples])
    k, p = v.shape
    try:
        l_inv = np.linalg.inv(theta_l)
    except np.linalg.LinAlgError as exc:
        raise ValueError("theta_l is singular") from exc
    g_x = l_inv.T @ (v.T @ rho / k)
    second_moment = (v * rho[:, None]).T @ v / k
    eye = np.eye(p)
    if centering == "literal":
        g_l = l_inv.T @ (second_moment - eye)
    else:
        g_l = l_inv.T @ (second_moment - float(np.mean(rho)) * eye)
    return g_x, g_l


def apply_update(
    state: TrainerState,
    g_x: np.ndarray,
    g_l: np.ndarray,
    cfg: TrainConfig,
) -> TrainerState:
    """Gradient ascent on both distribution parameters, then floor the
    exploration matrix's singular values at eps_l."""
    if not (np.isfinite(g_x).all() and np.isfinite(g_l).all()):
        raise RuntimeError(f"non-finite gradients at epoch {state.epoch}")
    state.theta_x = state.theta_x + cfg.eta_x * g_x
    theta_l = state.theta_l + cfg.eta_l * g_l
    u, s, vt = np.linalg.svd(theta_l)
    if s.min() < cfg.eps_l:
        s = np.maximum(s, cfg.eps_l)
        theta_l = (u * s) @ vt
    state.theta_l = theta_l
    state.epoch += 1
    return state


# ---------------------------------------------------------------------------
# Epochs
# ---------------------------------------------------------------------------

_HIST_EDGES = np.linspace(-0.5, 1.0, 7)


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    mean_reward: float
    reward_histogram: tuple[tuple[float, int], ...]
    tau: float
    grad_norm_x: float
    grad_norm_l: float
    ledger_updates: int
    seconds: float


def _reward_histogram(rewards: np.ndarray) -> tuple[tuple[float, int], ...]:
    counts, edges = np.histogram(rewards, bins=_HIST_EDGES)
    return tuple((float(edges[i]), int(counts[i])) for i in range(len(counts)))


def _epoch_rollouts(state, instances, cfg, epoch):
    """Pick the epoch's instance batch and run every perturbed trajectory.

    Returns (chosen instance list, v blocks, trajectory seeds, best energies)
    indexed by batch slot; reduction order downstream is (slot, trajectory).
    """
    b_count = cfg.instances_per_epoch
    r_count = cfg.trajectories_per_instance
    if len(instances) < b_count:
        raise ValueError(
            f"need at least {b_count} instances per epoch, got {len(instances)}"
        )
    sel = stream_rng(cfg.seed, STREAM_SELECT, epoch)
    chosen_idx = sel.choice(len(instances), size=b_count, replace=False)
    chosen = [instances[int(i)] for i in chosen_idx]
    p = param_count(cfg.arch)
    v_blocks = []
    seed_blocks = []
    for b in range(b_count):
        v_rng = stream_rng(cfg.seed, STREAM_PERTURB, epoch, b)
        v_blocks.append(v_rng.standard_normal((r_count, p)))
        seed_blocks.append(
            stream_seeds(cfg.seed, STREAM_TRAJ, epoch, b, count=r_count)
        )

    def job(b: int) -> np.ndarray:
        thetas = state.theta_x + v_blocks[b] @ state.theta_l.T
        batch = run_batch(
            chosen[b], cfg.arch, thetas, cfg.t_total, seed_blocks[b]
        )
        return batch.best_energy

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            energies = list(pool.map(job, range(b_count)))
    else:
        energies = [job(b) for b in range(b_count)]
    return chosen, v_blocks, seed_blocks, energies


def _epoch_rewards(chosen, energies, cfg, state, ledger):
    """Rewards against the epoch-start ledger; instances the ledger has never
    seen fall back to their best energy within this epoch."""
    rewards = []
    for b, inst in enumerate(chosen):
        e_0 = ledger.best(inst.id)
        if e_0 is None:
            e_0 = float(np.min(energies[b]))
        if cfg.reward_kind == "success" and e_0 >= 0:
            warnings.warn(
                f"success reward is degenerate for non-negative reference "
                f"energy {e_0} (instance {inst.id})",
                stacklevel=3,
            )
        for e_opt in energies[b]:
            if cfg.reward_kind == "success":
                rewards.append(reward_success(float(e_opt), e_0, exact=cfg.exact_match))
            else:
                rewards.append(reward_objective(float(e_opt), e_0, state.tau))
    return np.array(rewards)


def train_epoch(
    state: TrainerState,
    instances: list[IsingInstance],
    cfg: TrainConfig,
    ledger: EnergyLedger,
) -> EpochReport:
    """One distribution update: sample perturbations, run trajectories, score
    them against the epoch-start ledger, then update the ledger and both
    distribution parameters."""
    t_start = time.perf_counter()
    epoch = state.epoch
    chosen, v_blocks, seed_blocks, energies = _epoch_rollouts(
        state, instances, cfg, epoch
    )
    rewards = _epoch_rewards(chosen, energies, cfg, state, ledger)
    samples = []
    k = 0
    for b, inst in enumerate(chosen):
        for r in range(cfg.trajectories_per_instance):
            samples.append(
                PerturbationSample(
                    v=v_blocks[b][r],
                    reward=float(rewards[k]),
                    instance_id=inst.id,
                    trajectory_seed=int(seed_blocks[b][r]),
                )
            )
            k += 1
    updates = 0
    for b, inst in enumerate(chosen):
        if ledger.update(inst.id, float(np.min(energies[b]))):
            updates += 1
    g_x, g_l = estimate_gradients(samples, state.theta_l, cfg.centering)
    apply_update(state, g_x, g_l, cfg)
    mean_reward = float(np.mean(rewards))
    tau_update(state, mean_reward, cfg)
    return EpochReport(
        epoch=state.epoch,
        mean_reward=mean_reward,
        reward_histogram=_reward_histogram(rewards),
        tau=state.tau,
        grad_norm_x=float(np.linalg.norm(g_x)),
        grad_norm_l=float(np.linalg.norm(g_l)),
        ledger_updates=updates,
        seconds=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrainResult:
    arch: Architecture
    theta_x: np.ndarray
    reports: list[EpochReport]
    snapshots: dict[int, np.ndarray]
    ledger: EnergyLedger
    state: TrainerState


def initial_state(cfg: TrainConfig) -> TrainerState:
    p = param_count(cfg.arch)
    if cfg.fine_tune_from is not None:
        arch, flat, _meta = load_model(cfg.fine_tune_from)
        if arch != cfg.arch:
            raise ValueError(
                f"fine_tune_from architecture {arch} incompatible with {cfg.arch}"
            )
        theta_x = flat.copy()
    else:
        theta_x = stream_rng(cfg.seed, STREAM_INIT).normal(0.0, 0.1, size=p)
    return TrainerState(
        theta_x=theta_x,
        theta_l=cfg.sigma0 * np.eye(p),
        epoch=0,
        tau=cfg.tau0,
    )


def train(
    cfg: TrainConfig,
    instances: list[IsingInstance],
    *,
    ledger: EnergyLedger | None = None,
    snapshot_epochs: tuple[int, ...] = (),
    trainer: str = "das",
    progress=None,
) -> TrainResult:
    """Run the configured number of epochs from scratch or from a loaded model."""
    if trainer not in ("das", "reinforce"):
        raise ValueError(f"unknown trainer {trainer!r}")
    state = initial_state(cfg)
    ledger = ledger if ledger is not None else EnergyLedger()
    snapshots: dict[int, np.ndarray] = {}
    if 0 in snapshot_epochs:
        snapshots[0] = state.theta_x.copy()
    reports: list[EpochReport] = []
    for _ in range(cfg.epochs):
        if trainer == "das":
            report = train_epoch(state, instances, cfg, ledger)
        else:
            report = reinforce_epoch(state, instances, cfg, ledger)
        reports.append(report)
        if state.epoch in snapshot_epochs:
            snapshots[state.epoch] = state.theta_x.copy()
        if progress is not None:
            progress(report)
    return TrainResult(
        arch=cfg.arch,
        theta_x=state.theta_x.copy(),
        reports=reports,
        snapshots=snapshots,
        ledger=ledger,
        state=state,
    )


def evaluate_mean_reward(
    arch: Architecture,
    theta_x: np.ndarray,
    instances: list[IsingInstance],
    cfg: TrainConfig,
    *,
    runs: int,
    ledger: EnergyLedger | None = None,
) -> float:
    """Mean reward of the unperturbed parameters over a held-out instance set.

    Reference energies come from the supplied ledger where available and
    otherwise from the best energy seen in this evaluation; evaluation seeds
    are keyed by instance id so identical instances score identically.
    """
    rewards = []
    thetas = np.tile(theta_x, (runs, 1))
    for inst in instances:
        seeds = stream_seeds(
            cfg.seed, STREAM_EVAL, stable_id_hash(inst.id), count=runs
        )
        batch = run_batch(inst, arch, thetas, cfg.t_total, seeds)
        e_0 = ledger.best(inst.id) if ledger is not None else None
        if e_0 is None:
            e_0 = float(np.min(batch.best_energy))
        for e_opt in batch.best_energy:
            if cfg.reward_kind == "success":
                rewards.append(reward_success(float(e_opt), e_0, exact=cfg.exact_match))
            else:
                rewards.append(reward_objective(float(e_opt), e_0, cfg.tau0))
    return float(np.mean(rewards))


# ---------------------------------------------------------------------------
# Policy-gradient comparison trainer
# ---------------------------------------------------------------------------


def reinforce_rollout(
    inst: IsingInstance,
    arch: Architecture,
    theta_flat: np.ndarray,
    t_total: int,
    seeds: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Stochastic-policy rollouts for the discrete variant.

    Each spin is sampled +1 with probability (1 + tanh(a)) / 2 instead of the
    deterministic sign readout. Returns per-trajectory best energies and the
    summed per-step score-function gradients with respect to the flat
    parameters (not yet reward-weighted).
    """
    if arch.variant != "discrete":
        raise ValueError("the policy-gradient trainer requires the discrete variant")
    seeds = np.asarray(seeds, dtype=np.uint64)
    r_count = seeds.shape[0]
    n = inst.n
    d, t_c, m = arch.d, arch.t_c, arch.m
    theta_mat = unpack_theta(arch, np.asarray(theta_flat, dtype=float)).theta
    rows = theta_mat.shape[0]
    h_window = np.zeros((r_count, t_c, n))
    best_e = np.full(r_count, np.inf)
    grad_modes = np.zeros((r_count, rows, m))
    for t in range(t_total):
        f = basis_row(arch.basis, m, t / t_total)
        theta_t = theta_mat @ f
        if not arch.noise_modulated:
            theta_t[0] = theta_mat[0, 0]
        w0 = float(theta_t[0])
        eta = np.empty((r_count, n))
        u = np.empty((r_count, n))
        for r in range(r_count):
            gen = step_generator(int(seeds[r]), t)
            eta[r] = gen.standard_normal(n)
            u[r] = gen.random(n)
        if d == 0:
            kernel = theta_t[1:]
            a = w0 * eta + np.einsum("t,rtn->rn", kernel, h_window)
        else:
            w1 = theta_t[1 : 1 + d]
            w2 = theta_t[1 + d :].reshape(d, t_c)
            pre = np.einsum("dt,rtn->rdn", w2, h_window)
            z = fnl(pre)
            a = w0 * eta + np.einsum("d,rdn->rn", w1, z)
        tanh_a = np.tanh(a)
        s = np.where(u < (1.0 + tanh_a) / 2.0, 1.0, -1.0)
        score = s - tanh_a  # d log pi / d a for the sampled sign
        g_w0 = np.einsum("rn,rn->r", score, eta)
        if d == 0:
            g_rows = np.concatenate(
                [g_w0[:, None], np.einsum("rn,rtn->rt", score, h_window)], axis=1
            )
        else:
            g_w1 = np.einsum("rn,rdn->rd", score, z)
            fprime = 2.0 - np.tanh(pre) ** 2
            weighted = w1[None, :, None] * fprime * score[:, None, :]
            g_w2 = np.einsum("rdn,rtn->rdt", weighted, h_window)
            g_rows = np.concatenate(
                [g_w0[:, None], g_w1, g_w2.reshape(r_count, d * t_c)], axis=1
            )
        if arch.noise_modulated:
            grad_modes += g_rows[:, :, None] * f[None, None, :]
        else:
            grad_modes[:, 1:, :] += g_rows[:, 1:, None] * f[None, None, :]
            grad_modes[:, 0, 0] += g_rows[:, 0]
        h = s @ inst.couplings + 0.5 * inst.linear
        e = config_energies(inst, s)
        improved = e < best_e
        best_e[improved] = e[improved]
        h_window = np.concatenate([h_window[:, 1:], h[:, None, :]], axis=1)
    if arch.noise_modulated:
        grads = grad_modes.reshape(r_count, rows * m)
    else:
        grads = np.concatenate(
            [grad_modes[:, 0, 0][:, None], grad_modes[:, 1:, :].reshape(r_count, -1)],
            axis=1,
        )
    return best_e, grads


def reinforce_epoch(
    state: TrainerState,
    instances: list[IsingInstance],
    cfg: TrainConfig,
    ledger: EnergyLedger,
) -> EpochReport:
    """Policy-gradient update of theta_x alone, with the same batch layout,
    reward functions, and ledger handling as the zeroth-order trainer."""
    t_start = time.perf_counter()
    epoch = state.epoch
    b_count = cfg.instances_per_epoch
    r_count = cfg.trajectories_per_instance
    if len(instances) < b_count:
        raise ValueError(
            f"need at least {b_count} instances per epoch, got {len(instances)}"
        )
    sel = stream_rng(cfg.seed, STREAM_SELECT, epoch)
    chosen_idx = sel.choice(len(instances), size=b_count, replace=False)
    chosen = [instances[int(i)] for i in chosen_idx]
    energies = []
    grads = []
    for b in range(b_count):
        seeds = stream_seeds(cfg.seed, STREAM_TRAJ, epoch, b, count=r_count)
        e_b, g_b = reinforce_rollout(
            chosen[b], cfg.arch, state.theta_x, cfg.t_total, seeds
        )
        energies.append(e_b)
        grads.append(g_b)
    rewards = _epoch_rewards(chosen, energies, cfg, state, ledger)
    updates = 0
    for b, inst in enumerate(chosen):
        if ledger.update(inst.id, float(np.min(energies[b]))):
            updates += 1
    all_grads = np.concatenate(grads, axis=0)
    g_x = np.mean(rewards[:, None] * all_grads, axis=0)
    if not np.isfinite(g_x).all():
        raise RuntimeError(f"non-finite policy gradient at epoch {state.epoch}")
    state.theta_x = state.theta_x + cfg.eta_x * g_x
    state.epoch += 1
    mean_reward = float(np.mean(rewards))
    tau_update(state, mean_reward, cfg)
    return EpochReport(
        epoch=state.epoch,
        mean_reward=mean_reward,
        reward_histogram=_reward_histogram(rewards),
        tau=state.tau,
        grad_norm_x=float(np.linalg.norm(g_x)),
        grad_norm_l=0.0,
        ledger_updates=updates,
        seconds=time.perf_counter() - t_start,
    )
