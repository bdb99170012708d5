"""Classical dynamical Ising machines used as benchmark baselines: chaotic
amplitude control (CAC) and the analog iterative machine (AIM), plus the
closed-form field kernel that makes AIM a single-layer continuous machine."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .instances import IsingInstance, SpinConfig, config_energies
from .machine import Architecture, ParameterTensor, TrajectoryResult


@dataclass(frozen=True)
class CacConfig:
    dt: float
    a: float
    xi: float
    beta: float
    t_total: int

    def __post_init__(self):
        if self.dt <= 0 or self.t_total < 1:
            raise ValueError("dt and t_total must be positive")
        for name in ("dt", "a", "xi", "beta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class AimConfig:
    dt: float
    alpha: float
    beta: float
    gamma: float
    t_total: int

    def __post_init__(self):
        if self.dt <= 0 or self.t_total < 1:
            raise ValueError("dt and t_total must be positive")
        for name in ("dt", "alpha", "beta", "gamma"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def load_baseline_defaults() -> dict:
    """Grid-search-tuned default parameters shipped with the package."""
    text = resources.files("npim").joinpath("data/baseline_defaults.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# Chaotic amplitude control
# ---------------------------------------------------------------------------


def cac_state_trajectory(
    inst: IsingInstance,
    cfg: CacConfig,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, int | None]:
    """Raw (x, e) state rows after each update, and the divergence step if any.

    x(0) is standard Gaussian, e(0) = 1; x follows a cubic relaxation driven
    by -xi * e * (J x + l) while the error variable e grows or shrinks to push
    each amplitude toward unit magnitude.
    """
    n = inst.n
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    e = np.ones(n)
    x_rows = []
    e_rows = []
    diverged_at = None
    for t in range(cfg.t_total):
        # overflow in a diverging run is expected; the guard below reports it
        with np.errstate(over="ignore", invalid="ignore"):
            drive = inst.couplings @ x + inst.linear
            x = x + cfg.dt * (-cfg.a * x - x**3 - cfg.xi * e * drive)
            e = e + cfg.dt * cfg.beta * e * (1.0 - x**2)
        if not (np.isfinite(x).all() and np.isfinite(e).all()):
            diverged_at = t
            break
        x_rows.append(x.copy())
        e_rows.append(e.copy())
    return np.array(x_rows), np.array(e_rows), diverged_at


def cac_run(
    inst: IsingInstance,
    cfg: CacConfig,
    seed: int,
    *,
    trace: bool = False,
) -> TrajectoryResult:
    """Best sign readout over an amplitude-control trajectory."""
    x_rows, _e_rows, diverged_at = cac_state_trajectory(inst, cfg, seed)
    best_e = np.inf
    best_sigma = np.ones(inst.n)
    e_trace = [] if trace else None
    for x in x_rows:
        sigma = np.where(x >= 0.0, 1.0, -1.0)
        energy_t = float(config_energies(inst, sigma[None, :])[0])
        if energy_t < best_e:
            best_e = energy_t
            best_sigma = sigma
        if trace:
            e_trace.append(energy_t)
    return TrajectoryResult(
        best_energy=best_e,
        best_config=SpinConfig(best_sigma),
        steps=cfg.t_total,
        seed=seed,
        energy_trace=np.array(e_trace) if trace else None,
        x_trace=x_rows.copy() if trace else None,
        diverged_at=diverged_at,
    )


# ---------------------------------------------------------------------------
# Analog iterative machine
# ---------------------------------------------------------------------------


def _companion_coefficients(cfg: AimConfig) -> tuple[float, float]:
    # z(t+1) = c1 z(t) + c2 z(t-1) + drive(t)
    c1 = 1.0 + cfg.dt * (cfg.gamma - cfg.beta)
    c2 = -cfg.dt * cfg.gamma
    return c1, c2


def companion_eigenvalues(cfg: AimConfig) -> tuple[complex, complex]:
    """Eigenvalues of the two-step companion matrix [[c1, c2], [1, 0]]."""
    c1, c2 = _companion_coefficients(cfg)
    disc = np.lib.scimath.sqrt(c1 * c1 + 4.0 * c2)
    return (c1 + disc) / 2.0, (c1 - disc) / 2.0


def propagator_sequence(cfg: AimConfig, k_max: int) -> np.ndarray:
    """a_k = (lam1^{k+1} - lam2^{k+1}) / (lam1 - lam2) for k = 0..k_max-1.

    This is the (0, 0) entry of the k-th companion-matrix power; the confluent
    limit (k+1) lam^k covers repeated roots.
    """
    lam1, lam2 = companion_eigenvalues(cfg)
    k = np.arange(k_max)
    scale = max(abs(lam1), abs(lam2), 1.0)
    if abs(lam1 - lam2) < 1e-12 * scale:
        seq = (k + 1) * lam1**k
    else:
        seq = (lam1 ** (k + 1) - lam2 ** (k + 1)) / (lam1 - lam2)
    return np.real_if_close(seq, tol=1e6).real.astype(float)


def aim_field_drive(inst: IsingInstance, z: np.ndarray) -> np.ndarray:
    """Framework field of the soft spins tanh(z): J tanh(z) + l / 2."""
    return inst.couplings @ np.tanh(z) + 0.5 * inst.linear


def aim_z_trajectory(
    inst: IsingInstance,
    cfg: AimConfig,
    t_total: int,
    z0: np.ndarray,
    z1: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw recursion from free initial states; returns (z, h) with rows
    z[t] for t = 0..t_total and h[t] the field of z[t] for t = 0..t_total-1."""
    c1, c2 = _companion_coefficients(cfg)
    z_rows = [np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)]
    h_rows = [aim_field_drive(inst, z_rows[0])]
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, t_total):
            h_rows.append(aim_field_drive(inst, z_rows[t]))
            z_next = c1 * z_rows[t] + c2 * z_rows[t - 1] - cfg.dt * cfg.alpha * h_rows[t]
            z_rows.append(z_next)
    return np.array(z_rows), np.array(h_rows)


def aim_driven_trajectory(
    inst: IsingInstance,
    cfg: AimConfig,
    t_total: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Zero-initialized recursion (z(0) = 0 and z(-1) := 0), driven purely by
    the field; this start makes the run exactly a kernel convolution of the
    field history with no homogeneous transient."""
    c1, c2 = _companion_coefficients(cfg)
    n = inst.n
    z_rows = [np.zeros(n)]
    h_rows = []
    z_prev = np.zeros(n)
    for t in range(t_total):
        h_rows.append(aim_field_drive(inst, z_rows[t]))
        z_next = c1 * z_rows[t] + c2 * z_prev - cfg.dt * cfg.alpha * h_rows[t]
        z_prev = z_rows[t]
        z_rows.append(z_next)
    return np.array(z_rows), np.array(h_rows)


def aim_run(
    inst: IsingInstance,
    cfg: AimConfig,
    seed: int,
    *,
    trace: bool = False,
    z_init: tuple[np.ndarray, np.ndarray] | None = None,
) -> TrajectoryResult:
    """Momentum-damped relaxation z(t+1) = z + dt(-alpha(J tanh z + l/2)
    - beta z + gamma (z - z(t-1))), random Gaussian z(0), z(1)."""
    n = inst.n
    if z_init is None:
        rng = np.random.default_rng(seed)
        z0 = rng.standard_normal(n)
        z1 = rng.standard_normal(n)
    else:
        z0, z1 = (np.asarray(v, dtype=float) for v in z_init)
    z_rows, _ = aim_z_trajectory(inst, cfg, cfg.t_total, z0, z1)
    best_e = np.inf
    best_sigma = np.ones(n)
    diverged_at = None
    e_trace = [] if trace else None
    x_rows = [] if trace else None
    for t in range(1, cfg.t_total + 1):
        z = z_rows[t]
        if not np.isfinite(z).all():
            diverged_at = t - 1
            break
        sigma = np.where(z >= 0.0, 1.0, -1.0)
        energy_t = float(config_energies(inst, sigma[None, :])[0])
        if energy_t < best_e:
            best_e = energy_t
            best_sigma = sigma
        if trace:
            e_trace.append(energy_t)
            x_rows.append(np.tanh(z))
    return TrajectoryResult(
        best_energy=best_e,
        best_config=SpinConfig(best_sigma),
        steps=cfg.t_total,
        seed=seed,
        energy_trace=np.array(e_trace) if trace else None,
        x_trace=np.array(x_rows) if trace else None,
        diverged_at=diverged_at,
    )


def aim_explicit_kernel(cfg: AimConfig, t_total: int) -> np.ndarray:
    """Convolution weights over past fields equivalent to the recursion.

    kernel[j] multiplies the field j+1 steps in the past:
    z(t) = sum_j kernel[j] h(t-1-j) for a zero-initialized run.
    """
    return -cfg.dt * cfg.alpha * propagator_sequence(cfg, t_total)


def aim_kernel_parameters(cfg: AimConfig, t_c: int) -> tuple[Architecture, ParameterTensor]:
    """Single-layer continuous machine loaded with the explicit kernel.

    With t_c at least the run length, its tanh state reproduces tanh(z) of the
    zero-initialized recursion step for step.
    """
    arch = Architecture(t_c=t_c, d=0, m=1, variant="continuous")
    kernel = aim_explicit_kernel(cfg, t_c)
    # Window slot s holds the field aged t_c - s steps; flip the kernel to match.
    theta = np.zeros((1 + t_c, 1))
    theta[1:, 0] = kernel[::-1]
    return arch, ParameterTensor(theta)
