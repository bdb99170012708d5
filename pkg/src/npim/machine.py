"""Learned Ising machine: temporally modulated odd MLP update rule and the
trajectory engine, plus the trained-model file format."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial import legendre as _leg

from .instances import IsingInstance, SpinConfig, config_energies

VARIANTS = ("continuous", "discrete")
BASES = ("fourier", "legendre", "chebyshev")
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    """Shape of the update rule.

    t_c: field-history window length fed to the network.
    d:   hidden width; d=0 bypasses the hidden layer entirely (the output is a
         direct kernel over the field window plus the noise term).
    m:   number of temporal modes each weight can use.
    variant: "continuous" (tanh output) or "discrete" (sign output).
    noise_modulated: when False the scalar noise weight keeps a single
         constant mode instead of m of them.
    """

    t_c: int
    d: int
    m: int
    variant: str = "continuous"
    basis: str = "fourier"
    noise_modulated: bool = False

    def __post_init__(self):
        if self.t_c < 1:
            raise ValueError("t_c must be >= 1")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}, got {self.basis!r}")


def weight_rows(arch: Architecture) -> int:
    """Rows of the weight-mode matrix: noise scalar, then the layer weights."""
    if arch.d == 0:
        return 1 + arch.t_c
    return 1 + arch.d + arch.d * arch.t_c


def param_count(arch: Architecture) -> int:
    """Number of trainable parameters."""
    rows = weight_rows(arch)
    if arch.noise_modulated:
        return rows * arch.m
    return (rows - 1) * arch.m + 1


@dataclass(frozen=True, eq=False)
class ParameterTensor:
    """Weight-mode matrix Theta of shape (weight_rows, m); row p holds the
    temporal modes of flattened weight p."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float)
        if t.ndim != 2:
            raise ValueError("theta must be a 2D matrix")
        if not np.isfinite(t).all():
            raise ValueError("theta has non-finite entries")
        arr = np.ascontiguousarray(t.copy())
        arr.flags.writeable = False
        object.__setattr__(self, "theta", arr)


def validate_parameters(arch: Architecture, tensor: ParameterTensor) -> None:
    expected = (weight_rows(arch), arch.m)
    if tensor.theta.shape != expected:
        raise ValueError(f"theta shape {tensor.theta.shape} != expected {expected}")
    if not arch.noise_modulated and arch.m > 1 and np.any(tensor.theta[0, 1:] != 0.0):
        raise ValueError("noise weight modes beyond 0 must be zero when unmodulated")


def pack_theta(arch: Architecture, tensor: ParameterTensor) -> np.ndarray:
    """Flatten the mode matrix into the trainable vector (row-major)."""
    validate_parameters(arch, tensor)
    if arch.noise_modulated:
        return tensor.theta.ravel().copy()
    return np.concatenate(([tensor.theta[0, 0]], tensor.theta[1:].ravel()))


def unpack_theta(arch: Architecture, flat: np.ndarray) -> ParameterTensor:
    flat = np.asarray(flat, dtype=float)
    expected = param_count(arch)
    if flat.shape != (expected,):
        raise ValueError(f"flat parameters must have shape ({expected},), got {flat.shape}")
    rows = weight_rows(arch)
    theta = np.zeros((rows, arch.m))
    if arch.noise_modulated:
        theta[:] = flat.reshape(rows, arch.m)
    else:
        theta[0, 0] = flat[0]
        theta[1:] = flat[1:].reshape(rows - 1, arch.m)
    return ParameterTensor(theta)


# ---------------------------------------------------------------------------
# Temporal basis
# ---------------------------------------------------------------------------


def basis_value(basis: str, mode: int, tau: float) -> float:
    """Mode function on normalized trajectory time tau in [0, 1]."""
    if mode < 0:
        raise ValueError("mode must be >= 0")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if basis == "fourier":
        if mode % 2 == 0:
            return float(np.cos((mode / 2) * np.pi * tau))
        return float(np.sin(((mode + 1) / 2) * np.pi * tau))
    # Polynomial bases on [-1, 1], rescaled to [0, 1].
    u = 2.0 * tau - 1.0
    coeffs = np.zeros(mode + 1)
    coeffs[mode] = 1.0
    if basis == "legendre":
        return float(_leg.legval(u, coeffs))
    if basis == "chebyshev":
        return float(_cheb.chebval(u, coeffs))
    raise ValueError(f"unknown basis {basis!r}")


def basis_row(basis: str, m: int, tau: float) -> np.ndarray:
    return np.array([basis_value(basis, k, tau) for k in range(m)])


def weights_at(arch: Architecture, tensor: ParameterTensor, t: int, t_total: int):
    """Unrolled weights at step t: (w0, w1, w2).

    w1 is None and w2 is the (t_c,) field kernel when d == 0; otherwise w1 has
    shape (d,) and w2 shape (d, t_c).
    """
    validate_parameters(arch, tensor)
    if not 0 <= t < t_total:
        raise ValueError(f"step {t} outside [0, {t_total})")
    f = basis_row(arch.basis, arch.m, t / t_total)
    theta_t = tensor.theta @ f
    if not arch.noise_modulated:
        theta_t[0] = tensor.theta[0, 0]
    w0 = float(theta_t[0])
    if arch.d == 0:
        return w0, None, theta_t[1:].copy()
    w1 = theta_t[1 : 1 + arch.d].copy()
    w2 = theta_t[1 + arch.d :].reshape(arch.d, arch.t_c).copy()
    return w0, w1, w2


def fnl(x: np.ndarray) -> np.ndarray:
    """Inner-layer activation x + tanh(x); odd, with slope 2 at the origin."""
    return x + np.tanh(x)


def update(arch: Architecture, weights, h_window: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """One node-wise update from the field window (rows: oldest to newest).

    Every ingredient is odd and bias-free, so negating (h_window, eta) negates
    the output.
    """
    w0, w1, w2 = weights
    h_window = np.asarray(h_window, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if h_window.ndim != 2 or h_window.shape[0] != arch.t_c:
        raise ValueError(f"h_window must have shape ({arch.t_c}, n), got {h_window.shape}")
    if eta.shape != (h_window.shape[1],):
        raise ValueError("eta length must match the number of variables")
    if arch.d == 0:
        a = w0 * eta + w2 @ h_window
    else:
        pre = w2 @ h_window
        a = w0 * eta + w1 @ fnl(pre)
    if arch.variant == "discrete":
        return np.where(a >= 0.0, 1.0, -1.0)
    return np.tanh(a)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    best_energy: float
    best_config: SpinConfig
    steps: int
    seed: int
    energy_trace: np.ndarray | None = None
    x_trace: np.ndarray | None = None
    h_trace: np.ndarray | None = None
    diverged_at: int | None = None


def step_generator(seed: int, t: int) -> np.random.Generator:
    """Counter-based per-step noise stream: key is the trajectory seed, the
    high counter word is the step, so streams never overlap and replays are
    order-independent."""
    key = int(seed) & ((1 << 64) - 1)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(t)]))


def field_rms_scale(inst: IsingInstance) -> float:
    """1 / (root-mean-square coupling row norm), for cross-size field normalization."""
    rms = float(np.sqrt(np.mean(np.sum(inst.couplings**2, axis=1))))
    if rms == 0.0:
        return 1.0
    return 1.0 / rms


def run_trajectory(
    inst: IsingInstance,
    arch: Architecture,
    tensor: ParameterTensor,
    t_total: int,
    seed: int,
    *,
    trace: bool = False,
    noise_sign: float = 1.0,
    field_scale: float | None = None,
) -> TrajectoryResult:
    """Iterate the machine for t_total steps and keep the best sign readout.

    The field history before step 0 is zero-padded, so the first state is the
    pure noise response. Non-finite state aborts the run and reports the best
    energy found up to that step.
    """
    validate_parameters(arch, tensor)
    if t_total < 1:
        raise ValueError("t_total must be >= 1")
    n = inst.n
    scale = 1.0 if field_scale is None else float(field_scale)
    h_window = np.zeros((arch.t_c, n))
    best_e = np.inf
    best_sigma = np.ones(n)
    diverged_at = None
    e_trace = [] if trace else None
    x_rows = [] if trace else None
    h_rows = [] if trace else None
    for t in range(t_total):
        eta = noise_sign * step_generator(seed, t).standard_normal(n)
        w = weights_at(arch, tensor, t, t_total)
        x = update(arch, w, h_window, eta)
        if not np.isfinite(x).all():
            diverged_at = t
            break
        h = scale * (inst.couplings @ x + 0.5 * inst.linear)
        if not np.isfinite(h).all():
            diverged_at = t
            break
        sigma = np.where(x >= 0.0, 1.0, -1.0)
        # scalar energy path, bitwise-consistent with energy(inst, config)
        e = float(sigma @ inst.couplings @ sigma - inst.linear @ sigma)
        if e < best_e:
            best_e = e
            best_sigma = sigma
        if trace:
            e_trace.append(e)
            x_rows.append(x.copy())
            h_rows.append(h.copy())
        h_window = np.vstack([h_window[1:], h[None, :]])
    return TrajectoryResult(
        best_energy=best_e,
        best_config=SpinConfig(best_sigma),
        steps=t_total,
        seed=seed,
        energy_trace=np.array(e_trace) if trace else None,
        x_trace=np.array(x_rows) if trace else None,
        h_trace=np.array(h_rows) if trace else None,
        diverged_at=diverged_at,
    )


@dataclass(frozen=True, eq=False)
class BatchResult:
    best_energy: np.ndarray  # (R,)
    best_config: np.ndarray  # (R, n)
    diverged_at: np.ndarray  # (R,) step index or -1


def run_batch(
    inst: IsingInstance,
    arch: Architecture,
    thetas_flat: np.ndarray,
    t_total: int,
    seeds: np.ndarray,
    *,
    noise_sign: float = 1.0,
    field_scale: float | None = None,
) -> BatchResult:
    """Run independent trajectories with per-trajectory parameters in lockstep.

    thetas_flat has shape (R, P); trajectory r draws its own noise stream from
    seeds[r], so results are independent of batch composition.
    """
    thetas_flat = np.asarray(thetas_flat, dtype=float)
    if thetas_flat.ndim != 2:
        raise ValueError("thetas_flat must have shape (R, P)")
    r_count = thetas_flat.shape[0]
    seeds = np.asarray(seeds, dtype=np.uint64)
    if seeds.shape != (r_count,):
        raise ValueError("seeds must have one entry per trajectory")
    if t_total < 1:
        raise ValueError("t_total must be >= 1")
    n = inst.n
    scale = 1.0 if field_scale is None else float(field_scale)
    theta_mats = np.stack([unpack_theta(arch, th).theta for th in thetas_flat])
    d, t_c = arch.d, arch.t_c
    h_window = np.zeros((r_count, t_c, n))
    best_e = np.full(r_count, np.inf)
    best_sigma = np.ones((r_count, n))
    diverged_at = np.full(r_count, -1, dtype=int)
    active = np.ones(r_count, dtype=bool)
    for t in range(t_total):
        f = basis_row(arch.basis, arch.m, t / t_total)
        theta_t = theta_mats @ f
        if not arch.noise_modulated:
            theta_t[:, 0] = theta_mats[:, 0, 0]
        eta = np.empty((r_count, n))
        for r in range(r_count):
            eta[r] = step_generator(int(seeds[r]), t).standard_normal(n)
        eta *= noise_sign
        w0 = theta_t[:, 0]
        if d == 0:
            kernel = theta_t[:, 1:]
            a = w0[:, None] * eta + np.einsum("rt,rtn->rn", kernel, h_window)
        else:
            w1 = theta_t[:, 1 : 1 + d]
            w2 = theta_t[:, 1 + d :].reshape(r_count, d, t_c)
            pre = np.einsum("rdt,rtn->rdn", w2, h_window)
            a = w0[:, None] * eta + np.einsum("rd,rdn->rn", w1, fnl(pre))
        if arch.variant == "discrete":
            x = np.where(a >= 0.0, 1.0, -1.0)
        else:
            x = np.tanh(a)
        h = x @ inst.couplings + 0.5 * inst.linear
        if scale != 1.0:
            h = scale * h
        ok = np.isfinite(x).all(axis=1) & np.isfinite(h).all(axis=1)
        newly_dead = active & ~ok
        diverged_at[newly_dead] = t
        active &= ok
        sigma = np.where(x >= 0.0, 1.0, -1.0)
        e = config_energies(inst, sigma)
        improved = active & (e < best_e)
        best_e[improved] = e[improved]
        best_sigma[improved] = sigma[improved]
        h_window = np.concatenate([h_window[:, 1:], h[:, None, :]], axis=1)
    return BatchResult(best_energy=best_e, best_config=best_sigma, diverged_at=diverged_at)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def save_model(
    path,
    arch: Architecture,
    theta_flat: np.ndarray,
    training_meta: dict,
) -> None:
    """Write the versioned trained-model JSON document."""
    tensor = unpack_theta(arch, np.asarray(theta_flat, dtype=float))
    meta_keys = {"epochs", "reward_kind", "instance_family", "seed"}
    missing = meta_keys - set(training_meta)
    if missing:
        raise ValueError(f"training_meta missing keys: {sorted(missing)}")
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "arch": {
            "t_c": arch.t_c,
            "d": arch.d,
            "m": arch.m,
            "variant": arch.variant,
            "basis": arch.basis,
            "noise_modulated": arch.noise_modulated,
        },
        "theta": [[float(v) for v in row] for row in tensor.theta],
        "training_meta": dict(training_meta),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[Architecture, np.ndarray, dict]:
    """Read a trained-model file; returns (arch, flat parameters, training_meta)."""
    with open(path) as fh:
        doc = json.load(fh)
    expected = {"format_version", "arch", "theta", "training_meta"}
    if not isinstance(doc, dict) or set(doc) != expected:
        raise ValueError(f"model document keys != expected {sorted(expected)}")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {doc['format_version']}")
    arch_doc = doc["arch"]
    arch_keys = {"t_c", "d", "m", "variant", "basis", "noise_modulated"}
    if set(arch_doc) != arch_keys:
        raise ValueError(f"model arch keys != expected {sorted(arch_keys)}")
    arch = Architecture(
        t_c=int(arch_doc["t_c"]),
        d=int(arch_doc["d"]),
        m=int(arch_doc["m"]),
        variant=str(arch_doc["variant"]),
        basis=str(arch_doc["basis"]),
        noise_modulated=bool(arch_doc["noise_modulated"]),
    )
    tensor = ParameterTensor(np.array(doc["theta"], dtype=float))
    flat = pack_theta(arch, tensor)
    return arch, flat, dict(doc["training_meta"])
