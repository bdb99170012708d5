"""Neural-network-parameterized Ising machines: a trajectory engine for
learned spin-update dynamics, a zeroth-order evolutionary trainer, classical
baselines (CAC, AIM), and a benchmark harness with time-to-solution metrics."""

from .baselines import (
    AimConfig,
    CacConfig,
    aim_explicit_kernel,
    aim_kernel_parameters,
    aim_run,
    cac_run,
)
from .benchmark import (
    BenchEntry,
    BenchResult,
    BenchSuite,
    best_of_k,
    run_suite,
    success_probability,
    time_to_solution,
)
from .instances import (
    GraphAdjacency,
    GroundTruth,
    IsingInstance,
    QuboMatrix,
    SpinConfig,
    brute_force_ground,
    cut_value,
    energy,
    extract_feasible_set,
    fields,
    from_maxclique,
    from_maxcut,
    from_mis,
    from_qubo,
    gen_graph,
    gen_sk,
    parse_gset,
    write_gset,
)
from .machine import (
    Architecture,
    ParameterTensor,
    TrajectoryResult,
    basis_value,
    load_model,
    param_count,
    run_batch,
    run_trajectory,
    save_model,
    update,
    weights_at,
)
from .training import (
    EnergyLedger,
    EpochReport,
    PerturbationSample,
    TrainConfig,
    TrainerState,
    apply_update,
    estimate_gradients,
    ledger_update,
    reinforce_epoch,
    reward_objective,
    reward_success,
    tau_update,
    train,
    train_epoch,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
