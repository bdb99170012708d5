"""Ising problem instances: representations, exact graph/QUBO reductions,
instance generators, G-set parsing, and a brute-force ground-state oracle."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_MAX_N = 24
INSTANCE_FORMAT_VERSION = 1

# Reward per selected vertex in the MIS/clique reductions. The reduced energy
# is 8 * (conflicting edges) - 2 * SET_REWARD * |set| + const, so any value in
# (0, 4) makes every conflict strictly unprofitable and the exact Ising
# optimum is a maximum independent set / clique.
SET_REWARD = 0.9

GRAPH_FAMILIES = ("random_unweighted", "random_pm", "toroidal_pm", "ba")


def _check_square_symmetric(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {mat.shape}")
    if not np.isfinite(mat).all():
        raise ValueError(f"{name} has non-finite entries")
    if not np.array_equal(mat, mat.T):
        raise ValueError(f"{name} must be symmetric")
    return mat


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Quadratic spin problem: minimize sigma^T J sigma - l . sigma over {-1,+1}^n.

    The quadratic double sum runs over all ordered pairs, so each undirected
    coupling is counted twice. The diagonal of J is dropped at construction
    (it only shifts the energy by a constant).
    """

    n: int
    couplings: np.ndarray
    linear: np.ndarray
    id: str = ""

    def __post_init__(self):
        j = _check_square_symmetric(self.couplings, "couplings")
        if self.n != j.shape[0]:
            raise ValueError(f"n={self.n} does not match couplings shape {j.shape}")
        if self.n < 1:
            raise ValueError("n must be positive")
        j = j.copy()
        np.fill_diagonal(j, 0.0)
        l = np.asarray(self.linear, dtype=float)
        if l.shape != (self.n,):
            raise ValueError(f"linear must have shape ({self.n},), got {l.shape}")
        if not np.isfinite(l).all():
            raise ValueError("linear has non-finite entries")
        object.__setattr__(self, "couplings", _freeze(j))
        object.__setattr__(self, "linear", _freeze(l.copy()))


@dataclass(frozen=True, eq=False)
class GraphAdjacency:
    """Symmetric weighted adjacency matrix with zero diagonal."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = _check_square_symmetric(self.weights, "weights")
        if self.n != w.shape[0]:
            raise ValueError(f"n={self.n} does not match weights shape {w.shape}")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("adjacency diagonal must be zero")
        object.__setattr__(self, "weights", _freeze(w.copy()))

    def is_unweighted(self) -> bool:
        w = self.weights
        return bool(np.all((w == 0.0) | (w == 1.0)))


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Symmetric QUBO coupling matrix over binary {0,1} variables."""

    n: int
    q: np.ndarray

    def __post_init__(self):
        q = _check_square_symmetric(self.q, "q")
        if self.n != q.shape[0]:
            raise ValueError(f"n={self.n} does not match q shape {q.shape}")
        object.__setattr__(self, "q", _freeze(q.copy()))


@dataclass(frozen=True, eq=False)
class SpinConfig:
    """A spin assignment; every entry is exactly -1 or +1."""

    spins: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.spins, dtype=float)
        if s.ndim != 1:
            raise ValueError("spins must be a vector")
        if not np.all((s == 1.0) | (s == -1.0)):
            raise ValueError("spin entries must be exactly -1 or +1")
        object.__setattr__(self, "spins", _freeze(s.copy()))

    @property
    def n(self) -> int:
        return self.spins.shape[0]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Exact minimum found by exhaustive enumeration."""

    energy: float
    config: SpinConfig
    method: str = "exhaustive"


# ---------------------------------------------------------------------------
# Energy and fields
# ---------------------------------------------------------------------------


def energy(inst: IsingInstance, sigma: SpinConfig) -> float:
    """Energy of a spin configuration (couplings counted once per ordered pair)."""
    s = sigma.spins
    if s.shape[0] != inst.n:
        raise ValueError(f"config length {s.shape[0]} != instance size {inst.n}")
    return float(s @ inst.couplings @ s - inst.linear @ s)


def config_energies(inst: IsingInstance, sigma_rows: np.ndarray) -> np.ndarray:
    """Vectorized energies for a (K, n) matrix of spin rows."""
    rows = np.asarray(sigma_rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != inst.n:
        raise ValueError(f"expected rows of shape (K, {inst.n}), got {rows.shape}")
    coupled = rows @ inst.couplings
    return np.einsum("kn,kn->k", coupled, rows) - rows @ inst.linear


def fields(inst: IsingInstance, x: np.ndarray) -> np.ndarray:
    """Local interaction field h = J x + l / 2 for a soft-spin state x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise ValueError(f"x must have shape ({inst.n},), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("x has non-finite entries")
    return inst.couplings @ x + 0.5 * inst.linear


# ---------------------------------------------------------------------------
# Reductions to the Ising form
# ---------------------------------------------------------------------------


def from_maxcut(g: GraphAdjacency, id: str = "") -> IsingInstance:
    """Max-Cut reduction: J = A, l = 0. Energy is 2W - 4 cut(sigma)."""
    return IsingInstance(g.n, g.weights.copy(), np.zeros(g.n), id=id)


def _require_unweighted(g: GraphAdjacency, op: str) -> None:
    if not g.is_unweighted():
        raise ValueError(f"{op} requires an unweighted graph with entries in {{0, 1}}")


def from_mis(g: GraphAdjacency, id: str = "") -> IsingInstance:
    """Maximum-independent-set reduction with in-set spins sigma = +1.

    J = A and l_i = SET_REWARD - 2 deg_i. The degree terms cancel in the
    energy, leaving 8 * (edges inside the set) - 2 * SET_REWARD * |set| plus a
    constant, so the exact optimum is a maximum independent set.
    """
    _require_unweighted(g, "from_mis")
    deg = g.weights.sum(axis=1)
    l = SET_REWARD - 2.0 * deg
    return IsingInstance(g.n, g.weights.copy(), l, id=id)


def from_maxclique(g: GraphAdjacency, id: str = "") -> IsingInstance:
    """Max-Clique reduction: independent-set reduction on the complement graph."""
    _require_unweighted(g, "from_maxclique")
    comp = 1.0 - g.weights
    np.fill_diagonal(comp, 0.0)
    comp_deg = comp.sum(axis=1)
    l = SET_REWARD - 2.0 * comp_deg
    return IsingInstance(g.n, comp, l, id=id)


def from_qubo(q: QuboMatrix, id: str = "") -> IsingInstance:
    """QUBO reduction: J = Q off-diagonal, l = -2 Q 1.

    Under b = (sigma + 1) / 2 the energy equals 4 * b^T Q b up to an additive
    constant, so Ising argmins map exactly to QUBO argmins.
    """
    j = q.q.copy()
    np.fill_diagonal(j, 0.0)
    l = -2.0 * q.q.sum(axis=1)
    return IsingInstance(q.n, j, l, id=id)


def qubo_value(q: QuboMatrix, bits: np.ndarray) -> float:
    """QUBO objective b^T Q b for a {0,1} assignment."""
    b = np.asarray(bits, dtype=float)
    if b.shape != (q.n,):
        raise ValueError(f"bits must have shape ({q.n},), got {b.shape}")
    if not np.all((b == 0.0) | (b == 1.0)):
        raise ValueError("bits must be 0/1")
    return float(b @ q.q @ b)


def bits_from_spins(sigma: SpinConfig) -> np.ndarray:
    """Spin-to-bit map b = (sigma + 1) / 2."""
    return (sigma.spins + 1.0) / 2.0


def cut_value(g: GraphAdjacency, sigma: SpinConfig) -> float:
    """Total weight of edges crossing the spin bipartition."""
    s = sigma.spins
    if s.shape[0] != g.n:
        raise ValueError(f"config length {s.shape[0]} != graph size {g.n}")
    # sum_{i<j} A_ij (1 - s_i s_j) / 2, via the full double sum
    total = g.weights.sum() / 2.0
    return float((total - (s @ g.weights @ s) / 2.0) / 2.0)


def extract_feasible_set(g: GraphAdjacency, sigma: SpinConfig, kind: str) -> set[int]:
    """Read out a feasible vertex set from spins, repairing greedily if needed.

    Starts from {i : sigma_i = +1} and repeatedly removes the vertex with the
    most constraint violations (an incident in-set edge for MIS, a missing
    in-set edge for clique), lowest index on ties, until feasible.
    """
    if kind not in ("mis", "clique"):
        raise ValueError(f"kind must be 'mis' or 'clique', got {kind!r}")
    _require_unweighted(g, "extract_feasible_set")
    s = sigma.spins
    if s.shape[0] != g.n:
        raise ValueError(f"config length {s.shape[0]} != graph size {g.n}")
    selected = set(int(i) for i in np.flatnonzero(s > 0))
    a = g.weights
    while True:
        worst_count = 0
        worst_vertex = None
        for i in sorted(selected):
            if kind == "mis":
                count = sum(1 for j in selected if j != i and a[i, j] != 0.0)
            else:
                count = sum(1 for j in selected if j != i and a[i, j] == 0.0)
            if count > worst_count:
                worst_count = count
                worst_vertex = i
        if worst_vertex is None:
            return selected
        selected.remove(worst_vertex)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def gen_sk(n: int, seed: int, dist: str = "gaussian") -> IsingInstance:
    """Fully connected spin glass with random couplings of scale 1/sqrt(n).

    dist="gaussian" draws N(0, 1/n) couplings; dist="pm" draws +-1/sqrt(n).
    """
    if n < 2:
        raise ValueError("gen_sk requires n >= 2")
    if dist not in ("gaussian", "pm"):
        raise ValueError(f"unknown coupling distribution {dist!r}")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(n)
    if dist == "gaussian":
        upper = rng.normal(0.0, scale, size=(n, n))
    else:
        upper = scale * rng.choice([-1.0, 1.0], size=(n, n))
    j = np.triu(upper, 1)
    j = j + j.T
    tag = "sk" if dist == "gaussian" else "skpm"
    return IsingInstance(n, j, np.zeros(n), id=f"{tag}-n{n}-s{seed}")


def gen_graph(n: int, family: str, seed: int, **params) -> GraphAdjacency:
    """Random graph generators used by the benchmark suites.

    Families and parameters:
      random_unweighted: density (edge probability), +1 weights
      random_pm:         density, weights uniform in {-1, +1}
      toroidal_pm:       rows, cols (rows * cols = n, both >= 3), +-1 weights
      ba:                m (edges per new node), preferential attachment
    """
    if family not in GRAPH_FAMILIES:
        raise ValueError(f"unknown graph family {family!r}")
    if n < 2:
        raise ValueError("gen_graph requires n >= 2")
    rng = np.random.default_rng(seed)
    if family in ("random_unweighted", "random_pm"):
        density = params.pop("density", None)
        _reject_extra_params(family, params)
        if density is None or not 0.0 < density < 1.0:
            raise ValueError("random families need a density in (0, 1)")
        w = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        mask = rng.random(iu[0].shape[0]) < density
        if family == "random_pm":
            vals = rng.choice([-1.0, 1.0], size=iu[0].shape[0])
        else:
            vals = np.ones(iu[0].shape[0])
        w[iu] = mask * vals
        w = w + w.T
        return GraphAdjacency(n, w)
    if family == "toroidal_pm":
        rows = params.pop("rows", None)
        cols = params.pop("cols", None)
        _reject_extra_params(family, params)
        if rows is None or cols is None or rows * cols != n:
            raise ValueError("toroidal_pm needs rows * cols == n")
        if rows < 3 or cols < 3:
            raise ValueError("toroidal_pm needs side lengths >= 3")
        w = np.zeros((n, n))
        for r in range(rows):
            for c in range(cols):
                i = r * cols + c
                for j in (r * cols + (c + 1) % cols, ((r + 1) % rows) * cols + c):
                    weight = rng.choice([-1.0, 1.0])
                    w[i, j] = weight
                    w[j, i] = weight
        return GraphAdjacency(n, w)
    # Barabasi-Albert preferential attachment, seeded with a star on m+1 nodes.
    m = params.pop("m", None)
    _reject_extra_params(family, params)
    if m is None or m < 1 or m >= n:
        raise ValueError("ba needs 1 <= m < n")
    w = np.zeros((n, n))
    repeated: list[int] = []
    for leaf in range(1, m + 1):
        w[0, leaf] = w[leaf, 0] = 1.0
        repeated.extend([0, leaf])
    for source in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(repeated[int(rng.integers(len(repeated)))])
        for t in targets:
            w[source, t] = w[t, source] = 1.0
            repeated.extend([source, t])
    return GraphAdjacency(n, w)


def _reject_extra_params(family: str, params: dict) -> None:
    if params:
        raise ValueError(f"unexpected parameters for {family}: {sorted(params)}")


# ---------------------------------------------------------------------------
# G-set text format
# ---------------------------------------------------------------------------


def parse_gset(text: str) -> GraphAdjacency:
    """Parse the G-set edge-list format: "N M" header, then M "i j w" lines (1-based)."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty G-set text")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"malformed header line: {lines[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ValueError(f"malformed header line: {lines[0]!r}") from exc
    if n < 1 or m < 0:
        raise ValueError(f"invalid header values: {lines[0]!r}")
    if len(lines) - 1 != m:
        raise ValueError(f"expected {m} edge lines, found {len(lines) - 1}")
    w = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"malformed edge line: {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            weight = float(parts[2])
        except ValueError as exc:
            raise ValueError(f"malformed edge line: {ln!r}") from exc
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"vertex index out of range in line: {ln!r}")
        if i == j:
            raise ValueError(f"self-loop not allowed: {ln!r}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge: {ln!r}")
        seen.add(key)
        w[i - 1, j - 1] = weight
        w[j - 1, i - 1] = weight
    return GraphAdjacency(n, w)


def write_gset(g: GraphAdjacency) -> str:
    """Serialize an adjacency to G-set text; inverse of parse_gset."""
    iu = np.triu_indices(g.n, 1)
    vals = g.weights[iu]
    nz = np.flatnonzero(vals)
    out = [f"{g.n} {nz.shape[0]}"]
    for k in nz:
        i, j, weight = iu[0][k] + 1, iu[1][k] + 1, vals[k]
        wtxt = str(int(weight)) if weight == int(weight) else repr(float(weight))
        out.append(f"{i} {j} {wtxt}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def spin_rows_from_indices(indices: np.ndarray, n: int) -> np.ndarray:
    """Decode enumeration indices into spin rows.

    Bit n-1-v of the index holds vertex v (vertex 0 is the most significant
    bit); bit 0 means -1. Increasing index therefore walks configurations in
    lexicographic order with -1 ordered before +1.
    """
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint64)
    bits = (indices[:, None] >> shifts[None, :]) & np.uint64(1)
    return 2.0 * bits.astype(float) - 1.0


def brute_force_ground(inst: IsingInstance, chunk: int = 1 << 16) -> GroundTruth:
    """Exact minimum over all 2^n configurations; first minimizer in
    lexicographic order (-1 before +1) wins ties."""
    if inst.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {inst.n}")
    total = 1 << inst.n
    best_e = np.inf
    best_index = 0
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        idx = np.arange(start, stop, dtype=np.uint64)
        rows = spin_rows_from_indices(idx, inst.n)
        energies = config_energies(inst, rows)
        k = int(np.argmin(energies))
        if energies[k] < best_e:
            best_e = float(energies[k])
            best_index = start + k
    config = SpinConfig(
        spin_rows_from_indices(np.array([best_index], dtype=np.uint64), inst.n)[0]
    )
    # report the energy through the scalar path so it equals energy(inst, config)
    return GroundTruth(energy=energy(inst, config), config=config)


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

_INSTANCE_KINDS = ("ising", "sk", "maxcut", "mis", "clique", "qubo")


def instance_to_json(inst: IsingInstance, kind: str = "ising") -> str:
    """Versioned JSON document with a sparse triplet list for the couplings."""
    if kind not in _INSTANCE_KINDS:
        raise ValueError(f"unknown instance kind {kind!r}")
    iu = np.triu_indices(inst.n, 1)
    vals = inst.couplings[iu]
    nz = np.flatnonzero(vals)
    triplets = [[int(iu[0][k]), int(iu[1][k]), float(vals[k])] for k in nz]
    doc = {
        "format_version": INSTANCE_FORMAT_VERSION,
        "n": inst.n,
        "kind": kind,
        "couplings": triplets,
        "linear": [float(v) for v in inst.linear],
        "id": inst.id,
    }
    return json.dumps(doc)


def instance_from_json(text: str) -> tuple[IsingInstance, str]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid instance JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("instance document must be a JSON object")
    expected = {"format_version", "n", "kind", "couplings", "linear", "id"}
    if set(doc) != expected:
        raise ValueError(
            f"instance document keys {sorted(doc)} != expected {sorted(expected)}"
        )
    if doc["format_version"] != INSTANCE_FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc['format_version']}")
    kind = doc["kind"]
    if kind not in _INSTANCE_KINDS:
        raise ValueError(f"unknown instance kind {kind!r}")
    n = int(doc["n"])
    j = np.zeros((n, n))
    for trip in doc["couplings"]:
        if len(trip) != 3:
            raise ValueError(f"malformed coupling triplet: {trip!r}")
        a, b, w = int(trip[0]), int(trip[1]), float(trip[2])
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise ValueError(f"coupling triplet out of range: {trip!r}")
        j[a, b] = w
        j[b, a] = w
    inst = IsingInstance(n, j, np.array(doc["linear"], dtype=float), id=str(doc["id"]))
    return inst, kind


def graph_from_instance(inst: IsingInstance, kind: str) -> GraphAdjacency:
    """Recover the source adjacency from a mapped instance (maxcut/mis/clique)."""
    if kind in ("maxcut", "mis"):
        return GraphAdjacency(inst.n, inst.couplings.copy())
    if kind == "clique":
        a = 1.0 - inst.couplings
        np.fill_diagonal(a, 0.0)
        return GraphAdjacency(inst.n, a)
    raise ValueError(f"no adjacency recoverable for instance kind {kind!r}")
