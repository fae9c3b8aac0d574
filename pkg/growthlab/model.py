"""Samplers of the growth process and the exact small-N oracle.

Three samplers produce trajectories with the same law:

* :func:`simulate_pool` keeps the explicit pool of virtual vertices and
  edges and samples it uniformly, event by event.
* :func:`simulate_urn` runs only the Markov chain ``(X_n)`` with negative
  hypergeometric increments.
* :func:`simulate_insertion` schedules edge occupancies by inserting black
  balls into a row of white balls.
"""

from collections import defaultdict
from fractions import Fraction
import warnings

from joblib import Parallel, delayed
import numpy as np
from tqdm import tqdm

from growthlab.constants import (
    CHUNK_SIZE,
    EDGE_TRACKING_MAX_EDGES,
    ORACLE_JOINT_MAX_N,
    ORACLE_MAX_N,
)
from growthlab.state import (
    EDGE_DTYPE,
    AgedRecentSplit,
    PoolState,
    Trajectory,
    UrnState,
    WeakComposition,
    n_pairs,
)
from growthlab.urn import neg_hypergeom_pmf, neg_hypergeom_sample, polya_insertion


def silent_progress(iterable, *args, **kwargs):
    return iterable


def n_jobs(threads, tasks=None):
    """joblib worker count for the ``threads`` knob (0 means all cores).

    Warns when more threads are requested than there are ``tasks`` to hand
    out.
    """
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    if tasks is not None and threads > tasks:
        warnings.warn(
            f"{threads} threads requested for {tasks} task(s); "
            f"only {tasks} worker(s) will be busy",
            stacklevel=3,
        )
    return -1 if threads == 0 else threads


def simulate_pool(params, seed, track_edges=False):
    """Event-level simulation of the pool of virtual vertices and edges.

    Every step samples one element uniformly from the pool.  A sampled
    vertex ``n`` adds the ``n - 1`` virtual edges ``i <- n`` to the pool.
    The run stops when the last vertex is occupied.

    Parameters
    ----------
    params : ModelParams
        Model parameters.

    seed : SeedSpec
        Seed of the replicate.

    track_edges : bool, default: False
        Record which edge was occupied and when.  Needs memory of order
        ``N^2``.

    Returns
    -------
    Trajectory
        Edge counts at the whole hours, with ``edge_times`` filled when
        ``track_edges`` is set.

    Examples
    --------
    >>> from growthlab import ModelParams, SeedSpec, simulate_pool
    >>> traj = simulate_pool(ModelParams(30), SeedSpec(7), track_edges=True)
    >>> int(traj.x[-1]) + traj.delta_last
    435
    """
    N = params.N
    if track_edges and params.n_edges > EDGE_TRACKING_MAX_EDGES:
        raise ValueError(
            f"edge tracking for N={N} needs {params.n_edges} records, "
            f"above the cap of {EDGE_TRACKING_MAX_EDGES}"
        )
    rng = seed.generator()
    # events before hour N: N - 1 vertices plus at most C(N - 1, 2) edges
    uniforms = rng.random(N - 1 + n_pairs(N - 1))

    state = PoolState(N)
    if track_edges:
        state.edge_flags = np.zeros((N + 1, N + 1), dtype=bool)
    x = np.zeros(N, dtype=np.int64)
    virtual_edges = []
    records = []
    event = 1  # the first vertex
    draw = 0
    while state.n < N:
        size = state.pool_size
        r = min(int(uniforms[draw] * size), size - 1)
        draw += 1
        event += 1
        if r < state.virtual_vertices:
            state.n += 1
            x[state.n - 1] = state.k
            virtual_edges.extend((i, state.n) for i in range(1, state.n))
        else:
            e = r - state.virtual_vertices
            i, j = virtual_edges[e]
            virtual_edges[e] = virtual_edges[-1]
            virtual_edges.pop()
            state.k += 1
            if track_edges:
                state.edge_flags[i, j] = True
                records.append((i, j, event, state.n))

    edge_times = _edge_records(records) if track_edges else None
    return Trajectory(params, x, params.n_edges - state.k, edge_times)


def _edge_records(records):
    table = np.array(records, dtype=np.int64).reshape(-1, 4)
    out = np.zeros(len(table), dtype=EDGE_DTYPE)
    if not len(table):
        return out
    out["i"], out["j"], out["event"] = table[:, 0], table[:, 1], table[:, 2]
    hours = table[:, 3]
    # rank of each edge within the batch occupied between two vertices
    _, first, counts = np.unique(hours, return_index=True, return_counts=True)
    rank = np.arange(len(hours)) - np.repeat(first, counts) + 1
    out["hour"] = hours + rank / (np.repeat(counts, counts) + 1)
    return out


def simulate_urn(params, seed, method="sequential"):
    """Simulate the edge-count chain through its negative hypergeometric
    transitions.

    In hour ``n`` the increment ``ΔX_{n+1}`` counts the black balls drawn
    before the first white one from an urn holding ``N - n`` white and
    ``n(n-1)/2 - X_n`` black balls.

    Parameters
    ----------
    params : ModelParams
        Model parameters.

    seed : SeedSpec
        Seed of the replicate.

    method : str, default: "sequential"
        Increment sampler, see :func:`growthlab.urn.neg_hypergeom_sample`.

    Returns
    -------
    Trajectory
        Edge counts without edge identities.

    Examples
    --------
    >>> from growthlab import ModelParams, SeedSpec, simulate_urn
    >>> simulate_urn(ModelParams(2), SeedSpec(0)).delta_last
    1
    """
    N = params.N
    rng = seed.generator()
    x = np.zeros(N, dtype=np.int64)
    k = 0
    for n in range(1, N):
        urn = UrnState.at_hour(N, n, k)
        k += neg_hypergeom_sample(urn.M, urn.K, rng, method)
        x[n] = k
    return Trajectory(params, x, params.n_edges - k)


def simulate_insertion(params, seed):
    """Build the occupancy schedule by inserting black balls.

    Start with white balls ``1..N`` in a row.  In hour ``n = 3..N`` insert
    ``n - 2`` black balls, left to right one at a time, each uniformly among
    the positions to the right of white ball ``n - 1``.  The ``N - 1`` edges
    that enter with the last vertex can only be occupied after it, so they
    join the final run.

    Parameters
    ----------
    params : ModelParams
        Model parameters.

    seed : SeedSpec
        Seed of the replicate.

    Returns
    -------
    WeakComposition
        ``N + 1`` parts distributed as ``(ΔX_1, ..., ΔX_{N+1})``.

    Examples
    --------
    >>> from growthlab import ModelParams, SeedSpec, simulate_insertion
    >>> simulate_insertion(ModelParams(2), SeedSpec(0)).parts
    (0, 0, 1)
    """
    N = params.N
    rng = seed.generator()
    # parts[g] holds the black balls right of white ball g (part 1 is g = 0)
    parts = np.zeros(N + 1, dtype=np.int64)
    for n in range(3, N + 1):
        # white balls n..N delimit the N - n + 2 runs open to hour n
        tail = polya_insertion(N - n + 1, n - 2, rng, initial=parts[n - 1 :])
        parts[n - 1 :] = tail.parts
    parts[N] += N - 1
    return WeakComposition(parts)


def _urn_chunk(N, reps, stop, rng):
    x = np.zeros((reps, stop), dtype=np.int64)
    k = np.zeros(reps, dtype=np.int64)
    for n in range(1, stop):
        black = n_pairs(n) - k
        if n > 1:
            k = k + neg_hypergeom_sample(N - n + black, N - n, rng, "beta-binomial")
        x[:, n] = k
    return x


def _chunks(reps):
    return [min(CHUNK_SIZE, reps - start) for start in range(0, reps, CHUNK_SIZE)]


def simulate_urn_batch(params, reps, seed, stop=None, threads=1, progress=tqdm):
    """Simulate many replicates of ``(X_1, ..., X_stop)`` at once.

    Replicates are split into fixed chunks, chunk ``c`` drawing from the
    sub-stream ``seed.generator(c)``, so the result does not depend on
    ``threads``.

    Parameters
    ----------
    params : ModelParams
        Model parameters.

    reps : int
        Number of replicates.

    seed : SeedSpec
        Seed of the batch.

    stop : int, optional
        Last hour to simulate, default ``N``.  Truncated runs cost
        ``O(stop)`` vectorised steps.

    threads : int, default: 1
        Number of joblib workers, 0 for all cores.

    progress : callable, default: tqdm
        Wraps the chunk iterator.  Pass :func:`silent_progress` to disable
        progress reporting.

    Returns
    -------
    numpy.ndarray
        Integer array of shape ``(reps, stop)``, column ``n - 1`` holding
        ``X_n``.
    """
    N = params.N
    stop = N if stop is None else stop
    if not 1 <= stop <= N:
        raise ValueError(f"stop must lie in 1..{N}, got {stop}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    sizes = _chunks(reps)
    blocks = Parallel(n_jobs=n_jobs(threads, len(sizes)), prefer="threads")(
        delayed(_urn_chunk)(N, size, stop, seed.generator(c))
        for c, size in enumerate(progress(sizes, desc="Simulating edge counts"))
    )
    return np.concatenate(blocks)


def _first_edge_chunk(N, reps, rng):
    xi = np.full(reps, N + 1, dtype=np.int64)
    alive = np.arange(reps)
    n = 2
    while len(alive) and n < N:
        black = n_pairs(n)
        hit = rng.random(len(alive)) * (N - n + black) < black
        xi[alive[hit]] = n + 1
        alive = alive[~hit]
        n += 1
    return xi


def first_edge_times(params, reps, seed, threads=1, progress=tqdm):
    """Sample the first hour ``ξ_N`` with an occupied edge.

    Each replicate stops at its first edge occupancy, so the cost is of
    order ``N^{1/3}`` per replicate.  Runs without any edge before the
    last vertex report ``N + 1``.

    Returns
    -------
    numpy.ndarray
        Integer array of ``reps`` samples.
    """
    N = params.N
    sizes = _chunks(reps)
    blocks = Parallel(n_jobs=n_jobs(threads, len(sizes)), prefer="threads")(
        delayed(_first_edge_chunk)(N, size, seed.generator(c))
        for c, size in enumerate(progress(sizes, desc="Waiting for first edges"))
    )
    return np.concatenate(blocks)


def run_replicates(sampler, params, reps, seed, threads=1, progress=tqdm, **kwargs):
    """Run a single-path sampler on ``reps`` replicates.

    Replicate ``r`` uses ``seed.spawn(seed.replicate_index + r)``.

    Returns
    -------
    list
        Sampler outputs in replicate order.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    start = seed.replicate_index
    return Parallel(n_jobs=n_jobs(threads, reps))(
        delayed(sampler)(params, seed.spawn(start + r), **kwargs)
        for r in progress(range(reps), desc=f"Running {sampler.__name__}")
    )


def edge_probability(N, n, i, j, exact=False):
    """Probability that edge ``i <- j`` is occupied at hour ``n``.

    Parameters
    ----------
    N : int
        Total number of vertices.

    n : int
        Observation hour.

    i, j : int
        Edge endpoints, ``1 <= i < j <= n``.

    exact : bool, default: False
        Return a ``fractions.Fraction``.

    Returns
    -------
    float or fractions.Fraction
        ``(n - j) / (N - j + 1)``, independent of ``i``.

    Examples
    --------
    >>> from growthlab import edge_probability
    >>> edge_probability(10, 5, 1, 2, exact=True)
    Fraction(1, 3)
    """
    if not 1 <= i < j <= n <= N:
        raise ValueError(f"need 1 <= i < j <= n <= N, got i={i}, j={j}, n={n}, N={N}")
    p = Fraction(n - j, N - j + 1)
    return p if exact else float(p)


def transition_pmf(N, n, k, exact=True):
    """Law of ``ΔX_{n+1}`` given ``X_n = k`` as a dict ``ell -> prob``.

    At ``n = N`` the remaining ``ΔX_{N+1} = N(N-1)/2 - k`` is deterministic.
    """
    if not 1 <= n <= N:
        raise ValueError(f"hour {n} outside 1..{N}")
    if n == N:
        return {n_pairs(N) - k: Fraction(1) if exact else 1.0}
    urn = UrnState.at_hour(N, n, k)
    return {
        ell: neg_hypergeom_pmf(urn.M, urn.K, ell, exact=exact) for ell in range(urn.black + 1)
    }


def _check_oracle(params, cap):
    if params.N > cap:
        raise ValueError(
            f"exact oracle limited to N <= {cap}, got N={params.N}; "
            "raise the cap explicitly if you can afford it"
        )


def _forward_laws(params, upto, exact):
    law = {0: Fraction(1) if exact else 1.0}
    yield law
    for h in range(1, upto):
        nxt = defaultdict(Fraction if exact else float)
        for k, p in law.items():
            for ell, q in transition_pmf(params.N, h, k, exact).items():
                nxt[k + ell] += p * q
        law = dict(sorted(nxt.items()))
        yield law


def exact_distribution(params, n, exact=True, max_N=ORACLE_MAX_N):
    """Exact marginal law of ``X_n`` by dynamic programming over
    ``(n, k)``.

    Parameters
    ----------
    params : ModelParams
        Model parameters.

    n : int
        Hour, ``1 <= n <= N``.

    exact : bool, default: True
        Work in rationals (``fractions.Fraction``) instead of floats.

    max_N : int, default: ORACLE_MAX_N
        Refuse larger models.

    Returns
    -------
    dict
        ``k -> P[X_n = k]`` over the support.

    Examples
    --------
    >>> from growthlab import ModelParams, exact_distribution
    >>> exact_distribution(ModelParams(3), 3)
    {0: Fraction(1, 2), 1: Fraction(1, 2)}
    """
    _check_oracle(params, max_N)
    if not 1 <= n <= params.N:
        raise ValueError(f"hour {n} outside 1..{params.N}")
    *_, law = _forward_laws(params, n, exact)
    return law


def exact_marginals(params, exact=True, max_N=ORACLE_MAX_N):
    """Exact laws of ``X_1, ..., X_N`` as a list of dicts ``k -> prob``,
    from a single forward pass of the dynamic program."""
    _check_oracle(params, max_N)
    return list(_forward_laws(params, params.N, exact))


def exact_joint_distribution(params, exact=True, max_N=ORACLE_JOINT_MAX_N):
    """Exact law of the whole path ``(X_1, ..., X_N)``.

    Returns
    -------
    dict
        ``path tuple -> probability``.  ``ΔX_{N+1}`` follows from ``X_N``.
    """
    _check_oracle(params, max_N)
    paths = {(0,): Fraction(1) if exact else 1.0}
    for h in range(1, params.N):
        nxt = {}
        for path, p in paths.items():
            for ell, q in transition_pmf(params.N, h, path[-1], exact).items():
                nxt[path + (path[-1] + ell,)] = p * q
        paths = nxt
    return paths


def split_aged_recent(traj, m, n):
    """Split ``X_n - X_m`` into aged and recent edges.

    Aged edges ``i <- j`` have ``j <= m`` and were virtual at hour ``m``;
    recent edges have ``m < j <= n``.

    Parameters
    ----------
    traj : Trajectory
        Run made with edge tracking.

    m, n : int
        Hours with ``1 <= m < n <= N``.

    Returns
    -------
    AgedRecentSplit
    """
    if traj.edge_times is None:
        raise ValueError("aged/recent split needs a trajectory simulated with track_edges=True")
    if not 1 <= m < n <= traj.N:
        raise ValueError(f"need 1 <= m < n <= N, got m={m}, n={n}, N={traj.N}")
    edges = traj.edge_times
    hour = np.floor(edges["hour"])
    window = (hour >= m) & (hour < n)
    aged = int(np.count_nonzero(window & (edges["j"] <= m)))
    recent = int(np.count_nonzero(window & (edges["j"] > m)))
    return AgedRecentSplit(m, n, aged, recent)


def aged_increments(traj, m, n):
    """``A_{m,m+1}, A_{m,m+2} - A_{m,m+1}, ..., A_{m,n} - A_{m,n-1}``,
    the aged edges occupied in each hour after ``m``."""
    if traj.edge_times is None:
        raise ValueError("aged increments need a trajectory simulated with track_edges=True")
    if not 1 <= m < n <= traj.N:
        raise ValueError(f"need 1 <= m < n <= N, got m={m}, n={n}, N={traj.N}")
    edges = traj.edge_times
    hour = np.floor(edges["hour"]).astype(np.int64)
    aged = hour[(edges["j"] <= m) & (hour >= m) & (hour < n)]
    return np.bincount(aged - m, minlength=n - m)


def pool_from_trajectory(traj, n):
    """``PoolState`` at hour ``n`` of a trajectory, with edge flags when the
    trajectory carries edge records."""
    state = PoolState(traj.N, n, traj.X(n))
    if traj.edge_times is not None:
        edges = traj.edge_times[np.floor(traj.edge_times["hour"]) < n]
        state.edge_flags = np.zeros((n + 1, n + 1), dtype=bool)
        state.edge_flags[edges["i"], edges["j"]] = True
    state.check()
    return state


def sample_paths(sampler, params, reps, seed, threads=1, progress=tqdm):
    """Edge-count paths of ``reps`` replicates of one of the samplers
    ``"pool"``, ``"urn"`` or ``"insertion"``, as an array ``(reps, N)``."""
    samplers = {"pool": simulate_pool, "urn": simulate_urn, "insertion": simulate_insertion}
    if sampler not in samplers:
        raise ValueError(f"unknown sampler {sampler!r}, expected one of {sorted(samplers)}")
    runs = run_replicates(samplers[sampler], params, reps, seed, threads, progress)
    if sampler == "insertion":
        runs = [Trajectory.from_composition(params, comp) for comp in runs]
    return np.array([run.x for run in runs], dtype=np.int64)
