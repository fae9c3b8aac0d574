"""Records describing the state of the growth process."""

from dataclasses import dataclass, field
import os

import numpy as np

from growthlab.check_imports import assert_full_module_variant, pandas as pd

# One row per occupied edge ``i <- j``.  ``event`` is the global index of the
# occupancy among all vertex and edge occupancies (1-based) and ``hour`` is
# the real-valued time: the number of occupied vertices plus the relative
# position of the edge among the edges occupied before the next vertex.
EDGE_DTYPE = np.dtype([("i", np.int64), ("j", np.int64), ("event", np.int64), ("hour", np.float64)])


def n_pairs(n):
    """Number of ordered pairs ``i <- j`` with ``1 <= i < j <= n``."""
    return n * (n - 1) // 2


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the growth model.

    Parameters
    ----------
    N : int
        Total number of vertices in the pool.  Must be at least 2.

    Examples
    --------
    >>> from growthlab import ModelParams
    >>> ModelParams(10).n_edges
    45
    """

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N!r}")

    @property
    def n_edges(self):
        """Edges of the complete graph on ``N`` vertices"""
        return n_pairs(self.N)


@dataclass
class PoolState:
    """Occupied vertex and edge counts at some stage of the process.

    Parameters
    ----------
    N : int
        Total number of vertices.

    n : int
        Occupied vertex count.

    k : int
        Occupied edge count.

    edge_flags : numpy.ndarray, optional
        Boolean ``(n + 1, n + 1)`` matrix, ``edge_flags[i, j]`` set when the
        edge ``i <- j`` is occupied.  Row and column 0 are unused.
    """

    N: int
    n: int = 1
    k: int = 0
    edge_flags: np.ndarray = None

    @property
    def virtual_vertices(self):
        return self.N - self.n

    @property
    def virtual_edges(self):
        return n_pairs(self.n) - self.k

    @property
    def pool_size(self):
        """Virtual vertices and edges available for sampling"""
        return self.virtual_vertices + self.virtual_edges

    def check(self):
        """Raise ``ValueError`` if the state is inconsistent."""
        if not 1 <= self.n <= self.N:
            raise ValueError(f"occupied vertex count {self.n} outside 1..{self.N}")
        if not 0 <= self.k <= n_pairs(self.n):
            raise ValueError(f"occupied edge count {self.k} outside 0..{n_pairs(self.n)}")
        if self.edge_flags is not None and int(np.count_nonzero(self.edge_flags)) != self.k:
            raise ValueError("edge flags disagree with the occupied edge count")

    def __repr__(self):
        s = "--- Pool State ---" + os.linesep
        s += f"Occupied vertices: {self.n} of {self.N}{os.linesep}"
        s += f"Occupied edges:    {self.k}{os.linesep}"
        s += f"Pool size:         {self.pool_size}"
        return s


@dataclass
class Trajectory:
    """Edge counts of one run observed at the whole hours ``1..N``.

    Parameters
    ----------
    params : ModelParams
        Model parameters of the run.

    x : numpy.ndarray
        ``x[n - 1]`` is ``X_n``, the number of edges of ``G_n``.

    delta_last : int
        ``ΔX_{N+1}``, the edges still virtual when the last vertex enters.

    edge_times : numpy.ndarray, optional
        Structured array with dtype :data:`EDGE_DTYPE`, present only for
        runs made with edge tracking.

    Examples
    --------
    >>> from growthlab import ModelParams, SeedSpec, simulate_urn
    >>> traj = simulate_urn(ModelParams(2), SeedSpec(1))
    >>> traj.x, traj.delta_last
    (array([0, 0]), 1)
    """

    params: ModelParams
    x: np.ndarray
    delta_last: int
    edge_times: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_composition(cls, params, composition):
        """Build the trajectory whose increments are the parts of a
        ``WeakComposition`` with ``N + 1`` parts."""
        parts = np.asarray(composition.parts, dtype=np.int64)
        if len(parts) != params.N + 1:
            raise ValueError(f"expected {params.N + 1} parts, got {len(parts)}")
        return cls(params, np.cumsum(parts[:-1]), int(parts[-1]))

    @property
    def N(self):
        return self.params.N

    def X(self, n):
        """Edge count ``X_n`` with the convention ``X_0 = 0``."""
        if not 0 <= n <= self.N:
            raise ValueError(f"hour {n} outside 0..{self.N}")
        return 0 if n == 0 else int(self.x[n - 1])

    def increments(self):
        """``(ΔX_1, ..., ΔX_{N+1})`` as an integer array"""
        return np.append(np.diff(self.x, prepend=0), self.delta_last)

    def check(self):
        """Raise ``ValueError`` unless the path satisfies the trajectory
        invariants (start at zero, monotone, bounded, conserved)."""
        x = self.x
        if len(x) != self.N:
            raise ValueError(f"trajectory has {len(x)} hours, expected {self.N}")
        if x[0] != 0 or x[1] != 0:
            raise ValueError("X_1 and X_2 must vanish")
        if np.any(np.diff(x) < 0):
            raise ValueError("edge counts decrease")
        bound = np.arange(1, self.N + 1)
        if np.any(x > bound * (bound - 1) // 2):
            raise ValueError("edge count exceeds the number of pairs")
        if int(x[-1]) + self.delta_last != self.params.n_edges:
            raise ValueError("X_N + ΔX_{N+1} differs from N(N-1)/2")
        if self.edge_times is not None and len(self.edge_times) != int(x[-1]):
            raise ValueError("edge records disagree with X_N")

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        same_edges = (self.edge_times is None and other.edge_times is None) or (
            self.edge_times is not None
            and other.edge_times is not None
            and np.array_equal(self.edge_times, other.edge_times)
        )
        return (
            self.params == other.params
            and np.array_equal(self.x, other.x)
            and self.delta_last == other.delta_last
            and same_edges
        )

    def __repr__(self):
        info = "growthlab.Trajectory object\n"
        info += "N: %d\n" % self.N
        info += "X_N: %d\n" % self.x[-1]
        info += "Missing edges: %d\n" % self.delta_last
        info += "Edge tracking: %s" % (self.edge_times is not None)
        return info

    @assert_full_module_variant
    def to_dataframe(self):
        """Edge counts as a ``pandas.DataFrame`` with columns ``n`` and
        ``X_n``."""
        return pd.DataFrame({"n": np.arange(1, self.N + 1), "X_n": self.x})


@dataclass(frozen=True)
class UrnState:
    """Urn with ``M`` balls of which ``K`` are white."""

    M: int
    K: int

    def __post_init__(self):
        if not 0 <= self.K <= self.M:
            raise ValueError(f"need 0 <= K <= M, got M={self.M}, K={self.K}")

    @property
    def black(self):
        return self.M - self.K

    @classmethod
    def at_hour(cls, N, n, k):
        """Urn that governs ``ΔX_{n+1}`` given ``X_n = k``."""
        return cls(N - n + n_pairs(n) - k, N - n)


@dataclass(frozen=True)
class WeakComposition:
    """Ordered nonnegative parts; an arrangement of ``K`` white and
    ``M - K`` black balls read as ``K + 1`` runs of black balls.

    Examples
    --------
    >>> from growthlab import WeakComposition
    >>> comp = WeakComposition((3, 4, 0, 5, 1))
    >>> comp.M, comp.K
    (17, 4)
    """

    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(int(p) for p in self.parts))
        if not self.parts:
            raise ValueError("a weak composition has at least one part")
        if min(self.parts) < 0:
            raise ValueError("parts must be nonnegative")

    @property
    def K(self):
        return len(self.parts) - 1

    @property
    def M(self):
        return sum(self.parts) + self.K

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        yield from self.parts


@dataclass(frozen=True)
class SeedSpec:
    """Seed of one replicate.

    Streams come from a ``numpy.random.Philox`` counter-based generator keyed
    by ``SeedSequence(master_seed, spawn_key=(replicate_index, ...))``, so
    distinct pairs give independent streams and equal pairs identical ones.

    Parameters
    ----------
    master_seed : int
        Unsigned 64-bit master seed.

    replicate_index : int, default: 0
        Index of the replicate (or chunk of replicates).
    """

    master_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(
                f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}"
            )
        if self.replicate_index < 0:
            raise ValueError(f"replicate_index must be >= 0, got {self.replicate_index}")

    def generator(self, *key):
        """Return the ``numpy.random.Generator`` of this replicate, or of a
        sub-stream identified by ``key``."""
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replicate_index, *key))
        return np.random.Generator(np.random.Philox(seq))

    def spawn(self, replicate_index):
        return SeedSpec(self.master_seed, replicate_index)


@dataclass(frozen=True)
class AgedRecentSplit:
    """Split of ``X_n - X_m`` into edges already virtual at hour ``m``
    (aged) and edges added to the pool after ``m`` (recent)."""

    m: int
    n: int
    aged: int
    recent: int

    @property
    def total(self):
        return self.aged + self.recent
