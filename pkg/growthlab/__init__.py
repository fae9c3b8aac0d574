from growthlab._version import __version__
from growthlab.asymptotics import (
    DiffusionPath,
    LimitKernel,
    LimitLaw,
    cov_kernel,
    phi,
    psi,
    simulate_limit_diffusion,
)
from growthlab.model import (
    edge_probability,
    exact_distribution,
    exact_joint_distribution,
    exact_marginals,
    first_edge_times,
    run_replicates,
    simulate_insertion,
    simulate_pool,
    simulate_urn,
    simulate_urn_batch,
    split_aged_recent,
)
from growthlab.moments import (
    MomentTable,
    compensator,
    first_edge_pmf,
    first_edge_survival,
    mean_edges,
    moment_table,
    variance_table,
)
from growthlab.state import (
    AgedRecentSplit,
    ModelParams,
    PoolState,
    SeedSpec,
    Trajectory,
    UrnState,
    WeakComposition,
)
from growthlab.urn import neg_hypergeom_pmf, neg_hypergeom_sample, polya_insertion
from growthlab.verify import GofReport, SuiteConfig, Thresholds, run_suite
