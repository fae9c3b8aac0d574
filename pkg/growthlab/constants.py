#!/usr/bin/env python

# Largest N for which the exact dynamic program is allowed to run.
ORACLE_MAX_N = 12

# Edge tracking stores one record per edge; reject N(N-1)/2 above this.
EDGE_TRACKING_MAX_EDGES = 5_000_000

# Scalar pmf uses exact integer arithmetic up to this many balls.
PMF_EXACT_MAX_BALLS = 100_000

# Replicates per seed stream in the vectorised samplers.  The chunking is
# fixed so that output does not depend on the number of workers.
CHUNK_SIZE = 2048

DEFAULT_SEED = 20240101

# Reference time of the covariance column written by ``limits``.
DEFAULT_T_REF = 0.3

# Euler-Maruyama defaults for the limit diffusion.
EULER_DELTA = 1e-3
EULER_STEP = 1e-4

# Upper integration limit keeps quadrature off the log singularity at 1.
QUAD_EPS = 1e-12
QUAD_TOL = 1e-10

sampler_names = {
    "pool": "explicit pool of virtual vertices and edges",
    "urn": "negative hypergeometric Markov chain",
    "insertion": "black ball insertion schedule",
}

# The joint law of (X_1, ..., X_N) is enumerated path by path.
ORACLE_JOINT_MAX_N = 7

# First edge hours are read at the middle of the hour, xi - 3/2, before
# scaling by N^(1/3).
FIRST_EDGE_OFFSET = 1.5
