"""Geometry-aware SGD on products of embedded kernel submanifolds.

Thin wrapper around the compiled `_gsgd` extension. Matrices are numpy
arrays; ensemble plans and experiment configs use the same JSON schema as
the `gsgd` command-line tool.
"""

import json
import os
import tempfile

from _gsgd import (  # noqa: F401
    CHECKPOINT_VERSION,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    CheckpointError,
    ConfigError,
    GsgdError,
    ManifoldSpec,
    NonFiniteGradient,
    ProductManifold,
    adaptive_denominator,
    build_plan,
    constraint_residual,
    exp_map,
    geodesic_distance,
    inspect,
    kss_split,
    learning_rate,
    load_dataset,
    make_dataset,
    product_constraint_residual,
    product_curvature_upper_bound,
    product_inner,
    product_retract,
    product_tangent_project,
    project_to_manifold,
    random_point,
    resume,
    retract,
    run,
    sectional_curvature,
    sphere_denominator,
    tangent_project,
    validate_plan,
)


def run_config(config, **overrides):
    """Run an experiment from a config dict instead of a file on disk.

    Returns (exit_code, stdout, stderr), like `run`.
    """
    fd, path = tempfile.mkstemp(suffix=".json", prefix="gsgd_config_")
    try:
        with os.fdopen(fd, "w") as handle:
            json.dump(config, handle)
        return run(path, **overrides)
    finally:
        os.unlink(path)
