"""Adaptive H2-matrix multiplication for the single-layer operator on spheres."""

from ._h2mul import (
    BenchConfig,
    BlockTree,
    ClusterTree,
    H2Matrix,
    TriangleMesh,
    TruncationControl,
    assemble_single_layer,
    build_block_tree,
    build_cluster_tree,
    latlong_sphere_mesh,
    load_h2,
    multiply,
    read_mesh,
    run_benchmark,
    single_layer_kernel,
    sphere_mesh,
    write_mesh,
)

__all__ = [
    "BenchConfig",
    "BlockTree",
    "ClusterTree",
    "H2Matrix",
    "TriangleMesh",
    "TruncationControl",
    "assemble_single_layer",
    "build_block_tree",
    "build_cluster_tree",
    "latlong_sphere_mesh",
    "load_h2",
    "multiply",
    "read_mesh",
    "run_benchmark",
    "single_layer_kernel",
    "sphere_mesh",
    "write_mesh",
]
