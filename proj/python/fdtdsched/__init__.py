"""Scheduled 3D FDTD stepping: Yee updates lowered through tile/fuse/vectorize scripts."""

from ._core import (
    CSV_HEADER,
    PIPELINES,
    InstabilityError,
    IoError,
    ScriptError,
    SimParams,
    Simulation,
    ValidationError,
    bench,
    cfl_limit,
    compare_dumps,
    detect_target,
    dump_ir,
    preset_script,
    read_dump,
)

__all__ = [
    "CSV_HEADER",
    "PIPELINES",
    "InstabilityError",
    "IoError",
    "ScriptError",
    "SimParams",
    "Simulation",
    "ValidationError",
    "bench",
    "cfl_limit",
    "compare_dumps",
    "detect_target",
    "dump_ir",
    "preset_script",
    "read_dump",
    "run",
]


def run(n=16, steps=100, pipeline="none", precision="f64", seed=0, init="random", **params):
    """Build a cubic grid, advance it and return the six fields as numpy arrays."""
    sim = Simulation(SimParams(n=n, precision=precision, **params), pipeline=pipeline, init=init, seed=seed)
    sim.step(steps)
    return sim.fields()
