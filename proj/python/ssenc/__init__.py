"""Encoder-based neural state-space identification of a simulated ball-in-a-box video system.

The heavy lifting happens in the compiled ``_ssenc`` extension; this package
re-exports it and adds a few numpy conveniences.
"""

from ._ssenc import (
    SIGMA_Y,
    ConfigError,
    Dataset,
    DimensionError,
    DivergenceError,
    Error,
    FormatError,
    IndexError,
    RunConfig,
    SingularityError,
    eval,
    evaluate_checkpoint,
    gen,
    generate_dataset,
    nrms,
    nstep,
    per_frame_rms,
    read_ssid,
    table1,
    train,
    write_ssid,
)

__all__ = [
    "SIGMA_Y",
    "ConfigError",
    "Dataset",
    "DimensionError",
    "DivergenceError",
    "Error",
    "FormatError",
    "IndexError",
    "RunConfig",
    "SingularityError",
    "eval",
    "evaluate_checkpoint",
    "gen",
    "generate_dataset",
    "nrms",
    "nstep",
    "per_frame_rms",
    "read_ssid",
    "table1",
    "train",
    "write_ssid",
    "config",
]


def config(**overrides):
    """A RunConfig with the given keys overridden, e.g. ``config(max_epochs=5, out_dir="run")``."""
    c = RunConfig()
    for key, value in overrides.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        c.set(key, str(value))
    return c
