"""Digital twin of a spastic knee coupled to a torque-controlled exoskeleton.

The heavy lifting lives in the compiled `_core` extension; this package
re-exports its public surface.
"""

from ._core import (
    OBSERVATION_DIM,
    OBSERVATION_LAYOUT_VERSION,
    Environment,
    PidController,
    SubjectParams,
    default_subject,
    peak_torque,
    rms_to_settling,
    run_pid_episode,
    run_policy_episode,
    sample_subject,
    sc_angular,
    sc_total,
    sc_velocity,
    settling_time,
    spastic_activations,
    write_untrained_checkpoint,
)

__all__ = [
    "OBSERVATION_DIM",
    "OBSERVATION_LAYOUT_VERSION",
    "Environment",
    "PidController",
    "SubjectParams",
    "default_subject",
    "peak_torque",
    "rms_to_settling",
    "run_pid_episode",
    "run_policy_episode",
    "sample_subject",
    "sc_angular",
    "sc_total",
    "sc_velocity",
    "settling_time",
    "spastic_activations",
    "write_untrained_checkpoint",
]
