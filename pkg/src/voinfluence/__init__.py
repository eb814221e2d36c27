"""Value-of-information influence diagnostics for Bayesian models."""

from .loss import (
    InfluenceRecord,
    LossSpec,
    bayes_action,
    evoir,
    evoir_calibration_p,
    identity_loss,
    prospective_evsi_mc,
    quadratic_loss,
    retrospective_evsi,
)

__version__ = "0.1.0"

__all__ = [
    "InfluenceRecord",
    "LossSpec",
    "bayes_action",
    "evoir",
    "evoir_calibration_p",
    "identity_loss",
    "prospective_evsi_mc",
    "quadratic_loss",
    "retrospective_evsi",
]
