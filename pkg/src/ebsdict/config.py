"""Run configuration for the indexing pipeline."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .forward import read_keyvalue_file, _single


@dataclass(frozen=True)
class RunConfig:
    """Pipeline knobs shared by the CLI subcommands.

    ``k_classifier`` is the neighbor count used for the overlap
    statistic, ``k_ml`` how many best matches feed the orientation
    refinement.  The three ``t_*`` entries override the data-derived
    decision-tree thresholds when set.
    """

    N: int = 40
    k_classifier: int = 40
    k_ml: int = 4
    t_anomaly: float | None = None
    t_subclass: float | None = None
    t_boundary: float | None = None
    workers: int = 1
    seed: int = 0
    delta_theta_cap: float = 0.25

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.k_classifier < 1:
            raise ConfigError("k_classifier must be >= 1")
        if not 1 <= self.k_ml <= self.k_classifier:
            raise ConfigError("k_ml must lie in [1, k_classifier]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.delta_theta_cap <= 0.0:
            raise ConfigError("delta_theta_cap must be positive")

    def threshold_overrides(self):
        return {"t_anomaly": self.t_anomaly, "t_subclass": self.t_subclass,
                "t_boundary": self.t_boundary}


def load_run_config(path):
    """RunConfig from a ``key = value`` file; unknown keys are rejected."""
    entries = read_keyvalue_file(path)
    known = {"N", "k_classifier", "k_ml", "t_anomaly", "t_subclass",
             "t_boundary", "workers", "seed", "delta_theta_cap"}
    extra = set(entries) - known
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {sorted(extra)}")
    defaults = RunConfig()

    def geti(key, dflt):
        val = _single(entries, key)
        return dflt if val is None else int(val)

    def getf(key, dflt):
        val = _single(entries, key)
        return dflt if val is None else float(val)

    try:
        return RunConfig(
            N=geti("N", defaults.N),
            k_classifier=geti("k_classifier", defaults.k_classifier),
            k_ml=geti("k_ml", defaults.k_ml),
            t_anomaly=getf("t_anomaly", None),
            t_subclass=getf("t_subclass", None),
            t_boundary=getf("t_boundary", None),
            workers=geti("workers", defaults.workers),
            seed=geti("seed", defaults.seed),
            delta_theta_cap=getf("delta_theta_cap", defaults.delta_theta_cap),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
