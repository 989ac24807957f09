"""Experiment specification shared by the CLI flags and JSON config files."""

from __future__ import annotations

from dataclasses import dataclass, field


class SpecValidationError(ValueError):
    """Bad experiment configuration; maps to exit code 1."""


class OracleFailure(RuntimeError):
    """A verification oracle failed; maps to exit code 2."""


DEFAULT_ETA_GRID = (0.01, 0.03, 0.1, 0.3, 1.0)
DEFAULT_REF_ETAS = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0)


@dataclass
class ExperimentSpec:
    """Resolved inputs of one harness command.

    Fields mirror the CLI flags one-to-one; a JSON config file supplies the
    same keys. Only the fields a given command reads are validated by it.
    """

    command: str
    out: str = ""
    master_seed: int = 0
    seeds: tuple[int, ...] = (0,)

    # dataset source: a CSV path or a synthetic generator
    csv: str | None = None
    test_csv: str | None = None
    append_bias: bool = False
    synthetic: str | None = None  # "planted" | "heavy"
    n: int = 2000
    dim: int = 20
    classes: int = 3
    norm_low: float = 1.0
    norm_high: float = 1.0
    tail_k: float = 2.0

    # privacy budget
    epsilon: float = 2.0
    delta: float = 1e-5
    nu: float = 1.0

    # DP-SGD controls
    iterations: int = 200
    batch: float = 50.0
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID
    no_noise: bool = False

    # sweep-clip
    clip_candidates: tuple[str, ...] = ("p0", "p100")

    # rnmm-pipeline
    eps_rnmm: float | None = None
    rnmm_clamp: float | None = None

    # phi-scaling
    n_list: tuple[int, ...] = (500, 2000, 8000)
    moment_k: float = 2.0
    gamma: float = 0.5
    growth_c: float = 1.0

    # bias-oracle
    count: int = 200
    p_list: tuple[float, ...] = (1.5, 2.0, 3.0)

    # lower-bound-demo
    qv_p: float = 0.1

    def __post_init__(self):
        if not self.seeds:
            raise SpecValidationError("seeds must be nonempty")
        if self.master_seed < 0 or any(s < 0 for s in self.seeds):
            raise SpecValidationError("seeds must be nonnegative integers")
        if not self.out:
            raise SpecValidationError("an output path is required")
