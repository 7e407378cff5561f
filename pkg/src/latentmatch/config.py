"""Engine configuration: correspondence, scoring and fusion knobs.

The defaults reproduce the tolerance and selection settings the matcher was
tuned with; everything is overridable programmatically or through a plain
``key = value`` config file (see :meth:`EngineConfig.load`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path


@dataclass(frozen=True)
class SigmoidParams:
    """Parameters (mu, tau, t) of the truncated sigmoid compatibility kernel."""

    mu: float
    tau: float
    t: float

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("truncation point t must be positive")


# Euclidean kernel compares pair/side length differences (pixels);
# directional kernel compares angular differences (radians).
EUCLIDEAN_PARAMS = SigmoidParams(mu=15.0, tau=-1.0 / 5.0, t=40.0)
DIRECTIONAL_PARAMS = SigmoidParams(mu=1.0 / 12.0, tau=-15.0, t=math.pi / 4.0)

# Alternative directional center for readers of the tolerance as pi/12 rad
# (15 degrees) instead of the literal 1/12 rad; select via config.
DIRECTIONAL_MU_PI_TWELFTH = math.pi / 12.0


@dataclass
class EngineConfig:
    """All tunables of the comparison pipeline in one place."""

    # candidate selection
    top_n: int = 120                # true-minutiae candidate pairs kept
    texture_top_n: int = 200        # virtual-minutiae candidate pairs kept

    # compatibility kernels
    euclidean: SigmoidParams = EUCLIDEAN_PARAMS
    directional: SigmoidParams = DIRECTIONAL_PARAMS

    # power iteration
    power_tolerance: float = 1e-6
    power_max_iterations: int = 100

    # discretization thresholds, as fractions of max(Y) (Y is unit norm,
    # so relative thresholds are scale free)
    second_order_threshold: float = 0.2
    third_order_threshold: float = 0.1

    # the triplet stage needs at least this many surviving pairs
    min_third_order_pairs: int = 3

    # descriptor patch types used for similarity; None = all types shared
    # by the two templates being compared
    patch_types: tuple[str, ...] | None = None

    # final fusion weights for (minutiae template 1, minutiae template 2,
    # texture template)
    lambda_mt1: float = 1.0
    lambda_mt2: float = 1.0
    lambda_tt: float = 2.0

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.lambda_mt1, self.lambda_mt2, self.lambda_tt)

    # --- key=value persistence ------------------------------------------

    _SIGMOID_KEYS = (
        ("euclidean", "euclidean_mu", "euclidean_tau", "euclidean_t"),
        ("directional", "directional_mu", "directional_tau", "directional_t"),
    )
    _INT_KEYS = ("top_n", "texture_top_n", "power_max_iterations",
                 "min_third_order_pairs")
    _FLOAT_KEYS = ("power_tolerance", "second_order_threshold",
                   "third_order_threshold", "lambda_mt1", "lambda_mt2",
                   "lambda_tt")

    def save(self, path) -> None:
        lines = []
        for key in self._INT_KEYS:
            lines.append(f"{key} = {getattr(self, key)}")
        for key in self._FLOAT_KEYS:
            lines.append(f"{key} = {getattr(self, key)!r}")
        for attr, kmu, ktau, kt in self._SIGMOID_KEYS:
            p = getattr(self, attr)
            lines.append(f"{kmu} = {p.mu!r}")
            lines.append(f"{ktau} = {p.tau!r}")
            lines.append(f"{kt} = {p.t!r}")
        if self.patch_types is None:
            lines.append("patch_types = all")
        else:
            lines.append("patch_types = " + ",".join(self.patch_types))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EngineConfig":
        values = {}
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()

        cfg = cls()
        kwargs = {}
        for key in cls._INT_KEYS:
            if key in values:
                kwargs[key] = int(values.pop(key))
        for key in cls._FLOAT_KEYS:
            if key in values:
                kwargs[key] = float(values.pop(key))
        for attr, kmu, ktau, kt in cls._SIGMOID_KEYS:
            base = getattr(cfg, attr)
            mu = float(values.pop(kmu, base.mu))
            tau = float(values.pop(ktau, base.tau))
            t = float(values.pop(kt, base.t))
            kwargs[attr] = SigmoidParams(mu, tau, t)
        if "patch_types" in values:
            raw = values.pop("patch_types")
            kwargs["patch_types"] = None if raw == "all" else tuple(
                s.strip() for s in raw.split(",") if s.strip())
        if values:
            raise ValueError(f"unknown config keys: {sorted(values)}")
        return replace(cfg, **kwargs)
