"""Pipeline configuration: key-value config files, seeds, config hash.

Config files are plain ``key = value`` lines (``#`` comments allowed);
CLI flags override file values.  All randomness flows from the single
``seed`` through :func:`derive_seed`, which hashes (seed, stage name,
index) so partial reruns stay reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from mousetrail.trajectory import DEFAULT_SESSION_GAP_MS, ScoreClassBins

AUTO = "auto"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    trajectories: str = ""
    submissions: str = ""
    questions: str = ""
    out_dir: str = "out"
    input_format: str = "csv"
    window_size: int = 10
    density_threshold: float | str = AUTO
    score_bins: tuple[int, int, int] = (25, 50, 75)
    recent_window_days: int = 14
    sim_threshold: float = 0.8
    variant: str = "both"  # baseline | proposed | both
    model: str = "gbdt"  # lr | rf | gbdt
    n_runs: int = 10
    seed: int = 7
    test_fraction: float = 0.3
    smote_k: int = 5
    experiment_start_ms: int | str = AUTO
    session_gap_ms: int = DEFAULT_SESSION_GAP_MS
    jobs: int = 1
    grid_search: bool = False
    plots: bool = False
    grids: dict = field(default_factory=dict)

    def validate(self) -> "PipelineConfig":
        if self.variant not in ("baseline", "proposed", "both"):
            raise ConfigError(f"variant must be baseline/proposed/both, got {self.variant!r}")
        if self.model not in ("lr", "rf", "gbdt"):
            raise ConfigError(f"model must be lr/rf/gbdt, got {self.model!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction {self.test_fraction} outside (0, 1)")
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be >= 1, got {self.n_runs}")
        if self.window_size < 2:
            raise ConfigError(f"window_size must be >= 2, got {self.window_size}")
        if isinstance(self.density_threshold, str) and self.density_threshold != AUTO:
            raise ConfigError(f"density_threshold must be a float or 'auto'")
        if not isinstance(self.density_threshold, str) and not 0 <= self.density_threshold <= 1:
            raise ConfigError(f"density_threshold {self.density_threshold} outside [0, 1]")
        if not 0.0 <= self.sim_threshold <= 1.0:
            raise ConfigError(f"sim_threshold {self.sim_threshold} outside [0, 1]")
        try:
            ScoreClassBins(self.score_bins)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def require_inputs(self) -> None:
        for name in ("trajectories", "submissions", "questions"):
            path = getattr(self, name)
            if not path:
                raise ConfigError(f"missing required input path: {name}")
            if not Path(path).exists():
                raise ConfigError(f"{name} file not found: {path}")

    def bins(self) -> ScoreClassBins:
        return ScoreClassBins(self.score_bins)

    def variants(self) -> tuple[str, ...]:
        return ("baseline", "proposed") if self.variant == "both" else (self.variant,)

    def canonical_items(self) -> list[tuple[str, str]]:
        items = []
        for f in fields(self):
            if f.name == "grids":
                value = ";".join(
                    f"{k}:{','.join(str(v) for v in vs)}" for k, vs in sorted(self.grids.items())
                )
            else:
                value = getattr(self, f.name)
                if isinstance(value, tuple):
                    value = ",".join(str(v) for v in value)
            items.append((f.name, str(value)))
        return items

    def config_hash(self) -> str:
        # out_dir is where artifacts land, not part of the experiment identity
        payload = "\n".join(f"{k}={v}" for k, v in self.canonical_items()
                            if k != "out_dir")
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


_INT_KEYS = {"window_size", "recent_window_days", "n_runs", "seed", "smote_k",
             "session_gap_ms", "jobs"}
_FLOAT_KEYS = {"sim_threshold", "test_fraction"}
_BOOL_KEYS = {"grid_search", "plots"}
_PATH_KEYS = {"trajectories", "submissions", "questions", "out_dir"}
_STR_KEYS = {"variant", "model", "input_format"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def parse_config_value(key: str, text: str):
    text = text.strip()
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key} expects an integer, got {text!r}") from None
    if key in _FLOAT_KEYS:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key} expects a float, got {text!r}") from None
    if key in _BOOL_KEYS:
        return _parse_bool(text)
    if key == "density_threshold":
        if text.lower() == AUTO:
            return AUTO
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"density_threshold expects a float or 'auto'") from None
    if key == "experiment_start_ms":
        if text.lower() == AUTO:
            return AUTO
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"experiment_start_ms expects an integer or 'auto'") from None
    if key == "experiment_start_date":
        # YYYY-MM-DD, taken as midnight UTC
        from datetime import datetime, timezone

        try:
            stamp = datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        except ValueError:
            raise ConfigError("experiment_start_date expects YYYY-MM-DD") from None
        return int(stamp.timestamp() * 1000)
    if key == "score_bins":
        try:
            parts = tuple(int(p) for p in text.split(","))
        except ValueError:
            raise ConfigError(f"score_bins expects three integers, got {text!r}") from None
        if len(parts) != 3:
            raise ConfigError(f"score_bins expects three integers, got {text!r}")
        return parts
    if key in _PATH_KEYS or key in _STR_KEYS:
        return text
    raise ConfigError(f"unknown config key {key!r}")


def load_config_file(path) -> PipelineConfig:
    """Parse a key-value config file into a PipelineConfig."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    config = PipelineConfig()
    grids: dict[str, tuple] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key == "experiment_start_date":
            config = replace(config, experiment_start_ms=parse_config_value(key, value))
            continue
        if key.startswith("grid_"):
            param = key[len("grid_"):]
            try:
                grids[param] = tuple(float(v) if "." in v or "e" in v.lower() else int(v)
                                     for v in value.strip().split(","))
            except ValueError:
                raise ConfigError(f"{path}:{line_no}: bad grid values") from None
            continue
        config = replace(config, **{key: parse_config_value(key, value)})
    if grids:
        config = replace(config, grids=grids)
    return config.validate()


def derive_seed(master_seed: int, stage: str, index: int = 0) -> int:
    """Stable sub-seed from (seed, stage, index); documented derivation."""
    payload = f"{master_seed}:{stage}:{index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big") % (2 ** 63)
