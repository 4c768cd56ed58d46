"""Run configuration and the reproducibility manifest written next to every output."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from . import __version__
from .errors import SchemaError

PATH_FIELDS = (
    "ibb_roster",
    "wos_roster",
    "metrics",
    "registry",
    "aliases",
    "aggregates",
    "overrides",
    "indicators",
)


@dataclass(frozen=True)
class RunConfig:
    ibb_roster: Optional[str] = None
    wos_roster: Optional[str] = None
    metrics: Optional[str] = None
    registry: Optional[str] = None
    aliases: Optional[str] = None
    # precomputed country aggregates; bypasses roster/metrics/registry
    aggregates: Optional[str] = None
    overrides: Optional[str] = None
    indicators: Optional[str] = None

    ibb_list_year: int = 2020
    wos_list_year: int = 2014
    period: str = "2006-2009"
    counting_mode: str = "FRACTIONAL"
    field_label: str = "All sciences"
    use_record_country_on_unmatched: bool = True
    allow_unmatched: bool = False
    country_remap: dict[str, str] = field(default_factory=dict)

    x: float = 5.0
    y: float = 0.05
    y_grid: tuple[float, ...] = (0.5, 0.1, 0.05, 0.01)
    threshold: float = 30
    min_wos: int = 3
    pearson_exclusions: tuple[str, ...] = ("USA",)
    spearman_exclusions: tuple[str, ...] = ()
    filter_exclusions: tuple[str, ...] = ("CHN",)
    apply_comparison_filter: bool = False
    x_metric: str = "IBB_HCR"
    y_metric: str = "P_TOP5"
    global_total: Optional[float] = None
    correlate_rounded: bool = False
    indicator_year: int = 2019
    offline: bool = False

    def updated(self, values: Mapping[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise SchemaError(f"unknown configuration keys: {', '.join(unknown)}")
        clean = {}
        for key, value in values.items():
            if value is None:
                continue
            if isinstance(value, list):
                value = tuple(value)
            clean[key] = value
        return dataclasses.replace(self, **clean)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def load_config(path: Optional[str | Path], base: RunConfig = RunConfig()) -> RunConfig:
    if path is None:
        return base
    path = Path(path)
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(values, dict):
        raise SchemaError(f"{path}: configuration must be a JSON object")
    return base.updated(values)


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir: Path, command: str, config: RunConfig, outputs: list[Path], extra_inputs: Mapping[str, str] = {}
) -> Path:
    """Record configuration, input and output digests; contains no timestamps."""
    inputs = {}
    for name in PATH_FIELDS:
        p = getattr(config, name)
        if p is not None and Path(p).is_file():
            inputs[name] = {"path": p, "sha256": file_digest(p)}
    for name, p in extra_inputs.items():
        inputs[name] = {"path": str(p), "sha256": file_digest(p)}
    manifest = {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "inputs": inputs,
        "outputs": {p.name: file_digest(p) for p in sorted(outputs)},
    }
    path = out_dir / f"manifest_{command.replace('-', '_')}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
