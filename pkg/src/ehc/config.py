"""Flat ``key = value`` configuration with dotted keys.

Lines starting with ``#`` are comments, and so is `` #...`` after an
unquoted value. Values are coerced to the type of the key's default;
quote a string to keep a literal ``#`` in it. Relative paths are resolved
against the config file's directory.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

from ehc.errors import ConfigError
from ehc.experience import DEFAULT_CATEGORIES

MODES = ("baseline", "hmr", "hmr_toel")

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    "tasks_per_category": 10,
    "capacity": 16,
    "k": 3,
    "theta": 0.7,
    "T": 3,
    "L": 3,
    "insight_initial_weight": 2,
    "insight_max_per_category": 20,
    "rounds": 2,
    "max_pairs": 8,
    "max_groups": 4,
    "examples_per_category": 5,
    "mode": "hmr_toel",
    "deep_theta_gate": False,
    "categories": ",".join(DEFAULT_CATEGORIES),
    "embedder": "reference",
    "embedder.dim": 256,
    "embedder.endpoint": "",
    "embedder.model": "",
    "seed_corpus": "",
    "store_path": "",
    "report_path": "ehc_report_{mode}.txt",
    "label_template": "",
    "trajectory_template": "",
    "reflection_template": "",
    "insight_template": "",
    "inference_template": "",
    "llm.backend": "scripted",
    "llm.endpoint": "",
    "llm.model": "",
    "llm.script_path": "",
    "llm.temperature": 0.0,
    "llm.max_tokens": 512,
    "llm.retries": 2,
    "llm.backoff": 0.5,
    "llm.timeout": 60.0,
}

PATH_KEYS = {
    "seed_corpus",
    "store_path",
    "report_path",
    "label_template",
    "trajectory_template",
    "reflection_template",
    "insight_template",
    "inference_template",
    "llm.script_path",
}

_QUOTED = re.compile(r"""^(["'])(.*?)\1\s*(?:#.*)?$""")
_TRAILING_COMMENT = re.compile(r"\s+#.*$")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str, where: str) -> Any:
    default = DEFAULTS[key]
    text = raw.strip()
    quoted = _QUOTED.match(text)
    text = quoted.group(2) if quoted else _TRAILING_COMMENT.sub("", text)
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: key {key!r}: {exc}") from None
    return text


def parse_config(text: str, source: str = "<config>") -> dict[str, Any]:
    values: dict[str, Any] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        where = f"{source}:{n}"
        if not sep:
            raise ConfigError(f"{where}: expected 'key = value', got {raw!r}")
        if key not in DEFAULTS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        values[key] = _coerce(key, value, where)
    return values


def load_config(path: Optional[str | Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> "BenchmarkConfig":
    values = dict(DEFAULTS)
    base = Path.cwd()
    source = "<defaults>"
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text("utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        base = p.resolve().parent
        source = str(p)
        parsed = parse_config(text, source)
        for key, val in parsed.items():
            if key in PATH_KEYS and val and not Path(val).is_absolute():
                val = str(base / val)
            values[key] = val
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = val
    return BenchmarkConfig.from_mapping(values, source)


@dataclass
class BenchmarkConfig:
    seed: int = 42
    tasks_per_category: int = 10
    capacity: int = 16
    k: int = 3
    theta: float = 0.7
    T: int = 3
    L: int = 3
    W0: int = 2
    insight_max_per_category: int = 20
    rounds: int = 2
    max_pairs: int = 8
    max_groups: int = 4
    examples_per_category: int = 5
    mode: str = "hmr_toel"
    deep_theta_gate: bool = False
    categories: tuple[str, ...] = DEFAULT_CATEGORIES
    embedder: str = "reference"
    embedder_dim: int = 256
    embedder_endpoint: str = ""
    embedder_model: str = ""
    seed_corpus: str = ""
    store_path: str = ""
    report_path: str = "ehc_report_{mode}.txt"
    templates: dict[str, str] = field(default_factory=dict)
    llm_backend: str = "scripted"
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_script_path: str = ""
    llm_temperature: float = 0.0
    llm_max_tokens: int = 512
    llm_retries: int = 2
    llm_backoff: float = 0.5
    llm_timeout: float = 60.0
    source: str = "<defaults>"

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        where = self.source

        def need(cond: bool, key: str, msg: str) -> None:
            if not cond:
                raise ConfigError(f"{where}: key {key!r}: {msg}")

        need(self.tasks_per_category >= 1, "tasks_per_category", "must be >= 1")
        need(self.capacity >= 2, "capacity", "must be >= 2")
        need(self.k >= 1, "k", "must be >= 1")
        need(-1.0 <= self.theta <= 1.0, "theta", "must lie in [-1, 1]")
        need(self.T >= 1, "T", "must be >= 1")
        need(self.L >= 1, "L", "must be >= 1")
        need(self.W0 >= 1, "insight_initial_weight", "must be >= 1")
        need(self.insight_max_per_category >= 1, "insight_max_per_category", "must be >= 1")
        need(self.rounds >= 1, "rounds", "must be >= 1")
        need(self.max_pairs >= 0, "max_pairs", "must be >= 0")
        need(self.max_groups >= 0, "max_groups", "must be >= 0")
        need(self.examples_per_category >= 0, "examples_per_category", "must be >= 0")
        need(self.mode in MODES, "mode", f"must be one of {MODES}")
        need(len(self.categories) >= 2, "categories", "need at least two labels")
        need(self.embedder in ("reference", "external"), "embedder", "must be 'reference' or 'external'")
        need(self.embedder_dim >= 1, "embedder.dim", "must be >= 1")
        need(self.llm_backend in ("scripted", "http"), "llm.backend", "must be 'scripted' or 'http'")
        need(self.llm_retries >= 0, "llm.retries", "must be >= 0")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], source: str = "<config>") -> "BenchmarkConfig":
        v = {**DEFAULTS, **values}
        cats = v["categories"]
        if isinstance(cats, str):
            cats = tuple(c.strip() for c in cats.split(",") if c.strip())
        return cls(
            seed=v["seed"],
            tasks_per_category=v["tasks_per_category"],
            capacity=v["capacity"],
            k=v["k"],
            theta=v["theta"],
            T=v["T"],
            L=v["L"],
            W0=v["insight_initial_weight"],
            insight_max_per_category=v["insight_max_per_category"],
            rounds=v["rounds"],
            max_pairs=v["max_pairs"],
            max_groups=v["max_groups"],
            examples_per_category=v["examples_per_category"],
            mode=v["mode"],
            deep_theta_gate=v["deep_theta_gate"],
            categories=tuple(cats),
            embedder=v["embedder"],
            embedder_dim=v["embedder.dim"],
            embedder_endpoint=v["embedder.endpoint"],
            embedder_model=v["embedder.model"],
            seed_corpus=v["seed_corpus"],
            store_path=v["store_path"],
            report_path=v["report_path"],
            templates={
                name: v[f"{name}_template"]
                for name in ("label", "trajectory", "reflection", "insight", "inference")
            },
            llm_backend=v["llm.backend"],
            llm_endpoint=v["llm.endpoint"],
            llm_model=v["llm.model"],
            llm_script_path=v["llm.script_path"],
            llm_temperature=v["llm.temperature"],
            llm_max_tokens=v["llm.max_tokens"],
            llm_retries=v["llm.retries"],
            llm_backoff=v["llm.backoff"],
            llm_timeout=v["llm.timeout"],
            source=source,
        )

    def replace(self, **changes: Any) -> "BenchmarkConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return BenchmarkConfig(**data)
