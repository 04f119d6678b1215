"""Configuration management for opinion alignment runs."""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import orjson
import xxhash

from src.core.exceptions import ConfigurationError
from src.human.opinions import WeightingMode
from src.survey.schema import GroupRef

CONTEXT_KINDS = ("QA", "BIO", "PORTRAY")
INSTRUCTION_VARIANTS = ("none", "general", "example")
PROVIDER_KINDS = ("openai", "uniform", "fixed", "group_mimic")
DEFAULT_OUTPUT_DIR = Path("reports")
DEFAULT_CACHE_FILE = Path("cache") / "probes.jsonl"

# Steering groups of the original study, named as in the ATP demographic items.
DEFAULT_STEERING_GROUPS = [
    "CREGION:Northeast", "CREGION:South",
    "EDUCATION:College graduate/some postgrad", "EDUCATION:Less than high school",
    "SEX:Male", "SEX:Female",
    "POLIDEOLOGY:Liberal", "POLIDEOLOGY:Conservative", "POLIDEOLOGY:Moderate",
    "INCOME:$100,000 or more", "INCOME:Less than $30,000",
    "POLPARTY:Democrat", "POLPARTY:Republican",
    "RACE:Black", "RACE:White", "RACE:Asian", "RACE:Hispanic",
    "RELIG:Protestant", "RELIG:Jewish", "RELIG:Hindu", "RELIG:Atheist", "RELIG:Muslim",
]

GENERAL_INSTRUCTION = (
    "Please read the following multiple-choice question carefully "
    "and select ONE of the listed options."
)
EXAMPLE_INSTRUCTION = (
    "Please read the multiple-choice question below carefully and select ONE of the "
    "listed options. Here is an example of the format:\n"
    "Question: Question_1\n"
    "A. Option_1\n"
    "B. Option_2\n"
    "C. Option_3\n"
    "Answer: C"
)


@dataclass
class SteeringTemplates:
    """Versioned wording for steering contexts and instruction prefixes."""

    version: str = "1"
    qa: str = "Question: {attribute_question}\n{options}\nAnswer: {answer}"
    bio: str = "Below is a response I wrote to a question about my {attribute}: {group}."
    portray: str = "Answer the following question as if you were {group}."
    instruction_general: str = GENERAL_INSTRUCTION
    instruction_example: str = EXAMPLE_INSTRUCTION


@dataclass
class ModelSpec:
    """One model to probe and the provider that serves it."""

    name: str
    provider: str
    model_id: str = ""
    top_k: int = 100
    label_token: str = " {label}"
    base_url: Optional[str] = None
    api_key_env: Optional[str] = None
    requests_per_second: float = 0.0
    timeout: float = 30.0
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.provider not in PROVIDER_KINDS:
            raise ConfigurationError(
                f"Model {self.name}: unknown provider {self.provider!r} (expected one of {PROVIDER_KINDS})"
            )
        if not self.model_id:
            self.model_id = self.name
        if self.top_k < 1:
            raise ConfigurationError(f"Model {self.name}: top_k must be positive")
        if "{label}" not in self.label_token:
            raise ConfigurationError(f"Model {self.name}: label_token must contain '{{label}}'")
        if self.provider == "openai" and not self.api_key_env:
            raise ConfigurationError(f"Model {self.name}: HTTP providers need api_key_env")


@dataclass
class SurveySource:
    """A survey schema document and its microdata table."""

    schema: Path
    microdata: Path


@dataclass
class RobustnessConfig:
    """Option permutation and instruction-prefix re-runs."""

    permute: bool = False
    seed: int = 0
    instruction_variants: List[str] = field(default_factory=list)

    def __post_init__(self):
        for variant in self.instruction_variants:
            if variant not in ("general", "example"):
                raise ConfigurationError(f"Unknown instruction variant: {variant!r}")


@dataclass
class BaselinePair:
    """Two human groups compared on an optional topic."""

    first: str
    second: str
    topic: Optional[str] = None


@dataclass
class RetryPolicy:
    """Bounded exponential backoff for provider calls."""

    attempts: int = 3
    backoff_base: float = 1.0
    backoff_max: float = 30.0


@dataclass
class RunConfig:
    """Configuration object for an evaluation run."""

    surveys: List[SurveySource] = field(default_factory=list)
    models: List[ModelSpec] = field(default_factory=list)
    weighting_mode: WeightingMode = WeightingMode.SURVEY_WEIGHTS
    steering_groups: List[str] = field(default_factory=lambda: list(DEFAULT_STEERING_GROUPS))
    # None scores every group of every loaded attribute.
    report_groups: Optional[List[str]] = None
    contexts: List[str] = field(default_factory=lambda: list(CONTEXT_KINDS))
    robustness: RobustnessConfig = field(default_factory=RobustnessConfig)
    steering_subset_size: int = 500
    modal_temperature: float = 1e-3
    baseline_pairs: List[BaselinePair] = field(default_factory=list)
    templates: SteeringTemplates = field(default_factory=SteeringTemplates)
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    # Output settings
    output_dir: Path = DEFAULT_OUTPUT_DIR
    cache_path: Optional[Path] = None

    # Concurrency
    max_in_flight: int = 4

    # UI settings
    verbose: bool = False
    show_progress: bool = True

    def __post_init__(self):
        """Coerce plain values and validate the configuration."""
        self.output_dir = Path(self.output_dir)
        if self.cache_path is None:
            self.cache_path = self.output_dir / DEFAULT_CACHE_FILE
        self.cache_path = Path(self.cache_path)
        try:
            self.weighting_mode = WeightingMode(self.weighting_mode)
        except ValueError:
            raise ConfigurationError(f"Unknown weighting mode: {self.weighting_mode!r}")

        for source in self.surveys:
            for path in (source.schema, source.microdata):
                if not Path(path).exists():
                    raise ConfigurationError(f"Survey file not found: {path}")

        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"Duplicate model names: {names}")
        for context in self.contexts:
            if context not in CONTEXT_KINDS:
                raise ConfigurationError(f"Unknown steering context: {context!r}")
        for key in [*self.steering_groups, *(self.report_groups or [])]:
            try:
                GroupRef.parse(key)
            except ValueError as e:
                raise ConfigurationError(str(e))
        for pair in self.baseline_pairs:
            for key in (pair.first, pair.second):
                try:
                    GroupRef.parse(key)
                except ValueError as e:
                    raise ConfigurationError(str(e))
        if self.steering_subset_size < 1:
            raise ConfigurationError("steering_subset_size must be positive")
        if not self.modal_temperature > 0:
            raise ConfigurationError("modal_temperature must be positive")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be at least 1")
        if self.retry.attempts < 1:
            raise ConfigurationError("retry.attempts must be at least 1")

    def steering_refs(self) -> List[GroupRef]:
        return [GroupRef.parse(key) for key in self.steering_groups]

    def report_refs(self) -> Optional[List[GroupRef]]:
        if self.report_groups is None:
            return None
        return [GroupRef.parse(key) for key in self.report_groups]

    @classmethod
    def from_dict(
        cls,
        data: Mapping[str, Any],
        base_dir: Optional[Path] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> "RunConfig":
        """Build a config from a parsed document; relative paths resolve against ``base_dir``.

        ``overrides`` (command-line values, ``None`` meaning unset) replace
        document keys; mapping values are merged key by key. Moving the
        output directory does not move the probe cache: unless a cache path
        is given, it stays under the document's output directory.
        """
        base = Path(base_dir) if base_dir else Path(".")

        def resolve(value: Any) -> Path:
            path = Path(value)
            return path if path.is_absolute() else base / path

        data = dict(data)
        overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
        if "output_dir" in overrides and data.get("cache_path") is None and "cache_path" not in overrides:
            data["cache_path"] = Path(data.get("output_dir") or DEFAULT_OUTPUT_DIR) / DEFAULT_CACHE_FILE
        for key, value in overrides.items():
            if isinstance(value, Mapping) and isinstance(data.get(key), Mapping):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        try:
            if "surveys" in data:
                data["surveys"] = [
                    SurveySource(schema=resolve(s["schema"]), microdata=resolve(s["microdata"]))
                    for s in data["surveys"]
                ]
            if "models" in data:
                data["models"] = [ModelSpec(**m) for m in data["models"]]
            if "robustness" in data:
                data["robustness"] = RobustnessConfig(**data["robustness"])
            if "baseline_pairs" in data:
                data["baseline_pairs"] = [BaselinePair(**p) for p in data["baseline_pairs"]]
            if "templates" in data:
                data["templates"] = SteeringTemplates(**data["templates"])
            if "retry" in data:
                data["retry"] = RetryPolicy(**data["retry"])
            for key in ("output_dir", "cache_path"):
                if data.get(key) is not None:
                    data[key] = resolve(data[key])
            return cls(**data)
        except (TypeError, KeyError) as e:
            raise ConfigurationError(f"Invalid configuration: {e}")

    def fingerprint(self) -> Dict[str, Any]:
        """Settings that determine the outputs (UI flags and local paths excluded)."""
        data = asdict(self)
        for key in ("verbose", "show_progress", "output_dir", "cache_path", "max_in_flight"):
            data.pop(key)
        data["surveys"] = [
            {"schema": Path(s.schema).name, "microdata": Path(s.microdata).name} for s in self.surveys
        ]
        data["weighting_mode"] = self.weighting_mode.value
        return data

    def config_hash(self) -> str:
        payload = orjson.dumps(self.fingerprint(), option=orjson.OPT_SORT_KEYS)
        return xxhash.xxh3_128_hexdigest(payload)
