"""Pipeline configuration: dataclasses loaded from JSON (or TOML when a
tomllib/tomli module is importable).  Unknown keys are rejected so typos
surface immediately.  Provider credentials never live here; they come from
the environment.
"""

from __future__ import annotations

from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass
class InputConfig:
    path: str = "projects.jsonl"
    format: str = "jsonl"  # csv | jsonl


@dataclass
class ImagesConfig:
    source: str = "local"  # local | url
    dir: str = "images"  # for source=local: directory of image files
    max_side: int = 256
    concurrency: int = 8
    retries: int = 3


@dataclass
class AnnotationConfig:
    providers: list[str] = field(default_factory=lambda: ["fixture"])
    fixture_path: str | None = None
    tau: dict[str, float] = field(default_factory=dict)  # per-provider threshold
    concurrency: int = 4


@dataclass
class TextConfig:
    fulltext_dictionaries: list[str] = field(default_factory=list)
    blurb_dictionaries: list[str] = field(default_factory=list)


@dataclass
class ExtractionToggles:
    slic_k: int = 100
    slic_compactness: float = 10.0
    gamma: float = 50.0
    max_side: int = 256
    cascade_path: str | None = None  # default: bundled cascade
    quality_model_path: str | None = None  # default: bundled model
    enable_color: bool = True
    enable_composition: bool = True
    enable_figure_ground: bool = True
    enable_faces: bool = True


@dataclass
class GBTConfig:
    eta_grid: list[float] = field(default_factory=lambda: [0.1, 0.3])
    max_depth_grid: list[int] = field(default_factory=lambda: [3])
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    n_rounds: int = 300
    early_stopping_rounds: int = 20
    use_imputed: bool = False  # KNN-imputed inputs instead of native routing


@dataclass
class BARTConfig:
    m: int = 50
    k: float = 2.0
    nu: float = 3.0
    q: float = 0.9
    alpha: float = 0.95
    beta_depth: float = 2.0
    n_burn: int = 250
    n_post: int = 500
    cv: bool = False
    m_grid: list[int] = field(default_factory=lambda: [50, 200])
    k_grid: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0])


@dataclass
class ModelsConfig:
    train_fraction: float = 0.8
    cv_folds: int = 10
    impute_k: int = 5
    sets: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    learners: list[str] = field(default_factory=lambda: ["ridge", "lasso", "gbt", "bart"])
    ridge_lambdas: int = 50  # log-spaced grid size over [1e-4, 1e4]
    lasso_lambdas: int = 50  # log-spaced fractions of lambda_max over [1e-4, 1]
    gbt: GBTConfig = field(default_factory=GBTConfig)
    bart: BARTConfig = field(default_factory=BARTConfig)


@dataclass
class InterpretConfig:
    n_replicates: int = 10
    pdp_variables: list[str] = field(default_factory=lambda: ["n_images", "n_videos"])
    importance_set: int = 5
    importance_model: str = "bart"


@dataclass
class PipelineConfig:
    input: InputConfig = field(default_factory=InputConfig)
    images: ImagesConfig = field(default_factory=ImagesConfig)
    annotation: AnnotationConfig = field(default_factory=AnnotationConfig)
    text: TextConfig = field(default_factory=TextConfig)
    extraction: ExtractionToggles = field(default_factory=ExtractionToggles)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    interpret: InterpretConfig = field(default_factory=InterpretConfig)
    cache_dir: str = "cache"
    output_dir: str = "out"
    seed: int = 0
    base_dir: str = "."  # set to the config file's directory on load

    def resolve(self, rel) -> Path:
        """Resolve a config-relative path against the config file location."""
        q = Path(rel)
        return q if q.is_absolute() else Path(self.base_dir) / q


def _build(cls, obj, path="config"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object, got {type(obj).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(obj) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in obj.items():
        target = _DATACLASS_FIELDS.get((cls, name))
        if target is not None:
            kwargs[name] = _build(target, value, f"{path}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_DATACLASS_FIELDS = {}
for _cls in (PipelineConfig, ModelsConfig):
    for _f in fields(_cls):
        if _f.default_factory is MISSING:  # type: ignore[comparison-overlap]
            continue
        _default = _f.default_factory()
        if is_dataclass(_default):
            _DATACLASS_FIELDS[(_cls, _f.name)] = type(_default)


def load_config(path) -> PipelineConfig:
    """Load a JSON (``.json``) or TOML (``.toml``) config file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text(encoding="utf-8")
    if p.suffix == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            try:
                import tomli as tomllib  # type: ignore[no-redef]
            except ModuleNotFoundError as exc:
                raise ConfigError(
                    "TOML configs need Python >= 3.11 or the tomli package; "
                    "use JSON instead"
                ) from exc
        obj = tomllib.loads(text)
    else:
        import json

        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    cfg = _build(PipelineConfig, obj)
    cfg.base_dir = str(p.parent)
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if cfg.input.format not in ("csv", "jsonl"):
        raise ConfigError(f"input.format must be csv or jsonl, got {cfg.input.format}")
    if cfg.images.source not in ("local", "url"):
        raise ConfigError(f"images.source must be local or url, got {cfg.images.source}")
    for prov in cfg.annotation.providers:
        if prov not in ("fixture", "google", "azure"):
            raise ConfigError(f"unknown annotation provider {prov!r}")
    if "fixture" in cfg.annotation.providers and not cfg.annotation.fixture_path:
        raise ConfigError("annotation.fixture_path required for the fixture provider")
    if not (0.0 < cfg.models.train_fraction < 1.0):
        raise ConfigError("models.train_fraction must be in (0, 1)")
    bad_sets = [s for s in cfg.models.sets if s not in (1, 2, 3, 4, 5)]
    if bad_sets:
        raise ConfigError(f"models.sets entries must be 1..5, got {bad_sets}")
    bad = [l for l in cfg.models.learners if l not in ("ridge", "lasso", "gbt", "bart")]
    if bad:
        raise ConfigError(f"unknown learners: {', '.join(bad)}")
