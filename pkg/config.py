import json
import logging
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from params import InvalidParamsError, Params
from raster import RasterSpec
from utils import resolve_threads

logger = logging.getLogger(__name__)

Suite = Literal["degrees", "conjugacy", "fibration", "centralizer", "lemma-identity",
                "green-equations", "hyperplane", "fibonacci", "speed", "regions", "growth",
                "stable-manifold", "all"]
SymbolicMap = Literal["psi", "psi-inverse", "phi", "phi-inverse"]


class ConfigError(ValueError):
    """Raised when a run configuration cannot be loaded or validated."""


class RunConfig(BaseModel):
    """One serializable description of a run. Flags override file values."""
    model_config = ConfigDict(extra="forbid")

    q: int = Field(2, ge=2)
    d: int = Field(1, ge=1)
    alpha_re: float = 0.5
    alpha_im: float = 0.0
    point: List[Tuple[float, float]] = Field(default_factory=lambda: [(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)])
    max_steps: int = Field(40, ge=1)
    max_terms: int = Field(500, ge=1)
    budget: int = Field(2000, ge=1)
    target_error: float = Field(1e-6, gt=0.0)
    log_escape: float = Field(1e4, gt=0.0)
    n_max: int = Field(5, ge=1)
    suite: Suite = "all"
    symbolic_map: SymbolicMap = "psi"
    expect: Optional[str] = None
    samples: int = Field(100, ge=0)
    seed: int = 0
    alpha_moduli: List[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7, 0.9])
    extra_points: List[List[Tuple[float, float]]] = Field(default_factory=list)
    threads: int = Field(1, ge=1)
    out: Optional[str] = None
    plot: Optional[str] = None
    raster: RasterSpec = Field(default_factory=RasterSpec)

    @field_validator("point")
    @classmethod
    def _three_coordinates(cls, value):
        if len(value) != 3:
            raise ValueError(f"point needs 3 [re, im] pairs, got {len(value)}")
        return value

    @field_validator("extra_points")
    @classmethod
    def _three_coordinates_each(cls, value):
        for point in value:
            if len(point) != 3:
                raise ValueError(f"extra_points entries need 3 [re, im] pairs, got {len(point)}")
        return value

    @field_validator("alpha_moduli")
    @classmethod
    def _positive_moduli(cls, value):
        if any(not m > 0 for m in value):
            raise ValueError("alpha_moduli must be positive")
        return value

    def params(self) -> Params:
        return Params(self.q, self.d, complex(self.alpha_re, self.alpha_im))

    def point_complex(self) -> Tuple[complex, complex, complex]:
        z0, z1, z2 = (complex(re, im) for re, im in self.point)
        return z0, z1, z2

    def family(self) -> List[Params]:
        """Params for every entry of alpha_moduli, sharing the argument of alpha."""
        base = self.params()
        return [base.with_modulus(m) for m in self.alpha_moduli]


def _read_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object")
    return data


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from the JSON file, the thread environment variable and flag overrides,
    in increasing precedence.

    Raises:
        ConfigError: unreadable file, schema violation or invalid map parameters
    """
    data: Dict[str, Any] = _read_file(path) if path else {}
    try:
        data["threads"] = resolve_threads(int(data.get("threads", 1)))
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key.startswith("raster."):
            data.setdefault("raster", {})[key.split(".", 1)[1]] = value
        else:
            data[key] = value
    try:
        config = RunConfig.model_validate(data)
        config.params()
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    except InvalidParamsError as e:
        raise ConfigError(str(e)) from e
    logger.debug("Loaded config: %s", config.model_dump())
    return config


def sweep_family(config: RunConfig) -> List[Params]:
    """The sweep family; alpha_moduli is only checked against 0 < |alpha| <= 1 here."""
    try:
        return config.family()
    except InvalidParamsError as e:
        raise ConfigError(f"Invalid alpha_moduli: {e}") from e


def schema_json() -> str:
    return json.dumps(RunConfig.model_json_schema(), indent=2, sort_keys=True)
