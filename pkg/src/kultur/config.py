"""Pipeline configuration: one JSON file plus command-line overrides.

Relative paths in the file resolve against the file's own directory, so a
config can travel with its fixtures. Credentials are never part of the
config; clients name an environment variable instead.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import GatewayPolicy
from .sampling import DEFAULT_T_LANG, DEFAULT_T_REGION
from .select import RegionSpec, SelectionConfig

logger = logging.getLogger(__name__)

# Starter set of culture-linking properties: place/attribution links that tie
# an entity to a country or region (used for selection) plus a few attribute
# properties worth asking about (inception, coordinates, heritage status).
# Production configs are expected to supply their own curated list.
DEFAULT_PROPERTIES = [
    "P17",    # country
    "P19",    # place of birth
    "P20",    # place of death
    "P27",    # country of citizenship
    "P30",    # continent
    "P36",    # capital
    "P131",   # located in administrative unit
    "P135",   # movement
    "P136",   # genre
    "P140",   # religion
    "P149",   # architectural style
    "P170",   # creator
    "P175",   # performer
    "P186",   # made from material
    "P276",   # location
    "P361",   # part of
    "P463",   # member of
    "P495",   # country of origin
    "P571",   # inception
    "P625",   # coordinate location
    "P641",   # sport
    "P706",   # located in terrain feature
    "P737",   # influenced by
    "P800",   # notable work
    "P1303",  # instrument
    "P1435",  # heritage designation
    "P2048",  # height
]

DEFAULT_MCQ_RATIO = 0.6


class ConfigError(ValueError):
    """The configuration file is missing or inconsistent."""


@dataclass
class ClientSpec:
    """One named model endpoint; the key is read from the environment."""

    name: str
    endpoint: str
    model: str
    api_key_env: str = "KULTUR_API_KEY"


@dataclass
class RouteRule:
    """Routes (region, language) to a client name; "*" matches anything."""

    region: str
    language: str
    client: str

    def matches(self, region: str, language: str) -> bool:
        return self.region in ("*", region) and self.language in ("*", language)


@dataclass
class SamplingConfig:
    t_region: float = DEFAULT_T_REGION
    t_lang: float = DEFAULT_T_LANG
    budget: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.t_region <= 0 or self.t_lang <= 0:
            raise ConfigError("sampling temperatures must be positive")
        if self.budget < 0:
            raise ConfigError("sampling budget must be non-negative")


@dataclass
class ImagesConfig:
    max_per_entity: int = 3
    listing_store: Path | None = None
    endpoint: str = "https://commons.wikimedia.org/w/api.php"
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.max_per_entity < 1:
            raise ConfigError("images.max_per_entity must be at least 1")


@dataclass
class PipelineConfig:
    workdir: Path
    selection: SelectionConfig
    dump: Path | None = None
    templates: Path | None = None
    images: ImagesConfig = field(default_factory=ImagesConfig)
    gateway_policy: GatewayPolicy = field(default_factory=GatewayPolicy)
    gateway_store: Path | None = None
    clients: dict[str, ClientSpec] = field(default_factory=dict)
    routing: list[RouteRule] = field(default_factory=list)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    mcq_ratio: float = DEFAULT_MCQ_RATIO
    language_names: dict[str, str] = field(default_factory=dict)

    def resolve_client(self, region: str, language: str) -> ClientSpec:
        for rule in self.routing:
            if rule.matches(region, language):
                if rule.client not in self.clients:
                    raise ConfigError(f"routing names unknown client {rule.client!r}")
                return self.clients[rule.client]
        if "default" in self.clients:
            return self.clients["default"]
        raise ConfigError(f"no client routed for region={region!r} language={language!r}")


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def _selection_from_obj(obj: dict) -> SelectionConfig:
    raw_regions = obj.get("regions")
    if not isinstance(raw_regions, dict) or not raw_regions:
        raise ConfigError("config requires a non-empty 'regions' object")
    regions = []
    for name, anchors in raw_regions.items():
        if isinstance(anchors, str):
            anchors = [anchors]
        if not isinstance(anchors, list) or not anchors:
            raise ConfigError(f"region {name!r} needs at least one anchor QID")
        try:
            regions.append(RegionSpec(name=name, anchors=frozenset(anchors)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    properties = obj.get("properties") or list(DEFAULT_PROPERTIES)
    languages = obj.get("languages")
    if not isinstance(languages, list) or not languages:
        raise ConfigError("config requires a non-empty 'languages' list")
    try:
        return SelectionConfig(regions=regions, properties=list(properties),
                               languages=list(languages))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike) -> PipelineConfig:
    """Parse and validate a configuration file."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})")
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.resolve().parent

    selection = _selection_from_obj(obj)

    img_obj = obj.get("images", {})
    images = ImagesConfig(
        max_per_entity=img_obj.get("max_per_entity", 3),
        listing_store=_resolve(base, img_obj.get("listing_store")),
        endpoint=img_obj.get("endpoint", ImagesConfig.endpoint),
        max_in_flight=img_obj.get("max_in_flight", 4),
    )

    gw_obj = obj.get("gateway", {})
    try:
        policy = GatewayPolicy(
            mode=gw_obj.get("mode", "replay"),
            max_in_flight=gw_obj.get("max_in_flight", 4),
            max_retries=gw_obj.get("max_retries", 3),
            backoff_initial=gw_obj.get("backoff_initial", 0.5),
            backoff_multiplier=gw_obj.get("backoff_multiplier", 2.0),
        )
    except ValueError as exc:
        raise ConfigError(f"gateway: {exc}") from exc

    clients: dict[str, ClientSpec] = {}
    for name, spec in gw_obj.get("clients", {}).items():
        clients[name] = ClientSpec(
            name=name,
            endpoint=spec.get("endpoint", ""),
            model=spec.get("model", ""),
            api_key_env=spec.get("api_key_env", "KULTUR_API_KEY"),
        )
    routing = [
        RouteRule(
            region=rule.get("region", "*"),
            language=rule.get("language", "*"),
            client=rule["client"],
        )
        for rule in gw_obj.get("routing", [])
    ]
    for rule in routing:
        if rule.client not in clients:
            raise ConfigError(f"routing references unknown client {rule.client!r}")

    s_obj = obj.get("sampling", {})
    sampling = SamplingConfig(
        t_region=float(s_obj.get("t_region", DEFAULT_T_REGION)),
        t_lang=float(s_obj.get("t_lang", DEFAULT_T_LANG)),
        budget=int(s_obj.get("budget", 1000)),
        seed=int(s_obj.get("seed", 0)),
    )

    mcq_ratio = float(obj.get("mcq", {}).get("ratio", DEFAULT_MCQ_RATIO))
    if not 0.0 <= mcq_ratio <= 1.0:
        raise ConfigError("mcq.ratio must be within [0, 1]")

    workdir = _resolve(base, obj.get("workdir", "workdir"))
    assert workdir is not None

    return PipelineConfig(
        workdir=workdir,
        selection=selection,
        dump=_resolve(base, obj.get("dump")),
        templates=_resolve(base, obj.get("templates")),
        images=images,
        gateway_policy=policy,
        gateway_store=_resolve(base, gw_obj.get("store")),
        clients=clients,
        routing=routing,
        sampling=sampling,
        mcq_ratio=mcq_ratio,
        language_names=dict(obj.get("language_names", {})),
    )
