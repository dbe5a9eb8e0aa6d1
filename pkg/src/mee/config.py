"""Run configuration: a typed key-value file with strict schema checking.

Unknown sections or keys are hard errors so a typo in an experiment file
cannot silently fall back to a default.
"""

from __future__ import annotations

import configparser
import importlib.resources
from dataclasses import dataclass
from pathlib import Path

from .evolution import MutationRates
from .physics import PhysicsParams
from .serialize import stable_hash
from .streams import BlobParams, StreamKind, StreamSet, WeatherState, default_layout
from .world import World, WorldConfig

BUILTIN_CORPUS = "builtin"


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class StreamSettings:
    sequence: str = "fibonacci"
    sequence_modulus: int = 211
    corpus: str = BUILTIN_CORPUS
    text_stride: int = 2
    temporal_freq_min: float = 0.08
    temporal_freq_max: float = 0.35
    temporal_amp_min: float = 0.8
    temporal_amp_max: float = 1.0
    temporal_drift_period: float = 1200.0
    # Blob geometry per kind. Bands (top, bottom row; -1 disables) keep the
    # kinds spatially segregated so niches are distinct regions of the map;
    # numeric and temporal share a band to form one mixed continuous niche.
    # Staggered blobs drift together, so each kind's coverage stays steady.
    blob_plateau: float = 2.0
    numeric_blobs: int = 3
    numeric_blob_radius: float = 4.5
    numeric_blob_speed: float = 0.06
    numeric_band_top: int = 36
    numeric_band_bottom: int = 44
    numeric_staggered: bool = True
    text_blobs: int = 7
    text_blob_radius: float = 6.5
    text_blob_speed: float = 0.06
    text_band_top: int = 14
    text_band_bottom: int = 28
    text_staggered: bool = True
    noise_blobs: int = 3
    noise_blob_radius: float = 3.5
    noise_blob_speed: float = 0.09
    noise_band_top: int = 2
    noise_band_bottom: int = 6
    noise_staggered: bool = True
    temporal_blobs: int = 3
    temporal_blob_radius: float = 4.5
    temporal_blob_speed: float = 0.06
    temporal_band_top: int = 36
    temporal_band_bottom: int = 44
    temporal_staggered: bool = True


@dataclass(frozen=True)
class RunSettings:
    snapshot_every: int = 500
    hash_every: int = 100
    baseline_ticks: int = 2000


@dataclass(frozen=True)
class AppConfig:
    world: WorldConfig
    physics: PhysicsParams
    rates: MutationRates
    streams: StreamSettings
    run: RunSettings

    def to_dict(self) -> dict:
        def plain(obj) -> dict:
            return {k: getattr(obj, k) for k in obj.__dataclass_fields__}

        return {
            "world": plain(self.world),
            "physics": plain(self.physics),
            "rates": plain(self.rates),
            "streams": plain(self.streams),
            "run": plain(self.run),
        }

    def config_hash(self) -> str:
        return stable_hash(self.to_dict())


_SCHEMA = {
    "world": WorldConfig,
    "physics": PhysicsParams,
    "rates": MutationRates,
    "streams": StreamSettings,
    "run": RunSettings,
}


def _coerce(section: str, key: str, raw: str, target_type: type):
    try:
        if target_type is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {target_type.__name__}") from exc


def default_config(master_seed: int = 0) -> AppConfig:
    return AppConfig(
        world=WorldConfig(master_seed=master_seed),
        physics=PhysicsParams(),
        rates=MutationRates(),
        streams=StreamSettings(),
        run=RunSettings(),
    )


def load_config(path: str | Path | None, seed_override: int | None = None) -> AppConfig:
    """Load a config file; None loads the packaged default configuration."""
    if path is None:
        text = importlib.resources.files("mee.data").joinpath("default.ini").read_text()
        source = "<builtin default>"
    else:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        text = p.read_text()
        source = str(p)

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc

    values: dict[str, dict] = {name: {} for name in _SCHEMA}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        cls = _SCHEMA[section]
        fields = cls.__dataclass_fields__
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            values[section][key] = _coerce(section, key, raw, _field_type(cls, key))

    try:
        cfg = AppConfig(
            world=WorldConfig(**values["world"]),
            physics=PhysicsParams(**values["physics"]),
            rates=MutationRates(**values["rates"]),
            streams=StreamSettings(**values["streams"]),
            run=RunSettings(**values["run"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if seed_override is not None:
        cfg = AppConfig(
            world=WorldConfig(**{**values["world"], "master_seed": seed_override}),
            physics=cfg.physics,
            rates=cfg.rates,
            streams=cfg.streams,
            run=cfg.run,
        )
    return cfg


def _field_type(cls: type, key: str) -> type:
    # Dataclass field types arrive as strings under `from __future__ import
    # annotations`; resolve the handful of primitives the schema uses.
    ann = cls.__dataclass_fields__[key].type
    if isinstance(ann, type):
        return ann
    return {"int": int, "float": float, "str": str, "bool": bool}[str(ann)]


def with_seed(cfg: AppConfig, master_seed: int) -> AppConfig:
    world = {k: getattr(cfg.world, k) for k in cfg.world.__dataclass_fields__}
    world["master_seed"] = master_seed
    return AppConfig(
        world=WorldConfig(**world),
        physics=cfg.physics,
        rates=cfg.rates,
        streams=cfg.streams,
        run=cfg.run,
    )


def load_corpus(settings: StreamSettings) -> bytes:
    if settings.corpus == BUILTIN_CORPUS:
        return importlib.resources.files("mee.data").joinpath("corpus.txt").read_bytes()
    p = Path(settings.corpus)
    if not p.exists():
        raise ConfigError(f"corpus file not found: {p}")
    data = p.read_bytes()
    if not data:
        raise ConfigError(f"corpus file is empty: {p}")
    return data


def make_stream_set(cfg: AppConfig) -> StreamSet:
    s = cfg.streams
    return StreamSet(
        default_layout(),
        corpus=load_corpus(s),
        sequence_name=s.sequence,
        sequence_modulus=s.sequence_modulus,
        temporal_freq_range=(s.temporal_freq_min, s.temporal_freq_max),
        temporal_amp_range=(s.temporal_amp_min, s.temporal_amp_max),
        temporal_drift_period=s.temporal_drift_period,
        text_stride=s.text_stride,
    )


def make_weather(cfg: AppConfig) -> WeatherState:
    s = cfg.streams

    def band(top: int, bottom: int) -> tuple[int, int] | None:
        return None if top < 0 or bottom < 0 else (top, bottom)

    blob_params = {
        StreamKind.NUMERIC: BlobParams(
            s.numeric_blobs, s.numeric_blob_radius, s.numeric_blob_speed,
            band=band(s.numeric_band_top, s.numeric_band_bottom),
            staggered=s.numeric_staggered,
        ),
        StreamKind.TEXT: BlobParams(
            s.text_blobs, s.text_blob_radius, s.text_blob_speed,
            band=band(s.text_band_top, s.text_band_bottom),
            staggered=s.text_staggered,
        ),
        StreamKind.NOISE: BlobParams(
            s.noise_blobs, s.noise_blob_radius, s.noise_blob_speed,
            band=band(s.noise_band_top, s.noise_band_bottom),
            staggered=s.noise_staggered,
        ),
        StreamKind.TEMPORAL: BlobParams(
            s.temporal_blobs, s.temporal_blob_radius, s.temporal_blob_speed,
            band=band(s.temporal_band_top, s.temporal_band_bottom),
            staggered=s.temporal_staggered,
        ),
    }
    return WeatherState.initialize(
        cfg.world.width, cfg.world.height, blob_params, cfg.world.master_seed,
        plateau=s.blob_plateau,
    )


def make_world(cfg: AppConfig) -> World:
    return World.create(cfg.world, cfg.physics, cfg.rates, make_stream_set(cfg), make_weather(cfg))
