"""The raw data streams and their spatial weather.

Four generators feed the ecology: structured numeric sequences, natural
language text as raw bits, incompressible noise bits, and drifting
sinusoids. Values leave this module exactly as generated; there is no
tokenization, embedding, or feature extraction anywhere in the engine.
Spatial intensity blobs drift across the torus so no cell's data
distribution is stationary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rngs import TAG_WEATHER, noise_bits, substream

INTENSITY_FLOOR = 0.05


class StreamKind(enum.Enum):
    NUMERIC = "numeric"
    TEXT = "text"
    NOISE = "noise"
    TEMPORAL = "temporal"


DISCRETE_KINDS = frozenset({StreamKind.TEXT, StreamKind.NOISE})


@dataclass(frozen=True)
class StreamConfig:
    """One stream's slice of the sensory channel space ([start, stop))."""

    kind: StreamKind
    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start

    @property
    def discrete(self) -> bool:
        return self.kind in DISCRETE_KINDS


def default_layout() -> tuple[StreamConfig, ...]:
    """Channel widths: numeric 4, text 16, noise 8, temporal 4."""
    return (
        StreamConfig(StreamKind.NUMERIC, 0, 4),
        StreamConfig(StreamKind.TEXT, 4, 20),
        StreamConfig(StreamKind.NOISE, 20, 28),
        StreamConfig(StreamKind.TEMPORAL, 28, 32),
    )


def validate_layout(configs: tuple[StreamConfig, ...]) -> int:
    """Channel ranges must be disjoint and cover [0, W_s). Returns W_s."""
    claimed: dict[int, StreamKind] = {}
    for cfg in configs:
        if cfg.stop <= cfg.start:
            raise ValueError(f"empty channel range for {cfg.kind}")
        for c in range(cfg.start, cfg.stop):
            if c in claimed:
                raise ValueError(f"channel {c} claimed by both {claimed[c]} and {cfg.kind}")
            claimed[c] = cfg.kind
    width = max(claimed) + 1
    if set(claimed) != set(range(width)):
        raise ValueError("stream channel ranges leave gaps")
    return width


# -- sequence generators -----------------------------------------------------


def fibonacci_mod(count: int, modulus: int) -> np.ndarray:
    """First `count` Fibonacci values reduced by `modulus` (starts 1, 1, 2, ...)."""
    out = np.empty(count, dtype=np.int64)
    a, b = 1, 1
    for i in range(count):
        out[i] = a
        a, b = b, (a + b) % modulus
    return out


def primes_mod(count: int, modulus: int) -> np.ndarray:
    """First `count` primes reduced by `modulus`."""
    out = np.empty(count, dtype=np.int64)
    found = 0
    candidate = 2
    primes: list[int] = []
    while found < count:
        is_p = all(candidate % p for p in primes if p * p <= candidate)
        if is_p:
            primes.append(candidate)
            out[found] = candidate % modulus
            found += 1
        candidate += 1
    return out


_SEQUENCES = {"fibonacci": fibonacci_mod, "primes": primes_mod}


class StreamSet:
    """All stream generators for one run, advanced by tick number.

    Every window is a pure function of (tick, master_seed), so no generator
    state needs to survive a snapshot except the text cursor's wrap count.
    """

    def __init__(
        self,
        configs: tuple[StreamConfig, ...] | None = None,
        *,
        corpus: bytes = b"",
        sequence_name: str = "fibonacci",
        sequence_modulus: int = 211,
        temporal_freq_range: tuple[float, float] = (0.08, 0.35),
        temporal_amp_range: tuple[float, float] = (0.8, 1.0),
        temporal_drift_period: float = 1200.0,
        text_stride: int = 2,
    ) -> None:
        self.configs = configs if configs is not None else default_layout()
        self.width = validate_layout(self.configs)
        self.corpus = corpus
        self.sequence_name = sequence_name
        self.sequence_modulus = sequence_modulus
        self.temporal_freq_range = temporal_freq_range
        self.temporal_amp_range = temporal_amp_range
        self.temporal_drift_period = temporal_drift_period
        self.text_stride = text_stride
        self._seq_cache: np.ndarray | None = None
        self._seq_prefix_max: np.ndarray | None = None
        for cfg in self.configs:
            if cfg.kind is StreamKind.TEXT and not corpus:
                raise ValueError("text stream configured without a corpus")

    # Sensory channels are the stream channels; emission-signal channels are
    # appended after them by the world.
    def discrete_mask(self) -> np.ndarray:
        mask = np.zeros(self.width, dtype=bool)
        for cfg in self.configs:
            mask[cfg.start : cfg.stop] = cfg.discrete
        return mask

    def kind_of_channel(self) -> list[StreamKind]:
        kinds: list[StreamKind | None] = [None] * self.width
        for cfg in self.configs:
            for c in range(cfg.start, cfg.stop):
                kinds[c] = cfg.kind
        return kinds  # type: ignore[return-value]

    def config_for(self, kind: StreamKind) -> StreamConfig | None:
        for cfg in self.configs:
            if cfg.kind is kind:
                return cfg
        return None

    def _sequence(self, upto: int) -> tuple[np.ndarray, np.ndarray]:
        if self._seq_cache is None or len(self._seq_cache) < upto:
            gen = _SEQUENCES[self.sequence_name]
            values = gen(max(upto, 4096), self.sequence_modulus)
            self._seq_cache = values
            self._seq_prefix_max = np.maximum.accumulate(values)
        return self._seq_cache, self._seq_prefix_max

    # -- per-kind base windows (global cursor, full intensity) -------------

    def numeric_window(self, cfg: StreamConfig, tick: int) -> np.ndarray:
        seq, prefix_max = self._sequence(tick + cfg.width + 1)
        vals = seq[tick : tick + cfg.width].astype(np.float64)
        running_max = float(prefix_max[tick + cfg.width - 1])
        return vals / max(running_max, 1.0)

    def text_window(self, cfg: StreamConfig, tick: int) -> np.ndarray:
        nbytes = cfg.width // 8
        pos = (tick * self.text_stride) % len(self.corpus)
        raw = bytes(self.corpus[(pos + i) % len(self.corpus)] for i in range(nbytes))
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        return bits[: cfg.width].astype(np.float64)

    def text_wrapped(self, tick: int) -> bool:
        return tick * self.text_stride >= len(self.corpus)

    def noise_window(self, cfg: StreamConfig, tick: int, master_seed: int) -> np.ndarray:
        return noise_bits(master_seed, tick, cfg.width)

    def temporal_window(self, cfg: StreamConfig, tick: int) -> np.ndarray:
        f_min, f_max = self.temporal_freq_range
        a_min, a_max = self.temporal_amp_range
        period = self.temporal_drift_period
        f_mid = 0.5 * (f_min + f_max)
        f_amp = 0.5 * (f_max - f_min)
        # Phase is the closed-form integral of the drifting frequency, so a
        # resumed run recomputes it exactly.
        theta = 2.0 * math.pi * f_mid * tick + f_amp * period * (1.0 - math.cos(2.0 * math.pi * tick / period))
        amp = a_min + (a_max - a_min) * (0.5 + 0.5 * math.cos(2.0 * math.pi * tick / period))
        offsets = np.arange(cfg.width) * (math.pi / 4.0)
        return 0.5 + 0.5 * amp * np.sin(theta + offsets)

    def base_window(self, cfg: StreamConfig, tick: int, master_seed: int) -> np.ndarray:
        if cfg.kind is StreamKind.NUMERIC:
            return self.numeric_window(cfg, tick)
        if cfg.kind is StreamKind.TEXT:
            return self.text_window(cfg, tick)
        if cfg.kind is StreamKind.NOISE:
            return self.noise_window(cfg, tick, master_seed)
        return self.temporal_window(cfg, tick)

    def base_windows(self, tick: int, master_seed: int) -> dict[StreamConfig, np.ndarray]:
        return {cfg: self.base_window(cfg, tick, master_seed) for cfg in self.configs}

    def layout_manifest(self) -> list[dict]:
        return [
            {"kind": cfg.kind.value, "start": cfg.start, "stop": cfg.stop, "discrete": cfg.discrete}
            for cfg in self.configs
        ]


# -- weather: drifting intensity blobs ---------------------------------------


@dataclass
class BlobParams:
    count: int = 2
    radius: float = 7.0
    speed: float = 0.08
    strength: float = 1.0
    # Optional horizontal band [top, bottom) confining this kind's blobs.
    # Banded blobs drift along x only, so kinds can be kept spatially
    # segregated by design.
    band: tuple[int, int] | None = None
    # Staggered blobs start evenly spaced along x and share one drift
    # velocity, so the kind's total coverage never collapses into a single
    # bunched clump. The texture still moves; the food supply stays steady.
    staggered: bool = False


class WeatherState:
    """Per-kind intensity blobs drifting over the torus with wraparound."""

    def __init__(
        self, width: int, height: int, kinds: list[StreamKind], plateau: float = 2.0
    ) -> None:
        self.width = width
        self.height = height
        self.kinds = kinds
        # Falloff shape: intensity = strength * min(1, plateau * (1 - d/r)).
        # plateau 1 is a plain linear cone; larger values flatten the core
        # while still reaching exactly zero at the radius.
        self.plateau = plateau
        self.blobs: dict[StreamKind, dict[str, np.ndarray]] = {}

    @staticmethod
    def initialize(
        width: int,
        height: int,
        blob_params: dict[StreamKind, BlobParams],
        master_seed: int,
        plateau: float = 2.0,
    ) -> "WeatherState":
        state = WeatherState(width, height, list(blob_params), plateau)
        for idx, (kind, bp) in enumerate(sorted(blob_params.items(), key=lambda kv: kv[0].value)):
            rng = substream(master_seed, TAG_WEATHER, idx)
            n = bp.count
            if bp.staggered:
                spacing = width / n
                x = (np.arange(n) + rng.uniform(0.0, 0.3, n)) * spacing
                speed = np.full(n, bp.speed)
            else:
                x = rng.uniform(0.0, width, n)
                speed = bp.speed * rng.uniform(0.5, 1.6, n)
            if bp.band is not None:
                top, bottom = bp.band
                y = rng.uniform(float(top), float(bottom), n)
                if bp.staggered:
                    vx = speed.copy()
                else:
                    direction = np.where(rng.random(n) < 0.5, -1.0, 1.0)
                    vx = speed * direction
                vy = np.zeros(n)
            else:
                angle = rng.uniform(0.0, 2.0 * math.pi, n)
                y = rng.uniform(0.0, height, n)
                vx = speed * np.cos(angle)
                vy = speed * np.sin(angle)
            state.blobs[kind] = {
                "x": x,
                "y": y,
                "vx": vx,
                "vy": vy,
                "radius": np.full(n, bp.radius),
                "strength": np.full(n, bp.strength),
            }
        return state

    def advance(self) -> None:
        for blob in self.blobs.values():
            blob["x"] = (blob["x"] + blob["vx"]) % self.width
            blob["y"] = (blob["y"] + blob["vy"]) % self.height

    def intensity_field(self, kind: StreamKind) -> np.ndarray:
        """(height, width) intensity: max over blobs of a radial falloff that
        reaches exactly zero at the blob radius."""
        field = np.zeros((self.height, self.width))
        blob = self.blobs.get(kind)
        if blob is None:
            return field
        ys = np.arange(self.height)[:, None]
        xs = np.arange(self.width)[None, :]
        for x, y, r, s in zip(blob["x"], blob["y"], blob["radius"], blob["strength"]):
            dx = np.abs(xs - x)
            dx = np.minimum(dx, self.width - dx)
            dy = np.abs(ys - y)
            dy = np.minimum(dy, self.height - dy)
            d = np.sqrt(dx * dx + dy * dy)
            falloff = s * np.minimum(1.0, self.plateau * np.maximum(0.0, 1.0 - d / r))
            np.maximum(field, falloff, out=field)
        return field

    def to_json_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "plateau": self.plateau,
            "blobs": {
                kind.value: {name: arr.tolist() for name, arr in blob.items()}
                for kind, blob in self.blobs.items()
            },
        }

    @staticmethod
    def from_json_dict(data: dict) -> "WeatherState":
        kinds = [StreamKind(k) for k in data["blobs"]]
        state = WeatherState(
            int(data["width"]),
            int(data["height"]),
            kinds,
            float(data.get("plateau", 2.0)),
        )
        for kind_name, blob in data["blobs"].items():
            state.blobs[StreamKind(kind_name)] = {
                name: np.asarray(vals, dtype=np.float64) for name, vals in blob.items()
            }
        return state


def scale_continuous(raw: np.ndarray, intensity: float) -> np.ndarray:
    """Attenuate a continuous window around mid-range by local intensity.

    A weak signal carries less amplitude, not a spurious bias toward zero.
    Discrete channels are presence-gated instead: bits stay bits.
    """
    return 0.5 + (raw - 0.5) * intensity


def generate_window(
    stream_set: StreamSet,
    weather: WeatherState,
    cfg: StreamConfig,
    cell: tuple[int, int],
    tick: int,
    master_seed: int,
    intensity_floor: float = INTENSITY_FLOOR,
) -> np.ndarray | None:
    """Stream values for one cell, or None where intensity is below the floor."""
    x, y = cell
    field = weather.intensity_field(cfg.kind)
    intensity = float(field[y % weather.height, x % weather.width])
    if intensity < intensity_floor:
        return None
    raw = stream_set.base_window(cfg, tick, master_seed)
    if cfg.discrete:
        return raw
    return scale_continuous(raw, intensity)
