"""Deterministic synthetic multimodal event series.

Each series is a smooth per-channel baseline (a few slow sinusoids plus
Gaussian noise). Between ``tau1`` and ``tau2`` an anomaly is added to a random
subset of every modality's channels. Anomaly sizes are expressed in units of
the channel's baseline standard deviation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import EventSeries
from .errors import InvalidInput

SHAPES = ("step", "damped_oscillation", "dropout")


@dataclass(frozen=True)
class SynthConfig:
    n_events: int = 60
    channels: tuple[int, ...] = (23, 34, 34)
    n_timesteps: int = 120
    dt: float = 0.0125
    shape: str = "step"
    magnitude: float = 10.0
    start_range: tuple[float, float] = (0.3, 0.6)
    duration_range: tuple[float, float] = (0.1, 0.3)
    affected_fraction: tuple[float, float] = (0.5, 1.0)
    noise_level: float = 0.3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "start_range", tuple(map(float, self.start_range)))
        object.__setattr__(self, "duration_range", tuple(map(float, self.duration_range)))
        object.__setattr__(self, "affected_fraction", tuple(map(float, self.affected_fraction)))
        if self.n_events < 1 or self.n_timesteps < 1 or not self.channels:
            raise InvalidInput("n_events, n_timesteps and channels must be >= 1")
        if min(self.channels) < 1:
            raise InvalidInput("every modality needs at least one channel")
        if not self.dt > 0:
            raise InvalidInput("dt must be > 0")
        if self.shape not in SHAPES:
            raise InvalidInput(f"unknown anomaly shape {self.shape!r}; choose from {SHAPES}")
        if self.magnitude < 0 or self.noise_level < 0:
            raise InvalidInput("magnitude and noise_level must be >= 0")
        for lo, hi in (self.start_range, self.duration_range, self.affected_fraction):
            if not 0 <= lo <= hi <= 1:
                raise InvalidInput("ranges must satisfy 0 <= lo <= hi <= 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("channels", "start_range", "duration_range", "affected_fraction"):
            out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> SynthConfig:
        unknown = set(payload) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInput(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**payload)


def _channel_profile(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shared per-channel level, fluctuation scale and anomaly polarity."""
    rng = np.random.default_rng([cfg.seed, 0])
    levels, scales = [], []
    for m, n in enumerate(cfg.channels):
        # modality 0 behaves like per-unit voltage, the others like power flows
        if m == 0:
            levels.append(rng.normal(1.0, 0.02, n))
            scales.append(rng.uniform(0.005, 0.015, n))
        else:
            levels.append(rng.normal(0.0, 50.0, n))
            scales.append(rng.uniform(2.0, 8.0, n))
    n_total = sum(cfg.channels)
    polarity = np.where(rng.random(n_total) < 0.5, -1.0, 1.0)
    return np.concatenate(levels), np.concatenate(scales), polarity


def _baseline(rng: np.random.Generator, t: np.ndarray, scales: np.ndarray, noise: float) -> np.ndarray:
    n_ch = scales.size
    span = t[-1] - t[0] if t.size > 1 else 1.0
    out = np.zeros((n_ch, t.size))
    for _ in range(3):
        freq = rng.uniform(0.2, 1.0, n_ch) / max(span, 1e-12)
        phase = rng.uniform(0, 2 * np.pi, n_ch)
        amp = rng.uniform(0.3, 1.0, n_ch)
        out += amp[:, None] * np.sin(2 * np.pi * freq[:, None] * t[None, :] + phase[:, None])
    out += noise * rng.standard_normal(out.shape)
    return out * scales[:, None]


def generate(config: SynthConfig) -> list[EventSeries]:
    levels, scales, polarity = _channel_profile(config)
    modality = np.repeat(np.arange(len(config.channels)), config.channels)
    n = config.n_timesteps
    t = np.arange(n) * config.dt
    events = []
    for e in range(config.n_events):
        rng = np.random.default_rng([config.seed, e + 1])
        base = _baseline(rng, t, scales, config.noise_level)
        std = base.std(axis=1)
        std[std == 0] = 1.0

        start = int(round(rng.uniform(*config.start_range) * (n - 1)))
        length = int(round(rng.uniform(*config.duration_range) * (n - 1)))
        stop = min(start + length, n - 1)

        affected = np.zeros(modality.size, dtype=bool)
        for m in range(len(config.channels)):
            idx = np.flatnonzero(modality == m)
            frac = rng.uniform(*config.affected_fraction)
            k = max(1, int(round(frac * idx.size)))
            affected[rng.choice(idx, size=k, replace=False)] = True

        signal = base.copy()
        span = slice(start, stop + 1)
        rel = t[span] - t[start]
        size = config.magnitude * std[affected] * polarity[affected]
        if config.shape == "step":
            signal[affected, span] += size[:, None]
        elif config.shape == "damped_oscillation":
            decay = max((stop - start + 1) * config.dt / 3.0, config.dt)
            wave = np.exp(-rel / decay) * np.cos(2 * np.pi * rel / max(4 * config.dt, decay))
            signal[affected, span] += size[:, None] * wave[None, :]
        else:
            damp = 1.0 / (1.0 + config.magnitude)
            signal[affected, span] = signal[affected, span] * damp - np.abs(size)[:, None]

        events.append(
            EventSeries(
                id=f"event_{e:04d}",
                timestamps=t,
                channels=signal + levels[:, None],
                modality_of_channel=tuple(int(m) for m in modality),
                tau1=float(t[start]),
                tau2=float(t[stop]),
                event_class=config.shape,
            )
        )
    return events
