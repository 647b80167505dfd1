"""Synthetic cohort generation with controllable context-localized signal.

Each simulated participant gets a latent daily mental state in [0, 1];
self-report labels are affine-plus-noise functions of it and the PHQ-9
score is a monotone function of its mean. Text events scatter across
contexts according to a per-user context-frequency profile. Inside the
designated signal context the fraction of signal-pool words tracks the
latent state with slope `signal_strength`; everywhere else tokens are
uniform over the whole vocabulary, so only the designated partition
carries label information.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .context import ContextLabel, GeoFix, UserProfile, cluster_fixes, default_comm_apps
from .seeding import derive_seed

SPEECH = "speech"
KEYBOARD = "keyboard"

NONTEXT_FEATURE_NAMES = (
    "stationary_time",
    "conversation_count",
    "sleep_end_time",
    "location_duration",
    "unlock_duration",
    "unlock_counts",
    "places_visited",
)

DEFAULT_SLEEP_END_H = 7.0

# Two disjoint word pools of equal size: equal sizes make "uniform over the
# vocabulary" identical to a fair coin between pools.
DEFAULT_SIGNAL_WORDS = (
    "tired", "worried", "anxious", "lonely", "stressed", "restless", "drained",
    "hopeless", "overwhelmed", "numb", "tense", "gloomy", "weary", "uneasy",
    "down", "empty", "irritable", "exhausted", "miserable", "fragile",
    "troubled", "heavy", "aching", "foggy", "distant", "strained", "low",
    "shaky", "dreary", "somber", "listless", "fretful", "worn", "bleak",
    "brooding", "jittery", "sullen", "faint", "frayed", "burdened",
)
DEFAULT_NOISE_WORDS = (
    "coffee", "meeting", "lunch", "game", "movie", "traffic", "weather",
    "dinner", "music", "photo", "weekend", "recipe", "garden", "puppy",
    "soccer", "pizza", "beach", "travel", "ticket", "laundry", "grocery",
    "novel", "podcast", "bike", "paint", "camera", "market", "picnic",
    "puzzle", "dance", "hiking", "guitar", "baking", "museum", "river",
    "sunset", "jacket", "window", "garage", "harvest",
)

_COMM_APP_CHOICES = ("whatsapp", "messenger", "telegram", "signal", "sms")
_OTHER_APP_CHOICES = ("notes", "browser", "maps", "calendar", "shopping")


@dataclass(frozen=True)
class TextEvent:
    """One utterance or typing burst with its sensor context."""

    user_id: str
    timestamp: float
    source: str
    tokens: tuple[str, ...]
    geo: GeoFix
    motion: str
    app_id: str | None = None

    def __post_init__(self):
        if self.source not in (SPEECH, KEYBOARD):
            raise ValueError(f"unknown source: {self.source!r}")
        if self.source == SPEECH and self.app_id is not None:
            raise ValueError("speech events carry no app_id")
        if not self.tokens:
            raise ValueError("events must carry at least one token")


@dataclass
class ClientDataset:
    """One simulated participant: events, labels, and device logs."""

    user_id: str
    profile: UserProfile
    days: int
    events: list[TextEvent]
    daily_labels: list[dict[str, float]]  # stress / anxiety / mood per day
    phq9: int
    device_logs: list[dict[str, float]]  # sleep_end_h, unlock_duration_h, unlock_count

    def __post_init__(self):
        if not (0 <= self.phq9 <= 27):
            raise ValueError(f"phq9 out of range: {self.phq9}")

    @property
    def nontext_daily(self) -> list[np.ndarray]:
        return [nontext_features(self, day) for day in range(self.days)]


@dataclass(frozen=True)
class CohortSpec:
    num_users: int = 46
    days: int = 10
    mean_words_per_day: dict[str, float] = field(
        default_factory=lambda: {SPEECH: 13492 / 10, KEYBOARD: 4521 / 10}
    )
    signal_context: tuple[str, ContextLabel] | None = (KEYBOARD, ContextLabel.T_N)
    signal_strength: float = 0.8
    signal_words: tuple[str, ...] = DEFAULT_SIGNAL_WORDS
    noise_words: tuple[str, ...] = DEFAULT_NOISE_WORDS
    rng_seed: int = 7

    def __post_init__(self):
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must be in [0, 1]")
        if set(self.signal_words) & set(self.noise_words):
            raise ValueError("signal and noise word pools must be disjoint")
        if self.days < 1 or self.num_users < 1:
            raise ValueError("num_users and days must be >= 1")


def _event_word_counts(rng: np.random.Generator, total: int, mean_len: int) -> list[int]:
    """Split a day's word budget into event-sized bursts."""
    counts: list[int] = []
    remaining = total
    while remaining > 0:
        size = min(remaining, max(1, int(rng.poisson(mean_len))))
        counts.append(size)
        remaining -= size
    return counts


def _draw_tokens(
    rng: np.random.Generator,
    count: int,
    signal_probability: float,
    signal_words: tuple[str, ...],
    noise_words: tuple[str, ...],
) -> tuple[str, ...]:
    from_signal = rng.random(count) < signal_probability
    signal_idx = rng.integers(0, len(signal_words), size=count)
    noise_idx = rng.integers(0, len(noise_words), size=count)
    return tuple(
        signal_words[signal_idx[i]] if from_signal[i] else noise_words[noise_idx[i]]
        for i in range(count)
    )


def _offset_geo(rng: np.random.Generator, lat: float, lon: float,
                min_m: float, max_m: float, timestamp: float) -> GeoFix:
    dist = rng.uniform(min_m, max_m)
    bearing = rng.uniform(0.0, 2.0 * math.pi)
    dlat = (dist * math.cos(bearing)) / 111_320.0
    dlon = (dist * math.sin(bearing)) / (111_320.0 * max(math.cos(math.radians(lat)), 0.2))
    return GeoFix(latitude=lat + dlat, longitude=lon + dlon, timestamp=timestamp)


def _generate_user(spec: CohortSpec, user_index: int, comm_apps: frozenset[str]) -> ClientDataset:
    rng = np.random.default_rng(derive_seed(spec.rng_seed, "user", user_index))
    user_id = f"u{user_index:03d}"

    home_lat = float(rng.uniform(34.0, 46.0))
    home_lon = float(rng.uniform(-120.0, -72.0))
    profile = UserProfile(
        utc_offset_minutes=0,
        home_center=(home_lat, home_lon),
        home_radius_m=250.0,
        comm_apps=comm_apps,
    )

    # Latent mental state: user means spread evenly over the cohort with a
    # little jitter, so the PHQ-9 split lands on both sides of the threshold.
    spread = user_index / max(spec.num_users - 1, 1)
    user_mean = float(np.clip(0.05 + 0.9 * spread + rng.normal(0.0, 0.02), 0.02, 0.98))
    latent = np.clip(user_mean + rng.normal(0.0, 0.05, size=spec.days), 0.0, 1.0)

    daily_labels = []
    for m_d in latent:
        daily_labels.append(
            {
                "stress": float(np.clip(100.0 * m_d + rng.normal(0.0, 5.0), 0.0, 100.0)),
                "anxiety": float(np.clip(100.0 * m_d + rng.normal(0.0, 6.0), 0.0, 100.0)),
                "mood": float(np.clip(100.0 * (1.0 - m_d) + rng.normal(0.0, 5.0), 0.0, 100.0)),
            }
        )
    phq9 = int(np.clip(round(14.0 * float(np.mean(latent))), 0, 27))

    # Context-frequency profile: how this user's text spreads over contexts.
    p_night = float(rng.uniform(0.2, 0.5))
    p_home = float(rng.uniform(0.4, 0.9))
    p_stationary = float(rng.uniform(0.4, 0.9))
    p_comm = float(rng.uniform(0.2, 0.8))
    rate_multiplier = float(rng.lognormal(mean=-0.125, sigma=0.5))

    # Outside the signal context the signal-word rate drifts per user and per
    # day, independently of the labels. Pooling text across contexts mixes
    # this drift in, so only the context partition isolates the clean signal.
    confuser_mean = float(rng.uniform(0.1, 0.9))

    mean_event_len = {SPEECH: 25, KEYBOARD: 12}
    events: list[TextEvent] = []
    device_logs: list[dict[str, float]] = []

    for day in range(spec.days):
        m_d = float(latent[day])
        signal_probability = 0.5 + spec.signal_strength * (m_d - 0.5)
        offsignal_probability = float(
            np.clip(confuser_mean + rng.uniform(-0.15, 0.15), 0.0, 1.0)
        )
        for source, mean_words in spec.mean_words_per_day.items():
            day_budget = int(
                round(mean_words * rate_multiplier * float(rng.lognormal(0.0, 0.2)))
            )
            for count in _event_word_counts(rng, day_budget, mean_event_len[source]):
                night = rng.random() < p_night
                if night:
                    hour = float(rng.uniform(18.0, 33.0)) % 24.0  # 6PM..9AM
                else:
                    hour = float(rng.uniform(9.0, 18.0))
                timestamp = day * 86400.0 + hour * 3600.0
                at_home = rng.random() < p_home
                geo = (
                    _offset_geo(rng, home_lat, home_lon, 0.0, 100.0, timestamp)
                    if at_home
                    else _offset_geo(rng, home_lat, home_lon, 2000.0, 10000.0, timestamp)
                )
                motion = "stationary" if rng.random() < p_stationary else "moving"
                app_id = None
                if source == KEYBOARD:
                    pool = _COMM_APP_CHOICES if rng.random() < p_comm else _OTHER_APP_CHOICES
                    app_id = pool[int(rng.integers(0, len(pool)))]

                in_signal = False
                if spec.signal_context is not None and source == spec.signal_context[0]:
                    label = spec.signal_context[1]
                    in_signal = _event_has_label(
                        label, night=night, at_home=at_home, motion=motion,
                        app_id=app_id, comm_apps=comm_apps,
                    )
                prob = signal_probability if in_signal else offsignal_probability
                tokens = _draw_tokens(rng, count, prob, spec.signal_words, spec.noise_words)
                events.append(
                    TextEvent(user_id=user_id, timestamp=timestamp, source=source,
                              tokens=tokens, geo=geo, motion=motion, app_id=app_id)
                )
        device_logs.append(
            {
                "sleep_end_h": float(np.clip(rng.normal(7.0, 0.8), 4.0, 11.0)),
                "unlock_duration_h": float(rng.uniform(0.5, 4.0)),
                "unlock_count": float(rng.integers(20, 120)),
            }
        )

    events.sort(key=lambda e: e.timestamp)
    return ClientDataset(user_id=user_id, profile=profile, days=spec.days,
                         events=events, daily_labels=daily_labels, phq9=phq9,
                         device_logs=device_logs)


def _event_has_label(label: ContextLabel, *, night: bool, at_home: bool,
                     motion: str, app_id: str | None,
                     comm_apps: frozenset[str]) -> bool:
    if label in (ContextLabel.T_D, ContextLabel.T_N):
        return night == (label == ContextLabel.T_N)
    if label in (ContextLabel.L_H, ContextLabel.L_O):
        return at_home == (label == ContextLabel.L_H)
    if label in (ContextLabel.M_S, ContextLabel.M_M):
        return (motion == "stationary") == (label == ContextLabel.M_S)
    if app_id is None:
        return False
    return (app_id in comm_apps) == (label == ContextLabel.A_C)


def generate_cohort(spec: CohortSpec) -> list[ClientDataset]:
    """Deterministic cohort for a spec: user i derives from (seed, i)."""
    comm_apps = default_comm_apps()
    return [_generate_user(spec, i, comm_apps) for i in range(spec.num_users)]


def nontext_features(client: ClientDataset, day: int) -> np.ndarray:
    """The seven non-text daily features, in their canonical order.

    Event-derived features fall back to zero on empty days; the sleep end
    time falls back to 7.0 h when the device log is missing or zeroed.
    """
    if not 0 <= day < client.days:
        raise ValueError(f"day {day} out of range for {client.days}-day dataset")
    offset = client.profile.utc_offset_minutes * 60
    day_events = [
        e for e in client.events if int((e.timestamp + offset) // 86400.0) == day
    ]
    n = len(day_events)
    if n:
        stationary_time = 24.0 * sum(e.motion == "stationary" for e in day_events) / n
        conversation_count = float(sum(e.source == SPEECH for e in day_events))
        home = client.profile.home_center
        if home is None:
            location_duration = 0.0
        else:
            from .context import haversine_m

            at_home = sum(
                haversine_m(e.geo.latitude, e.geo.longitude, home[0], home[1])
                <= client.profile.home_radius_m
                for e in day_events
            )
            location_duration = 24.0 * at_home / n
        places = float(len(cluster_fixes([e.geo for e in day_events], 250.0)))
    else:
        stationary_time = conversation_count = location_duration = places = 0.0

    log = client.device_logs[day] if day < len(client.device_logs) else {}
    sleep_end = float(log.get("sleep_end_h", 0.0))
    if sleep_end <= 0.0:
        sleep_end = DEFAULT_SLEEP_END_H
    return np.array(
        [
            stationary_time,
            conversation_count,
            sleep_end,
            location_duration,
            float(log.get("unlock_duration_h", 0.0)),
            float(log.get("unlock_count", 0.0)),
            places,
        ],
        dtype=np.float64,
    )


def cohort_spec_from_dict(obj: dict) -> CohortSpec:
    """Build a CohortSpec from its JSON form; unknown keys are rejected."""
    known = set(CohortSpec.__dataclass_fields__)
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown cohort spec keys: {sorted(unknown)}")
    kwargs = dict(obj)
    if "signal_context" in kwargs and kwargs["signal_context"] is not None:
        source, label = kwargs["signal_context"]
        kwargs["signal_context"] = (source, ContextLabel(label))
    if "mean_words_per_day" in kwargs:
        kwargs["mean_words_per_day"] = {
            k: float(v) for k, v in kwargs["mean_words_per_day"].items()
        }
    for key in ("signal_words", "noise_words"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return CohortSpec(**kwargs)


def save_cohort(cohort: list[ClientDataset], path) -> None:
    """One JSON line per participant: profile, labels, logs, events."""
    with open(path, "w", encoding="utf-8") as fh:
        for client in cohort:
            record = {
                "user_id": client.user_id,
                "days": client.days,
                "phq9": client.phq9,
                "profile": {
                    "utc_offset_minutes": client.profile.utc_offset_minutes,
                    "home_center": list(client.profile.home_center)
                    if client.profile.home_center
                    else None,
                    "home_radius_m": client.profile.home_radius_m,
                    "comm_apps": sorted(client.profile.comm_apps),
                },
                "daily_labels": client.daily_labels,
                "device_logs": client.device_logs,
                "events": [
                    {
                        "timestamp": e.timestamp,
                        "source": e.source,
                        "tokens": list(e.tokens),
                        "lat": e.geo.latitude,
                        "lon": e.geo.longitude,
                        "motion": e.motion,
                        "app_id": e.app_id,
                    }
                    for e in client.events
                ],
            }
            fh.write(json.dumps(record) + "\n")


def load_cohort(path) -> list[ClientDataset]:
    cohort: list[ClientDataset] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            profile = obj["profile"]
            client = ClientDataset(
                user_id=obj["user_id"],
                profile=UserProfile(
                    utc_offset_minutes=int(profile["utc_offset_minutes"]),
                    home_center=tuple(profile["home_center"])
                    if profile["home_center"]
                    else None,
                    home_radius_m=float(profile["home_radius_m"]),
                    comm_apps=frozenset(profile["comm_apps"]),
                ),
                days=int(obj["days"]),
                events=[
                    TextEvent(
                        user_id=obj["user_id"],
                        timestamp=float(e["timestamp"]),
                        source=e["source"],
                        tokens=tuple(e["tokens"]),
                        geo=GeoFix(latitude=float(e["lat"]), longitude=float(e["lon"]),
                                   timestamp=float(e["timestamp"])),
                        motion=e["motion"],
                        app_id=e.get("app_id"),
                    )
                    for e in obj["events"]
                ],
                daily_labels=obj["daily_labels"],
                phq9=int(obj["phq9"]),
                device_logs=obj["device_logs"],
            )
            cohort.append(client)
    return cohort
