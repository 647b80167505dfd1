"""Mapping text events onto temporal contexts: time, location, motion, app.

Each family splits into exactly two labels. Keyboard events carry one label
per family (four labels); speech events carry no application family (three
labels). Home is the centroid of the most-populated cluster from a greedy
single-pass clustering of GPS fixes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

EARTH_RADIUS_M = 6371000.0

DAY_START_HOUR = 9   # local [9, 18) is daytime
DAY_END_HOUR = 18


class ContextLabel(str, Enum):
    T_D = "T_D"  # daytime
    T_N = "T_N"  # nighttime
    L_H = "L_H"  # home
    L_O = "L_O"  # other locations
    M_S = "M_S"  # stationary
    M_M = "M_M"  # in motion
    A_C = "A_C"  # communication apps
    A_O = "A_O"  # other apps


# Canonical family order; speech events have no application family.
KEYBOARD_LABELS = (
    ContextLabel.T_D, ContextLabel.T_N,
    ContextLabel.L_H, ContextLabel.L_O,
    ContextLabel.M_S, ContextLabel.M_M,
    ContextLabel.A_C, ContextLabel.A_O,
)
SPEECH_LABELS = KEYBOARD_LABELS[:6]


@dataclass(frozen=True)
class GeoFix:
    latitude: float
    longitude: float
    timestamp: float

    def __post_init__(self):
        if abs(self.latitude) > 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if abs(self.longitude) > 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class UserProfile:
    utc_offset_minutes: int = 0
    home_center: tuple[float, float] | None = None
    home_radius_m: float = 250.0
    comm_apps: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.home_radius_m <= 0:
            raise ValueError("home_radius_m must be positive")


def default_comm_apps() -> frozenset[str]:
    """Bundled snapshot of communication-category app identifiers."""
    ref = resources.files("contextfed.data").joinpath("comm_apps.json")
    with resources.as_file(ref) as path:
        with open(path, encoding="utf-8") as fh:
            return frozenset(json.load(fh)["comm_apps"])


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def time_context(timestamp: float, utc_offset_minutes: int) -> ContextLabel:
    """Daytime iff the local hour falls in [9, 18)."""
    local_seconds = timestamp + utc_offset_minutes * 60
    hour = int(local_seconds // 3600) % 24
    return ContextLabel.T_D if DAY_START_HOUR <= hour < DAY_END_HOUR else ContextLabel.T_N


def local_day_index(timestamp: float, utc_offset_minutes: int) -> int:
    """Whole local days since the epoch; used to bucket events by day."""
    return int((timestamp + utc_offset_minutes * 60) // 86400)


def cluster_fixes(fixes: list[GeoFix], radius_m: float) -> list[list[GeoFix]]:
    """Greedy leader clustering in timestamp order.

    A fix joins the first cluster whose founding fix (leader) lies within
    radius_m; otherwise it founds a new cluster. Returns clusters in
    founding order.
    """
    ordered = sorted(fixes, key=lambda f: f.timestamp)
    leaders: list[GeoFix] = []
    clusters: list[list[GeoFix]] = []
    for fix in ordered:
        for i, leader in enumerate(leaders):
            if haversine_m(fix.latitude, fix.longitude,
                           leader.latitude, leader.longitude) <= radius_m:
                clusters[i].append(fix)
                break
        else:
            leaders.append(fix)
            clusters.append([fix])
    return clusters


def detect_home(fixes: list[GeoFix], radius_m: float = 250.0) -> tuple[float, float]:
    """Centroid of the most-populated fix cluster (tie: earliest founded)."""
    if not fixes:
        raise ValueError("no location data")
    clusters = cluster_fixes(fixes, radius_m)
    best = max(clusters, key=len)  # max() keeps the earliest on ties
    lat = sum(f.latitude for f in best) / len(best)
    lon = sum(f.longitude for f in best) / len(best)
    return lat, lon


def location_context(fix: GeoFix | None, profile: UserProfile) -> ContextLabel:
    """Home iff the fix lies within home_radius_m of a known home center."""
    if fix is None or profile.home_center is None:
        return ContextLabel.L_O
    dist = haversine_m(fix.latitude, fix.longitude, *profile.home_center)
    return ContextLabel.L_H if dist <= profile.home_radius_m else ContextLabel.L_O


def motion_context(state: str) -> ContextLabel:
    if state == "stationary":
        return ContextLabel.M_S
    if state == "moving":
        return ContextLabel.M_M
    raise ValueError(f"unknown motion state: {state!r}")


def app_context(app_id: str, profile: UserProfile) -> ContextLabel:
    return ContextLabel.A_C if app_id in profile.comm_apps else ContextLabel.A_O


def assign_contexts(event, profile: UserProfile) -> set[ContextLabel]:
    """One label per applicable family: four for keyboard, three for speech."""
    labels = {
        time_context(event.timestamp, profile.utc_offset_minutes),
        location_context(event.geo, profile),
        motion_context(event.motion),
    }
    if event.source == "keyboard":
        labels.add(app_context(event.app_id, profile))
    return labels


def load_geofix_csv(path) -> list[GeoFix]:
    """Read a GPS trace CSV with columns timestamp,lat,lon."""
    fixes: list[GeoFix] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            fixes.append(GeoFix(latitude=float(row["lat"]),
                                longitude=float(row["lon"]),
                                timestamp=float(row["timestamp"])))
    return fixes


def profile_from_json(obj: dict) -> UserProfile:
    """Build a UserProfile from its JSON config form."""
    home = obj.get("home_center")
    return UserProfile(
        utc_offset_minutes=int(obj.get("utc_offset_minutes", 0)),
        home_center=tuple(home) if home is not None else None,
        home_radius_m=float(obj.get("home_radius_m", 250.0)),
        comm_apps=frozenset(obj["comm_apps"]) if "comm_apps" in obj else default_comm_apps(),
    )
