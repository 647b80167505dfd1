"""Duty-cycled speech recording simulation with pluggable detector oracles.

The recorder probes the microphone for one minute in every four. A probe
that detects conversation extends into continuous recording until the
detector goes quiet, at which point the recorded span is buffered. Buffered
segments sit untouched until the first minute in which the device is both
idle and charging; only then do they run the acceptance pipeline
(voice filter, voice re-check, language check, speech recognition).

Time is quantized to whole minutes; detectors are pure functions of the
simulated timeline, standing in for the real audio models.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

CYCLE_MINUTES = 4


class Phase(str, Enum):
    SLEEPING = "sleeping"
    PROBING = "probing"
    RECORDING = "recording"


@dataclass(frozen=True)
class Segment:
    """A contiguous recorded span, inclusive on both ends."""

    start: int
    end: int

    @property
    def minutes(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class DutyState:
    phase: Phase = Phase.PROBING
    minute_in_cycle: int = 0
    open_start: int | None = None
    buffered_segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        if not 0 <= self.minute_in_cycle < CYCLE_MINUTES:
            raise ValueError("minute_in_cycle must be in 0..3")


@dataclass(frozen=True)
class Detectors:
    vad: Callable[[int], bool]
    voice_filter: Callable[[Segment], Segment | None]
    language_id: Callable[[Segment], str]
    asr: Callable[[Segment], list[str]]


@dataclass(frozen=True)
class DeviceTimeline:
    conversation: tuple[bool, ...]
    idle: tuple[bool, ...]
    charging: tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.conversation) == len(self.idle) == len(self.charging)):
            raise ValueError("timeline flag lists must share one length")

    def __len__(self) -> int:
        return len(self.conversation)


def timeline_from_csv(path) -> DeviceTimeline:
    """Read a timeline CSV with columns minute,conversation,idle,charging."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows[int(row["minute"])] = (
                row["conversation"].strip() in ("1", "true", "True"),
                row["idle"].strip() in ("1", "true", "True"),
                row["charging"].strip() in ("1", "true", "True"),
            )
    n = max(rows) + 1 if rows else 0
    convo, idle, charging = [], [], []
    for minute in range(n):
        c, i, ch = rows.get(minute, (False, False, False))
        convo.append(c)
        idle.append(i)
        charging.append(ch)
    return DeviceTimeline(tuple(convo), tuple(idle), tuple(charging))


def oracle_detectors(timeline: DeviceTimeline, language: str = "en") -> Detectors:
    """Ground-truth detectors driven directly by the timeline flags."""

    def vad(minute: int) -> bool:
        return 0 <= minute < len(timeline) and timeline.conversation[minute]

    return Detectors(
        vad=vad,
        voice_filter=lambda segment: segment,
        language_id=lambda segment: language,
        asr=lambda segment: [f"minute{m}" for m in segment.minutes],
    )


def step(state: DutyState, minute: int, detectors: Detectors) -> tuple[DutyState, list[str]]:
    """Advance the recorder by one minute; actions name what happened.

    Probing records the minute and keeps recording if the detector fires;
    a recording stops on the first quiet minute, buffering the segment.
    After a probe failure or a buffered segment the recorder sleeps out the
    rest of a 4-minute cycle, so probes stay 4 minutes apart.
    """
    if state.phase is Phase.PROBING:
        if detectors.vad(minute):
            return (
                replace(state, phase=Phase.RECORDING, open_start=minute,
                        minute_in_cycle=0),
                ["probe", "record"],
            )
        return replace(state, phase=Phase.SLEEPING, minute_in_cycle=1), ["probe", "record"]

    if state.phase is Phase.RECORDING:
        if detectors.vad(minute):
            return state, ["record"]
        segment = Segment(start=state.open_start, end=minute - 1)
        return (
            DutyState(
                phase=Phase.SLEEPING,
                minute_in_cycle=1,
                open_start=None,
                buffered_segments=state.buffered_segments + (segment,),
            ),
            ["buffer"],
        )

    # Sleeping: idle out the cycle, then probe again.
    if state.minute_in_cycle == CYCLE_MINUTES - 1:
        return replace(state, phase=Phase.PROBING, minute_in_cycle=0), []
    return replace(state, minute_in_cycle=state.minute_in_cycle + 1), []


def process_buffer(
    segments: list[Segment], detectors: Detectors, user_language: str
) -> list[list[str]]:
    """Run buffered segments through the staged acceptance pipeline.

    Voice filter first; drop the segment if the re-checked detector finds
    no voice or the language classifier disagrees with the user's language;
    otherwise speech recognition yields the tokens.
    """
    accepted: list[list[str]] = []
    for segment in segments:
        filtered = detectors.voice_filter(segment)
        if filtered is None:
            continue
        if not any(detectors.vad(m) for m in filtered.minutes):
            continue
        if detectors.language_id(filtered) != user_language:
            continue
        accepted.append(detectors.asr(filtered))
    return accepted


@dataclass
class CollectionTrace:
    recorded_minutes: list[int] = field(default_factory=list)
    probe_minutes: list[int] = field(default_factory=list)
    buffered: list[Segment] = field(default_factory=list)
    processed_at: dict[int, int] = field(default_factory=dict)  # segment idx -> minute
    accepted_tokens: list[list[str]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "recorded_minutes": self.recorded_minutes,
                "probe_minutes": self.probe_minutes,
                "buffered_segments": [[s.start, s.end] for s in self.buffered],
                "processed_at": {str(k): v for k, v in self.processed_at.items()},
                "accepted_tokens": self.accepted_tokens,
            },
            indent=2,
        )


def simulate(
    timeline: DeviceTimeline, detectors: Detectors, user_language: str = "en"
) -> CollectionTrace:
    """Run the recorder over a timeline, deferring processing to charge time.

    Segments buffer as the recorder produces them and are processed in
    order at the first minute (at or after buffering) where the device is
    idle and charging. A segment still open at the end of the timeline is
    buffered but stays unprocessed unless a gate minute remains.
    """
    trace = CollectionTrace()
    state = DutyState()
    processed_upto = 0
    for minute in range(len(timeline)):
        state, actions = step(state, minute, detectors)
        if "probe" in actions:
            trace.probe_minutes.append(minute)
        if "record" in actions:
            trace.recorded_minutes.append(minute)
        if timeline.idle[minute] and timeline.charging[minute]:
            pending = state.buffered_segments[processed_upto:]
            if pending:
                tokens = process_buffer(list(pending), detectors, user_language)
                trace.accepted_tokens.extend(tokens)
                for i in range(processed_upto, len(state.buffered_segments)):
                    trace.processed_at[i] = minute
                processed_upto = len(state.buffered_segments)

    if state.phase is Phase.RECORDING and state.open_start is not None:
        segment = Segment(start=state.open_start, end=len(timeline) - 1)
        state = replace(
            state,
            phase=Phase.SLEEPING,
            open_start=None,
            buffered_segments=state.buffered_segments + (segment,),
        )
    trace.buffered = list(state.buffered_segments)
    return trace
