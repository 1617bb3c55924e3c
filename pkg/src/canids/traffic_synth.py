"""Synthetic labeled bus traffic for the ten benchmark attack scenarios.

Benign background traffic comes from a profile of periodic publishers
(emulating ESC status and autopilot command chatter).  On top of it three
injection primitives are applied: flooding (a fixed valid command id at a
fixed rate), fuzzing (random payloads under known-good ids) and replay
(cyclic re-emission of previously captured frames).  Scenario indices 1-10
map to a fixed grid of episode kinds and injection intervals; episode
timing, durations and the benign schedule are this toolkit's choices and
are recorded in the generated log header.

All generators are pure functions of (spec, seed): the same inputs give a
byte-identical log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .frame_codec import encode_tail_byte, make_can_id
from .log_io import CanLog, RawFrame

ATTACK_KINDS = ("flooding", "fuzzy", "replay")

# scenario index -> (episode kinds in order, injection interval seconds)
SCENARIO_GRID: dict[int, tuple[tuple[str, ...], float]] = {
    1: (("flooding",) * 3, 0.0015),
    2: (("flooding",) * 3, 0.005),
    3: (("fuzzy",) * 3, 0.0015),
    4: (("fuzzy",) * 3, 0.005),
    5: (("replay",) * 3, 0.005),
    6: (("replay",) * 4, 0.005),
    7: (("flooding", "fuzzy", "flooding", "fuzzy"), 0.005),
    8: (("fuzzy", "replay", "fuzzy", "replay"), 0.005),
    9: (("flooding", "replay", "flooding", "replay"), 0.005),
    10: (("flooding", "fuzzy", "replay"), 0.005),
}

DEFAULT_HORIZON = 45.0
# The last episode is long enough that a chronological 70/30 window split
# lands inside it, so every attack kind shows up on both sides of the
# split even in scenarios with a single episode per kind.
_EPISODE_PLACEMENT = {
    3: ((8.0, 4.0), (18.0, 4.0), (28.0, 8.0)),
    4: ((6.0, 3.5), (14.0, 3.5), (22.0, 3.5), (30.0, 7.0)),
}

# Fixed "halt the motors" command stand-in: 7 zero command bytes plus a
# single-frame tail byte with transfer id 0.
FLOOD_COMMAND_ID = make_can_id(priority=2, message_type_id=0x03E8, service_flag=False, source_node_id=10)
FLOOD_COMMAND_PAYLOAD = bytes(7) + bytes([encode_tail_byte(True, True, False, 0)])

# Directional control command; replay episodes re-emit a captured instance
# of this message.
REPLAY_TARGET_ID = make_can_id(priority=3, message_type_id=0x03EA, service_flag=False, source_node_id=10)

# Window long enough to hold one frame, short enough to rarely catch two.
_CAPTURE_BURST = 0.0005
_CAPTURE_GAP = 0.05  # capture this far before the episode at the latest

_INTERFACE = "can0"


@dataclass(frozen=True, slots=True)
class Publisher:
    """One periodic benign traffic source."""

    can_id: int
    period: float
    jitter: float = 0.0  # fraction of the period, uniform +/-
    dlc: int = 8
    multi_frame: bool = False  # emit two-frame transfers instead of one


@dataclass(frozen=True, slots=True)
class Episode:
    kind: str
    start: float
    duration: float
    interval: float
    capture_start: float | None = None  # replay only
    capture_duration: float | None = None

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True, slots=True)
class ScenarioSpec:
    index: int
    episodes: tuple[Episode, ...]
    publishers: tuple[Publisher, ...]
    seed: int
    horizon: float = DEFAULT_HORIZON


def default_profile() -> tuple[Publisher, ...]:
    """Six publishers with 5-50 ms periods; one uses two-frame transfers."""
    esc_ids = [
        make_can_id(priority=7, message_type_id=0x0E20, service_flag=False, source_node_id=n)
        for n in (1, 2, 3)
    ]
    gnss_id = make_can_id(priority=16, message_type_id=0x0556, service_flag=False, source_node_id=20)
    return (
        Publisher(esc_ids[0], period=0.010, jitter=0.1),
        Publisher(esc_ids[1], period=0.010, jitter=0.1),
        Publisher(esc_ids[2], period=0.012, jitter=0.1),
        Publisher(REPLAY_TARGET_ID, period=0.012, jitter=0.1),
        Publisher(FLOOD_COMMAND_ID, period=0.020, jitter=0.1),
        Publisher(gnss_id, period=0.050, jitter=0.1, multi_frame=True),
    )


def scenario_spec(
    index: int,
    seed: int,
    horizon: float = DEFAULT_HORIZON,
    publishers: tuple[Publisher, ...] | None = None,
) -> ScenarioSpec:
    """Build the grid scenario `index` with default episode placement."""
    if index not in SCENARIO_GRID:
        raise ScenarioError(f"scenario index {index} outside 1..10")
    kinds, interval = SCENARIO_GRID[index]
    scale = horizon / DEFAULT_HORIZON  # episode placement follows the horizon
    placement = _EPISODE_PLACEMENT[len(kinds)]
    episodes = tuple(
        Episode(kind=kind, start=round(start * scale, 6), duration=round(duration * scale, 6), interval=interval)
        for kind, (start, duration) in zip(kinds, placement)
    )
    return ScenarioSpec(
        index=index,
        episodes=episodes,
        publishers=publishers if publishers is not None else default_profile(),
        seed=seed,
        horizon=horizon,
    )


def injection_times(episode: Episode) -> list[float]:
    """Injection instants: episode start, then every interval.

    The count is floor(duration/interval), with a single injection at the
    start when the episode is shorter than one interval, and none for a
    zero-duration episode.
    """
    if episode.interval <= 0:
        raise ScenarioError(f"injection interval must be positive, got {episode.interval}")
    if episode.duration < 0:
        raise ScenarioError(f"episode duration must be non-negative, got {episode.duration}")
    if episode.duration == 0:
        return []
    count = max(1, math.floor(episode.duration / episode.interval + 1e-9))
    return [round(episode.start + k * episode.interval, 6) for k in range(count)]


def _merged(log: CanLog, injected: list[RawFrame]) -> CanLog:
    frames = list(log.frames) + injected
    frames.sort(key=lambda f: f.timestamp)  # stable: originals precede ties
    return CanLog(header=dict(log.header), frames=frames)


def generate_benign(
    publishers: tuple[Publisher, ...] | list[Publisher], horizon: float, seed: int
) -> CanLog:
    """Merge every publisher's jittered periodic schedule, all labels 0.

    Each publisher draws from its own child generator, so adding one does
    not perturb the others.  Transfer ids count up modulo 32 per transfer.
    Timestamps are quantized to the microsecond grid.
    """
    if not publishers:
        raise ScenarioError("benign profile is empty: nothing to attack")
    frames: list[RawFrame] = []
    for pub_index, pub in enumerate(publishers):
        if pub.period <= 0:
            raise ScenarioError(f"publisher {pub_index}: period must be positive")
        if pub.dlc < 1 or (pub.multi_frame and pub.dlc < 3):
            raise ScenarioError(f"publisher {pub_index}: dlc too small for its framing")
        rng = np.random.default_rng([seed, pub_index])
        k = 0
        while k * pub.period < horizon - 1e-12:
            base = k * pub.period
            if pub.jitter > 0:
                base += pub.jitter * pub.period * rng.uniform(-1.0, 1.0)
            t = round(max(base, 0.0), 6)
            tid = k % 32
            if pub.multi_frame:
                crc = rng.integers(0, 256, size=2, dtype=np.uint8).tobytes()
                body1 = rng.integers(0, 256, size=pub.dlc - 3, dtype=np.uint8).tobytes()
                body2 = rng.integers(0, 256, size=pub.dlc - 1, dtype=np.uint8).tobytes()
                tail1 = bytes([encode_tail_byte(True, False, False, tid)])
                tail2 = bytes([encode_tail_byte(False, True, True, tid)])
                t2 = round(t + min(0.0002, pub.period / 4), 6)
                frames.append(RawFrame(0, t, _INTERFACE, pub.can_id, pub.dlc, crc + body1 + tail1))
                frames.append(RawFrame(0, t2, _INTERFACE, pub.can_id, pub.dlc, body2 + tail2))
            else:
                body = rng.integers(0, 256, size=pub.dlc - 1, dtype=np.uint8).tobytes()
                tail = bytes([encode_tail_byte(True, True, False, tid)])
                frames.append(RawFrame(0, t, _INTERFACE, pub.can_id, pub.dlc, body + tail))
            k += 1
    frames.sort(key=lambda f: f.timestamp)
    log = CanLog(header={}, frames=frames)
    log.validate()
    return log


def inject_flooding(
    log: CanLog,
    episode: Episode,
    can_id: int = FLOOD_COMMAND_ID,
    payload: bytes = FLOOD_COMMAND_PAYLOAD,
) -> CanLog:
    """Insert a fixed valid command frame at every injection instant."""
    injected = [
        RawFrame(1, t, _INTERFACE, can_id, len(payload), payload)
        for t in injection_times(episode)
    ]
    return _merged(log, injected)


def inject_fuzzy(log: CanLog, episode: Episode, seed: int) -> CanLog:
    """Insert frames with uniformly random payloads under benign ids.

    The 29-bit id field itself is not randomized: ids are drawn from the
    set already seen as benign, so only the data content is fuzzed.
    """
    ids = log.benign_ids()
    if not ids:
        raise ScenarioError("log has no benign ids to fuzz")
    rng = np.random.default_rng([seed])
    injected = []
    for t in injection_times(episode):
        can_id = ids[int(rng.integers(len(ids)))]
        payload = rng.integers(0, 256, size=8, dtype=np.uint8).tobytes()
        injected.append(RawFrame(1, t, _INTERFACE, can_id, 8, payload))
    return _merged(log, injected)


def inject_replay(log: CanLog, episode: Episode, capture_window: tuple[float, float]) -> CanLog:
    """Re-emit frames captured in [t0, t1) cyclically during the episode."""
    t0, t1 = capture_window
    if not t1 > t0:
        raise ScenarioError(f"capture window [{t0}, {t1}) is empty")
    if t1 > episode.start:
        raise ScenarioError("capture window must precede the episode")
    captured = [f for f in log.frames if t0 <= f.timestamp < t1]
    if not captured:
        raise ScenarioError(f"capture window [{t0}, {t1}) contains no frames")
    injected = [
        RawFrame(1, t, src.interface, src.can_id, src.dlc, src.payload)
        for k, t in enumerate(injection_times(episode))
        for src in (captured[k % len(captured)],)
    ]
    return _merged(log, injected)


def _validate_spec(spec: ScenarioSpec) -> None:
    if spec.index not in SCENARIO_GRID:
        raise ScenarioError(f"scenario index {spec.index} outside 1..10")
    kinds, interval = SCENARIO_GRID[spec.index]
    if sorted(e.kind for e in spec.episodes) != sorted(kinds):
        raise ScenarioError(
            f"scenario {spec.index} requires episodes {sorted(kinds)}, "
            f"got {sorted(e.kind for e in spec.episodes)}"
        )
    for e in spec.episodes:
        if e.kind not in ATTACK_KINDS:
            raise ScenarioError(f"unknown attack kind {e.kind!r}")
        if abs(e.interval - interval) > 1e-12:
            raise ScenarioError(
                f"scenario {spec.index} uses interval {interval}, episode has {e.interval}"
            )
        if e.start < 0 or e.end > spec.horizon:
            raise ScenarioError(f"episode [{e.start}, {e.end}) outside horizon {spec.horizon}")
    ordered = sorted(spec.episodes, key=lambda e: e.start)
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ScenarioError(
                f"episodes overlap: [{a.start}, {a.end}) and [{b.start}, {b.end})"
            )


def _with_capture_defaults(episode: Episode, log: CanLog) -> Episode:
    """Fill in a capture window for a replay episode.

    The default captures a single directional-control command shortly
    before the episode, mirroring an attacker re-transmitting one recorded
    command.  Without such a frame in the log, fall back to a 0.3 s slice
    of whatever precedes the episode.
    """
    if episode.kind != "replay":
        return episode
    if episode.capture_start is not None and episode.capture_duration is not None:
        return episode
    latest = None
    for f in log.frames:
        if f.timestamp > episode.start - _CAPTURE_GAP:
            break
        if f.can_id == REPLAY_TARGET_ID:
            latest = f.timestamp
    if latest is not None:
        return replace(episode, capture_start=latest, capture_duration=_CAPTURE_BURST)
    return replace(episode, capture_start=max(0.0, episode.start - 0.45), capture_duration=0.3)


def build_scenario(spec: ScenarioSpec) -> CanLog:
    """Benign background, then episode injections in order, then sort."""
    _validate_spec(spec)
    log = generate_benign(spec.publishers, spec.horizon, spec.seed)
    episode_seeds = [
        int(np.random.SeedSequence([spec.seed, 1 + k]).generate_state(1)[0])
        for k in range(len(spec.episodes))
    ]
    for k, episode in enumerate(spec.episodes):
        episode = _with_capture_defaults(episode, log)
        if episode.kind == "flooding":
            log = inject_flooding(log, episode)
        elif episode.kind == "fuzzy":
            log = inject_fuzzy(log, episode, episode_seeds[k])
        else:
            window = (episode.capture_start, episode.capture_start + episode.capture_duration)
            log = inject_replay(log, episode, window)
    kinds_seen = []
    for e in spec.episodes:
        if e.kind not in kinds_seen:
            kinds_seen.append(e.kind)
    header = {
        "scenario": str(spec.index),
        "seed": str(spec.seed),
        "horizon": f"{spec.horizon:.6f}",
        "attacks": ",".join(kinds_seen),
        "injection_interval": f"{SCENARIO_GRID[spec.index][1]:.6f}",
    }
    for k, e in enumerate(spec.episodes, start=1):
        header[f"episode.{k}"] = f"{e.kind}:{e.start:.6f}:{e.duration:.6f}:{e.interval:.6f}"
    for k, p in enumerate(spec.publishers, start=1):
        mf = ":mf" if p.multi_frame else ""
        header[f"publisher.{k}"] = f"{p.can_id:X}:{p.period:.6f}:{p.jitter:.3f}:{p.dlc}{mf}"
    log.header = header
    log.validate()
    return log


def parse_scenario_config(text: str) -> ScenarioSpec:
    """Parse the sectioned key=value scenario format.

    Sections are ``[scenario]`` (once), ``[publisher]`` and ``[episode]``
    (repeatable, one per entity).  Unknown keys are rejected.
    """
    scenario: dict[str, str] = {}
    publishers: list[Publisher] = []
    episodes: list[Episode] = []
    section: str | None = None
    entry: dict[str, str] = {}

    def flush():
        nonlocal entry
        if section == "publisher":
            publishers.append(_publisher_from(entry))
        elif section == "episode":
            episodes.append(_episode_from(entry))
        elif section == "scenario":
            scenario.update(entry)
        entry = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            if section is not None:
                flush()
            section = line[1:-1].strip().lower()
            if section not in ("scenario", "publisher", "episode"):
                raise ScenarioError(f"line {line_no}: unknown section [{section}]")
            continue
        if "=" not in line or section is None:
            raise ScenarioError(f"line {line_no}: expected key=value inside a section")
        key, value = (s.strip() for s in line.split("=", 1))
        entry[key] = value
    if section is not None:
        flush()

    try:
        index = int(scenario["index"])
        seed = int(scenario["seed"])
    except KeyError as exc:
        raise ScenarioError(f"[scenario] section missing key {exc}") from exc
    horizon = float(scenario.get("horizon", DEFAULT_HORIZON))
    if not episodes or not publishers:
        base = scenario_spec(index, seed, horizon)
        episodes = episodes or list(base.episodes)
        publishers = publishers or list(base.publishers)
    return ScenarioSpec(
        index=index,
        episodes=tuple(episodes),
        publishers=tuple(publishers),
        seed=seed,
        horizon=horizon,
    )


def _publisher_from(entry: dict[str, str]) -> Publisher:
    allowed = {"can_id", "period", "jitter", "dlc", "multi_frame"}
    _reject_unknown(entry, allowed, "publisher")
    try:
        return Publisher(
            can_id=int(entry["can_id"], 16),
            period=float(entry["period"]),
            jitter=float(entry.get("jitter", "0")),
            dlc=int(entry.get("dlc", "8")),
            multi_frame=entry.get("multi_frame", "false").lower() in ("1", "true", "yes"),
        )
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"bad [publisher] entry: {exc}") from exc


def _episode_from(entry: dict[str, str]) -> Episode:
    allowed = {"kind", "start", "duration", "interval", "capture_start", "capture_duration"}
    _reject_unknown(entry, allowed, "episode")
    try:
        return Episode(
            kind=entry["kind"],
            start=float(entry["start"]),
            duration=float(entry["duration"]),
            interval=float(entry["interval"]),
            capture_start=float(entry["capture_start"]) if "capture_start" in entry else None,
            capture_duration=(
                float(entry["capture_duration"]) if "capture_duration" in entry else None
            ),
        )
    except (KeyError, ValueError) as exc:
        raise ScenarioError(f"bad [episode] entry: {exc}") from exc


def _reject_unknown(entry: dict[str, str], allowed: set[str], section: str) -> None:
    unknown = set(entry) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys in [{section}]: {sorted(unknown)}")


def load_scenario_config(path: str | Path) -> ScenarioSpec:
    return parse_scenario_config(Path(path).read_text(encoding="utf-8"))
