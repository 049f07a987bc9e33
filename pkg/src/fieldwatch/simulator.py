"""Deterministic 2-D field simulation that synthesizes detection streams.

The simulated world is a rectangle seen from above: cameras at the
corners aimed inward, speakers spaced equally along the interior midline,
and constant-velocity animals. Image formation deliberately inverts the
engine's own linear ranging model instead of using a projective camera:
world offsets from a camera are mapped to pixel offsets from the image
center by ``1 / (range * IFOV)``, so with zero noise the engine's
estimated animal-speaker distance equals the ground-truth distance by
construction, and the simulator is an exact oracle for the decision path.
Projective effects are exactly what a real deployment's percent errors
measure, so they are modeled as injected multiplicative noise rather than
simulated geometrically.

Everything is seed-deterministic: the same scenario and seed produce the
same frames, metrics, and event log bytes.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .detections import BBox, Detection, DetectionFrame
from .optics import CameraIntrinsics, CameraPose, Point, in_field_of_view, rotate_vector
from .pipeline import (
    CameraSetup,
    ConfigError,
    Engine,
    EventLog,
    SpeakerSpec,
    SystemConfig,
    round_robin_schedule,
    serialize_frame,
)
from .ranging import RangingModel, pixel_distance_for

SPECIES_SPEEDS_M_S = {"bear": 1.7}

ANIMAL_BBOX_PX = (48.0, 32.0)
SPEAKER_BBOX_PX = (24.0, 24.0)

_SPACING_TOL_M = 1e-6


@dataclass(frozen=True)
class FieldLayout:
    """Rectangular field with corner cameras and interior speakers."""

    width_m: float
    height_m: float
    cameras: tuple[CameraSetup, ...]
    speakers: tuple[SpeakerSpec, ...]

    def __post_init__(self) -> None:
        if self.width_m <= 0 or self.height_m <= 0:
            raise ValueError("field dimensions must be positive")
        for cam in self.cameras:
            if cam.pose is None:
                raise ValueError(
                    f"camera {cam.intrinsics.camera_id} needs a pose in a field layout"
                )
        for spk in self.speakers:
            if spk.position is None:
                raise ValueError(f"speaker {spk.speaker_id} needs a world position")
            x, y = spk.position
            if not (0 <= x <= self.width_m and 0 <= y <= self.height_m):
                raise ValueError(
                    f"speaker {spk.speaker_id} at {spk.position} lies outside the "
                    f"{self.width_m} x {self.height_m} field"
                )

    def in_any_fov(self, point: Point) -> bool:
        return any(
            in_field_of_view(cam.pose, cam.intrinsics, point) for cam in self.cameras
        )


def generate_rectangular_layout(
    width_m: float,
    height_m: float,
    *,
    focal_length_mm: float,
    pixel_pitch_um: float,
    range_m: float,
    image_width: int = 1920,
    image_height: int = 1080,
    speaker_count: int = 4,
    angle_of_view_deg: float = 90.0,
) -> FieldLayout:
    """Four corner cameras aimed along their interior diagonals, speakers on
    the midline.

    Each camera's boresight bisects its corner's quadrant, so at a 90 degree
    angle of view the wedge boundaries lie exactly on the two adjacent field
    edges and the wedge spans the whole rectangle; union coverage of the
    interior then only needs the detail range to reach the field center
    (half the field diagonal). Aiming at the field center instead would tilt
    the wedge off the nearer edge on non-square fields.

    Speakers get IDs 1..count and sit at equal intervals along the
    horizontal midline; the spacing is ``width / (count + 1)``, equal to
    within float arithmetic.
    """
    if speaker_count < 1:
        raise ValueError(f"speaker_count must be >= 1, got {speaker_count}")
    aov = math.radians(angle_of_view_deg)
    corners = [(0.0, 0.0), (width_m, 0.0), (width_m, height_m), (0.0, height_m)]
    cameras = tuple(
        CameraSetup(
            intrinsics=CameraIntrinsics(
                camera_id=f"c{i + 1}",
                focal_length_mm=focal_length_mm,
                pixel_pitch_um=pixel_pitch_um,
                range_m=range_m,
                image_width=image_width,
                image_height=image_height,
            ),
            pose=CameraPose.facing(
                corner,
                (
                    corner[0] + (1.0 if corner[0] == 0.0 else -1.0),
                    corner[1] + (1.0 if corner[1] == 0.0 else -1.0),
                ),
                aov,
            ),
        )
        for i, corner in enumerate(corners)
    )
    spacing = width_m / (speaker_count + 1)
    speakers = tuple(
        SpeakerSpec(speaker_id=i, position=(spacing * i, height_m / 2.0))
        for i in range(1, speaker_count + 1)
    )
    gaps = [
        speakers[i + 1].position[0] - speakers[i].position[0]
        for i in range(len(speakers) - 1)
    ]
    if gaps and max(gaps) - min(gaps) > _SPACING_TOL_M:
        raise AssertionError(f"generated speaker spacing is uneven: {gaps}")
    return FieldLayout(width_m, height_m, cameras, speakers)


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative distance error applied per synthesized frame.

    ``fixed`` always scales by ``factor``; ``uniform`` draws a factor in
    [low, high] from the scenario's seeded generator. Percent errors in a
    real deployment are naturally relative, which is why the noise is a
    scale factor and not an additive offset. Note a uniform factor also
    jitters speaker pixel positions frame to frame, so the engine's track
    match radius must accommodate the jitter amplitude.
    """

    kind: str = "fixed"
    factor: float = 1.0
    low: float = 1.0
    high: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "uniform"):
            raise ValueError(f"noise kind must be 'fixed' or 'uniform', got {self.kind!r}")
        if self.kind == "fixed" and self.factor <= 0:
            raise ValueError(f"noise factor must be > 0, got {self.factor}")
        if self.kind == "uniform" and not (0 < self.low <= self.high):
            raise ValueError(f"noise bounds must satisfy 0 < low <= high, got {self.low}..{self.high}")

    def sample(self, rng: random.Random) -> float:
        if self.kind == "fixed":
            return self.factor
        return rng.uniform(self.low, self.high)


@dataclass(frozen=True)
class AnimalAgent:
    """Constant-velocity point animal; exists from ``entry_time_s`` on."""

    species: str
    position: Point
    velocity: Point
    entry_time_s: float = 0.0

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    @classmethod
    def moving(
        cls, species: str, start: Point, heading: Point, speed: float, entry_time_s: float = 0.0
    ) -> "AnimalAgent":
        norm = math.hypot(*heading)
        if norm == 0:
            raise ValueError("heading must be non-zero")
        if speed <= 0:
            raise ValueError(f"speed must be > 0, got {speed}")
        return cls(
            species=species,
            position=tuple(start),
            velocity=(heading[0] / norm * speed, heading[1] / norm * speed),
            entry_time_s=entry_time_s,
        )


@dataclass(frozen=True)
class SimulationState:
    time_s: float
    agents: tuple[AnimalAgent, ...]


def step(state: SimulationState, dt: float) -> SimulationState:
    """Advance every agent by its velocity; pure, returns the next state.

    Agents whose entry time falls inside the step move only for the
    portion of the step they exist; agents outside every camera's view
    still advance (the world does not pause off-screen).
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    t_next = state.time_s + dt
    agents = []
    for agent in state.agents:
        moving_time = max(0.0, t_next - max(state.time_s, agent.entry_time_s))
        agents.append(
            replace(
                agent,
                position=(
                    agent.position[0] + agent.velocity[0] * moving_time,
                    agent.position[1] + agent.velocity[1] * moving_time,
                ),
            )
        )
    return SimulationState(time_s=t_next, agents=tuple(agents))


@dataclass(frozen=True)
class Scenario:
    layout: FieldLayout
    agents: tuple[AnimalAgent, ...]
    duration_s: float
    tick_s: float
    seed: int = 0
    noise: NoiseModel | None = None
    species_speeds: dict | None = None

    def __post_init__(self) -> None:
        if self.tick_s <= 0:
            raise ValueError(f"tick_s must be > 0, got {self.tick_s}")
        if self.duration_s < self.tick_s:
            raise ValueError(
                f"duration_s ({self.duration_s}) must be at least one tick ({self.tick_s})"
            )
        speeds = self.species_speeds if self.species_speeds is not None else SPECIES_SPEEDS_M_S
        for agent in self.agents:
            if agent.species not in speeds:
                raise ValueError(
                    f"no configured speed for species {agent.species!r}; "
                    f"known: {sorted(speeds)}"
                )
            expected = speeds[agent.species]
            if not math.isclose(agent.speed, expected, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(
                    f"{agent.species} agent speed {agent.speed} does not match the "
                    f"species table value {expected}"
                )


def synthesize_frame(
    camera: CameraSetup,
    model: RangingModel,
    layout: FieldLayout,
    agents: Iterable[AnimalAgent],
    frame_index: int,
    timestamp_ms: int,
    noise_factor: float = 1.0,
) -> tuple[DetectionFrame, list[int], list[AnimalAgent]]:
    """Project visible speakers and agents into one camera's pixel frame.

    World offsets from the camera are divided by meters-per-pixel (the
    inverse of the ranging model) and placed around the principal point at
    the image center, so the pixel distance between any two visible
    objects maps back to ``noise_factor`` times their ground distance.
    Visibility is decided on true world positions; noise only perturbs the
    measurement. Speakers are emitted first, in ID order, then agents in
    the given order, all with confidence 1.0.

    Returns the frame plus the visible speaker IDs and visible agents in
    emission order, which the scenario driver uses as ground truth.
    """
    pose = camera.pose
    principal = (camera.intrinsics.image_width / 2.0, camera.intrinsics.image_height / 2.0)

    def to_pixel(world: Point) -> Point:
        dx = world[0] - pose.position[0]
        dy = world[1] - pose.position[1]
        ground = math.hypot(dx, dy)
        px = pixel_distance_for(model, ground * noise_factor)
        if ground == 0.0:
            return principal
        return (principal[0] + dx / ground * px, principal[1] + dy / ground * px)

    detections: list[Detection] = []
    visible_speakers: list[int] = []
    for spk in sorted(layout.speakers, key=lambda s: s.speaker_id):
        if not in_field_of_view(pose, camera.intrinsics, spk.position):
            continue
        cx, cy = to_pixel(spk.position)
        detections.append(
            Detection(
                bbox=BBox(cx, cy, SPEAKER_BBOX_PX[0], SPEAKER_BBOX_PX[1]),
                class_label="speaker",
                confidence=1.0,
            )
        )
        visible_speakers.append(spk.speaker_id)
    visible_agents: list[AnimalAgent] = []
    for agent in agents:
        if not in_field_of_view(pose, camera.intrinsics, agent.position):
            continue
        cx, cy = to_pixel(agent.position)
        detections.append(
            Detection(
                bbox=BBox(cx, cy, ANIMAL_BBOX_PX[0], ANIMAL_BBOX_PX[1]),
                class_label=agent.species,
                confidence=1.0,
            )
        )
        visible_agents.append(agent)
    frame = DetectionFrame(
        camera_id=camera.intrinsics.camera_id,
        frame_index=frame_index,
        timestamp_ms=timestamp_ms,
        detections=tuple(detections),
    )
    return frame, visible_speakers, visible_agents


def _interval_intersect(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    return (max(a[0], b[0]), min(a[1], b[1]))


def _camera_entry_interval(
    camera: CameraSetup, agent: AnimalAgent, horizon: tuple[float, float]
) -> tuple[float, float]:
    """Time interval within ``horizon`` during which the agent is visible.

    The view region is the intersection of a disk (detail range) with a
    wedge of half-angle aov/2 < pi/2, i.e. two half-planes, so along a
    straight trajectory each constraint admits one interval and their
    intersection is exact. Returns an empty interval (lo > hi) when the
    path never enters.
    """
    pose = camera.pose
    window = _interval_intersect(horizon, (max(horizon[0], agent.entry_time_s), horizon[1]))
    if window[0] > window[1]:
        return (math.inf, -math.inf)
    # Trajectory relative to the camera: q(t) = q0 + v * (t - entry).
    q0 = (
        agent.position[0] - pose.position[0],
        agent.position[1] - pose.position[1],
    )
    v = agent.velocity
    t0 = agent.entry_time_s

    # Range disk: |q(t)|^2 <= R^2, quadratic in (t - t0).
    a = v[0] ** 2 + v[1] ** 2
    b = 2.0 * (q0[0] * v[0] + q0[1] * v[1])
    c = q0[0] ** 2 + q0[1] ** 2 - camera.intrinsics.range_m ** 2
    if a == 0.0:
        disk = (-math.inf, math.inf) if c <= 0 else (math.inf, -math.inf)
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0:
            disk = (math.inf, -math.inf)
        else:
            root = math.sqrt(disc)
            disk = (t0 + (-b - root) / (2.0 * a), t0 + (-b + root) / (2.0 * a))
    interval = _interval_intersect(window, disk)

    # Wedge: two half-planes with inward normals rotated +-(aov/2 - pi/2)
    # from the boresight; dot(q(t), n) >= 0 is linear in t.
    half = camera.pose.angle_of_view / 2.0
    for normal in (
        rotate_vector(pose.boresight, half - math.pi / 2.0),
        rotate_vector(pose.boresight, math.pi / 2.0 - half),
    ):
        g = q0[0] * normal[0] + q0[1] * normal[1]
        s = v[0] * normal[0] + v[1] * normal[1]
        if s == 0.0:
            plane = (-math.inf, math.inf) if g >= 0 else (math.inf, -math.inf)
        elif s > 0:
            plane = (t0 - g / s, math.inf)
        else:
            plane = (-math.inf, t0 - g / s)
        interval = _interval_intersect(interval, plane)
    return interval


def fov_entry_time(layout: FieldLayout, agent: AnimalAgent, until_s: float) -> float | None:
    """Earliest time the agent's straight path enters any camera's view.

    Computed analytically from the initial agent state, independently of
    the tick quantization the engine sees, so it can serve as the ground
    truth for deterrence-lag measurements.
    """
    best = None
    for camera in layout.cameras:
        lo, hi = _camera_entry_interval(camera, agent, (agent.entry_time_s, until_s))
        if lo <= hi and (best is None or lo < best):
            best = lo
    return best


@dataclass(frozen=True)
class ScenarioMetrics:
    """What one simulated run produced, in engine terms."""

    ticks: int
    frames: int
    command_count: int
    alert_count: int
    first_detection_time_s: float | None
    first_command_time_s: float | None
    selected_speaker_ids: tuple[int, ...]
    correct_speaker_rate: float | None
    worst_case_lag_s: float | None

    def to_dict(self) -> dict:
        return {
            "ticks": self.ticks,
            "frames": self.frames,
            "command_count": self.command_count,
            "alert_count": self.alert_count,
            "first_detection_time_s": self.first_detection_time_s,
            "first_command_time_s": self.first_command_time_s,
            "selected_speaker_ids": list(self.selected_speaker_ids),
            "correct_speaker_rate": self.correct_speaker_rate,
            "worst_case_lag_s": self.worst_case_lag_s,
        }


def _system_config(scenario: Scenario, log_path: str) -> SystemConfig:
    return SystemConfig(
        cameras=scenario.layout.cameras,
        speakers=scenario.layout.speakers,
        frame_interval_s=scenario.tick_s,
        log_path=log_path,
    )


def run_scenario(
    scenario: Scenario,
    log_path: str | Path,
    stream_path: str | Path | None = None,
) -> ScenarioMetrics:
    """Drive the full pipeline over the scenario and score the outcome.

    Each tick, every camera contributes one synthesized frame, interleaved
    in round-robin order; frames are serialized to wire lines and pushed
    through the ingestion parser and decision engine exactly as real
    detector output would be. The correct-speaker rate scores each command
    against the ground-truth nearest visible speaker (world distances,
    smallest ID on ties); the worst-case lag compares each agent's first
    command against its analytic view-entry time.

    The synthesized stream, when requested, is written line for line and
    is directly usable as a replay fixture.
    """
    rng = random.Random(scenario.seed)
    noise = scenario.noise if scenario.noise is not None else NoiseModel()
    config = _system_config(scenario, str(log_path))
    models = {
        cam.intrinsics.camera_id: RangingModel.for_camera(cam.intrinsics)
        for cam in scenario.layout.cameras
    }
    n_ticks = int(scenario.duration_s / scenario.tick_s + 1e-9) + 1
    camera_ids = config.camera_ids()
    schedule = round_robin_schedule(camera_ids, n_ticks * len(camera_ids))
    cameras_by_id = {cam.intrinsics.camera_id: cam for cam in scenario.layout.cameras}
    speaker_pos = {s.speaker_id: s.position for s in scenario.layout.speakers}
    # Last synthesized pixel center per (camera, layout speaker), used to map
    # the engine's own track IDs back onto layout speaker IDs.
    speaker_pixels: dict[str, dict[int, Point]] = {cid: {} for cid in camera_ids}

    state = SimulationState(time_s=0.0, agents=scenario.agents)
    initial_agents = scenario.agents
    stream_lines: list[str] = []

    first_detection: float | None = None
    first_command: float | None = None
    selected: list[int] = []
    correct = 0
    total = 0
    alert_count = 0
    frames = 0
    first_command_by_agent: dict[int, float] = {}

    with EventLog(log_path, fresh=True) as log:
        engine = Engine(config, log, replay=True)
        for tick in range(n_ticks):
            t = tick * scenario.tick_s
            if tick > 0:
                state = step(state, scenario.tick_s)
            timestamp_ms = round(t * 1000.0)
            active = [
                (idx, agent)
                for idx, agent in enumerate(state.agents)
                if t >= agent.entry_time_s
            ]
            for camera_id in schedule[tick * len(camera_ids) : (tick + 1) * len(camera_ids)]:
                camera = cameras_by_id[camera_id]
                factor = noise.sample(rng)
                frame, visible_speaker_ids, visible_agents = synthesize_frame(
                    camera,
                    models[camera_id],
                    scenario.layout,
                    [agent for _, agent in active],
                    frame_index=tick,
                    timestamp_ms=timestamp_ms,
                    noise_factor=factor,
                )
                for det, spk_id in zip(frame.detections, visible_speaker_ids):
                    speaker_pixels[camera_id][spk_id] = (det.bbox.cx, det.bbox.cy)
                line = serialize_frame(frame)
                stream_lines.append(line)
                decision = engine.process_line(line)
                frames += 1
                alert_count += len(decision.alerts)
                if decision.threats and first_detection is None:
                    first_detection = t
                if decision.commands and first_command is None:
                    first_command = t
                # Commands come out one per visible threat agent, in the same
                # order the agents were synthesized (all confidences are 1.0,
                # so NMS preserves input order). Identity comparison: distinct
                # agents may momentarily share identical field values.
                agent_queue = [
                    (idx, agent)
                    for idx, agent in active
                    if any(agent is seen for seen in visible_agents)
                ]
                for command in decision.commands:
                    queue_pos = next(
                        (
                            qi
                            for qi, (_, a) in enumerate(agent_queue)
                            if a.species == command.animal_class
                        ),
                        None,
                    )
                    if queue_pos is None:
                        continue
                    agent_idx, agent = agent_queue.pop(queue_pos)
                    first_command_by_agent.setdefault(agent_idx, t)
                    layout_id = _nearest_layout_speaker(
                        engine, command, speaker_pixels[camera_id]
                    )
                    selected.append(layout_id)
                    truth = min(
                        (
                            (math.dist(agent.position, speaker_pos[sid]), sid)
                            for sid in visible_speaker_ids
                        ),
                        default=None,
                    )
                    total += 1
                    if truth is not None and layout_id == truth[1]:
                        correct += 1

    if stream_path is not None:
        Path(stream_path).write_text("".join(l + "\n" for l in stream_lines), encoding="utf-8")

    worst_lag = None
    for agent_idx, command_time in first_command_by_agent.items():
        entry = fov_entry_time(scenario.layout, initial_agents[agent_idx], scenario.duration_s)
        if entry is None:
            continue
        lag = command_time - entry
        if worst_lag is None or lag > worst_lag:
            worst_lag = lag
    return ScenarioMetrics(
        ticks=n_ticks,
        frames=frames,
        command_count=total,
        alert_count=alert_count,
        first_detection_time_s=first_detection,
        first_command_time_s=first_command,
        selected_speaker_ids=tuple(selected),
        correct_speaker_rate=(correct / total) if total else None,
        worst_case_lag_s=worst_lag,
    )


def _nearest_layout_speaker(
    engine: Engine, command, pixel_centers: dict[int, Point]
) -> int:
    """Map an engine track ID to the layout speaker it is tracking."""
    track = engine.registry(command.camera_id).tracks[command.speaker_id]
    center = (track.last_bbox.cx, track.last_bbox.cy)
    return min(
        pixel_centers.items(),
        key=lambda item: (math.dist(center, item[1]), item[0]),
    )[0]


# --------------------------------------------------------------------------
# Scenario files


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a scenario from its JSON document form."""
    try:
        field = doc["field"]
        camera = field["camera"]
        layout = generate_rectangular_layout(
            float(field["width_m"]),
            float(field["height_m"]),
            focal_length_mm=float(camera["focal_length_mm"]),
            pixel_pitch_um=float(camera["pixel_pitch_um"]),
            range_m=float(camera["range_m"]),
            image_width=int(camera.get("image_width", 1920)),
            image_height=int(camera.get("image_height", 1080)),
            speaker_count=int(field.get("speaker_count", 4)),
            angle_of_view_deg=float(field.get("angle_of_view_deg", 90.0)),
        )
        speeds = dict(SPECIES_SPEEDS_M_S)
        speeds.update(doc.get("species_speeds", {}))
        for entry in doc["agents"]:
            if entry["species"] not in speeds:
                raise ConfigError(
                    f"scenario document: no speed configured for species "
                    f"{entry['species']!r}; add it to species_speeds"
                )
        agents = tuple(
            AnimalAgent.moving(
                species=entry["species"],
                start=tuple(entry["start"]),
                heading=tuple(entry["heading"]),
                speed=float(speeds[entry["species"]]),
                entry_time_s=float(entry.get("entry_time_s", 0.0)),
            )
            for entry in doc["agents"]
        )
        noise_entry = doc.get("noise")
        noise = None
        if noise_entry is not None:
            noise = NoiseModel(
                kind=noise_entry.get("kind", "fixed"),
                factor=float(noise_entry.get("factor", 1.0)),
                low=float(noise_entry.get("low", 1.0)),
                high=float(noise_entry.get("high", 1.0)),
            )
        return Scenario(
            layout=layout,
            agents=agents,
            duration_s=float(doc["duration_s"]),
            tick_s=float(doc["tick_s"]),
            seed=int(doc.get("seed", 0)),
            noise=noise,
            species_speeds=speeds,
        )
    except KeyError as exc:
        raise ConfigError(f"scenario document: missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario document: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)
