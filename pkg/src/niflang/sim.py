"""Seeded 2-D rover simulator for the parking harness.

The rover is a kinematic turn-in-place unicycle: a drive primitive moves it
along its heading, a turn primitive rotates it on the spot, both with
multiplicative actuation noise whose variance a slip factor scales up.
Pose readout is ground truth plus additive sensor noise.  `run_parking`
closes the loop: it binds the motion/readout host functions into the
language interpreter, seeds the program's target variables by sampling a
command network, and resamples the remaining commands after every finished
primitive conditioned on the measured achieved magnitude.

Progress along a drive primitive is derived from the scalar product of the
start->goal and current->goal displacement vectors (`overshoot_metric`),
which keeps decreasing and flips sign past the goal even on a deviating
path, so a smooth `nwhile` guard on it terminates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .gauss import GaussianParams, sample
from .gbn import Gbn, MotionDirection, MotionType, sample_commands
from .lang import Env, GuardTrace, Nwhile, Seq, Stmt, bind_host, execute, parse
from .rng import RngStream


class SimError(RuntimeError):
    """Simulator-level failure (mismatched model, hopeless generator, ...)."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    r = math.remainder(theta, math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


@dataclass
class Pose:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def copy(self) -> "Pose":
        return Pose(self.x, self.y, self.theta)


@dataclass(frozen=True)
class Spot:
    """Rectangular parking spot: center pose plus side lengths (meters)."""

    x: float
    y: float
    theta: float
    length: float
    width: float

    def contains(self, px: float, py: float) -> bool:
        dx = px - self.x
        dy = py - self.y
        c = math.cos(self.theta)
        s = math.sin(self.theta)
        along = c * dx + s * dy
        across = -s * dx + c * dy
        return abs(along) <= 0.5 * self.length and abs(across) <= 0.5 * self.width


@dataclass(frozen=True)
class Primitive:
    kind: MotionType
    direction: MotionDirection
    magnitude: float

    @property
    def sign(self) -> float:
        return 1.0 if self.direction is MotionDirection.FORWARD else -1.0


Maneuver = tuple[Primitive, ...]


@dataclass
class World:
    """Mutable simulation state; single-owner (clone per experiment).

    Actuation noise is relative: one drive/turn call scales its magnitude
    by (1 + (1 + slip) * eta) with eta drawn from the configured params.
    """

    rover: Pose
    spot: Spot
    drive_noise: GaussianParams
    turn_noise: GaussianParams
    sensor_distance: GaussianParams
    sensor_angle: GaussianParams
    heading_tol: float
    substeps: int = 100
    slip: float = 0.0
    rng: RngStream = field(default_factory=lambda: RngStream(0))

    def clone(self, rng: Optional[RngStream] = None, slip: Optional[float] = None) -> "World":
        return World(
            rover=self.rover.copy(),
            spot=self.spot,
            drive_noise=self.drive_noise,
            turn_noise=self.turn_noise,
            sensor_distance=self.sensor_distance,
            sensor_angle=self.sensor_angle,
            heading_tol=self.heading_tol,
            substeps=self.substeps,
            slip=self.slip if slip is None else slip,
            rng=rng if rng is not None else RngStream(self.rng.seed),
        )

    def parked(self) -> bool:
        return self.spot.contains(self.rover.x, self.rover.y) and (
            abs(wrap_angle(self.rover.theta - self.spot.theta)) <= self.heading_tol
        )


def _actuation_factor(w: World, noise: GaussianParams, variance_scale: float) -> float:
    eta = sample(
        GaussianParams(noise.mean, noise.variance * variance_scale), w.rng
    )
    return 1.0 + (1.0 + w.slip) * eta


def step_drive(w: World, distance: float, variance_scale: float = 1.0) -> World:
    """Advance along the current heading by `distance` plus relative noise.

    `variance_scale` supports sub-step execution: splitting one primitive
    into k calls with variance_scale=k keeps the whole-primitive noise
    variance at the configured value.

    A slippery floor also lets the rover skid sideways: for slip > 0 the
    heading picks up a wander drawn from the angle-noise channel (scaled by
    slip) before the advance, a drift the longitudinal control loop cannot
    correct.  slip == 0 drives perfectly straight.
    """
    if w.slip > 0.0 and w.turn_noise.variance > 0.0:
        wander = GaussianParams(0.0, w.turn_noise.variance / variance_scale)
        w.rover.theta = wrap_angle(w.rover.theta + w.slip * sample(wander, w.rng))
    actual = distance * _actuation_factor(w, w.drive_noise, variance_scale)
    w.rover.x += actual * math.cos(w.rover.theta)
    w.rover.y += actual * math.sin(w.rover.theta)
    return w


def step_turn(w: World, angle: float, variance_scale: float = 1.0) -> World:
    """Rotate in place by `angle` plus relative noise; position unchanged."""
    actual = angle * _actuation_factor(w, w.turn_noise, variance_scale)
    w.rover.theta = wrap_angle(w.rover.theta + actual)
    return w


def overshoot_metric(start: Pose, target: tuple[float, float], current: Pose) -> float:
    """dot(target - start, target - current) over positions.

    Positive before the goal hyperplane, zero on it, negative past it --
    even when the path deviates from the straight line.
    """
    gx = target[0] - start.x
    gy = target[1] - start.y
    cx = target[0] - current.x
    cy = target[1] - current.y
    return gx * cx + gy * cy


def dead_reckon(
    start: Pose,
    maneuver: Sequence[Primitive],
    magnitudes: Optional[Sequence[float]] = None,
) -> Pose:
    """Closed-form endpoint of a primitive sequence with zero noise.

    `magnitudes` overrides the nominal magnitudes (e.g. to replay a recorded
    trace through the same kinds/directions).
    """
    pose = start.copy()
    for i, prim in enumerate(maneuver):
        mag = prim.magnitude if magnitudes is None else float(magnitudes[i])
        signed = prim.sign * mag
        if prim.kind is MotionType.DRIVE:
            pose.x += signed * math.cos(pose.theta)
            pose.y += signed * math.sin(pose.theta)
        else:
            pose.theta = wrap_angle(pose.theta + signed)
    return pose


def gen_expert_traces(
    world: World,
    count: int,
    nominal: Sequence[Primitive],
    jitter: Sequence[float],
    coupling: Sequence[float],
    rng: RngStream,
) -> list[np.ndarray]:
    """Synthesize `count` successful expert maneuvers.

    Each trace perturbs the nominal magnitudes with Gaussian jitter whose
    deviation is partially carried into the next primitive through the
    per-node coupling coefficients (entry 0 is unused), then keeps only
    traces whose dead-reckoned endpoint parks:  magnitudes t_1 = m_1 + e_1,
    t_i = m_i + c_i (t_{i-1} - m_{i-1}) + e_i,  e_i ~ N(0, jitter_i).

    Raises SimError if fewer than 1% of attempts park (a hopeless nominal
    maneuver or spot).
    """
    n = len(nominal)
    if count < 1:
        raise ValueError("count must be >= 1")
    if len(jitter) != n or len(coupling) != n:
        raise ValueError("jitter/coupling lengths must match the maneuver")
    means = [p.magnitude for p in nominal]
    traces: list[np.ndarray] = []
    attempts = 0
    floor = max(400, 50 * count)
    while len(traces) < count:
        attempts += 1
        if attempts > floor and len(traces) < 0.01 * attempts:
            raise SimError(
                f"expert success rate below 1% ({len(traces)}/{attempts}); "
                "nominal maneuver cannot reach the spot"
            )
        t = np.empty(n)
        for i in range(n):
            dev = coupling[i] * (t[i - 1] - means[i - 1]) if i > 0 else 0.0
            t[i] = means[i] + dev + sample(GaussianParams(0.0, jitter[i]), rng)
        end = dead_reckon(world.rover, nominal, magnitudes=t)
        if world.spot.contains(end.x, end.y) and (
            abs(wrap_angle(end.theta - world.spot.theta)) <= world.heading_tol
        ):
            traces.append(t)
    return traces


# --- Closed-loop parking ------------------------------------------------


@dataclass
class ParkingReport:
    """Immutable record of one closed-loop run."""

    seed: int
    success: bool
    final_pose: Pose
    guard_log: list[GuardTrace]
    path: list[tuple[int, float, float, float]]  # (t, x, y, theta) per sub-step
    targets: list[float]  # command vector as last resampled
    achieved: list[float]  # ground-truth achieved magnitude per primitive


def _count_loops(stmt: Stmt) -> int:
    match stmt:
        case Seq(first, second):
            return _count_loops(first) + _count_loops(second)
        case Nwhile(_, _, body):
            return 1 + _count_loops(body)
        case _:
            return 0


class _Engine:
    """Host-function backend mapping program I/O onto the world.

    One nwhile block executes one primitive of the command network:
    moving()/turning() advance the rover by one sub-step of the current
    target, getPose()/getAngle() return noisy progress along the primitive,
    and updateTargetLocations() finishes the primitive, resamples the
    remaining command vector conditioned on the measured achieved
    magnitude, and rebases progress for the next block.
    """

    def __init__(self, model: Gbn, world: World, rng_commands: RngStream, rng_sensor: RngStream):
        self.model = model
        self.world = world
        self.rng_commands = rng_commands
        self.rng_sensor = rng_sensor
        self.index = 0  # current primitive, 0-based
        self.start_pose = world.rover.copy()
        self.t = 0
        self.path: list[tuple[int, float, float, float]] = [self._path_point()]
        self.targets = [float(v) for v in sample_commands(model, rng_commands)]
        self.measured: dict[int, float] = {}
        self.achieved: list[float] = []
        self.env: Optional[Env] = None

    def _path_point(self) -> tuple[int, float, float, float]:
        r = self.world.rover
        return (self.t, r.x, r.y, r.theta)

    def _node(self):
        return self.model.nodes[self.index]

    def seed_store(self, env: Env):
        self.env = env
        env.store["currentDistance"] = 0.0
        env.store["currentAngle"] = 0.0
        for i, node in enumerate(self.model.nodes):
            env.store[f"targetLocation{i + 1}"] = self.targets[i]
            env.store[f"sigma{i + 1}"] = node.variance

    # -- host functions --

    def _next_increment(self, true_progress: float) -> float:
        # Closed-loop command issue: one sub-step, clipped to the distance
        # the engine's odometry still sees to the commanded magnitude.  The
        # primitive never overshoots its command, shortfalls keep the motor
        # on, and the guard is free to stop the primitive earlier.
        target = self.targets[self.index]
        remaining = target - true_progress
        if remaining <= 0.0:
            return 0.0
        return min(target / self.world.substeps, remaining)

    def moving(self) -> None:
        node = self._node()
        if node.motion_type is not MotionType.DRIVE:
            raise SimError(f"moving() during turn primitive {node.label!r}")
        sign = 1.0 if node.motion_direction is MotionDirection.FORWARD else -1.0
        increment = self._next_increment(self._drive_progress_true())
        step_drive(self.world, sign * increment, variance_scale=self.world.substeps)
        self.t += 1
        self.path.append(self._path_point())

    def turning(self) -> None:
        node = self._node()
        if node.motion_type is not MotionType.TURN:
            raise SimError(f"turning() during drive primitive {node.label!r}")
        sign = 1.0 if node.motion_direction is MotionDirection.FORWARD else -1.0
        increment = self._next_increment(self._turn_progress())
        step_turn(self.world, sign * increment, variance_scale=self.world.substeps)
        self.t += 1
        self.path.append(self._path_point())

    def _drive_progress(self) -> float:
        node = self._node()
        sign = 1.0 if node.motion_direction is MotionDirection.FORWARD else -1.0
        start = self.start_pose
        ux = math.cos(start.theta)
        uy = math.sin(start.theta)
        target_mag = self.targets[self.index]
        if target_mag > 1e-12:
            tx = start.x + sign * target_mag * ux
            ty = start.y + sign * target_mag * uy
            g2 = target_mag * target_mag
            ov = overshoot_metric(start, (tx, ty), self.world.rover)
            return (g2 - ov) / target_mag
        # degenerate or negative goal: plain projection on the motion axis
        return sign * (
            (self.world.rover.x - start.x) * ux + (self.world.rover.y - start.y) * uy
        )

    def _turn_progress(self) -> float:
        node = self._node()
        sign = 1.0 if node.motion_direction is MotionDirection.FORWARD else -1.0
        return sign * wrap_angle(self.world.rover.theta - self.start_pose.theta)

    def get_pose(self) -> float:
        node = self._node()
        if node.motion_type is not MotionType.DRIVE:
            raise SimError(f"getPose() during turn primitive {node.label!r}")
        return self._drive_progress() + sample(self.world.sensor_distance, self.rng_sensor)

    def get_angle(self) -> float:
        node = self._node()
        if node.motion_type is not MotionType.TURN:
            raise SimError(f"getAngle() during drive primitive {node.label!r}")
        return self._turn_progress() + sample(self.world.sensor_angle, self.rng_sensor)

    def _finalize_current(self):
        node = self._node()
        if node.motion_type is MotionType.DRIVE:
            true_mag = self._drive_progress_true()
            noise = self.world.sensor_distance
        else:
            true_mag = self._turn_progress()
            noise = self.world.sensor_angle
        self.achieved.append(true_mag)
        self.measured[self.index + 1] = true_mag + sample(noise, self.rng_sensor)

    def _drive_progress_true(self) -> float:
        node = self._node()
        sign = 1.0 if node.motion_direction is MotionDirection.FORWARD else -1.0
        start = self.start_pose
        return sign * (
            (self.world.rover.x - start.x) * math.cos(start.theta)
            + (self.world.rover.y - start.y) * math.sin(start.theta)
        )

    def update_target_locations(self) -> None:
        if self.index >= self.model.n - 1:
            raise SimError("updateTargetLocations() called past the last primitive")
        self._finalize_current()
        vec = sample_commands(self.model, self.rng_commands, known=self.measured)
        for j in range(self.index + 1, self.model.n):
            self.targets[j] = float(vec[j])
            self.env.store[f"targetLocation{j + 1}"] = self.targets[j]
        self.index += 1
        self.start_pose = self.world.rover.copy()
        self.env.store["currentDistance"] = 0.0
        self.env.store["currentAngle"] = 0.0

    def finish(self):
        if len(self.achieved) == self.index:
            self._finalize_current()


def run_parking(
    program: Union[Stmt, str],
    model: Gbn,
    world: World,
    seed: int,
    budget: int = 1_000_000,
) -> ParkingReport:
    """Execute one closed-loop parking run; deterministic in `seed`.

    The program must contain exactly one nwhile block per model node.  All
    randomness (guards, command sampling, actuation, sensors) is derived
    from `seed`; the passed world is cloned, never mutated.
    """
    stmt = parse(program) if isinstance(program, str) else program
    loops = _count_loops(stmt)
    if loops != model.n:
        raise SimError(
            f"program has {loops} nwhile blocks but the model has {model.n} nodes"
        )
    root = RngStream(seed)
    w = world.clone(rng=root.split(3))
    engine = _Engine(model, w, rng_commands=root.split(2), rng_sensor=root.split(4))
    env = Env(rng=root.split(1), budget=budget, trace=True)
    engine.seed_store(env)
    bind_host(env, "moving", engine.moving)
    bind_host(env, "turning", engine.turning)
    bind_host(env, "getPose", engine.get_pose)
    bind_host(env, "getAngle", engine.get_angle)
    bind_host(env, "updateTargetLocations", engine.update_target_locations)
    execute(stmt, env)
    engine.finish()
    return ParkingReport(
        seed=seed,
        success=w.parked(),
        final_pose=w.rover.copy(),
        guard_log=env.trace or [],
        path=engine.path,
        targets=list(engine.targets),
        achieved=list(engine.achieved),
    )


def save_path(path_rows: Sequence[tuple[int, float, float, float]], file) -> None:
    """Write one run's path as `t,x,y,theta` CSV."""
    with open(file, "w", newline="") as fh:
        fh.write("t,x,y,theta\n")
        for t, x, y, theta in path_rows:
            fh.write(f"{t},{x:.17g},{y:.17g},{theta:.17g}\n")


# --- World configuration ------------------------------------------------


@dataclass(frozen=True)
class WorldConfig:
    """Parsed key-value world/maneuver file; see data/parking_world.cfg."""

    start: Pose
    spot: Spot
    heading_tol: float
    substeps: int
    drive_noise_var: float
    turn_noise_var: float
    sensor_distance_var: float
    sensor_angle_var: float
    slip: float
    maneuver: Maneuver
    expert_jitter: tuple[float, ...]
    expert_coupling: tuple[float, ...]

    def make_world(self, seed: int = 0, slip: Optional[float] = None) -> World:
        return World(
            rover=self.start.copy(),
            spot=self.spot,
            drive_noise=GaussianParams(0.0, self.drive_noise_var),
            turn_noise=GaussianParams(0.0, self.turn_noise_var),
            sensor_distance=GaussianParams(0.0, self.sensor_distance_var),
            sensor_angle=GaussianParams(0.0, self.sensor_angle_var),
            heading_tol=self.heading_tol,
            substeps=self.substeps,
            slip=self.slip if slip is None else slip,
            rng=RngStream(seed),
        )

    def zero_noise(self) -> "WorldConfig":
        return replace(
            self,
            drive_noise_var=0.0,
            turn_noise_var=0.0,
            sensor_distance_var=0.0,
            sensor_angle_var=0.0,
            slip=0.0,
        )

    def nominal_chain(self, variances, coeffs) -> Gbn:
        """Chain template over this maneuver with supplied uncertainties."""
        from .gbn import chain  # local import keeps module load order simple

        labels = []
        counts = {MotionType.DRIVE: 0, MotionType.TURN: 0}
        for p in self.maneuver:
            counts[p.kind] += 1
            labels.append(
                ("l" if p.kind is MotionType.DRIVE else "alpha") + str(counts[p.kind])
            )
        return chain(
            [p.magnitude for p in self.maneuver],
            list(variances),
            list(coeffs),
            labels=labels,
            motions=[(p.kind, p.direction) for p in self.maneuver],
        )


def _parse_primitive(text: str) -> Primitive:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"bad primitive {text!r} (want kind,direction,magnitude)")
    return Primitive(MotionType(parts[0]), MotionDirection(parts[1]), float(parts[2]))


def load_world_config(path) -> WorldConfig:
    """Parse the key-value world file (`key = value`, `#` comments)."""
    entries: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            entries[key.strip()] = value.strip()

    def need(key: str) -> str:
        if key not in entries:
            raise ValueError(f"{path}: missing key {key!r}")
        return entries[key]

    maneuver = tuple(
        _parse_primitive(chunk) for chunk in need("maneuver").split(";") if chunk.strip()
    )
    jitter = tuple(float(v) for v in need("expert.jitter").split(","))
    coupling = tuple(float(v) for v in need("expert.coupling").split(","))
    if len(jitter) != len(maneuver) or len(coupling) != len(maneuver):
        raise ValueError(f"{path}: expert.jitter/coupling must match the maneuver length")
    return WorldConfig(
        start=Pose(float(need("start.x")), float(need("start.y")), float(need("start.theta"))),
        spot=Spot(
            float(need("spot.x")),
            float(need("spot.y")),
            float(need("spot.theta")),
            float(need("spot.length")),
            float(need("spot.width")),
        ),
        heading_tol=float(need("heading.tolerance")),
        substeps=int(need("substeps")),
        drive_noise_var=float(need("actuation.drive.variance")),
        turn_noise_var=float(need("actuation.turn.variance")),
        sensor_distance_var=float(need("sensor.distance.variance")),
        sensor_angle_var=float(need("sensor.angle.variance")),
        slip=float(entries.get("slip", "0")),
        maneuver=maneuver,
        expert_jitter=jitter,
        expert_coupling=coupling,
    )
