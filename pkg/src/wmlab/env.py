"""Deterministic 2D tabletop manipulation simulator.

An arm square moves over a table, grasps a block square, and carries it to
a circular goal region.  Observations are small RGB renders plus exact
segmentation and depth-layer channels derived from geometry (never from
colors), which is what the structure-guided augmenter relies on.

Everything is a pure function of (state, action, style, rng stream), and
frames reproduce bit-exactly from (initial state, actions, style).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .styles import StyleSpec, compose_rgb, quantize_rgb

CLASS_BACKGROUND = 0
CLASS_TABLE = 1
CLASS_GOAL = 2
CLASS_BLOCK = 3
CLASS_ARM = 4

# depth byte per class layer, background farthest, arm nearest
DEPTH_BYTES = np.array([0, 63, 127, 191, 255], dtype=np.uint8)

TABLE_MARGIN = 0.03
BLOCK_HALF = 0.0625
ARM_HALF = 0.09375
NOTCH_DEPTH_FRAC = 0.5  # fraction of arm height cut from the top edge
NOTCH_OPEN_FRAC = 0.55  # notch width / arm width when the gripper is open
NOTCH_CLOSED_FRAC = 0.18

PARK_POSITION = (0.14, 0.14)
ACTION_DIM = 3


@dataclass(frozen=True)
class EnvParams:
    height: int = 32
    width: int = 32
    delta_max: float = 0.1
    grasp_radius: float = 0.08
    goal_radius: float = 0.12


@dataclass(frozen=True)
class EnvState:
    arm_x: float
    arm_y: float
    block_x: float
    block_y: float
    goal_x: float
    goal_y: float
    goal_radius: float
    gripper_closed: bool = False
    held: bool = False

    @property
    def success(self) -> bool:
        return math.hypot(self.block_x - self.goal_x, self.block_y - self.goal_y) <= self.goal_radius

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.arm_x, self.arm_y, self.block_x, self.block_y, self.goal_x, self.goal_y, self.goal_radius],
            dtype=np.float32,
        )


@dataclass(frozen=True)
class Action:
    dx: float
    dy: float
    grip: int  # 0 = open, 1 = closed

    def to_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.grip], dtype=np.float32)


@dataclass(frozen=True)
class Frame:
    rgb: np.ndarray  # (H, W, 3) uint8
    seg: np.ndarray  # (H, W) uint8 class ids
    depth: np.ndarray  # (H, W) uint8 layer depth


def _clip(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def step(state: EnvState, action: Action, params: EnvParams = EnvParams()) -> EnvState:
    """One simulator step: move, set gripper, carry, (re)grasp.

    Total function: out-of-range action components are clipped to the
    actuation bound, positions are clamped to the unit workspace.
    """
    dm = params.delta_max
    dx = _clip(float(action.dx), -dm, dm)
    dy = _clip(float(action.dy), -dm, dm)
    arm_x = _clip(state.arm_x + dx, 0.0, 1.0)
    arm_y = _clip(state.arm_y + dy, 0.0, 1.0)
    closed = bool(action.grip)

    if state.held and closed:
        block_x, block_y = arm_x, arm_y  # carried block follows the arm
    else:
        block_x, block_y = state.block_x, state.block_y

    held = closed and max(abs(arm_x - block_x), abs(arm_y - block_y)) <= params.grasp_radius
    if held:
        block_x, block_y = arm_x, arm_y  # grasp centers the block in the gripper

    return replace(
        state,
        arm_x=arm_x,
        arm_y=arm_y,
        block_x=block_x,
        block_y=block_y,
        gripper_closed=closed,
        held=held,
    )


def render_structure(state: EnvState, params: EnvParams = EnvParams()) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize class ids and depth layers; colors never enter here."""
    h, w = params.height, params.width
    xs = (np.arange(w, dtype=np.float32) + 0.5) / w
    ys = (np.arange(h, dtype=np.float32) + 0.5) / h
    x = xs.reshape(1, w)
    y = ys.reshape(h, 1)

    seg = np.zeros((h, w), dtype=np.uint8)
    table = (
        (x >= TABLE_MARGIN) & (x <= 1.0 - TABLE_MARGIN) & (y >= TABLE_MARGIN) & (y <= 1.0 - TABLE_MARGIN)
    )
    seg[table] = CLASS_TABLE
    goal = (x - state.goal_x) ** 2 + (y - state.goal_y) ** 2 <= state.goal_radius**2
    seg[goal] = CLASS_GOAL
    block = (np.abs(x - state.block_x) <= BLOCK_HALF) & (np.abs(y - state.block_y) <= BLOCK_HALF)
    seg[block] = CLASS_BLOCK

    arm_square = (np.abs(x - state.arm_x) <= ARM_HALF) & (np.abs(y - state.arm_y) <= ARM_HALF)
    notch_frac = NOTCH_CLOSED_FRAC if state.gripper_closed else NOTCH_OPEN_FRAC
    notch = (
        (np.abs(x - state.arm_x) <= ARM_HALF * notch_frac)
        & (y >= state.arm_y - ARM_HALF)
        & (y <= state.arm_y - ARM_HALF + 2.0 * ARM_HALF * NOTCH_DEPTH_FRAC)
    )
    seg[arm_square & ~notch] = CLASS_ARM

    return seg, DEPTH_BYTES[seg]


def render(state: EnvState, style: StyleSpec, params: EnvParams = EnvParams()) -> Frame:
    seg, depth = render_structure(state, params)
    rgb = quantize_rgb(compose_rgb(seg, depth, style))
    return Frame(rgb=rgb, seg=seg, depth=depth)


def expert_policy(
    state: EnvState,
    rng: np.random.Generator,
    params: EnvParams = EnvParams(),
    noise: float = 0.02,
    slip_prob: float = 0.0,
) -> Action:
    """Scripted pick-and-place: approach, grasp, carry, release, park.

    Gaussian jitter on the move makes approaches imprecise, and with
    probability slip_prob the gripper involuntarily opens for one step,
    dropping a carried block mid-transit.  The policy simply re-approaches
    and re-grasps, which is the recoverable-failure motif the evaluation
    cares about.
    """
    dm = params.delta_max
    release_radius = 0.8 * state.goal_radius

    if state.held:
        dist_goal = math.hypot(state.block_x - state.goal_x, state.block_y - state.goal_y)
        if dist_goal <= release_radius:
            move_x, move_y, grip = 0.0, 0.0, 0
        else:
            move_x = _clip(state.goal_x - state.arm_x, -dm, dm)
            move_y = _clip(state.goal_y - state.arm_y, -dm, dm)
            grip = 1
    else:
        dist_block_goal = math.hypot(state.block_x - state.goal_x, state.block_y - state.goal_y)
        if dist_block_goal <= release_radius:
            move_x = _clip(PARK_POSITION[0] - state.arm_x, -dm, dm)
            move_y = _clip(PARK_POSITION[1] - state.arm_y, -dm, dm)
            grip = 0
        else:
            to_block_x = state.block_x - state.arm_x
            to_block_y = state.block_y - state.arm_y
            move_x = _clip(to_block_x, -dm, dm)
            move_y = _clip(to_block_y, -dm, dm)
            grip = 1 if max(abs(to_block_x), abs(to_block_y)) <= 0.6 * params.grasp_radius else 0

    jx, jy = rng.normal(0.0, 1.0, size=2)
    move_x = _clip(move_x + noise * jx, -dm, dm)
    move_y = _clip(move_y + noise * jy, -dm, dm)
    if slip_prob > 0.0 and rng.random() < slip_prob:
        grip = 0
    return Action(dx=float(move_x), dy=float(move_y), grip=grip)


def random_init_state(rng: np.random.Generator, params: EnvParams = EnvParams()) -> EnvState:
    arm = rng.uniform(0.15, 0.85, size=2)
    while True:
        block = rng.uniform(0.15, 0.85, size=2)
        if max(abs(block[0] - arm[0]), abs(block[1] - arm[1])) > 2.0 * ARM_HALF:
            break
    while True:
        goal = rng.uniform(0.2, 0.8, size=2)
        if math.hypot(block[0] - goal[0], block[1] - goal[1]) > params.goal_radius + 0.15:
            break
    return EnvState(
        arm_x=float(arm[0]),
        arm_y=float(arm[1]),
        block_x=float(block[0]),
        block_y=float(block[1]),
        goal_x=float(goal[0]),
        goal_y=float(goal[1]),
        goal_radius=params.goal_radius,
    )


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------

@dataclass
class Episode:
    episode_id: int
    style: StyleSpec
    init_state: EnvState
    actions: np.ndarray  # (L, 3) float32: dx, dy, grip
    rgb: np.ndarray  # (L, H, W, 3) uint8
    seg: np.ndarray  # (L, H, W) uint8
    depth: np.ndarray  # (L, H, W) uint8
    success: bool

    def __len__(self) -> int:
        return int(self.actions.shape[0])


def replay_states(init_state: EnvState, actions: np.ndarray, params: EnvParams = EnvParams()) -> list[EnvState]:
    """All L+1 states, including the initial one."""
    states = [init_state]
    s = init_state
    for a in actions:
        s = step(s, Action(dx=float(a[0]), dy=float(a[1]), grip=int(round(float(a[2])))), params)
        states.append(s)
    return states


def render_episode(
    init_state: EnvState,
    actions: np.ndarray,
    style: StyleSpec,
    params: EnvParams = EnvParams(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frames for the L post-action states, as (rgb, seg, depth) arrays."""
    states = replay_states(init_state, actions, params)[1:]
    n = len(states)
    rgb = np.empty((n, params.height, params.width, 3), dtype=np.uint8)
    seg = np.empty((n, params.height, params.width), dtype=np.uint8)
    depth = np.empty((n, params.height, params.width), dtype=np.uint8)
    for i, s in enumerate(states):
        f = render(s, style, params)
        rgb[i], seg[i], depth[i] = f.rgb, f.seg, f.depth
    return rgb, seg, depth


def restyle_episode(ep: Episode, style: StyleSpec, params: EnvParams) -> Episode:
    """Re-render an episode under a different style (simulator oracle)."""
    rgb, seg, depth = render_episode(ep.init_state, ep.actions, style, params)
    return Episode(
        episode_id=ep.episode_id,
        style=style,
        init_state=ep.init_state,
        actions=ep.actions,
        rgb=rgb,
        seg=seg,
        depth=depth,
        success=ep.success,
    )


CLUMSY_PROB = 0.12  # fraction of episodes with badly mis-tuned control
CLUMSY_NOISE_SCALE = 6.0
DEFAULT_SLIP_PROB = 0.03


def generate_episode(
    episode_id: int,
    episode_len: int,
    style: StyleSpec,
    rng: np.random.Generator,
    params: EnvParams = EnvParams(),
    expert_noise: float = 0.02,
    slip_prob: float = DEFAULT_SLIP_PROB,
) -> Episode:
    init_state = random_init_state(rng, params)
    if rng.random() < CLUMSY_PROB:
        expert_noise = expert_noise * CLUMSY_NOISE_SCALE
    s = init_state
    actions = np.empty((episode_len, ACTION_DIM), dtype=np.float32)
    for t in range(episode_len):
        a = expert_policy(s, rng, params, noise=expert_noise, slip_prob=slip_prob)
        actions[t] = a.to_array()
        s = step(s, a, params)
    rgb, seg, depth = render_episode(init_state, actions, style, params)
    return Episode(
        episode_id=episode_id,
        style=style,
        init_state=init_state,
        actions=actions,
        rgb=rgb,
        seg=seg,
        depth=depth,
        success=s.success,
    )


def generate_dataset(
    n_episodes: int,
    episode_len: int,
    style_pool: tuple[StyleSpec, ...],
    seed: int,
    params: EnvParams = EnvParams(),
    expert_noise: float = 0.02,
    temporal_factor: int = 4,
) -> list[Episode]:
    """Reproducible episode set; episode i owns the rng stream (seed, i)."""
    if episode_len <= 0 or episode_len % temporal_factor != 0:
        raise ConfigError(
            f"episode_len must be a positive multiple of the temporal factor "
            f"{temporal_factor}, got {episode_len}"
        )
    if not style_pool:
        raise ConfigError("generate_dataset: empty style pool")
    episodes = []
    for eid in range(n_episodes):
        rng = np.random.default_rng([seed, eid])
        style = style_pool[int(rng.integers(len(style_pool)))]
        episodes.append(generate_episode(eid, episode_len, style, rng, params, expert_noise))
    return episodes
