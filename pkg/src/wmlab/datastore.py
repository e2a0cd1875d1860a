"""Bit-exact binary persistence: dataset files and the metrics CSV.

Dataset format ("SWD1", little-endian):

    magic    4 bytes  b"SWD1"
    version  u32
    H, W, f_t, action_dim, n_episodes   u32 each
    offsets  u64 * n_episodes           absolute offset of each episode record
    record*  episode_id u32, success u8, gripper u8, held u8, pad u8,
             state f32*7 (arm xy, block xy, goal xy, goal radius),
             style blob, length u32,
             actions f32*(L*action_dim), rgb u8*(L*H*W*3),
             seg u8*(L*H*W), depth u8*(L*H*W)

The offset table makes single-episode reads possible without loading the
whole file.  Round trips are bit-exact by construction (raw u8 frames, raw
f32 actions, no compression).
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import ACTION_DIM, EnvState, Episode
from .errors import ConfigError, DataFormatError
from .styles import StyleSpec

MAGIC = b"SWD1"
VERSION = 1
_HEADER = struct.Struct("<5I")  # H, W, f_t, action_dim, n_episodes


@dataclass(frozen=True)
class DatasetHeader:
    height: int
    width: int
    temporal_factor: int
    action_dim: int
    n_episodes: int


def _style_blob(style: StyleSpec) -> bytes:
    colors = bytes(v for c in style.colors for v in c)
    label = style.task_label.encode("utf-8")
    return (
        colors
        + struct.pack("<3d", style.brightness, style.saturation, style.light_angle)
        + struct.pack("<H", len(label))
        + label
    )


def _read_style(f) -> StyleSpec:
    raw = _read_exact(f, 15 + 24 + 2, "style")
    colors = tuple(tuple(raw[i * 3 : i * 3 + 3]) for i in range(5))
    brightness, saturation, angle = struct.unpack("<3d", raw[15:39])
    (label_len,) = struct.unpack("<H", raw[39:41])
    label = _read_exact(f, label_len, "style label").decode("utf-8") if label_len else ""
    return StyleSpec(
        colors=colors,
        brightness=float(brightness),
        saturation=float(saturation),
        light_angle=float(angle),
        task_label=label,
    )


def _read_exact(f, n: int, what: str) -> bytes:
    raw = f.read(n)
    if len(raw) != n:
        raise DataFormatError(f"dataset truncated while reading {what}")
    return raw


def write_dataset(episodes: list[Episode], path, temporal_factor: int = 4) -> None:
    path = Path(path)
    if episodes:
        h, w = episodes[0].rgb.shape[1], episodes[0].rgb.shape[2]
        for ep in episodes:
            if ep.rgb.shape[1:] != (h, w, 3) or ep.seg.shape[1:] != (h, w):
                raise ConfigError(
                    f"episode {ep.episode_id}: frame dims {ep.rgb.shape[1:]} != dataset dims {(h, w, 3)}"
                )
            if len(ep) % temporal_factor != 0:
                raise ConfigError(
                    f"episode {ep.episode_id}: length {len(ep)} not a multiple of {temporal_factor}"
                )
            if ep.actions.shape != (len(ep), ACTION_DIM):
                raise ConfigError(f"episode {ep.episode_id}: bad action shape {ep.actions.shape}")
    else:
        h = w = 0

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(_HEADER.pack(h, w, temporal_factor, ACTION_DIM, len(episodes)))
        offset_pos = f.tell()
        f.write(b"\x00" * 8 * len(episodes))
        offsets = []
        for ep in episodes:
            offsets.append(f.tell())
            st = ep.init_state
            f.write(struct.pack("<IBBBB", ep.episode_id, int(ep.success), int(st.gripper_closed), int(st.held), 0))
            f.write(
                struct.pack(
                    "<7d", st.arm_x, st.arm_y, st.block_x, st.block_y, st.goal_x, st.goal_y, st.goal_radius
                )
            )
            f.write(_style_blob(ep.style))
            f.write(struct.pack("<I", len(ep)))
            f.write(np.ascontiguousarray(ep.actions, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(ep.rgb).tobytes())
            f.write(np.ascontiguousarray(ep.seg).tobytes())
            f.write(np.ascontiguousarray(ep.depth).tobytes())
        f.seek(offset_pos)
        f.write(struct.pack(f"<{len(offsets)}Q", *offsets))
    os.replace(tmp, path)


def read_header(path) -> tuple[DatasetHeader, list[int]]:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise DataFormatError(f"{path}: not a SWD1 dataset")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != VERSION:
            raise DataFormatError(f"{path}: unsupported dataset version {version}")
        h, w, f_t, adim, n = _HEADER.unpack(_read_exact(f, _HEADER.size, "header"))
        offsets = list(struct.unpack(f"<{n}Q", _read_exact(f, 8 * n, "offset table")))
    return DatasetHeader(h, w, f_t, adim, n), offsets


def _read_episode_record(f, header: DatasetHeader) -> Episode:
    eid, success, gripper, held, _ = struct.unpack("<IBBBB", _read_exact(f, 8, "episode header"))
    vals = struct.unpack("<7d", _read_exact(f, 56, "state"))
    init_state = EnvState(
        arm_x=float(vals[0]),
        arm_y=float(vals[1]),
        block_x=float(vals[2]),
        block_y=float(vals[3]),
        goal_x=float(vals[4]),
        goal_y=float(vals[5]),
        goal_radius=float(vals[6]),
        gripper_closed=bool(gripper),
        held=bool(held),
    )
    style = _read_style(f)
    (length,) = struct.unpack("<I", _read_exact(f, 4, "episode length"))
    h, w = header.height, header.width
    actions = np.frombuffer(
        _read_exact(f, 4 * length * header.action_dim, "actions"), dtype="<f4"
    ).reshape(length, header.action_dim)
    rgb = np.frombuffer(_read_exact(f, length * h * w * 3, "rgb"), dtype=np.uint8).reshape(length, h, w, 3)
    seg = np.frombuffer(_read_exact(f, length * h * w, "seg"), dtype=np.uint8).reshape(length, h, w)
    depth = np.frombuffer(_read_exact(f, length * h * w, "depth"), dtype=np.uint8).reshape(length, h, w)
    return Episode(
        episode_id=int(eid),
        style=style,
        init_state=init_state,
        actions=actions.copy(),
        rgb=rgb.copy(),
        seg=seg.copy(),
        depth=depth.copy(),
        success=bool(success),
    )


def read_dataset(path) -> list[Episode]:
    header, offsets = read_header(path)
    episodes = []
    with open(path, "rb") as f:
        for off in offsets:
            f.seek(off)
            episodes.append(_read_episode_record(f, header))
    return episodes


def read_episode(path, index: int) -> Episode:
    """Stream one episode without loading the rest of the file."""
    header, offsets = read_header(path)
    if not 0 <= index < header.n_episodes:
        raise ConfigError(f"episode index {index} out of range [0, {header.n_episodes})")
    with open(path, "rb") as f:
        f.seek(offsets[index])
        return _read_episode_record(f, header)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

METRICS_COLUMNS = ("run_id", "config", "step", "metric", "value")


class MetricsTable:
    """Append-only CSV of (run id, config label, step/horizon, metric, value).

    Values are formatted with repr() so reruns under the same seed emit
    byte-identical files.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        new = not self.path.exists()
        self._fh = open(self.path, "a", newline="")
        self._writer = csv.writer(self._fh)
        if new:
            self._writer.writerow(METRICS_COLUMNS)
            self._fh.flush()

    def append(self, run_id: str, config: str, step: int, metric: str, value: float) -> None:
        self._writer.writerow([run_id, config, step, metric, repr(float(value))])

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "MetricsTable":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != METRICS_COLUMNS:
            raise DataFormatError(f"{path}: unexpected metrics header {reader.fieldnames}")
        rows = []
        for row in reader:
            row["step"] = int(row["step"])
            row["value"] = float(row["value"])
            rows.append(row)
        return rows
