"""Dataset generation: expert episodes and static scene collections on disk.

Layout (kind="episodes"):
    <root>/episode_<idx>/frame_<t>.png    8-bit RGB, lossless
    <root>/episode_<idx>/meta.jsonl       one record per frame
    <root>/manifest.json                  seed, config echo, per-episode checksums

kind="scenes" stores scene_<idx>.png plus states.jsonl at the root. Only
successful expert episodes are kept; failures are resampled. Everything is a
pure function of (config, seed), so re-runs are byte-identical.
"""
import hashlib
import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .expert import is_success, scripted_expert
from .render import render_u8
from .scene import SUCCESS_RADIUS, SceneState, sample_scene
from .sim import step

_TRIVIAL_START = 1.5 * SUCCESS_RADIUS


@dataclass
class TrajectoryRecord:
    """One expert demonstration held in memory."""

    frames: list  # list of (image_u8, SceneState, action (2,))
    target_block: int
    pole_pos: np.ndarray
    success: bool
    seed: int


def dumps_canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def rollout_expert(scene_seed, n_blocks, target_block, resolution, max_steps=200,
                   record_frames=True):
    """Run the scripted expert on a fresh scene; returns a TrajectoryRecord."""
    state = sample_scene(scene_seed, n_blocks)
    frames = []
    success = False
    for _ in range(max_steps):
        if is_success(state, target_block):
            success = True
            break
        action = scripted_expert(state, target_block)
        if record_frames:
            frames.append((render_u8(state, resolution), state, action.copy()))
        else:
            frames.append((None, state, action.copy()))
        state = step(state, action)
    else:
        success = is_success(state, target_block)
    # terminal frame with the zero action
    img = render_u8(state, resolution) if record_frames else None
    frames.append((img, state, np.zeros(2)))
    return TrajectoryRecord(
        frames=frames,
        target_block=target_block,
        pole_pos=state.pole_pos.copy(),
        success=success,
        seed=scene_seed if isinstance(scene_seed, int) else list(scene_seed),
    )


def _episode_candidate(seed, attempt, n_blocks, resolution, max_steps,
                       record_frames=True):
    """Sample a non-trivial episode for (seed, attempt); None if start is trivial."""
    rng = np.random.default_rng([seed, attempt, 7])
    target = int(rng.integers(n_blocks))
    state = sample_scene([seed, attempt], n_blocks)
    start_gap = state.pole_pos - state.block_poses[target, :2]
    if float(np.hypot(start_gap[0], start_gap[1])) <= _TRIVIAL_START:
        return None
    return rollout_expert([seed, attempt], n_blocks, target, resolution,
                          max_steps, record_frames=record_frames)


def _write_episode(ep_dir, record):
    ep_dir.mkdir(parents=True, exist_ok=True)
    sha = hashlib.sha256()
    meta_lines = []
    for t, (img, state, action) in enumerate(record.frames):
        path = ep_dir / f"frame_{t:04d}.png"
        Image.fromarray(img).save(path, format="PNG", optimize=False)
        sha.update(path.read_bytes())
        meta_lines.append(
            dumps_canonical(
                {
                    "t": t,
                    "state": state.to_json_dict(),
                    "action": list(action),
                    "target_block": record.target_block,
                    "pole_pos": list(record.pole_pos),
                }
            )
        )
    meta = "\n".join(meta_lines) + "\n"
    (ep_dir / "meta.jsonl").write_text(meta)
    sha.update(meta.encode())
    return sha.hexdigest()


def generate_dataset(out_dir, kind, count, n_blocks, resolution, seed,
                     max_steps=200, progress=None):
    """Write a dataset and its manifest; returns the manifest dict.

    kind="episodes": `count` successful expert episodes (failed attempts are
    resampled, up to 2x the quota). kind="scenes": `count` static scenes.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config_echo = {
        "kind": kind,
        "count": count,
        "n_blocks": n_blocks,
        "resolution": list(resolution),
        "seed": seed,
        "max_steps": max_steps,
    }

    entries = []
    if kind == "episodes":
        attempt = 0
        stored = 0
        while stored < count:
            if attempt >= 2 * count + 8:
                raise RuntimeError(
                    f"expert reached only {stored}/{count} episodes in {attempt} attempts"
                )
            record = _episode_candidate(seed, attempt, n_blocks, resolution, max_steps)
            attempt += 1
            if record is None or not record.success:
                continue
            checksum = _write_episode(out / f"episode_{stored:05d}", record)
            entries.append(
                {
                    "idx": stored,
                    "seed": [seed, attempt - 1],
                    "n_frames": len(record.frames),
                    "target_block": record.target_block,
                    "success": True,
                    "checksum": checksum,
                }
            )
            stored += 1
            if progress:
                progress(stored, count)
    elif kind == "scenes":
        state_lines = []
        for i in range(count):
            state = sample_scene([seed, i], n_blocks)
            img = render_u8(state, resolution)
            path = out / f"scene_{i:05d}.png"
            Image.fromarray(img).save(path, format="PNG", optimize=False)
            state_lines.append(
                dumps_canonical({"idx": i, "seed": [seed, i], "state": state.to_json_dict()})
            )
            entries.append(
                {
                    "idx": i,
                    "seed": [seed, i],
                    "checksum": hashlib.sha256(path.read_bytes()).hexdigest(),
                }
            )
            if progress:
                progress(i + 1, count)
        (out / "states.jsonl").write_text("\n".join(state_lines) + "\n")
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")

    manifest = {"version": 1, "config": config_echo, "entries": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def load_manifest(root):
    from pathlib import Path

    return json.loads((Path(root) / "manifest.json").read_text())


class EpisodeDataset:
    """Reader for kind="episodes" datasets."""

    def __init__(self, root):
        from pathlib import Path

        self.root = Path(root)
        self.manifest = load_manifest(self.root)
        if self.manifest["config"]["kind"] != "episodes":
            raise ValueError("not an episode dataset")

    def __len__(self):
        return len(self.manifest["entries"])

    @property
    def n_blocks(self):
        return self.manifest["config"]["n_blocks"]

    @property
    def resolution(self):
        return tuple(self.manifest["config"]["resolution"])

    def episode(self, idx):
        """Returns (images (T, H, W, 3) u8, states, actions (T, 2), target_block)."""
        ep_dir = self.root / f"episode_{idx:05d}"
        metas = [json.loads(line) for line in
                 (ep_dir / "meta.jsonl").read_text().splitlines()]
        images = np.stack(
            [np.asarray(Image.open(ep_dir / f"frame_{m['t']:04d}.png")) for m in metas]
        )
        states = [SceneState.from_json_dict(m["state"]) for m in metas]
        actions = np.array([m["action"] for m in metas], dtype=np.float64)
        return images, states, actions, metas[0]["target_block"]


class SceneDataset:
    """Reader for kind="scenes" datasets."""

    def __init__(self, root):
        from pathlib import Path

        self.root = Path(root)
        self.manifest = load_manifest(self.root)
        if self.manifest["config"]["kind"] != "scenes":
            raise ValueError("not a scene dataset")
        self._states = [
            json.loads(line)
            for line in (self.root / "states.jsonl").read_text().splitlines()
        ]

    def __len__(self):
        return len(self.manifest["entries"])

    @property
    def n_blocks(self):
        return self.manifest["config"]["n_blocks"]

    @property
    def resolution(self):
        return tuple(self.manifest["config"]["resolution"])

    def image(self, idx):
        return np.asarray(Image.open(self.root / f"scene_{idx:05d}.png"))

    def state(self, idx):
        return SceneState.from_json_dict(self._states[idx]["state"])

    def images(self):
        return np.stack([self.image(i) for i in range(len(self))])
