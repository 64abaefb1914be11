"""Seeded rollout evaluation: success when the target block reaches the pole.

Episodes are sampled by the same scene/target derivation as dataset
generation (with the trivial-start filter), under an evaluation seed base
kept disjoint from every training dataset seed. Rollouts are batched so a
perception model forward serves many episodes at once.
"""
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from ..scenegen import MAX_STEP, SUCCESS_RADIUS, is_success, render_u8, sample_scene
from ..scenegen import scripted_expert, step
from ..scenegen.dataset import _TRIVIAL_START
from ..slotcore import images_to_tensor
from .bc import dfo_minimize
from .observations import append_target_onehot, build_observation


def eval_episodes(seed_base, n_blocks, count):
    """First `count` non-trivial (state, target, candidate_seed) tuples."""
    out = []
    c = 0
    while len(out) < count:
        rng = np.random.default_rng([seed_base, c, 7])
        target = int(rng.integers(n_blocks))
        state = sample_scene([seed_base, c], n_blocks)
        gap = state.pole_pos - state.block_poses[target, :2]
        if float(np.hypot(gap[0], gap[1])) > _TRIVIAL_START:
            out.append((state, target, [seed_base, c]))
        c += 1
    return out


class TorchPolicy:
    """Frozen policy checkpoint + perception models as a rollout callable."""

    needs_images = True

    def __init__(self, net, cfg, *, slot_model=None, ae_model=None, dfo_seed=0):
        self.net = net
        self.cfg = cfg
        self.variant = cfg["variant"]
        self.n_blocks = cfg["n_blocks"]
        self.slot_model = slot_model
        self.ae_model = ae_model
        self.dfo_gen = torch.Generator().manual_seed(dfo_seed)

    def __call__(self, images_u8, states, targets):
        images = images_to_tensor(np.stack(images_u8))
        obs = build_observation(images, self.variant, states=states,
                                slot_model=self.slot_model, ae_model=self.ae_model)
        obs = append_target_onehot(obs, targets, self.n_blocks)
        if self.cfg["trainer"] == "explicit":
            with torch.no_grad():
                return self.net(obs).numpy().astype(np.float64)
        return dfo_minimize(self.net, obs, generator=self.dfo_gen).numpy().astype(np.float64)


class ExpertPolicy:
    """The scripted expert behind the policy interface (oracle reference)."""

    needs_images = False

    def __init__(self, max_step=MAX_STEP):
        self.max_step = max_step

    def __call__(self, images_u8, states, targets):
        return np.stack([scripted_expert(s, t, max_step=self.max_step)
                         for s, t in zip(states, targets)])


def _dump_frames(record_dir, ep_idx, frames):
    d = record_dir / f"episode_{ep_idx:04d}"
    d.mkdir(parents=True, exist_ok=True)
    for t, img in enumerate(frames):
        Image.fromarray(img).save(d / f"frame_{t:04d}.png", format="PNG", optimize=False)


def evaluate_policy(policy, *, n_episodes, n_blocks, seed_base, max_steps=200,
                    success_radius=SUCCESS_RADIUS, resolution=(64, 64), batch=32,
                    record_dir=None, record_episodes=0):
    """Roll the policy on seeded episodes; returns per-episode outcomes.

    Success: target-pole distance <= success_radius at any step <= max_steps.
    """
    episodes = eval_episodes(seed_base, n_blocks, n_episodes)
    success = np.zeros(n_episodes, dtype=bool)
    lengths = np.zeros(n_episodes, dtype=np.int64)
    if record_dir is not None:
        from pathlib import Path

        record_dir = Path(record_dir)

    for start in range(0, n_episodes, batch):
        chunk = list(range(start, min(start + batch, n_episodes)))
        states = {i: episodes[i][0].copy() for i in chunk}
        recordings = {i: [] for i in chunk if record_dir and i < record_episodes}
        alive = list(chunk)
        for t in range(max_steps + 1):
            for i in list(alive):
                if is_success(states[i], episodes[i][1], success_radius=success_radius):
                    success[i] = True
                    lengths[i] = t
                    alive.remove(i)
            if not alive or t == max_steps:
                for i in alive:
                    lengths[i] = max_steps
                break
            targets = [episodes[i][1] for i in alive]
            if policy.needs_images:
                frames = [render_u8(states[i], resolution) for i in alive]
                for i, img in zip(alive, frames):
                    if i in recordings:
                        recordings[i].append(img)
            else:
                frames = None
            actions = policy(frames, [states[i] for i in alive], targets)
            for i, a in zip(alive, actions):
                states[i] = step(states[i], a)
        for i, frames in recordings.items():
            _dump_frames(record_dir, i, frames)

    return {
        "success": success.tolist(),
        "rate": float(success.mean()),
        "lengths": lengths.tolist(),
        "n_episodes": int(n_episodes),
        "max_steps": int(max_steps),
        "success_radius": float(success_radius),
        "seed_base": seed_base,
    }


@dataclass
class PolicyEvalReport:
    """Success aggregated over policy-training seeds."""

    mean: float
    sd: float
    per_seed: dict
    seeds: list
    n_episodes: int
    max_steps: int
    success_radius: float

    def to_dict(self):
        return {
            "mean": float(self.mean),
            "sd": float(self.sd),
            "per_seed": {str(k): float(v) for k, v in self.per_seed.items()},
            "seeds": list(self.seeds),
            "n_episodes": int(self.n_episodes),
            "max_steps": int(self.max_steps),
            "success_radius": float(self.success_radius),
        }


def aggregate_eval(per_seed_results):
    """{seed: evaluate_policy result} -> PolicyEvalReport (population SD)."""
    if not per_seed_results:
        raise ValueError("no per-seed results")
    seeds = sorted(per_seed_results)
    rates = np.array([per_seed_results[s]["rate"] for s in seeds], dtype=np.float64)
    first = per_seed_results[seeds[0]]
    return PolicyEvalReport(
        mean=float(rates.mean()),
        sd=float(rates.std()),
        per_seed={s: float(per_seed_results[s]["rate"]) for s in seeds},
        seeds=list(seeds),
        n_episodes=first["n_episodes"],
        max_steps=first["max_steps"],
        success_radius=first["success_radius"],
    )
