"""Behavior cloning on expert episodes.

Two trainers over the same observation plumbing: explicit regression of the
expert action, and an energy model trained contrastively against uniform
counter-actions with derivative-free minimization at inference. Perception
models stay frozen; their checksums are echoed into the policy checkpoint.
"""
import json
from pathlib import Path

import numpy as np
import torch

from ..checkpoint import model_checksum, save_checkpoint
from ..scenegen import MAX_STEP, entity_ids, masks_from_ids, mask_stack
from ..slotcore.train import warmup_lr
from .nets import EnergyNet, PolicyNet
from .observations import VARIANTS, append_target_onehot, build_observation, observation_channels

_CACHE_VERSION = 1


def consolidate_transitions(dataset, cache_dir=None):
    """Flatten an EpisodeDataset into memmapped arrays (built once, reused).

    Returns dict with frames (T,H,W,3 u8), ids (T,H,W u8), actions (T,2 f32),
    targets (T u8) and an episode index table.
    """
    root = Path(cache_dir) if cache_dir else dataset.root / "transitions"
    index_path = root / "index.json"
    if index_path.exists():
        index = json.loads(index_path.read_text())
        if index.get("version") == _CACHE_VERSION and index["n_episodes"] == len(dataset):
            return _open_transitions(root, index)
    root.mkdir(parents=True, exist_ok=True)

    h, w = dataset.resolution
    counts = [e["n_frames"] for e in dataset.manifest["entries"]]
    total = int(sum(counts))
    frames = np.lib.format.open_memmap(root / "frames.npy", mode="w+",
                                       dtype=np.uint8, shape=(total, h, w, 3))
    ids = np.lib.format.open_memmap(root / "ids.npy", mode="w+",
                                    dtype=np.uint8, shape=(total, h, w))
    actions = np.zeros((total, 2), dtype=np.float32)
    targets = np.zeros(total, dtype=np.uint8)
    slices = []
    at = 0
    for i in range(len(dataset)):
        images, states, acts, target = dataset.episode(i)
        n = images.shape[0]
        frames[at : at + n] = images
        for j, s in enumerate(states):
            ids[at + j] = entity_ids(s, (h, w)).astype(np.uint8)
        actions[at : at + n] = acts
        targets[at : at + n] = target
        slices.append([at, at + n])
        at += n
    frames.flush()
    ids.flush()
    np.save(root / "actions.npy", actions)
    np.save(root / "targets.npy", targets)
    index = {
        "version": _CACHE_VERSION,
        "n_episodes": len(dataset),
        "n_frames": total,
        "resolution": [h, w],
        "n_blocks": dataset.n_blocks,
        "episode_slices": slices,
    }
    index_path.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")
    return _open_transitions(root, index)


def _open_transitions(root, index):
    return {
        "frames": np.load(root / "frames.npy", mmap_mode="r"),
        "ids": np.load(root / "ids.npy", mmap_mode="r"),
        "actions": np.load(root / "actions.npy"),
        "targets": np.load(root / "targets.npy"),
        "index": index,
    }


def take_episodes(transitions, n_episodes):
    """Restrict a transition table to its first n_episodes."""
    slices = transitions["index"]["episode_slices"][:n_episodes]
    if not slices:
        raise ValueError("dataset has no episodes")
    end = slices[-1][1]
    out = dict(transitions)
    out["frames"] = transitions["frames"][:end]
    out["ids"] = transitions["ids"][:end]
    out["actions"] = transitions["actions"][:end]
    out["targets"] = transitions["targets"][:end]
    out["index"] = dict(transitions["index"], episode_slices=slices,
                        n_episodes=len(slices), n_frames=int(end))
    return out


def _batch_observation(transitions, idx, variant, n_blocks, *, slot_model=None,
                       ae_model=None):
    frames = transitions["frames"][idx]
    images = torch.from_numpy(frames.astype(np.float32) / 255.0).permute(0, 3, 1, 2)
    if variant == "rgb_plus_gt_segmentation":
        stacks = [mask_stack(masks_from_ids(i, n_blocks)) for i in transitions["ids"][idx]]
        gt = torch.from_numpy(np.stack(stacks).astype(np.float32))
        obs = torch.cat([images, gt], dim=1)
    else:
        obs = build_observation(images, variant, slot_model=slot_model, ae_model=ae_model)
    return append_target_onehot(obs, transitions["targets"][idx], n_blocks)


def _perception_meta(variant, slot_model, ae_model):
    meta = {}
    if variant in ("slot_masks", "rgb_plus_slot"):
        if slot_model is None:
            raise ValueError(f"variant {variant!r} needs a slot checkpoint")
        meta["slot_k"] = slot_model.config.K
        meta["slot_checksum"] = model_checksum(slot_model)
    elif variant in ("autoencoder_features", "rgb_plus_autoencoder"):
        if ae_model is None:
            raise ValueError(f"variant {variant!r} needs an autoencoder checkpoint")
        meta["ae_channels"] = ae_model.config.enc_channels[-1]
        meta["ae_checksum"] = model_checksum(ae_model)
    return meta


def _bc_loop(net, loss_of, transitions, out_dir, *, steps, batch_size, lr, warmup,
             save_every, seed, config, log):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    n = transitions["frames"].shape[0]
    history = []
    window = []
    best = float("inf")
    for step in range(steps):
        for g in opt.param_groups:
            g["lr"] = warmup_lr(step, lr, warmup)
        idx = np.sort(rng.integers(0, n, size=batch_size))
        loss = loss_of(idx, step)
        if not torch.isfinite(loss):
            raise RuntimeError(f"policy training diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        val = float(loss.detach())
        history.append(val)
        window.append(val)
        if (step + 1) % save_every == 0 or step + 1 == steps:
            mean = float(np.mean(window))
            window = []
            save_checkpoint(out / "last.pt", "policy", config, net.state_dict(),
                            step + 1, mean)
            if mean < best:
                best = mean
                save_checkpoint(out / "best.pt", "policy", config, net.state_dict(),
                                step + 1, mean)
            if log:
                log(step + 1, mean)
    curve = "".join(f"{i},{v!r}\n" for i, v in enumerate(history))
    (out / "loss_curve.csv").write_text("step,loss\n" + curve)
    return history, best


def bc_train_explicit(transitions, variant, out_dir, *, steps, batch_size=32,
                      lr=4e-4, warmup=500, save_every=250, seed=0,
                      slot_model=None, ae_model=None, max_step=MAX_STEP, log=None):
    """Regress expert actions under squared error (in max_step units)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown perception variant {variant!r}")
    n_blocks = transitions["index"]["n_blocks"]
    meta = _perception_meta(variant, slot_model, ae_model)
    in_ch = observation_channels(variant, n_blocks, slot_k=meta.get("slot_k"),
                                 ae_channels=meta.get("ae_channels")) + n_blocks
    torch.manual_seed(seed)
    net = PolicyNet(in_ch, max_step)
    actions = torch.from_numpy(np.asarray(transitions["actions"]))
    config = {
        "trainer": "explicit", "variant": variant, "n_blocks": n_blocks,
        "resolution": transitions["index"]["resolution"], "in_channels": in_ch,
        "max_step": max_step, "seed": seed, **meta,
    }

    def loss_of(idx, step):
        obs = _batch_observation(transitions, idx, variant, n_blocks,
                                 slot_model=slot_model, ae_model=ae_model)
        pred = net(obs)
        return (((pred - actions[idx]) / max_step) ** 2).mean()

    history, best = _bc_loop(net, loss_of, transitions, out_dir, steps=steps,
                             batch_size=batch_size, lr=lr, warmup=warmup,
                             save_every=save_every, seed=seed, config=config, log=log)
    return net, history, best


def bc_train_implicit(transitions, variant, out_dir, *, steps, batch_size=16,
                      n_counter=63, lr=4e-4, warmup=500, save_every=250, seed=0,
                      slot_model=None, ae_model=None, max_step=MAX_STEP, log=None):
    """Contrastive energy training: expert action vs uniform counter-actions."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown perception variant {variant!r}")
    if n_counter < 1:
        raise ValueError("need at least one counter-sample")
    n_blocks = transitions["index"]["n_blocks"]
    meta = _perception_meta(variant, slot_model, ae_model)
    in_ch = observation_channels(variant, n_blocks, slot_k=meta.get("slot_k"),
                                 ae_channels=meta.get("ae_channels")) + n_blocks
    torch.manual_seed(seed)
    net = EnergyNet(in_ch, max_step)
    gen = torch.Generator().manual_seed(seed + 1)
    actions = torch.from_numpy(np.asarray(transitions["actions"]))
    labels = torch.zeros(batch_size, dtype=torch.long)
    config = {
        "trainer": "implicit", "variant": variant, "n_blocks": n_blocks,
        "resolution": transitions["index"]["resolution"], "in_channels": in_ch,
        "max_step": max_step, "seed": seed, "n_counter": n_counter, **meta,
    }

    def loss_of(idx, step):
        obs = _batch_observation(transitions, idx, variant, n_blocks,
                                 slot_model=slot_model, ae_model=ae_model)
        counters = (torch.rand(len(idx), n_counter, 2, generator=gen) * 2 - 1) * max_step
        cand = torch.cat([actions[idx].unsqueeze(1), counters], dim=1)
        logits = -net(obs, cand)
        return torch.nn.functional.cross_entropy(logits, labels[: len(idx)])

    history, best = _bc_loop(net, loss_of, transitions, out_dir, steps=steps,
                             batch_size=batch_size, lr=lr, warmup=warmup,
                             save_every=save_every, seed=seed, config=config, log=log)
    return net, history, best


def dfo_minimize(net, obs, *, n_samples=256, iters=3, n_elite=16, shrink=0.5,
                 generator=None):
    """Derivative-free energy minimization over the action box.

    Iterates sample -> keep elites -> resample around them with shrinking
    noise; returns the lowest-energy action seen. The final pool can never
    beat the returned action (asserted).
    """
    gen = generator or torch.Generator().manual_seed(0)
    max_step = net.max_step
    b = obs.shape[0]
    with torch.no_grad():
        feat = net.trunk(obs)
        samples = (torch.rand(b, n_samples, 2, generator=gen) * 2 - 1) * max_step
        best_e = torch.full((b,), float("inf"))
        best_a = torch.zeros(b, 2)
        sigma = 0.5 * max_step
        for it in range(iters):
            e = net.energy(feat, samples)
            cur, arg = e.min(dim=1)
            better = cur < best_e
            best_e = torch.where(better, cur, best_e)
            best_a = torch.where(better.unsqueeze(1), samples[torch.arange(b), arg], best_a)
            if it == iters - 1:
                final_e = e
                break
            elite_idx = e.topk(n_elite, dim=1, largest=False).indices
            elites = samples.gather(1, elite_idx.unsqueeze(-1).expand(-1, -1, 2))
            pick = torch.randint(0, n_elite, (b, n_samples), generator=gen)
            centers = elites.gather(1, pick.unsqueeze(-1).expand(-1, -1, 2))
            noise = torch.randn(b, n_samples, 2, generator=gen) * sigma
            samples = (centers + noise).clamp(-max_step, max_step)
            sigma *= shrink
        assert bool((best_e <= final_e.min(dim=1).values + 1e-12).all())
    return best_a


def load_policy(payload):
    cfg = payload["config"]
    cls = PolicyNet if cfg["trainer"] == "explicit" else EnergyNet
    net = cls(cfg["in_channels"], cfg["max_step"])
    net.load_state_dict(payload["state_dict"])
    net.eval()
    return net, cfg
