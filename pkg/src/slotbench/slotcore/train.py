"""Training loop for the slot autoencoder (and reused by the baselines).

Plain Adam with a linear warmup, periodic atomic checkpoints, and a best-loss
tag taken over checkpoint-interval means so a single lucky batch cannot claim
the tag. The loop is deterministic for a fixed seed on a fixed device.
"""
import numpy as np
import torch

from ..checkpoint import save_checkpoint
from .model import SlotAutoencoder, SlotConfig, reconstruction_loss


def images_to_tensor(images_u8):
    """(N, H, W, 3) uint8 -> (N, 3, H, W) float32 in [0, 1]."""
    arr = np.asarray(images_u8)
    if arr.ndim == 3:
        arr = arr[None]
    t = torch.from_numpy(arr.astype(np.float32) / 255.0)
    return t.permute(0, 3, 1, 2).contiguous()


def warmup_lr(step, base_lr, warmup):
    if warmup <= 0:
        return base_lr
    return base_lr * min(1.0, (step + 1) / warmup)


def fetch_batch(images, idx):
    """Index a batch and deliver float CHW in [0, 1].

    Accepts a float tensor (passed through), a uint8 CHW tensor, or a
    (N, H, W, 3) uint8 array/memmap so big frame corpora stay on disk.
    """
    if isinstance(images, np.ndarray):
        return images_to_tensor(np.ascontiguousarray(images[idx]))
    batch = images[idx]
    if batch.dtype == torch.uint8:
        return batch.float() / 255.0
    return batch


def train_loop(model, loss_fn, images, steps, out_dir, *, batch_size=8, lr=4e-4,
               warmup=1000, save_every=250, seed=0, model_kind="slot", config=None,
               log=None):
    """Shared optimizer loop; returns (loss_history, best_mean).

    loss_fn(model, batch) -> scalar loss. Checkpoints land in out_dir as
    last.pt / best.pt with a loss_curve.csv next to them.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    n = images.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    config = dict(config or {})

    history = []
    window = []
    best = float("inf")
    for step in range(steps):
        for group in opt.param_groups:
            group["lr"] = warmup_lr(step, lr, warmup)
        idx = rng.integers(0, n, size=batch_size)
        batch = fetch_batch(images, np.sort(idx))
        loss = loss_fn(model, batch)
        if not torch.isfinite(loss):
            raise RuntimeError(f"training diverged: non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        val = float(loss.detach())
        history.append(val)
        window.append(val)
        if (step + 1) % save_every == 0 or step + 1 == steps:
            mean = float(np.mean(window))
            window = []
            save_checkpoint(out / "last.pt", model_kind, config, model.state_dict(),
                            step + 1, mean)
            if mean < best:
                best = mean
                save_checkpoint(out / "best.pt", model_kind, config, model.state_dict(),
                                step + 1, mean)
            if log:
                log(step + 1, mean)

    curve = "".join(f"{i},{v!r}\n" for i, v in enumerate(history))
    (out / "loss_curve.csv").write_text("step,loss\n" + curve)
    return history, best


def train(images_u8, config: SlotConfig, out_dir, *, steps, batch_size=8, lr=4e-4,
          warmup=1000, save_every=250, seed=0, log=None):
    """Train a slot autoencoder on (N, H, W, 3) uint8 frames; returns the model.

    Frames may be a uint8 array/memmap (converted per batch) or a float tensor.
    """
    images = images_u8
    torch.manual_seed(seed)  # parameter init before the loop reseeds
    model = SlotAutoencoder(config)

    def loss_fn(m, batch):
        return reconstruction_loss(m(batch)["recon"], batch)

    history, best = train_loop(
        model, loss_fn, images, steps, out_dir, batch_size=batch_size, lr=lr,
        warmup=warmup, save_every=save_every, seed=seed, model_kind="slot",
        config=config.to_dict(), log=log,
    )
    return model, history, best


def load_model(payload):
    """Rebuild a SlotAutoencoder from a checkpoint payload (eval mode)."""
    model = SlotAutoencoder(SlotConfig.from_dict(payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
