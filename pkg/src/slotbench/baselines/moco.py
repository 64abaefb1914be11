"""Momentum-contrast baseline.

Query encoder trained with InfoNCE against a momentum (EMA) key encoder;
negatives come from a fixed-capacity FIFO queue of past keys. Augmentations
are seeded tensor ops (crop-resize, color jitter, horizontal flip), so runs
are reproducible end to end.
"""
import copy
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..checkpoint import save_checkpoint
from ..slotcore.model import Encoder


@dataclass(frozen=True)
class ContrastiveConfig:
    embedding_dim: int = 128
    queue_size: int = 16384
    temperature: float = 0.1
    batch_size: int = 16
    momentum: float = 0.999
    trunk_dim: int = 64
    resolution: tuple = (64, 64)
    enc_channels: tuple = (32, 32, 32)
    enc_stride: int = 2
    crop_scale: tuple = (0.6, 1.0)
    jitter: float = 0.3

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.queue_size % self.batch_size:
            raise ValueError("queue_size must be a multiple of batch_size")

    def to_dict(self):
        d = asdict(self)
        for k in ("resolution", "enc_channels", "crop_scale"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("resolution", "enc_channels", "crop_scale"):
            d[k] = tuple(d[k])
        return cls(**d)


class EmbeddingNet(torch.nn.Module):
    """Encoder trunk -> global average pool -> linear head -> L2 normalize."""

    def __init__(self, cfg: ContrastiveConfig):
        super().__init__()
        self.encoder = Encoder(cfg.enc_channels, cfg.trunk_dim, stride=cfg.enc_stride)
        self.head = torch.nn.Linear(cfg.trunk_dim, cfg.embedding_dim)

    def forward(self, images):
        z = self.head(self.encoder(images).mean(dim=(2, 3)))
        return F.normalize(z, dim=1)


class MoCo(torch.nn.Module):
    def __init__(self, config: ContrastiveConfig):
        super().__init__()
        self.config = config
        self.query = EmbeddingNet(config)
        self.key = copy.deepcopy(self.query)
        for p in self.key.parameters():
            p.requires_grad_(False)
        queue = F.normalize(torch.randn(config.queue_size, config.embedding_dim), dim=1)
        self.register_buffer("queue", queue)
        self.register_buffer("queue_ptr", torch.zeros(1, dtype=torch.long))

    @torch.no_grad()
    def ema_update(self):
        m = self.config.momentum
        for pk, pq in zip(self.key.parameters(), self.query.parameters()):
            pk.mul_(m).add_(pq, alpha=1.0 - m)

    @torch.no_grad()
    def enqueue(self, keys):
        b = keys.shape[0]
        ptr = int(self.queue_ptr)
        if self.config.queue_size % b:
            raise ValueError("batch must divide queue_size")
        self.queue[ptr : ptr + b] = keys
        self.queue_ptr[0] = (ptr + b) % self.config.queue_size

    def contrast_loss(self, q, k):
        """InfoNCE with the positive in slot 0 and the queue as negatives."""
        t = self.config.temperature
        pos = (q * k).sum(dim=1, keepdim=True)
        neg = q @ self.queue.t().clone().detach()
        logits = torch.cat([pos, neg], dim=1) / t
        labels = torch.zeros(q.shape[0], dtype=torch.long)
        return F.cross_entropy(logits, labels)


def _color_jitter(x, rng, strength):
    b = x.shape[0]
    def factors():
        return 1.0 + (torch.rand(b, 1, 1, 1, generator=rng) * 2 - 1) * strength
    x = x * factors()  # brightness
    mean = x.mean(dim=(2, 3), keepdim=True)
    x = (x - mean) * factors() + mean  # contrast
    gray = x.mean(dim=1, keepdim=True)
    x = gray + (x - gray) * factors()  # saturation
    return x.clamp(0.0, 1.0)


def augment(images, rng, cfg: ContrastiveConfig):
    """One stochastic view per image: crop-resize + jitter + flip."""
    b, _, h, w = images.shape
    lo, hi = cfg.crop_scale
    out = torch.empty_like(images)
    scales = lo + (hi - lo) * torch.rand(b, generator=rng)
    us = torch.rand(b, 2, generator=rng)
    for i in range(b):
        ch = max(int(round(h * float(scales[i]))), 8)
        cw = max(int(round(w * float(scales[i]))), 8)
        top = int(float(us[i, 0]) * (h - ch + 1))
        left = int(float(us[i, 1]) * (w - cw + 1))
        crop = images[i : i + 1, :, top : top + ch, left : left + cw]
        out[i : i + 1] = F.interpolate(crop, size=(h, w), mode="bilinear",
                                       align_corners=False)
    flip = torch.rand(b, generator=rng) < 0.5
    out[flip] = out[flip].flip(-1)
    return _color_jitter(out, rng, cfg.jitter)


def moco_train(images_u8, config: ContrastiveConfig, out_dir, *, steps, lr=4e-4,
               warmup=1000, save_every=250, seed=0, log=None):
    """Returns (model, loss history, best interval mean)."""
    from pathlib import Path

    from ..slotcore.train import fetch_batch, warmup_lr

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = images_u8  # uint8 sources convert per batch
    torch.manual_seed(seed)
    model = MoCo(config)
    opt = torch.optim.Adam(model.query.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    aug_rng = torch.Generator().manual_seed(seed + 1)

    history = []
    window = []
    best = float("inf")
    for step in range(steps):
        for group in opt.param_groups:
            group["lr"] = warmup_lr(step, lr, warmup)
        idx = np.sort(rng.integers(0, images.shape[0], size=config.batch_size))
        batch = fetch_batch(images, idx)
        q = model.query(augment(batch, aug_rng, config))
        with torch.no_grad():
            model.ema_update()
            k = model.key(augment(batch, aug_rng, config))
        loss = model.contrast_loss(q, k)
        if not torch.isfinite(loss):
            raise RuntimeError(f"training diverged: non-finite loss at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        model.enqueue(k)
        val = float(loss.detach())
        history.append(val)
        window.append(val)
        if (step + 1) % save_every == 0 or step + 1 == steps:
            mean = float(np.mean(window))
            window = []
            save_checkpoint(out / "last.pt", "moco", config.to_dict(),
                            model.state_dict(), step + 1, mean)
            if mean < best:
                best = mean
                save_checkpoint(out / "best.pt", "moco", config.to_dict(),
                                model.state_dict(), step + 1, mean)
            if log:
                log(step + 1, mean)
    curve = "".join(f"{i},{v!r}\n" for i, v in enumerate(history))
    (out / "loss_curve.csv").write_text("step,loss\n" + curve)
    return model, history, best


def moco_embedding(model, images):
    single = images.dim() == 3
    if single:
        images = images.unsqueeze(0)
    with torch.no_grad():
        z = model.query(images)
    return z[0] if single else z


def load_model(payload):
    model = MoCo(ContrastiveConfig.from_dict(payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
