"""Slot autoencoder: CNN encoder, iterative slot attention, broadcast decoder.

Slots start from a learnable fixed bank (no sampling), so slot identity is
stable across images and batches. Attention is softmax-normalized over the
slot axis, which is what makes slots compete for pixels; the weighted mean
over locations then aggregates values per slot. Decoding broadcasts each slot
over a small grid and upsamples with nearest-neighbor + conv pairs (no
transposed convolutions, no checkerboard).
"""
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from PIL import Image


@dataclass(frozen=True)
class SlotConfig:
    K: int = 8
    D: int = 64
    T: int = 3
    resolution: tuple = (64, 64)
    enc_channels: tuple = (32, 32, 32)  # trunk widths; a final conv maps to D
    enc_stride: int = 2  # stride of the first conv
    mlp_hidden: int = 128
    dec_channels: tuple = (32, 32, 16)
    dec_init: tuple = (8, 8)

    def __post_init__(self):
        if self.K < 1 or self.T < 1 or self.D < 1:
            raise ValueError("K, T and D must all be >= 1")
        h, w = self.resolution
        h0, w0 = self.dec_init
        if h % h0 or w % w0:
            raise ValueError("image resolution must be a multiple of dec_init")
        if (h // h0) & (h // h0 - 1) or h // h0 != w // w0:
            raise ValueError("decoder must reach the image resolution by x2 stages")

    def to_dict(self):
        d = asdict(self)
        for k in ("resolution", "enc_channels", "dec_channels", "dec_init"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("resolution", "enc_channels", "dec_channels", "dec_init"):
            d[k] = tuple(d[k])
        return cls(**d)


def build_grid(h, w, dtype=torch.float32):
    """(1, h, w, 4) positional grid: x, y, 1-x, 1-y with inclusive endpoints."""
    ys = torch.linspace(0.0, 1.0, h, dtype=dtype)
    xs = torch.linspace(0.0, 1.0, w, dtype=dtype)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    grid = torch.stack([gx, gy, 1.0 - gx, 1.0 - gy], dim=-1)
    return grid.unsqueeze(0)


class SoftPositionEmbed(nn.Module):
    """Adds a learned linear projection of the coordinate grid."""

    def __init__(self, dim, resolution):
        super().__init__()
        self.proj = nn.Linear(4, dim)
        self.register_buffer("grid", build_grid(*resolution), persistent=False)

    def forward(self, x):
        # x: (B, h, w, dim)
        return x + self.proj(self.grid.to(x.dtype))


class Encoder(nn.Module):
    """5x5 conv trunk; the first conv may stride to keep the grid small."""

    def __init__(self, channels, out_dim, stride=2, in_channels=3):
        super().__init__()
        convs = []
        prev = in_channels
        widths = tuple(channels) + (out_dim,)
        for i, ch in enumerate(widths):
            convs.append(nn.Conv2d(prev, ch, 5, stride=stride if i == 0 else 1, padding=2))
            prev = ch
        self.convs = nn.ModuleList(convs)
        self.out_dim = out_dim

    def forward(self, x):
        for conv in self.convs[:-1]:
            x = F.relu(conv(x))
        return self.convs[-1](x)  # (B, out_dim, h, w)

    def penultimate(self, x):
        """Activations entering the final conv (dense, pre-projection)."""
        for conv in self.convs[:-1]:
            x = F.relu(conv(x))
        return x


class SlotAttention(nn.Module):
    """T rounds of slot competition with a GRU + residual MLP update.

    The attention softmax runs over the K slots at every input location; the
    weights are then renormalized over locations (eps-guarded) to take a
    weighted mean of the values.
    """

    def __init__(self, num_slots, dim, iters=3, hidden=128, eps=1e-8):
        super().__init__()
        self.num_slots = num_slots
        self.iters = iters
        self.eps = eps
        self.scale = dim**-0.5
        self.slot_init = nn.Parameter(torch.randn(num_slots, dim))
        self.to_q = nn.Linear(dim, dim)
        self.to_k = nn.Linear(dim, dim)
        self.to_v = nn.Linear(dim, dim)
        self.gru = nn.GRUCell(dim, dim)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.ReLU(), nn.Linear(hidden, dim))
        self.norm_input = nn.LayerNorm(dim)
        self.norm_slots = nn.LayerNorm(dim)
        self.norm_mlp = nn.LayerNorm(dim)
        with torch.no_grad():
            # Near-uniform initial attention is a saddle: every slot receives
            # the same update, the GRU washes out slot identity and the
            # decoder settles on a slot-agnostic mean reconstruction. Sharpen
            # the first competition rounds and bias the GRU update gate
            # toward keeping the slot state so identities survive training
            # long enough to specialize.
            self.to_q.weight.mul_(4.0)
            self.to_k.weight.mul_(4.0)
            self.gru.bias_hh[dim : 2 * dim].add_(2.0)

    def forward(self, inputs, slot_init=None):
        """inputs (B, N, dim) -> slots (B, K, dim), attn (B, K, N).

        attn is the final-iteration competition softmax: it sums to 1 over
        the slot axis at every location.
        """
        if not torch.isfinite(inputs).all():
            raise ValueError("non-finite features")
        b, _, d = inputs.shape
        inputs = self.norm_input(inputs)
        k = self.to_k(inputs)
        v = self.to_v(inputs)
        init = self.slot_init if slot_init is None else slot_init
        slots = init.unsqueeze(0).expand(b, -1, -1)
        n_slots = slots.shape[1]
        attn = None
        for _ in range(self.iters):
            prev = slots
            q = self.to_q(self.norm_slots(slots))
            logits = torch.einsum("bkd,bnd->bkn", q, k) * self.scale
            attn = logits.softmax(dim=1)
            w = attn + self.eps
            w = w / w.sum(dim=-1, keepdim=True)
            updates = torch.einsum("bkn,bnd->bkd", w, v)
            slots = self.gru(updates.reshape(-1, d), prev.reshape(-1, d))
            slots = slots.reshape(b, n_slots, d)
            slots = slots + self.mlp(self.norm_mlp(slots))
        return slots, attn


class BroadcastDecoder(nn.Module):
    """Spatial broadcast + positional embed, then conv/upsample stages."""

    def __init__(self, dim, channels, init_res, out_res, out_channels=4):
        super().__init__()
        self.init_res = tuple(init_res)
        n_up = int(round(np.log2(out_res[0] // init_res[0])))
        if init_res[0] * 2**n_up != out_res[0] or init_res[1] * 2**n_up != out_res[1]:
            raise ValueError("decoder resolutions incompatible")
        if len(channels) < n_up:
            raise ValueError("need at least one conv per upsample stage")
        self.n_up = n_up
        self.pos = SoftPositionEmbed(dim, self.init_res)
        convs = []
        prev = dim
        for ch in channels:
            convs.append(nn.Conv2d(prev, ch, 5, padding=2))
            prev = ch
        self.convs = nn.ModuleList(convs)
        self.head = nn.Conv2d(prev, out_channels, 3, padding=1)

    def forward(self, z):
        """z (B, dim) -> (B, out_channels, H, W)."""
        h0, w0 = self.init_res
        x = z.unsqueeze(-1).unsqueeze(-1).expand(-1, -1, h0, w0)
        x = self.pos(x.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)
        for i, conv in enumerate(self.convs):
            x = F.relu(conv(x))
            if i < self.n_up:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
        return self.head(x)


@dataclass
class MaskStack:
    """Per-slot decoding of one image (or a batch)."""

    masks: torch.Tensor  # (..., K, H, W), softmaxed over K
    recons: torch.Tensor  # (..., K, 3, H, W)

    @property
    def combined(self):
        return (self.masks.unsqueeze(-3) * self.recons).sum(dim=-4)


class SlotAutoencoder(nn.Module):
    def __init__(self, config: SlotConfig):
        super().__init__()
        self.config = config
        h, w = config.resolution
        gh, gw = h // config.enc_stride, w // config.enc_stride
        self.encoder = Encoder(config.enc_channels, config.D, stride=config.enc_stride)
        self.enc_pos = SoftPositionEmbed(config.D, (gh, gw))
        self.feat_norm = nn.LayerNorm(config.D)
        self.feat_mlp = nn.Sequential(
            nn.Linear(config.D, config.D), nn.ReLU(), nn.Linear(config.D, config.D)
        )
        self.slot_attention = SlotAttention(
            config.K, config.D, iters=config.T, hidden=config.mlp_hidden
        )
        self.decoder = BroadcastDecoder(
            config.D, config.dec_channels, config.dec_init, config.resolution
        )

    def encode(self, images):
        """images (B, 3, H, W) in [0,1] -> position-augmented grid (B, h, w, D)."""
        if images.shape[-2:] != tuple(self.config.resolution):
            raise ValueError(
                f"expected {tuple(self.config.resolution)} images, got {tuple(images.shape[-2:])}"
            )
        x = self.encoder(images).permute(0, 2, 3, 1)
        return self.enc_pos(x)

    def decode(self, slots):
        """slots (B, K, D) -> MaskStack with masks (B, K, H, W)."""
        b, k, d = slots.shape
        out = self.decoder(slots.reshape(b * k, d))
        out = out.reshape(b, k, 4, *out.shape[-2:])
        rgb, alpha = out[:, :, :3], out[:, :, 3]
        masks = alpha.softmax(dim=1)
        return MaskStack(masks=masks, recons=rgb)

    def forward(self, images):
        grid = self.encode(images)
        feats = self.feat_mlp(self.feat_norm(grid.flatten(1, 2)))
        slots, attn = self.slot_attention(feats)
        stack = self.decode(slots)
        return {
            "recon": stack.combined,
            "masks": stack.masks,
            "recons": stack.recons,
            "slots": slots,
            "attn": attn,
        }


def reconstruction_loss(recon, images):
    """Squared error averaged over batch, pixels and channels."""
    if recon.shape[0] == 0:
        raise ValueError("empty batch")
    return ((recon - images) ** 2).mean()


def extract_masks(model, images):
    """Forward pass returning a MaskStack; accepts (3,H,W) or (B,3,H,W)."""
    single = images.dim() == 3
    if single:
        images = images.unsqueeze(0)
    with torch.no_grad():
        out = model(images)
    stack = MaskStack(masks=out["masks"], recons=out["recons"])
    if single:
        return MaskStack(masks=stack.masks[0], recons=stack.recons[0])
    return stack


def penultimate_features(model, images):
    """Dense encoder activations before the final conv, resized to (H, W)."""
    single = images.dim() == 3
    if single:
        images = images.unsqueeze(0)
    with torch.no_grad():
        feats = model.encoder.penultimate(images)
        feats = F.interpolate(
            feats, size=images.shape[-2:], mode="bilinear", align_corners=False
        )
    return feats[0] if single else feats


def export_masks(stack, out_dir, prefix="mask"):
    """Write one 16-bit grayscale PNG per slot plus a JSON sidecar."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    masks = stack.masks.detach().cpu().numpy()
    if masks.ndim != 3:
        raise ValueError("export_masks takes a single-image MaskStack")
    pages = []
    for k in range(masks.shape[0]):
        page = np.round(masks[k] * 65535.0).astype(np.uint16)
        name = f"{prefix}_{k:02d}.png"
        Image.fromarray(page, mode="I;16").save(out / name, format="PNG", optimize=False)
        pages.append(name)
    sidecar = {
        "pages": pages,
        "num_slots": masks.shape[0],
        "resolution": [int(masks.shape[1]), int(masks.shape[2])],
        "scale": 65535,
    }
    (out / f"{prefix}.json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    return sidecar
