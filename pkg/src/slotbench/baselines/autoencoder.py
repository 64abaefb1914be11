"""Slot-free autoencoder baseline.

Same encoder trunk and reconstruction loss as the slot model, but the scene
is forced through a single pooled vector: encoder grid -> global average
pool -> broadcast decode. Whatever the slots buy, this model has to live
without.
"""
from dataclasses import asdict, dataclass

import torch

from ..slotcore.model import BroadcastDecoder, Encoder
from ..slotcore.train import train_loop
from .. import slotcore


@dataclass(frozen=True)
class AutoencoderConfig:
    D: int = 64
    resolution: tuple = (64, 64)
    enc_channels: tuple = (32, 32, 32)
    enc_stride: int = 2
    dec_channels: tuple = (32, 32, 16)
    dec_init: tuple = (8, 8)

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


class Autoencoder(torch.nn.Module):
    def __init__(self, config: AutoencoderConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config.enc_channels, config.D, stride=config.enc_stride)
        self.decoder = BroadcastDecoder(
            config.D, config.dec_channels, config.dec_init, config.resolution,
            out_channels=3,
        )

    def embed(self, images):
        """Pooled embedding: global average of the encoder grid, (B, D)."""
        return self.encoder(images).mean(dim=(2, 3))

    def forward(self, images):
        return self.decoder(self.embed(images))


def pooled_embedding(model, images):
    single = images.dim() == 3
    if single:
        images = images.unsqueeze(0)
    with torch.no_grad():
        z = model.embed(images)
    return z[0] if single else z


def ae_train(images_u8, config: AutoencoderConfig, out_dir, *, steps, batch_size=16,
             lr=4e-4, warmup=1000, save_every=250, seed=0, log=None):
    images = images_u8  # uint8 sources convert per batch inside the loop
    torch.manual_seed(seed)
    model = Autoencoder(config)

    def loss_fn(m, batch):
        return slotcore.reconstruction_loss(m(batch), batch)

    history, best = train_loop(
        model, loss_fn, images, steps, out_dir, batch_size=batch_size, lr=lr,
        warmup=warmup, save_every=save_every, seed=seed, model_kind="autoencoder",
        config=config.to_dict(), log=log,
    )
    return model, history, best


def load_model(payload):
    model = Autoencoder(AutoencoderConfig.from_dict(payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
