from .model import (
    BroadcastDecoder,
    Encoder,
    MaskStack,
    SlotAttention,
    SlotAutoencoder,
    SlotConfig,
    SoftPositionEmbed,
    build_grid,
    export_masks,
    extract_masks,
    penultimate_features,
    reconstruction_loss,
)
from .train import images_to_tensor, load_model, train, train_loop, warmup_lr

__all__ = [
    "BroadcastDecoder",
    "Encoder",
    "MaskStack",
    "SlotAttention",
    "SlotAutoencoder",
    "SlotConfig",
    "SoftPositionEmbed",
    "build_grid",
    "export_masks",
    "extract_masks",
    "images_to_tensor",
    "load_model",
    "penultimate_features",
    "reconstruction_loss",
    "train",
    "train_loop",
    "warmup_lr",
]
