from .autoencoder import Autoencoder, AutoencoderConfig, ae_train, pooled_embedding
from .autoencoder import load_model as load_autoencoder
from .moco import ContrastiveConfig, EmbeddingNet, MoCo, augment, moco_embedding, moco_train
from .moco import load_model as load_moco

__all__ = [
    "Autoencoder",
    "AutoencoderConfig",
    "ContrastiveConfig",
    "EmbeddingNet",
    "MoCo",
    "ae_train",
    "augment",
    "load_autoencoder",
    "load_moco",
    "moco_embedding",
    "moco_train",
    "pooled_embedding",
]
