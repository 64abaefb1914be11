"""Two-layer MLP regressor from frozen features to object coordinates."""
import numpy as np
import torch

from ..checkpoint import model_checksum


class Localizer(torch.nn.Module):
    def __init__(self, in_dim, out_dim, hidden=256):
        super().__init__()
        self.net = torch.nn.Sequential(
            torch.nn.Linear(in_dim, hidden),
            torch.nn.ReLU(),
            torch.nn.Linear(hidden, hidden),
            torch.nn.ReLU(),
            torch.nn.Linear(hidden, out_dim),
        )

    def forward(self, x):
        return self.net(x)


def train_localizer(features, targets, *, steps=4000, batch_size=128, lr=1e-3,
                    seed=0, hidden=256, log=None):
    """Squared-error regression; returns (model, loss history)."""
    feats = torch.as_tensor(np.asarray(features, dtype=np.float32))
    targs = torch.as_tensor(np.asarray(targets, dtype=np.float32))
    if feats.shape[0] != targs.shape[0]:
        raise ValueError("feature/target length mismatch")
    torch.manual_seed(seed)
    model = Localizer(feats.shape[1], targs.shape[1], hidden=hidden)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(seed)
    n = feats.shape[0]
    history = []
    for step in range(steps):
        idx = rng.integers(0, n, size=min(batch_size, n))
        loss = ((model(feats[idx]) - targs[idx]) ** 2).mean()
        if not torch.isfinite(loss):
            raise RuntimeError(f"localizer diverged at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))
        if log and (step + 1) % 500 == 0:
            log(step + 1, float(np.mean(history[-500:])))
    return model, history


def train_localizer_frozen(upstream, variant, images_u8, states, **kw):
    """Extract features from a frozen upstream model, then fit the MLP.

    The upstream parameter checksum is taken before extraction and re-checked
    after training; any drift aborts.
    """
    from .features import extract_features, state_coordinates

    before = model_checksum(upstream)
    feats = extract_features(variant, upstream, images_u8)
    targets = np.stack([state_coordinates(s) for s in states])
    model, history = train_localizer(feats, targets, **kw)
    if model_checksum(upstream) != before:
        raise RuntimeError("frozen upstream changed during localizer training")
    return model, history, before


def predict_coordinates(model, features):
    """(N, F) -> (N, M, 2) coordinate predictions."""
    feats = torch.as_tensor(np.asarray(features, dtype=np.float32))
    with torch.no_grad():
        out = model(feats).numpy()
    return out.reshape(out.shape[0], -1, 2)
