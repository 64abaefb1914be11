"""Atomic single-file checkpoints shared by every trainable model.

A checkpoint is a torch archive holding the model kind, a config echo, named
parameter tensors, the step count and the loss at save time. Writes go
through a temp file + rename so a killed run never leaves a torn archive.
"""
import hashlib
import os
import tempfile

import torch

FORMAT_VERSION = 1


def save_checkpoint(path, model_kind, config, state_dict, step, loss):
    """Write atomically; returns the path."""
    payload = {
        "format": FORMAT_VERSION,
        "model_kind": model_kind,
        "config": dict(config),
        "state_dict": {k: v.detach().cpu() for k, v in state_dict.items()},
        "step": int(step),
        "loss": float(loss),
    }
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_checkpoint(path, expect_kind=None):
    payload = torch.load(os.fspath(path), map_location="cpu", weights_only=False)
    if payload.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format in {path}")
    if expect_kind is not None and payload["model_kind"] != expect_kind:
        raise ValueError(
            f"expected a {expect_kind!r} checkpoint, found {payload['model_kind']!r}"
        )
    return payload


def state_dict_checksum(state_dict):
    """sha256 over named tensors; order-independent input, stable output.

    Used to prove a frozen upstream model was not touched by downstream
    training.
    """
    sha = hashlib.sha256()
    for name in sorted(state_dict):
        t = state_dict[name].detach().cpu().contiguous()
        sha.update(name.encode())
        sha.update(str(tuple(t.shape)).encode())
        sha.update(t.numpy().tobytes())
    return sha.hexdigest()


def model_checksum(model):
    return state_dict_checksum(model.state_dict())
