"""Experiment configs: YAML in, canonical hash out.

A run is identified by the content hash of its resolved config, so identical
configs share one run directory and re-runs become cache hits. CLI overrides
are folded in before hashing.
"""
import hashlib
import json
import os
from pathlib import Path

import yaml

STAGES = (
    "gen-data",
    "train-repr",
    "train-localizer",
    "eval-pck",
    "train-policy",
    "eval-policy",
    "sweep",
    "report",
)


def artifact_root():
    return Path(os.environ.get("SLOTBENCH_ROOT", "artifacts"))


def load_config(path):
    cfg = yaml.safe_load(Path(path).read_text())
    if not isinstance(cfg, dict) or "stage" not in cfg:
        raise ValueError(f"config {path} must be a mapping with a 'stage' key")
    if cfg["stage"] not in STAGES:
        raise ValueError(f"unknown stage {cfg['stage']!r}")
    cfg["_config_dir"] = str(Path(path).resolve().parent)
    return cfg


def apply_overrides(cfg, *, seed=None, k=None, data_fraction=None, pck_threshold=None):
    out = dict(cfg)
    if seed is not None:
        out["seed"] = int(seed)
    if k is not None:
        out["k"] = int(k)
    if data_fraction is not None:
        out["data_fraction"] = float(data_fraction)
    if pck_threshold is not None:
        out["pck_threshold"] = float(pck_threshold)
    return out


def config_hash(cfg):
    """12-hex content hash; private keys (leading underscore) don't count."""
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    blob = json.dumps(public, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def run_dir_for(cfg):
    return artifact_root() / "runs" / cfg["stage"] / config_hash(cfg)


def resolve_ref(ref, cfg, *, expect_stage=None):
    """Resolve a dataset/run reference to a directory.

    A reference is either a path to another stage's YAML config (resolved to
    that stage's run directory via its hash) or a directory path. Relative
    paths are taken against the referencing config's own directory.
    """
    base = Path(cfg.get("_config_dir", "."))
    p = Path(ref)
    if not p.is_absolute():
        p = base / p
    if p.suffix in (".yaml", ".yml"):
        sub = load_config(p)
        if expect_stage and sub["stage"] != expect_stage:
            raise ValueError(f"{ref} is a {sub['stage']} config, expected {expect_stage}")
        return run_dir_for(sub)
    return p


def resolve_dataset(ref, cfg):
    """Dataset refs point at a gen-data run (its data/ dir) or a dataset dir."""
    d = resolve_ref(ref, cfg, expect_stage="gen-data")
    if (d / "data" / "manifest.json").exists():
        return d / "data"
    if (d / "manifest.json").exists():
        return d
    raise FileNotFoundError(f"no dataset at {d} (missing inputs: run gen-data first?)")


def resolve_checkpoint(ref, cfg, *, expect_stage, filename="best.pt"):
    base = Path(cfg.get("_config_dir", "."))
    p = Path(ref)
    if not p.is_absolute():
        p = base / p
    if p.suffix == ".pt":
        return p
    d = resolve_ref(ref, cfg, expect_stage=expect_stage)
    ckpt = d / filename
    if not ckpt.exists():
        raise FileNotFoundError(f"no checkpoint at {ckpt} (missing inputs: run {expect_stage}?)")
    return ckpt
