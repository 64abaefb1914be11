"""Stage implementations behind the CLI.

Each stage function takes (cfg, run_dir) and returns a small result dict that
lands in status.json and the ledger. Anything slow or stochastic is pinned by
the config (seeds included), so a stage is a pure function of its config and
the referenced upstream artifacts.
"""
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import yaml

from ..checkpoint import load_checkpoint, model_checksum
from .config import (
    artifact_root,
    config_hash,
    load_config,
    resolve_dataset,
    resolve_ref,
    run_dir_for,
)
from .runner import write_json_atomic

REF_KEYS = ("dataset", "upstream", "localizer", "policy")


# ---------------------------------------------------------------- gen-data


def stage_gen_data(cfg, run_dir):
    from ..scenegen.dataset import generate_dataset

    manifest = generate_dataset(
        run_dir / "data",
        cfg["kind"],
        int(cfg["count"]),
        int(cfg["n_blocks"]),
        tuple(cfg.get("resolution", (64, 64))),
        int(cfg["seed"]),
        max_steps=int(cfg.get("max_steps", 200)),
    )
    n_frames = sum(e.get("n_frames", 1) for e in manifest["entries"])
    return {"count": len(manifest["entries"]), "n_frames": int(n_frames)}


# ---------------------------------------------------------------- helpers


def _transitions_for(data_dir):
    """Memmapped transition cache keyed by the dataset's config echo."""
    from ..policy.bc import consolidate_transitions
    from ..scenegen.dataset import EpisodeDataset, load_manifest

    manifest = load_manifest(data_dir)
    key = config_hash(manifest["config"])
    cache = artifact_root() / "cache" / "transitions" / key
    return consolidate_transitions(EpisodeDataset(data_dir), cache_dir=cache)


def _take_first(count, fraction):
    return max(1, math.ceil(count * float(fraction)))


def _training_images(data_dir, fraction):
    """Image source for representation training: float tensor for scene
    datasets, a uint8 frame memmap for episode datasets."""
    from ..policy.bc import take_episodes
    from ..scenegen.dataset import SceneDataset, load_manifest
    from ..slotcore.train import images_to_tensor

    kind = load_manifest(data_dir)["config"]["kind"]
    if kind == "scenes":
        ds = SceneDataset(data_dir)
        n = _take_first(len(ds), fraction)
        return images_to_tensor(np.stack([ds.image(i) for i in range(n)]))
    trans = _transitions_for(data_dir)
    n = _take_first(trans["index"]["n_episodes"], fraction)
    return take_episodes(trans, n)["frames"]


def _load_repr(ref, cfg):
    """Resolve a train-repr reference to (payload, model, run_dir)."""
    from .. import baselines, slotcore

    run = resolve_ref(ref, cfg, expect_stage="train-repr")
    payload = load_checkpoint(run / "best.pt")
    kind = payload["model_kind"]
    if kind == "slot":
        model = slotcore.load_model(payload)
    elif kind == "autoencoder":
        model = baselines.load_autoencoder(payload)
    elif kind == "moco":
        model = baselines.load_moco(payload)
    else:
        raise ValueError(f"unexpected upstream kind {kind!r}")
    return payload, model, run


def _record_upstream(run_dir, upstream_run, model, kind):
    write_json_atomic(
        run_dir / "upstream.json",
        {
            "kind": kind,
            "hash": upstream_run.name,
            "checksum": model_checksum(model),
        },
    )


def _upstream_from_record(run_dir):
    """Reload the frozen upstream a downstream run trained against."""
    from .. import baselines, slotcore

    rec_path = Path(run_dir) / "upstream.json"
    if not rec_path.exists():
        return None, None
    rec = json.loads(rec_path.read_text())
    ckpt = artifact_root() / "runs" / "train-repr" / rec["hash"] / "best.pt"
    if not ckpt.exists():
        raise FileNotFoundError(f"missing inputs: upstream run {rec['hash']} not found")
    payload = load_checkpoint(ckpt, expect_kind=rec["kind"])
    loader = {
        "slot": slotcore.load_model,
        "autoencoder": baselines.load_autoencoder,
        "moco": baselines.load_moco,
    }[rec["kind"]]
    model = loader(payload)
    if model_checksum(model) != rec["checksum"]:
        raise RuntimeError("upstream checksum drifted since downstream training")
    return model, rec


# ---------------------------------------------------------------- train-repr


def stage_train_repr(cfg, run_dir):
    from .. import baselines, slotcore

    images = _training_images(
        resolve_dataset(cfg["dataset"], cfg), cfg.get("data_fraction", 1.0)
    )
    seed = int(cfg.get("seed", 0))
    steps = int(cfg["steps"])
    kind = cfg["model"]
    kw = dict(steps=steps, seed=seed, log=_step_logger(cfg["stage"]))
    for key in ("batch_size", "lr", "warmup"):
        if key in cfg:
            kw[key] = cfg[key]

    if kind == "slot":
        sc = slotcore.SlotConfig(
            K=int(cfg.get("k", 8)),
            D=int(cfg.get("d", 64)),
            T=int(cfg.get("t", 3)),
            resolution=tuple(cfg.get("resolution", (64, 64))),
        )
        _, history, best = slotcore.train(images, sc, run_dir, **kw)
    elif kind == "autoencoder":
        ac = baselines.AutoencoderConfig(
            D=int(cfg.get("d", 64)), resolution=tuple(cfg.get("resolution", (64, 64)))
        )
        _, history, best = baselines.ae_train(images, ac, run_dir, **kw)
    elif kind == "moco":
        cc = baselines.ContrastiveConfig(
            embedding_dim=int(cfg.get("embedding_dim", 128)),
            queue_size=int(cfg.get("queue_size", 16384)),
            batch_size=int(cfg.get("batch_size", 16)),
        )
        kw.pop("batch_size", None)
        _, history, best = baselines.moco_train(images, cc, run_dir, **kw)
    else:
        raise ValueError(f"unknown model kind {kind!r}")

    init = float(np.mean(history[: min(100, len(history))]))
    return {
        "model": kind,
        "n_images": int(images.shape[0]),
        "init_loss": init,
        "best_loss": best,
        "loss_ratio": best / init if init > 0 else float("nan"),
    }


# ------------------------------------------------------------ train-localizer


def stage_train_localizer(cfg, run_dir):
    from ..checkpoint import save_checkpoint
    from ..localize import train_localizer_frozen
    from ..scenegen.dataset import SceneDataset

    payload, model, upstream_run = _load_repr(cfg["upstream"], cfg)
    data_dir = resolve_dataset(cfg["dataset"], cfg)
    ds = SceneDataset(data_dir)
    n = _take_first(len(ds), cfg.get("data_fraction", 1.0))
    images = np.stack([ds.image(i) for i in range(n)])
    states = [ds.state(i) for i in range(n)]
    variant = cfg["variant"]
    seed = int(cfg.get("seed", 0))

    loc, history, checksum = train_localizer_frozen(
        model, variant, images, states, steps=int(cfg.get("steps", 4000)), seed=seed
    )
    save_checkpoint(
        run_dir / "localizer.pt",
        "localizer",
        {
            "variant": variant,
            "n_blocks": ds.n_blocks,
            "in_dim": loc.net[0].in_features,
            "out_dim": loc.net[-1].out_features,
            "seed": seed,
            "upstream_kind": payload["model_kind"],
            "upstream_checksum": checksum,
        },
        loc.state_dict(),
        len(history),
        float(np.mean(history[-500:])),
    )
    _record_upstream(run_dir, upstream_run, model, payload["model_kind"])
    return {
        "variant": variant,
        "n_train": n,
        "final_loss": float(np.mean(history[-500:])),
        "upstream_checksum": checksum,
    }


# ---------------------------------------------------------------- eval-pck


def stage_eval_pck(cfg, run_dir):
    from ..localize import (
        Localizer,
        coordinate_labels,
        extract_features,
        pck,
        pck_csv,
        predict_coordinates,
        state_coordinates,
    )
    from ..scenegen.dataset import SceneDataset

    loc_run = resolve_ref(cfg["localizer"], cfg, expect_stage="train-localizer")
    payload = load_checkpoint(loc_run / "localizer.pt", expect_kind="localizer")
    lcfg = payload["config"]
    loc = Localizer(lcfg["in_dim"], lcfg["out_dim"])
    loc.load_state_dict(payload["state_dict"])
    loc.eval()
    upstream, _ = _upstream_from_record(loc_run)
    if upstream is None:
        raise FileNotFoundError(f"missing inputs: {loc_run} has no upstream record")
    if model_checksum(upstream) != lcfg["upstream_checksum"]:
        raise RuntimeError("upstream does not match the localizer's training checksum")

    ds = SceneDataset(resolve_dataset(cfg["dataset"], cfg))
    images = np.stack([ds.image(i) for i in range(len(ds))])
    states = [ds.state(i) for i in range(len(ds))]
    threshold = float(cfg.get("pck_threshold", 0.1))

    feats = extract_features(lcfg["variant"], upstream, images)
    preds = predict_coordinates(loc, feats)
    gts = np.stack([state_coordinates(s) for s in states]).reshape(len(states), -1, 2)
    labels = coordinate_labels(ds.n_blocks, blocks=states[0].blocks)
    report = pck(preds, gts, threshold, labels=labels)

    write_json_atomic(run_dir / "pck.json", report.to_dict())
    (run_dir / "pck.csv").write_text(pck_csv(report))
    return {"variant": lcfg["variant"], "mean_pck": report.mean, "n_eval": report.n_eval}


# ---------------------------------------------------------------- train-policy


def stage_train_policy(cfg, run_dir):
    from ..policy import bc_train_explicit, bc_train_implicit, take_episodes

    data_dir = resolve_dataset(cfg["dataset"], cfg)
    trans = _transitions_for(data_dir)
    n_eps = int(cfg.get("episodes", trans["index"]["n_episodes"]))
    n_eps = _take_first(n_eps, cfg.get("data_fraction", 1.0))
    trans = take_episodes(trans, n_eps)

    variant = cfg["variant"]
    slot_model = ae_model = None
    upstream_meta = None
    if "upstream" in cfg:
        payload, model, upstream_run = _load_repr(cfg["upstream"], cfg)
        upstream_meta = (upstream_run, model, payload["model_kind"])
        if payload["model_kind"] == "slot":
            slot_model = model
        else:
            ae_model = model

    trainer = cfg.get("trainer", "explicit")
    kw = dict(
        steps=int(cfg["steps"]),
        seed=int(cfg.get("seed", 0)),
        slot_model=slot_model,
        ae_model=ae_model,
        log=_step_logger(cfg["stage"]),
    )
    for key in ("batch_size", "lr", "warmup"):
        if key in cfg:
            kw[key] = cfg[key]
    if trainer == "explicit":
        _, history, best = bc_train_explicit(trans, variant, run_dir, **kw)
    elif trainer == "implicit":
        if "n_counter" in cfg:
            kw["n_counter"] = int(cfg["n_counter"])
        _, history, best = bc_train_implicit(trans, variant, run_dir, **kw)
    else:
        raise ValueError(f"unknown trainer {trainer!r}")

    if upstream_meta is not None:
        _record_upstream(run_dir, upstream_meta[0], upstream_meta[1], upstream_meta[2])
    return {
        "trainer": trainer,
        "variant": variant,
        "episodes": n_eps,
        "n_frames": int(trans["index"]["n_frames"]),
        "best_loss": best,
    }


# ---------------------------------------------------------------- eval-policy


def stage_eval_policy(cfg, run_dir):
    from ..policy import ExpertPolicy, TorchPolicy, evaluate_policy, load_policy

    seed = int(cfg.get("seed", 0))
    if cfg["policy"] == "expert":
        policy = ExpertPolicy()
        n_blocks = int(cfg["n_blocks"])
        meta = {"variant": "expert", "trainer": "expert", "episodes": None}
    else:
        pol_run = resolve_ref(cfg["policy"], cfg, expect_stage="train-policy")
        payload = load_checkpoint(pol_run / "best.pt", expect_kind="policy")
        net, pcfg = load_policy(payload)
        upstream, _ = _upstream_from_record(pol_run)
        slot_model = upstream if pcfg["variant"] in ("slot_masks", "rgb_plus_slot") else None
        ae_model = (
            upstream
            if pcfg["variant"] in ("autoencoder_features", "rgb_plus_autoencoder")
            else None
        )
        policy = TorchPolicy(net, pcfg, slot_model=slot_model, ae_model=ae_model,
                             dfo_seed=seed)
        n_blocks = int(cfg.get("n_blocks", pcfg["n_blocks"]))
        train_cfg = json.loads((pol_run / "config.json").read_text())
        meta = {
            "variant": pcfg["variant"],
            "trainer": pcfg["trainer"],
            "episodes": train_cfg.get("episodes"),
        }

    record = int(cfg.get("record_episodes", 0))
    result = evaluate_policy(
        policy,
        n_episodes=int(cfg["n_episodes"]),
        n_blocks=n_blocks,
        seed_base=int(cfg["seed_base"]),
        max_steps=int(cfg.get("max_steps", 200)),
        record_dir=run_dir / "frames" if record else None,
        record_episodes=record,
    )
    payload_out = {**meta, "seed": seed, **result}
    write_json_atomic(run_dir / "eval.json", payload_out)
    return {
        "variant": meta["variant"],
        "rate": result["rate"],
        "n_episodes": result["n_episodes"],
    }


# ---------------------------------------------------------------- sweep


def _materialize(template_path, out_path, overrides):
    """Copy a stage config, absolutizing refs and applying overrides."""
    cfg = load_config(template_path)
    base = Path(cfg.pop("_config_dir"))
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}
    for key in REF_KEYS:
        ref = public.get(key)
        if isinstance(ref, str) and ref != "expert" and not Path(ref).is_absolute():
            public[key] = str((base / ref).resolve())
    public.update(overrides)
    out_path.write_text(yaml.safe_dump(public, sort_keys=True))
    return out_path


def stage_sweep(cfg, run_dir):
    param = cfg.get("param", "k")
    values = list(cfg["values"])
    conf_dir = run_dir / "configs"
    conf_dir.mkdir(exist_ok=True)
    env = dict(os.environ, SLOTBENCH_ROOT=str(artifact_root().resolve()))

    rows = []
    for v in values:
        repr_p = _materialize(
            _template_path(cfg, "repr"),
            conf_dir / f"{param}{v}_repr.yaml",
            {param: v},
        )
        loc_p = _materialize(
            _template_path(cfg, "localizer"),
            conf_dir / f"{param}{v}_localizer.yaml",
            {"upstream": str(repr_p.resolve())},
        )
        eval_p = _materialize(
            _template_path(cfg, "eval"),
            conf_dir / f"{param}{v}_eval.yaml",
            {"localizer": str(loc_p.resolve())},
        )
        for stage_name, path in (
            ("train-repr", repr_p),
            ("train-localizer", loc_p),
            ("eval-pck", eval_p),
        ):
            subprocess.run(
                [sys.executable, "-m", "slotbench.harness.cli", stage_name,
                 "--config", str(path)],
                check=True,
                env=env,
            )
        eval_run = run_dir_for(load_config(eval_p))
        pck = json.loads((eval_run / "pck.json").read_text())
        rows.append({param: v, "mean_pck": pck["mean"], "eval_hash": eval_run.name})

    lines = [f"{param},mean_pck,eval_hash"]
    lines += [f"{r[param]},{r['mean_pck']!r},{r['eval_hash']}" for r in rows]
    (run_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    write_json_atomic(run_dir / "sweep.json", {"param": param, "rows": rows})
    return {"param": param, "n_rows": len(rows)}


def _template_path(cfg, key):
    base = Path(cfg.get("_config_dir", "."))
    p = Path(cfg[key])
    return p if p.is_absolute() else base / p


# ---------------------------------------------------------------- report


def stage_report(cfg, run_dir):
    from .report import build_report

    return build_report(cfg, run_dir)


# ---------------------------------------------------------------- registry


def _step_logger(stage):
    def log(step, loss):
        print(f"[{stage}] step {step} loss {loss:.6f}", flush=True)

    return log


STAGE_FNS = {
    "gen-data": stage_gen_data,
    "train-repr": stage_train_repr,
    "train-localizer": stage_train_localizer,
    "eval-pck": stage_eval_pck,
    "train-policy": stage_train_policy,
    "eval-policy": stage_eval_policy,
    "sweep": stage_sweep,
    "report": stage_report,
}
