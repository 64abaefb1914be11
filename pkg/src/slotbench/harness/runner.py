"""Run directory lifecycle and the append-only run ledger.

Every stage writes into artifacts/runs/<stage>/<hash>/. status.json is the
commit marker and is written last, atomically: a directory without one is a
crashed run and gets wiped and redone. Wall-clock time goes to the ledger
only, never into report files, so repeated runs stay byte-identical.
"""
import json
import os
import shutil
import tempfile
import time
from pathlib import Path

from filelock import FileLock

from .config import artifact_root, config_hash, run_dir_for


def write_json_atomic(path, payload):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def ledger_append(record):
    root = artifact_root()
    root.mkdir(parents=True, exist_ok=True)
    path = root / "ledger.jsonl"
    with FileLock(str(path) + ".lock"):
        with open(path, "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def run_stage(cfg, stage_fn, *, force=False, log=print):
    """Execute stage_fn(cfg, run_dir) with caching on the config hash."""
    run_dir = run_dir_for(cfg)
    h = config_hash(cfg)
    status_path = run_dir / "status.json"
    public = {k: v for k, v in cfg.items() if not k.startswith("_")}

    if status_path.exists():
        stored = json.loads((run_dir / "config.json").read_text())
        if stored != public:
            raise RuntimeError(
                f"config hash collision at {run_dir}: stored config differs"
            )
        if not force:
            log(f"[{cfg['stage']}] cached: {run_dir}")
            return run_dir
        shutil.rmtree(run_dir)
    elif run_dir.exists():
        log(f"[{cfg['stage']}] wiping incomplete run at {run_dir}")
        shutil.rmtree(run_dir)

    run_dir.mkdir(parents=True)
    write_json_atomic(run_dir / "config.json", public)

    t0 = time.time()
    result = stage_fn(cfg, run_dir) or {}
    elapsed = time.time() - t0

    write_json_atomic(status_path, {"state": "done", "hash": h, **result})
    ledger_append(
        {
            "stage": cfg["stage"],
            "hash": h,
            "run_dir": str(run_dir),
            "elapsed_s": round(elapsed, 2),
            "result": result,
        }
    )
    log(f"[{cfg['stage']}] done in {elapsed:.1f}s: {run_dir}")
    return run_dir
