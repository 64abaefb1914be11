from .config import (
    STAGES,
    apply_overrides,
    artifact_root,
    config_hash,
    load_config,
    resolve_dataset,
    resolve_ref,
    run_dir_for,
)
from .runner import ledger_append, run_stage, write_json_atomic
from .stages import STAGE_FNS

__all__ = [
    "STAGES",
    "STAGE_FNS",
    "apply_overrides",
    "artifact_root",
    "config_hash",
    "ledger_append",
    "load_config",
    "resolve_dataset",
    "resolve_ref",
    "run_dir_for",
    "run_stage",
    "write_json_atomic",
]
