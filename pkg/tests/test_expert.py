import numpy as np
import pytest

from slotbench.scenegen import (
    MAX_STEP,
    is_success,
    rollout_expert,
    sample_scene,
    scripted_expert,
    step,
)
from slotbench.scenegen.expert import _PUSH_GAP, _support
from slotbench.scenegen.scene import EFFECTOR_RADIUS


def test_zero_action_once_successful():
    s = sample_scene(3, 4)
    s.pole_pos = s.block_poses[0, :2] + np.array([0.03, 0.0])
    assert is_success(s, 0)
    assert np.array_equal(scripted_expert(s, 0), np.zeros(2))


def test_direction_at_push_point_is_block_to_pole():
    for seed in range(8):
        s = sample_scene(seed, 4)
        tgt = seed % 4
        block = s.block_poses[tgt, :2]
        gap = s.pole_pos - block
        d = np.hypot(*gap)
        if d <= 0.05:
            continue
        push_dir = gap / d
        contact = _support(s, tgt, -push_dir) + EFFECTOR_RADIUS
        pp = block - push_dir * (contact + _PUSH_GAP)
        if not ((pp >= 0).all() and (pp <= 1).all()):
            continue
        s.effector_pos = pp
        a = scripted_expert(s, tgt)
        assert np.hypot(*a) == pytest.approx(MAX_STEP)
        assert np.allclose(a / np.hypot(*a), push_dir, atol=1e-9)


def test_action_magnitude_bounded():
    for seed in range(5):
        s = sample_scene(seed, 8)
        tgt = seed % 8
        for _ in range(60):
            a = scripted_expert(s, tgt)
            assert np.hypot(*a) <= MAX_STEP + 1e-12
            s = step(s, a)


def test_bad_target_raises():
    s = sample_scene(0, 4)
    with pytest.raises(IndexError):
        scripted_expert(s, 4)
    with pytest.raises(IndexError):
        scripted_expert(s, -1)


def test_expert_success_probe():
    # small stand-in for the 500-episode gate (exercised at full size by the
    # acceptance suite); 0.9 must hold even on this 25-episode slice
    succ = 0
    for a in range(25):
        rng = np.random.default_rng([900, a, 7])
        tgt = int(rng.integers(8))
        rec = rollout_expert([900, a], 8, tgt, (64, 64), max_steps=200,
                             record_frames=False)
        succ += rec.success
    assert succ >= 23


def test_rollout_records_frames_and_zero_terminal_action():
    rec = rollout_expert([5, 1], 4, 1, (32, 32), max_steps=200)
    assert rec.frames[-1][0].shape == (32, 32, 3)
    assert np.array_equal(rec.frames[-1][2], np.zeros(2))
    if rec.success:
        assert is_success(rec.frames[-1][1], 1)
    for img, state, action in rec.frames[:-1]:
        assert img.dtype == np.uint8
        assert np.hypot(*action) <= MAX_STEP + 1e-12
