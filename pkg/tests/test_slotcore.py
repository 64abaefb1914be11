import numpy as np
import pytest
import torch

from slotbench.slotcore import (
    BroadcastDecoder,
    MaskStack,
    SlotAutoencoder,
    SlotConfig,
    build_grid,
    extract_masks,
    images_to_tensor,
    penultimate_features,
    reconstruction_loss,
    train,
)
from slotbench.slotcore.model import SoftPositionEmbed
from slotbench.slotcore.train import fetch_batch, train_loop

MICRO = SlotConfig(K=3, D=8, T=2, resolution=(8, 8), enc_channels=(8, 8),
                   mlp_hidden=16, dec_channels=(8, 8), dec_init=(8, 8))


def micro_model(seed=0):
    torch.manual_seed(seed)
    return SlotAutoencoder(MICRO)


def rand_images(n, res=(64, 64), seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(n, 3, *res, generator=g)


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ValueError):
        SlotConfig(K=0)
    with pytest.raises(ValueError):
        SlotConfig(T=0)
    with pytest.raises(ValueError):
        SlotConfig(resolution=(60, 60))  # not a multiple of dec_init
    with pytest.raises(ValueError):
        SlotConfig(resolution=(24, 24))  # 3x is not a power of two
    rt = SlotConfig.from_dict(SlotConfig(K=5).to_dict())
    assert rt == SlotConfig(K=5)


def test_build_grid_endpoints():
    g = build_grid(4, 6)
    assert g.shape == (1, 4, 6, 4)
    assert torch.allclose(g[0, 0, 0], torch.tensor([0.0, 0.0, 1.0, 1.0]))
    assert torch.allclose(g[0, -1, -1], torch.tensor([1.0, 1.0, 0.0, 0.0]))
    # channels are x, y, 1-x, 1-y
    assert torch.allclose(g[..., 0] + g[..., 2], torch.ones(1, 4, 6))
    assert torch.allclose(g[..., 1] + g[..., 3], torch.ones(1, 4, 6))


def test_soft_position_embed_at_zero_input():
    torch.manual_seed(3)
    pe = SoftPositionEmbed(8, (5, 5))
    x = torch.zeros(2, 5, 5, 8)
    out = pe(x)
    expect = pe.proj(pe.grid)
    assert torch.allclose(out[0], expect[0])
    assert torch.allclose(out[1], expect[0])


def test_encode_zero_image_is_positional_projection():
    m = micro_model()
    with torch.no_grad():
        for conv in m.encoder.convs:
            conv.bias.zero_()
    out = m.encode(torch.zeros(1, 3, 8, 8))
    expect = m.enc_pos.proj(m.enc_pos.grid)
    assert torch.allclose(out, expect, atol=1e-7)


def test_encode_rejects_wrong_resolution():
    m = micro_model()
    with pytest.raises(ValueError):
        m.encode(torch.zeros(1, 3, 16, 16))


# ------------------------------------------------- slot attention oracle


def _layer_norm(x, w, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)  # biased, as torch uses
    return (x - mu) / np.sqrt(var + eps) * w + b


def _linear(x, w, b):
    return x @ w.T + (0 if b is None else b)


def _gru_cell(x, h, p):
    """PyTorch GRUCell update in numpy; gate rows ordered r, z, n."""
    d = h.shape[-1]
    wi, wh = p["weight_ih"], p["weight_hh"]
    bi, bh = p["bias_ih"], p["bias_hh"]
    gi = x @ wi.T + bi
    gh = h @ wh.T + bh
    r = 1 / (1 + np.exp(-(gi[:, :d] + gh[:, :d])))
    z = 1 / (1 + np.exp(-(gi[:, d : 2 * d] + gh[:, d : 2 * d])))
    n = np.tanh(gi[:, 2 * d :] + r * gh[:, 2 * d :])
    return (1 - z) * n + z * h


def numpy_slot_attention(sa, inputs):
    """Dense float64 re-implementation of the forward pass."""
    p = {k: v.detach().numpy().astype(np.float64) for k, v in sa.state_dict().items()}
    x = _layer_norm(inputs, p["norm_input.weight"], p["norm_input.bias"])
    k = _linear(x, p["to_k.weight"], p["to_k.bias"])
    v = _linear(x, p["to_v.weight"], p["to_v.bias"])
    slots = np.repeat(p["slot_init"][None], inputs.shape[0], axis=0)
    gru = {key: p[f"gru.{key}"] for key in
           ("weight_ih", "weight_hh", "bias_ih", "bias_hh")}
    attn = None
    for _ in range(sa.iters):
        prev = slots
        q = _linear(_layer_norm(slots, p["norm_slots.weight"], p["norm_slots.bias"]),
                    p["to_q.weight"], p["to_q.bias"])
        logits = np.einsum("bkd,bnd->bkn", q, k) * sa.scale
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        attn = e / e.sum(axis=1, keepdims=True)
        w = attn + sa.eps
        w = w / w.sum(axis=-1, keepdims=True)
        updates = np.einsum("bkn,bnd->bkd", w, v)
        b, kk, d = slots.shape
        slots = _gru_cell(updates.reshape(-1, d), prev.reshape(-1, d), gru)
        slots = slots.reshape(b, kk, d)
        slots = slots + _linear(
            np.maximum(
                _linear(_layer_norm(slots, p["norm_mlp.weight"], p["norm_mlp.bias"]),
                        p["mlp.0.weight"], p["mlp.0.bias"]),
                0.0,
            ),
            p["mlp.2.weight"],
            p["mlp.2.bias"],
        )
    return slots, attn


def test_slot_attention_matches_numpy_oracle():
    m = micro_model(seed=7).double()
    sa = m.slot_attention
    rng = np.random.default_rng(0)
    inputs = rng.normal(size=(2, 16, 8))
    with torch.no_grad():
        slots_t, attn_t = sa(torch.from_numpy(inputs))
    slots_n, attn_n = numpy_slot_attention(sa, inputs)
    assert np.abs(slots_t.numpy() - slots_n).max() < 1e-8
    assert np.abs(attn_t.numpy() - attn_n).max() < 1e-8


def test_attention_normalized_over_slots():
    m = micro_model()
    with torch.no_grad():
        out = m(rand_images(4, (8, 8)))
    sums = out["attn"].sum(dim=1)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)


def test_slot_attention_rejects_nonfinite():
    m = micro_model()
    bad = torch.full((1, 16, 8), float("nan"))
    with pytest.raises(ValueError):
        m.slot_attention(bad)


def test_permutation_equivariance():
    m = micro_model(seed=1)
    images = rand_images(2, (8, 8), seed=5)
    perm = torch.tensor([2, 0, 1])
    with torch.no_grad():
        base = m(images)
        grid = m.encode(images)
        feats = m.feat_mlp(m.feat_norm(grid.flatten(1, 2)))
        slots_p, attn_p = m.slot_attention(feats, slot_init=m.slot_attention.slot_init[perm])
        stack_p = m.decode(slots_p)
    assert torch.allclose(slots_p, base["slots"][:, perm], atol=1e-6)
    assert torch.allclose(attn_p, base["attn"][:, perm], atol=1e-6)
    assert torch.allclose(stack_p.masks, base["masks"][:, perm], atol=1e-6)
    combined = (stack_p.masks.unsqueeze(2) * stack_p.recons).sum(1)
    assert (combined - base["recon"]).abs().max() < 1e-5


def test_single_slot_owns_everything():
    torch.manual_seed(0)
    m = SlotAutoencoder(SlotConfig(K=1, D=8, T=2, resolution=(8, 8),
                                   enc_channels=(8,), mlp_hidden=16,
                                   dec_channels=(8,), dec_init=(8, 8)))
    with torch.no_grad():
        out = m(rand_images(2, (8, 8)))
    assert torch.allclose(out["masks"], torch.ones_like(out["masks"]))
    assert torch.allclose(out["attn"], torch.ones_like(out["attn"]))


# ---------------------------------------------------------------- decoder


def test_decoder_resolution_validation():
    with pytest.raises(ValueError):
        BroadcastDecoder(8, (8,), (8, 8), (24, 24))
    with pytest.raises(ValueError):
        BroadcastDecoder(8, (), (8, 8), (16, 16))  # one conv per upsample


def test_decoder_shapes_and_upsampling():
    torch.manual_seed(0)
    dec = BroadcastDecoder(8, (8, 8, 8), (8, 8), (32, 32))
    out = dec(torch.randn(5, 8))
    assert out.shape == (5, 4, 32, 32)


def test_masks_softmax_and_combination_oracle():
    m = micro_model(seed=2)
    images = rand_images(2, (8, 8), seed=9)
    with torch.no_grad():
        out = m(images)
    masks, recons = out["masks"], out["recons"]
    assert torch.allclose(masks.sum(dim=1), torch.ones(2, 8, 8), atol=1e-6)
    # combined reconstruction equals the explicit per-pixel sum
    expect = torch.zeros(2, 3, 8, 8)
    for k in range(MICRO.K):
        expect += masks[:, k].unsqueeze(1) * recons[:, k]
    assert torch.allclose(out["recon"], expect, atol=1e-6)
    stack = MaskStack(masks=masks, recons=recons)
    assert torch.allclose(stack.combined, expect, atol=1e-6)


# ---------------------------------------------------------------- loss


def test_loss_matches_explicit_mean():
    g = torch.Generator().manual_seed(4)
    a = torch.rand(3, 3, 5, 5, generator=g)
    b = torch.rand(3, 3, 5, 5, generator=g)
    manual = sum(
        float((a[i, c, y, x] - b[i, c, y, x]) ** 2)
        for i in range(3) for c in range(3) for y in range(5) for x in range(5)
    ) / (3 * 3 * 5 * 5)
    assert abs(float(reconstruction_loss(a, b)) - manual) < 1e-6


def test_loss_constant_offset_and_resolution_independence():
    for res in [(8, 8), (16, 16)]:
        img = torch.zeros(2, 3, *res)
        assert abs(float(reconstruction_loss(img + 0.25, img)) - 0.0625) < 1e-7
    with pytest.raises(ValueError):
        reconstruction_loss(torch.zeros(0, 3, 8, 8), torch.zeros(0, 3, 8, 8))


def test_gradients_match_finite_differences():
    # spot-check across every parameter tensor in float64
    torch.manual_seed(11)
    m = micro_model(seed=11).double()
    images = rand_images(2, (8, 8), seed=3).double()
    loss = reconstruction_loss(m(images)["recon"], images)
    loss.backward()
    rng = np.random.default_rng(0)
    for name, p in m.named_parameters():
        flat = p.detach().reshape(-1)
        grad = p.grad.reshape(-1)
        for idx in rng.integers(0, flat.numel(), size=min(3, flat.numel())):
            eps = 1e-6
            with torch.no_grad():
                orig = float(flat[idx])
                flat[idx] = orig + eps
                up = float(reconstruction_loss(m(images)["recon"], images))
                flat[idx] = orig - eps
                down = float(reconstruction_loss(m(images)["recon"], images))
                flat[idx] = orig
            fd = (up - down) / (2 * eps)
            an = float(grad[idx])
            rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
            assert rel < 1e-3, f"{name}[{idx}]: analytic {an} vs fd {fd}"


# ---------------------------------------------------------------- helpers


def test_images_to_tensor_and_fetch_batch():
    u8 = (np.arange(2 * 4 * 4 * 3) % 256).astype(np.uint8).reshape(2, 4, 4, 3)
    t = images_to_tensor(u8)
    assert t.shape == (2, 3, 4, 4) and t.dtype == torch.float32
    assert float(t.max()) <= 1.0
    assert float(t[1, 2, 0, 0]) == np.float32(u8[1, 0, 0, 2]) / np.float32(255)
    # fetch_batch: numpy source -> identical tensors to upfront conversion
    got = fetch_batch(u8, np.array([1, 0]))
    assert torch.equal(got, t[[1, 0]])
    assert torch.equal(fetch_batch(t, torch.tensor([0])), t[:1])


def test_extract_masks_single_and_batch():
    m = micro_model()
    imgs = rand_images(3, (8, 8))
    single = extract_masks(m, imgs[0])
    batch = extract_masks(m, imgs)
    assert single.masks.shape == (3, 8, 8)
    assert batch.masks.shape == (3, 3, 8, 8)
    assert torch.allclose(single.masks, batch.masks[0])


def test_penultimate_features_resized():
    m = micro_model()
    imgs = rand_images(2, (8, 8))
    f = penultimate_features(m, imgs)
    assert f.shape == (2, 8, 8, 8)  # channels = last trunk width, spatial = input
    fs = penultimate_features(m, imgs[0])
    assert fs.shape == (8, 8, 8)
    assert torch.allclose(fs, f[0])


# ---------------------------------------------------------------- training


def test_micro_overfit_single_image(tmp_path):
    # smooth image: a gradient the position-aware decoder can represent
    grid = build_grid(8, 8)[0, ..., :3]
    img = (grid.numpy() * 255).astype(np.uint8)[None]
    model, history, best = train(img, MICRO, tmp_path, steps=2000,
                                 batch_size=1, lr=1e-3, warmup=100, seed=0)
    init = float(np.mean(history[:50]))
    assert best < 0.1 * init, f"best {best} vs init {init}"


def test_training_deterministic(tmp_path):
    imgs = (np.random.default_rng(5).random((6, 8, 8, 3)) * 255).astype(np.uint8)
    runs = []
    for sub in ("a", "b"):
        _, history, _ = train(imgs, MICRO, tmp_path / sub, steps=25,
                              batch_size=2, warmup=5, seed=3)
        runs.append(history)
    assert runs[0] == runs[1]


def test_checkpoints_written(tmp_path):
    imgs = (np.random.default_rng(8).random((4, 8, 8, 3)) * 255).astype(np.uint8)
    train(imgs, MICRO, tmp_path, steps=6, save_every=3, warmup=2, seed=0)
    assert (tmp_path / "best.pt").exists()
    assert (tmp_path / "last.pt").exists()
    curve = (tmp_path / "loss_curve.csv").read_text().strip().splitlines()
    assert curve[0] == "step,loss" and len(curve) == 7


def test_divergence_raises(tmp_path):
    m = micro_model()
    bad = lambda model, batch: (model(batch)["recon"].sum()) * float("nan")
    with pytest.raises(RuntimeError, match="diverged"):
        train_loop(m, bad, rand_images(2, (8, 8)), 3, tmp_path,
                   batch_size=1, warmup=1)
