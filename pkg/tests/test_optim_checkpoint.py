"""Adam behavior and VGL1 checkpoint round-trips."""

import numpy as np
import pytest

import vglab.autodiff as ad
from vglab.autodiff import Adam, Tensor, load_checkpoint, save_checkpoint
from vglab.errors import DataFormatError, VglabError


def test_adam_rejects_nonpositive_lr():
    with pytest.raises(VglabError):
        Adam({"w": Tensor([1.0], requires_grad=True)}, lr=0.0)


def test_adam_zero_gradient_keeps_params():
    w = Tensor([1.0, -2.0], requires_grad=True)
    opt = Adam({"w": w}, lr=0.1)
    opt.step()
    np.testing.assert_array_equal(w.numpy(), [1.0, -2.0])


def test_adam_single_step_hand_computed():
    # f(w) = w^2 at w=1: g=2; m=(1-b1)*2, v=(1-b2)*4; mhat=2, vhat=4
    # step = lr * 2 / (sqrt(4) + eps) ~= lr
    w = Tensor([1.0], requires_grad=True)
    opt = Adam({"w": w}, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    ad.backward(ad.sum(ad.square(w)))
    opt.step()
    assert w.numpy()[0] == pytest.approx(1.0 - 0.1, rel=1e-6)
    assert w.numpy()[0] < 1.0


def test_adam_constant_gradient_approaches_lr_magnitude():
    w = Tensor([0.0], requires_grad=True)
    opt = Adam({"w": w}, lr=0.01, beta1=0.9, beta2=0.999)
    prev = 0.0
    for _ in range(400):
        w.grad[...] = 3.0
        opt.step()
        step = prev - w.numpy()[0]
        prev = w.numpy()[0]
    assert step == pytest.approx(0.01, rel=1e-3)


def test_adam_converges_on_quadratic():
    w = Tensor([1.0], requires_grad=True)
    opt = Adam({"w": w}, lr=0.05)
    for _ in range(300):
        opt.zero_grad()
        ad.backward(ad.sum(ad.square(w)))
        opt.step()
    assert abs(w.numpy()[0]) < 1e-3


def test_checkpoint_roundtrip_bitexact(tmp_path, rng):
    arrays = {
        "gen.w0": rng.standard_normal((3, 4)).astype(np.float32),
        "dis.b": rng.standard_normal((7,)).astype(np.float32),
        "scalar": np.float32(rng.standard_normal()).reshape(()),
    }
    meta = {"step": 12, "seed": 3}
    path = tmp_path / "ckpt.vgl"
    save_checkpoint(path, arrays, meta)
    loaded, meta2 = load_checkpoint(path)
    assert meta2 == meta
    assert set(loaded) == set(arrays)
    for k in arrays:
        assert loaded[k].dtype == np.float32
        assert np.array_equal(loaded[k], arrays[k])


def test_checkpoint_bad_magic(tmp_path):
    p = tmp_path / "junk.vgl"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(DataFormatError):
        load_checkpoint(p)


def test_adam_state_roundtrip(tmp_path):
    w = Tensor([1.0, 2.0], requires_grad=True)
    opt = Adam({"w": w}, lr=0.1)
    for _ in range(3):
        opt.zero_grad()
        ad.backward(ad.sum(ad.square(w)))
        opt.step()
    state = {k: v.astype(np.float32) for k, v in opt.state_arrays().items()}
    w2 = Tensor(w.numpy().astype(np.float32).copy(), requires_grad=True, dtype=np.float32)
    opt2 = Adam({"w": w2}, lr=0.1)
    opt2.load_state_arrays(state, t=opt.t)
    assert opt2.t == 3
    np.testing.assert_allclose(opt2.m["w"], opt.m["w"], rtol=1e-6)
