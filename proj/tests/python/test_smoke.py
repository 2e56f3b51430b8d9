import os
import subprocess

import numpy as np
import pytest

import ppcm


def test_splitmix_reference():
    value, state = ppcm.next_u64(0)
    assert value == 0xE220A8397B1DCDAF
    assert ppcm.next_u64(state)[0] == 0x6E789E6AA1B965F4
    assert ppcm.derive_subkeys("0" * 64) == (0x910A2DEC89025CC1, 0x975835DE1C9756CE, 0x1D0B14E4DB018FED)


def test_permutation_and_mask():
    assert ppcm.gen_permutation(0, 4) == [2, 1, 0, 3]
    assert sorted(ppcm.gen_permutation(123, 50)) == list(range(50))
    assert len(ppcm.gen_mask(5, 70)) == 70
    with pytest.raises(ValueError):
        ppcm.gen_permutation(0, 0)


def test_cipher_round_trip_and_affine_map():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(16, 24, 3), dtype=np.uint8)
    key = ppcm.master_from_seed(7)
    enc = ppcm.encrypt(img, 4, key)
    assert enc.shape == img.shape and enc.dtype == np.uint8
    assert not np.array_equal(enc, img)
    assert np.array_equal(ppcm.decrypt(enc, 4, key), img)

    a, b, perm = ppcm.block_affine_map(4, key, 24)
    inv = np.argsort(perm)
    blocks = img.reshape(4, 4, 6, 4, 3).transpose(0, 2, 1, 3, 4).reshape(24, -1)
    enc_blocks = enc.reshape(4, 4, 6, 4, 3).transpose(0, 2, 1, 3, 4).reshape(24, -1)
    for t in range(24):
        expect = a @ blocks[inv[t]].astype(np.int64) + b
        assert np.array_equal(expect, enc_blocks[t])

    with pytest.raises(ValueError):
        ppcm.encrypt(img[:15], 4, key)


def test_param_counts():
    assert ppcm.n_params("convmixer_plain") == 5306890
    assert ppcm.n_params() == 5345306
    assert ppcm.n_params("ele_same", image_size=32, block=4, classifier=0) == 823296
    rows = ppcm.sweep()
    assert len(rows) == 12
    proposed = [p for _, pol, p in rows if pol == "proposed"]
    different = [p for _, pol, p in rows if pol == "ele_different"]
    assert all(p < d for p, d in zip(proposed, different))


def test_model_and_penalty(tmp_path):
    cfg = ppcm.ModelConfig(hidden=8, depth=1, kernel=3, patch=2, n_classes=4, image_size=8, use_adaptive_matrix=True)
    model = ppcm.Model(cfg, seed=3)
    expected = ppcm.n_params("proposed", image_size=8, block=2, hidden=8, depth=1, kernel=3, n_classes=4)
    assert model.count_params() == expected
    u = model.adaptive_matrix
    assert u.shape == (16, 16)

    perm = ppcm.gen_permutation(1, 16)
    p = ppcm.permutation_matrix(perm)
    assert ppcm.penalty_LU(p) == 0.0
    assert ppcm.penalty_LU(np.zeros((3, 3))) == 3.0
    rows, valid = ppcm.extract_permutation(p.T)
    assert valid and rows == perm

    rng = np.random.default_rng(1)
    images = rng.integers(0, 256, size=(32, 8, 8, 3), dtype=np.uint8)
    labels = list(rng.integers(0, 4, size=32))
    history = model.fit(images, labels, epochs=2, batch_size=16)
    assert [m.epoch for m in history] == [1, 2]
    logits = model.predict(images)
    assert logits.shape == (32, 4)
    assert 0.0 <= model.evaluate(images, labels) <= 1.0

    path = str(tmp_path / "m.ckpt")
    model.save(path)
    back = ppcm.Model.load(path)
    assert np.array_equal(back.predict(images), logits)


@pytest.mark.skipif(not os.environ.get("PPCM_BIN"), reason="command-line tool not built")
def test_cli_params():
    out = subprocess.run([os.environ["PPCM_BIN"], "params"], capture_output=True, text=True, check=True)
    assert out.stdout == "5345306\n"
