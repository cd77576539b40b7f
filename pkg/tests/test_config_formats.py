import json

import numpy as np
import pytest

from paap import formats
from paap.config import CONFIG_ENV, RunConfig, read_config_file, resolve_config
from paap.errors import ArgumentError
from paap.lld import PARAM_NAMES, AcousticParamMatrix
from paap.phonemes import PhonemeLogits


def test_defaults():
    cfg = RunConfig()
    assert (cfg.hop, cfg.win, cfg.fft_size) == (160, 512, 512)
    assert cfg.backend == "dsp" and cfg.weight_mode == "literal"
    assert cfg.ridge_lambda == 1e-4 and cfg.aux_scale == 0.1
    assert cfg.n_jobs >= 1


@pytest.mark.parametrize(
    "kwargs",
    [{"backend": "gpu"}, {"backend": "neural"}, {"weight_mode": "abs"}, {"ridge_lambda": -1}, {"hop": 0}, {"jobs": -2}],
)
def test_validation(kwargs):
    with pytest.raises(ArgumentError):
        RunConfig(**kwargs)


def test_toml_and_json_files(tmp_path):
    t = tmp_path / "c.toml"
    t.write_text('hop = 80\nweight_mode = "absolute"\n')
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"ridge_lambda": 0.5}))
    assert read_config_file(t) == {"hop": 80, "weight_mode": "absolute"}
    cfg = resolve_config(t, ridge_lambda=0.25, aux_scale=None)
    assert cfg.hop == 80 and cfg.weight_mode == "absolute" and cfg.ridge_lambda == 0.25
    assert resolve_config(j).ridge_lambda == 0.5


def test_unknown_key_rejected(tmp_path):
    t = tmp_path / "c.toml"
    t.write_text("hopsize = 80\n")
    with pytest.raises(ArgumentError, match="hopsize"):
        read_config_file(t)


def test_env_default(tmp_path, monkeypatch):
    t = tmp_path / "env.toml"
    t.write_text("aux_scale = 0.3\n")
    monkeypatch.setenv(CONFIG_ENV, str(t))
    assert resolve_config().aux_scale == 0.3


def test_digest_tracks_settings_not_paths(tmp_path):
    base = RunConfig()
    assert base.digest() == RunConfig().digest()
    assert base.digest() == RunConfig(jobs=3).digest()
    assert base.digest() != RunConfig(ridge_lambda=1e-3).digest()
    assert base.digest() != RunConfig(weight_mode="absolute").digest()
    labels = [f"X{i}" for i in range(40)] + ["SIL"]
    a = tmp_path / "a" / "v.txt"
    b = tmp_path / "b" / "v.txt"
    for p in (a, b):
        p.parent.mkdir()
        p.write_text("\n".join(labels))
    assert RunConfig(vocab=str(a)).digest() == RunConfig(vocab=str(b)).digest()
    b.write_text("\n".join(reversed(labels)))
    assert RunConfig(vocab=str(a)).digest() != RunConfig(vocab=str(b)).digest()


def _matrix(seed, n=9):
    return AcousticParamMatrix(np.random.default_rng(seed).standard_normal((n, 25)))


def test_features_binary_round_trip(tmp_path):
    D = _matrix(0)
    p = tmp_path / "d.bin"
    formats.write_features(p, D)
    raw = p.read_bytes()
    assert raw[:6] == b"PAAPD1"
    assert int.from_bytes(raw[6:10], "little") == 9 and int.from_bytes(raw[10:14], "little") == 25
    assert len(raw) == 14 + 4 * 9 * 25
    back = formats.read_features(p)
    np.testing.assert_array_equal(back.values, D.values.astype(np.float32))


def test_features_csv_round_trip(tmp_path):
    D = _matrix(1)
    p = tmp_path / "d.csv"
    formats.write_features(p, D, "xyz")
    lines = p.read_text().splitlines()
    assert lines[0] == "# config_digest: xyz"
    assert lines[1].split(",") == ["frame", *PARAM_NAMES]
    assert len(lines) == 2 + 9
    np.testing.assert_array_equal(formats.read_features(p).values, D.values)


def test_features_bad_files(tmp_path):
    p = tmp_path / "d.bin"
    p.write_bytes(b"PAAPX1" + bytes(8))
    with pytest.raises(formats.FileFormatError, match="magic"):
        formats.read_features(p)
    formats.write_features(p, _matrix(2))
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(formats.FileFormatError):
        formats.read_features(p)
    c = tmp_path / "d.csv"
    c.write_text("frame,a,b\n0,1,2\n")
    with pytest.raises(formats.FileFormatError):
        formats.read_features(c)


def test_logits_round_trip(tmp_path):
    P = PhonemeLogits(np.eye(41)[np.arange(12) % 41])
    p = tmp_path / "p.bin"
    formats.write_logits(p, P)
    assert p.read_bytes()[:6] == b"PAAPP1"
    np.testing.assert_array_equal(formats.read_logits(p).values, P.values)
    with pytest.raises(formats.FileFormatError):
        formats.read_features(p)
