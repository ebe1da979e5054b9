import struct

import numpy as np
import pytest

from deepq.checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from deepq.errors import CheckpointError, OutputError
from deepq.nn import CATCH_GEOMETRY, GRADCHECK_GEOMETRY, PARAM_ORDER, init_params, rmsprop_init


def trained_pair():
    params = init_params(CATCH_GEOMETRY, 3)
    rms = rmsprop_init(params, decay=0.9, epsilon=0.02, learning_rate=1e-3)
    rng = np.random.default_rng(0)
    ms = {k: rng.uniform(size=v.shape).astype(np.float32) for k, v in rms.mean_square.items()}
    return params, type(rms)(ms, rms.decay, rms.epsilon, rms.learning_rate)


def test_round_trip_is_bitwise(tmp_path):
    params, rms = trained_pair()
    path = save_checkpoint(params, rms, tmp_path / "a.dqnc")
    p2, r2 = load_checkpoint(path, CATCH_GEOMETRY)
    assert p2.geometry == params.geometry
    for name in PARAM_ORDER:
        assert p2.tensors[name].tobytes() == params.tensors[name].tobytes()
        assert r2.mean_square[name].tobytes() == rms.mean_square[name].tobytes()
    assert (r2.decay, r2.epsilon, r2.learning_rate) == (0.9, 0.02, 1e-3)
    assert encode_checkpoint(p2, r2) == path.read_bytes()


def test_layout_header():
    params, rms = trained_pair()
    data = encode_checkpoint(params, rms)
    assert data[:4] == b"DQNC"
    assert struct.unpack("<I", data[4:8]) == (1,)
    n = sum(v.size for v in params.tensors.values())
    assert len(data) == 8 + 11 * 4 + 2 * 4 * n + 24


@pytest.mark.parametrize("cut", [0, 3, 7, 30, 200, -1])
def test_truncated_file_rejected(cut):
    params, rms = trained_pair()
    data = encode_checkpoint(params, rms)
    with pytest.raises(CheckpointError) as info:
        decode_checkpoint(data[:cut])
    assert info.value.field
    assert "truncated" in str(info.value)


def test_bad_magic_and_version():
    params, rms = trained_pair()
    data = encode_checkpoint(params, rms)
    with pytest.raises(CheckpointError) as info:
        decode_checkpoint(b"XXXX" + data[4:])
    assert info.value.field == "magic"
    with pytest.raises(CheckpointError) as info:
        decode_checkpoint(data[:4] + struct.pack("<I", 2) + data[8:])
    assert info.value.field == "version"
    with pytest.raises(CheckpointError) as info:
        decode_checkpoint(data + b"\0")
    assert info.value.field == "trailer"


def test_geometry_mismatch():
    params, rms = trained_pair()
    with pytest.raises(CheckpointError) as info:
        decode_checkpoint(encode_checkpoint(params, rms), GRADCHECK_GEOMETRY)
    assert info.value.field == "geometry"


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OutputError):
        load_checkpoint(tmp_path / "nope.dqnc")


def test_failed_load_leaves_caller_state_alone(tmp_path):
    params, rms = trained_pair()
    path = save_checkpoint(params, rms, tmp_path / "a.dqnc")
    path.write_bytes(path.read_bytes()[:100])
    current = params
    with pytest.raises(CheckpointError):
        current, _ = load_checkpoint(path)
    assert current is params
    assert not list(tmp_path.glob("*.tmp"))
