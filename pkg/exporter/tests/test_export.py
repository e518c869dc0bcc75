import json
import shutil
import struct
import subprocess
import zlib
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from tokex.cli import main
from tokex.container import ExportError
from tokex.export import ExportJob, export_text_embedding, export_visual_tokens
from tokex.models import make_stub_weights


def read_tpk(path):
    raw = Path(path).read_bytes()
    assert raw[:4] == b"TPK1"
    version, dtype, rank = struct.unpack_from("<HBB", raw, 4)
    assert (version, dtype) == (1, 1)
    dims = struct.unpack_from(f"<{rank}I", raw, 8)
    end = 8 + 4 * rank + 4 * int(np.prod(dims))
    assert struct.unpack_from("<I", raw, end)[0] == zlib.crc32(raw[:end])
    return np.frombuffer(raw, "<f4", count=int(np.prod(dims)), offset=8 + 4 * rank).reshape(dims)


@pytest.fixture(scope="session")
def weights(tmp_path_factory):
    d = tmp_path_factory.mktemp("weights")
    make_stub_weights(d, seed=0)
    return d


@pytest.fixture(scope="session")
def frames(tmp_path_factory):
    d = tmp_path_factory.mktemp("frames")
    rng = np.random.Generator(np.random.PCG64(5))
    paths = []
    for i in range(2):
        img = (rng.random((224, 224, 3)) * 255).astype(np.uint8)
        p = d / f"f{i}.png"
        Image.fromarray(img).save(p)
        paths.append(str(p))
    return paths


def test_visual_export_dims_and_manifest(weights, frames, tmp_path):
    job = ExportJob(str(weights), str(tmp_path), inputs=tuple(frames))
    written = export_visual_tokens(job)
    assert written == ["frame_0000.tpk", "frame_0001.tpk"]
    for name in written:
        assert read_tpk(tmp_path / name).shape == (196, 768)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["grid"] == [14, 14]
    assert manifest["preprocess"]["resize"] == [224, 224]


def test_identical_frames_identical_containers(weights, frames, tmp_path):
    dup = tmp_path / "dup.png"
    shutil.copy(frames[0], dup)
    job = ExportJob(str(weights), str(tmp_path / "o"), inputs=(frames[0], str(dup)))
    export_visual_tokens(job)
    a = (tmp_path / "o" / "frame_0000.tpk").read_bytes()
    b = (tmp_path / "o" / "frame_0001.tpk").read_bytes()
    assert a == b


def test_reexport_is_byte_identical(weights, frames, tmp_path):
    for name in ("a", "b"):
        export_visual_tokens(
            ExportJob(str(weights), str(tmp_path / name), inputs=(frames[0],))
        )
        export_text_embedding(
            "red disk", ExportJob(str(weights), str(tmp_path / name))
        )
    for f in ("frame_0000.tpk", "text.tpk", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_text_export_unit_norm(weights, tmp_path):
    export_text_embedding("Red  Disk ", ExportJob(str(weights), str(tmp_path)))
    vec = read_tpk(tmp_path / "text.tpk")
    assert vec.shape == (512,)
    assert abs(float(np.linalg.norm(vec.astype(np.float64))) - 1.0) <= 1e-5
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["prompt"] == "red disk"


def test_empty_prompt_rejected(weights, tmp_path):
    with pytest.raises(ExportError):
        export_text_embedding("   ", ExportJob(str(weights), str(tmp_path)))


def test_missing_weights_is_data_error(tmp_path, frames, capsys):
    code = main(
        ["export-visual", frames[0], "--weights", str(tmp_path / "nowhere"),
         "--out-dir", str(tmp_path / "o")]
    )
    assert code == 2
    assert "make-stub-weights" in capsys.readouterr().err


def test_bad_resize_rejected(weights, frames):
    with pytest.raises(ExportError):
        ExportJob(str(weights), "o", resize=100, inputs=tuple(frames))


def test_cli_round_trip_through_consumer(weights, frames, tmp_path):
    """Containers written here must be accepted verbatim by the consumer
    CLI (the `prunekit prune` external interface)."""
    feat = tmp_path / "feat"
    assert main(
        ["export-visual", frames[0], "--weights", str(weights),
         "--out-dir", str(feat)]
    ) == 0
    assert main(
        ["export-text", "--prompt", "red disk", "--weights", str(weights),
         "--out-dir", str(feat)]
    ) == 0
    out = tmp_path / "pruned"
    proc = subprocess.run(
        ["prunekit", "prune", "--tokens", str(feat / "frame_0000.tpk"),
         "--embedding", str(feat / "text.tpk"), "--rho", "0.30",
         "--out-dir", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    retained = json.loads((out / "retained.json").read_text())["indices"]
    assert len(retained) == 59
