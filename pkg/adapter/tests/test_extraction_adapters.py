import json
import struct
from pathlib import Path

import numpy as np
import pytest

from extraction_adapters import (
    AdapterJob,
    EmptyFrames,
    ModelUnavailable,
    UnknownTask,
    extract_artifacts,
    validate_outputs,
)
from extraction_adapters.cli import main as adapter_main

T, H, W = 6, 24, 32


@pytest.fixture()
def frames_dir(tmp_path):
    from PIL import Image

    rng = np.random.default_rng(99)
    d = tmp_path / "frames"
    d.mkdir()
    for t in range(T):
        # a bright moving square on textured noise, so masks and tracks
        # respond to content rather than being constant
        px = rng.integers(40, 160, (H, W, 3)).astype(np.uint8)
        x = 4 + 3 * t
        px[6:14, x:x + 8] = 250
        px[16:22, 2:6] = 10
        Image.fromarray(px).save(d / f"frame_{t:06d}.png")
    return d


def _extract(frames, out, seed=0, tasks=None):
    job = AdapterJob(frames_dir=str(frames), out_dir=str(out),
                     tasks=tasks or ("global_embed", "patch_embed", "masks",
                                     "tracks", "clip_features"),
                     seed=seed)
    return extract_artifacts(job)


def _tree(out):
    return {p.name: p.read_bytes() for p in sorted(Path(out).glob("*"))
            if p.is_file()}


# ---------------------------------------------------------------------------
# extraction behavior
# ---------------------------------------------------------------------------

def test_extract_emits_every_artifact(frames_dir, tmp_path):
    out = tmp_path / "out"
    fragment = _extract(frames_dir, out)
    assert set(fragment["embeddings"]) == {"global", "patch", "clip"}
    assert set(fragment["masks"]) == {"obj", "arm"}
    assert fragment["tracks"] == "boundary.tracks.json"
    assert (fragment["frame_count"], fragment["width"],
            fragment["height"]) == (T, W, H)
    for rel in fragment["embeddings"].values():
        assert (out / rel).exists()


def test_global_embedding_header_shape(frames_dir, tmp_path):
    out = tmp_path / "out"
    _extract(frames_dir, out, tasks=("global_embed",))
    blob = (out / "global.wweb").read_bytes()
    assert blob[:4] == b"WWEB"
    version, t, rows, cols, d = struct.unpack("<5I", blob[4:24])
    assert (version, t, rows, cols) == (1, T, 1, 1)
    assert d > 0
    assert len(blob) == 24 + t * d * 4


def test_mask_counts_cover_every_pixel(frames_dir, tmp_path):
    out = tmp_path / "out"
    _extract(frames_dir, out, tasks=("masks",))
    for name in ("obj.rle.json", "arm.rle.json"):
        doc = json.loads((out / name).read_text())
        assert (doc["height"], doc["width"]) == (H, W)
        assert len(doc["frames"]) == T
        for counts in doc["frames"]:
            assert sum(counts) == H * W


def test_tracks_are_index_aligned(frames_dir, tmp_path):
    out = tmp_path / "out"
    _extract(frames_dir, out, tasks=("tracks",))
    doc = json.loads((out / "boundary.tracks.json").read_text())
    assert len(doc["frames"]) == T
    lengths = {len(pts) for pts in doc["frames"]}
    assert lengths == {12}


def test_empty_frames_dir(tmp_path):
    empty = tmp_path / "frames"
    empty.mkdir()
    with pytest.raises(EmptyFrames):
        _extract(empty, tmp_path / "out")


def test_unknown_model_and_task(frames_dir, tmp_path):
    with pytest.raises(ModelUnavailable):
        job = AdapterJob(frames_dir=str(frames_dir),
                         out_dir=str(tmp_path / "out"),
                         model="vit-large-14")
        extract_artifacts(job)
    with pytest.raises(UnknownTask):
        AdapterJob(frames_dir=str(frames_dir), out_dir=str(tmp_path / "out"),
                   tasks=("segment_everything",))


# ---------------------------------------------------------------------------
# validator
# ---------------------------------------------------------------------------

def test_validate_passes_fresh_extraction(frames_dir, tmp_path):
    out = tmp_path / "out"
    _extract(frames_dir, out)
    report = validate_outputs(out)
    assert len(report) == 6
    assert all(failure is None for _, failure in report)


def test_validate_flags_truncated_embedding(frames_dir, tmp_path):
    out = tmp_path / "out"
    _extract(frames_dir, out, tasks=("global_embed",))
    blob = (out / "global.wweb").read_bytes()
    (out / "global.wweb").write_bytes(blob[:-8])
    report = dict(validate_outputs(out))
    assert report["global.wweb"] == "TruncatedFile"


def test_validate_flags_wrong_rle_total(frames_dir, tmp_path):
    out = tmp_path / "out"
    _extract(frames_dir, out, tasks=("masks",))
    doc = json.loads((out / "obj.rle.json").read_text())
    doc["frames"][0][0] += 1
    (out / "obj.rle.json").write_text(json.dumps(doc))
    report = dict(validate_outputs(out))
    assert report["obj.rle.json"] == "LengthMismatch"
    assert report["arm.rle.json"] is None


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_extract_and_validate(frames_dir, tmp_path, capsys):
    out = tmp_path / "out"
    rc = adapter_main(["extract", "--frames", str(frames_dir),
                       "--out", str(out), "--tasks", "global_embed,masks",
                       "--seed", "3"])
    assert rc == 0
    assert (out / "fragment.json").exists()
    rc = adapter_main(["validate", "--dir", str(out)])
    assert rc == 0
    assert "FAIL" not in capsys.readouterr().out


def test_cli_extract_missing_frames_exit_two(tmp_path, capsys):
    rc = adapter_main(["extract", "--frames", str(tmp_path / "nope"),
                       "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_cli_validate_reports_failures_exit_one(frames_dir, tmp_path, capsys):
    out = tmp_path / "out"
    _extract(frames_dir, out, tasks=("global_embed",))
    (out / "global.wweb").write_bytes(b"XXXX")
    rc = adapter_main(["validate", "--dir", str(out)])
    assert rc == 1
    assert "FAIL global.wweb" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# acceptance: round-trip through the evaluation suite's readers
# ---------------------------------------------------------------------------

def test_acceptance_round_trip_and_bytewise_stability(frames_dir, tmp_path):
    name = ("adapter artifacts pass the evaluation readers and validate; "
            "regeneration is bytewise stable")
    try:
        from wow_eval.core import (
            load_rle_file,
            load_track_file,
            read_embedding_file,
        )

        out = tmp_path / "a"
        fragment = _extract(frames_dir, out, seed=7)

        g = read_embedding_file(out / "global.wweb")
        assert (g.T, g.rows, g.cols) == (T, 1, 1)
        p = read_embedding_file(out / "patch.wweb")
        assert (p.T, p.rows, p.cols) == (T, 4, 3)
        c = read_embedding_file(out / "clip.wweb")
        assert c.rows == c.cols == 1
        for rel in fragment["masks"].values():
            masks = load_rle_file(out / rel)
            assert masks.num_frames == T
            assert all(m.shape == (H, W) for m in masks.decoded())
        width, height, track_frames = load_track_file(
            out / "boundary.tracks.json")
        assert (width, height) == (W, H)
        assert len(track_frames) == T

        assert all(f is None for _, f in validate_outputs(out))

        again = tmp_path / "b"
        _extract(frames_dir, again, seed=7)
        assert _tree(out) == _tree(again)

        other = tmp_path / "c"
        _extract(frames_dir, other, seed=8)
        assert _tree(out) != _tree(other)
    except BaseException:
        print(f"FAIL {name}")
        raise
    print(f"PASS {name}")
