import json

import numpy as np
import pytest
from PIL import Image

from seamcam_adapter.backbones import BackboneUnavailable, make_backbone
from seamcam_adapter.cli import main
from seamcam_adapter.export import AdapterConfig, export_bundles

# exported files must satisfy the engine's loader; that file schema is the
# only surface shared with the engine package
from seamcam.pipeline import iter_bundle_stream


def write_smoke_manifest(tmp_path, n_images=5):
    rng = np.random.default_rng(2024)
    manifest = tmp_path / "manifest.jsonl"
    with manifest.open("w") as fh:
        for i in range(n_images):
            img = rng.integers(0, 255, size=(24, 32, 3), dtype=np.uint8)
            img_path = tmp_path / f"img{i}.png"
            Image.fromarray(img).save(img_path)
            gt = np.zeros((24, 32), dtype=np.uint8)
            y, x = int(rng.integers(0, 12)), int(rng.integers(0, 16))
            gt[y : y + 8, x : x + 10] = 255
            gt_path = tmp_path / f"gt{i}.png"
            Image.fromarray(gt).save(gt_path)
            fh.write(
                json.dumps(
                    {
                        "image_id": f"smoke{i}",
                        "path": str(img_path),
                        "species": "chameleon",
                        "gt_mask_paths": [str(gt_path)],
                    }
                )
                + "\n"
            )
    return manifest


class TestMockExport:
    def test_smoke_manifest_bundles_load_in_engine(self, tmp_path):
        manifest = write_smoke_manifest(tmp_path)
        out = tmp_path / "bundles.jsonl"
        exported, failed = export_bundles(
            AdapterConfig(backbone="mock", manifest=str(manifest), out_path=str(out))
        )
        assert (exported, failed) == (5, 0)
        bundles = list(iter_bundle_stream(out))
        assert len(bundles) == 5
        for bundle in bundles:
            assert bundle.detector_id == "mock"
            assert bundle.category == "chameleon"
            for prop in bundle.proposals:
                assert 0.0 <= prop.alpha <= 1.0
                assert 0.0 <= prop.beta <= 1.0
                assert (prop.mask.height, prop.mask.width) == (bundle.height, bundle.width)

    def test_export_is_deterministic(self, tmp_path):
        manifest = write_smoke_manifest(tmp_path)
        out1, out2 = tmp_path / "b1.jsonl", tmp_path / "b2.jsonl"
        export_bundles(AdapterConfig("mock", str(manifest), str(out1)))
        export_bundles(AdapterConfig("mock", str(manifest), str(out2)))
        assert out1.read_bytes() == out2.read_bytes()

    def test_per_image_failure_continues(self, tmp_path, capsys):
        manifest = write_smoke_manifest(tmp_path, n_images=3)
        with manifest.open("a") as fh:
            fh.write(
                json.dumps(
                    {
                        "image_id": "broken",
                        "path": str(tmp_path / "missing.png"),
                        "species": "owl",
                        "gt_mask_paths": [],
                    }
                )
                + "\n"
            )
        out = tmp_path / "bundles.jsonl"
        exported, failed = export_bundles(AdapterConfig("mock", str(manifest), str(out)))
        assert (exported, failed) == (3, 1)
        assert "broken" in capsys.readouterr().err

    def test_cli_export(self, tmp_path, capsys):
        manifest = write_smoke_manifest(tmp_path)
        out = tmp_path / "bundles.jsonl"
        code = main(["export", "--backbone", "mock", "--manifest", str(manifest), "--out", str(out)])
        assert code == 0
        assert "exported=5" in capsys.readouterr().out


class TestBackboneRegistry:
    def test_unimplemented_variants_fail_clearly(self):
        with pytest.raises(BackboneUnavailable):
            make_backbone("sam3")
        with pytest.raises(BackboneUnavailable):
            make_backbone("rex-omni+sam2")

    def test_unknown_name(self):
        with pytest.raises(BackboneUnavailable, match="unknown backbone"):
            make_backbone("not-a-backbone")
