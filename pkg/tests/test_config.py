"""Config loading, env fallback, and CLI/service output parity."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from imgcurate.cli import main
from imgcurate.config import CONFIG_ENV_VAR, CliConfig
from imgcurate.errors import ConfigError
from imgcurate.index import VectorIndex
from imgcurate.records import Manifest, ManifestEntry
from imgcurate.service import ServiceState, create_app

from conftest import encode_png, photo_like_image


class TestCliConfig:
    def test_defaults_without_file(self):
        cfg = CliConfig.load(None)
        assert cfg.embedding["kind"] == "stub"
        assert "PT" in cfg.thresholds

    def test_env_fallback(self, tmp_path, monkeypatch):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 99, "corpus_root": str(tmp_path)}), encoding="utf-8")
        monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
        cfg = CliConfig.load(None)
        assert cfg.seed == 99

    def test_missing_file_fails_fast(self):
        with pytest.raises(ConfigError):
            CliConfig.load("/nonexistent/config.json")

    def test_missing_corpus_root_fails_fast(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"corpus_root": str(tmp_path / "missing")}), encoding="utf-8")
        with pytest.raises(ConfigError):
            CliConfig.load(path)

    def test_bad_scorer_kind(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "corpus_root": str(tmp_path),
            "scorers": {"authenticity": {"kind": "quantum"}},
        }), encoding="utf-8")
        cfg = CliConfig.load(path)
        with pytest.raises(ConfigError):
            cfg.build_scorers()

    def test_non_monotone_thresholds_rejected(self, tmp_path):
        from imgcurate.errors import NonMonotoneProfiles
        from imgcurate.thresholds import DEFAULT_PROFILES
        body = {s: {k: v for k, v in p.to_dict().items() if k != "stage"}
                for s, p in DEFAULT_PROFILES.items()}
        body["SFT"]["min_bpp"] = 0.0
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"corpus_root": str(tmp_path), "thresholds": body}), encoding="utf-8")
        with pytest.raises(NonMonotoneProfiles):
            CliConfig.load(path)


class TestCliServiceParity:
    def test_search_results_identical(self, tmp_path):
        blob_dir = tmp_path / "blobs"
        blob_dir.mkdir()
        entries = []
        for i in range(15):
            path = blob_dir / f"{i:02d}.png"
            path.write_bytes(encode_png(photo_like_image(40, 40, seed=500 + i)))
            entries.append(ManifestEntry(record_id=f"{i:02d}.png", uri=str(path), task="T2I"))
        manifest = Manifest.from_entries(entries)
        manifest_path = tmp_path / "m.jsonl"
        manifest.write(manifest_path)

        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "corpus_root": str(blob_dir),
            "index_path": str(tmp_path / "index"),
            "seed": 3,
        }), encoding="utf-8")

        runner = CliRunner()
        result = runner.invoke(main, ["--config", str(cfg_path), "index-build",
                                      "--manifest", str(manifest_path)], catch_exceptions=False)
        assert result.exit_code == 0, result.output

        seed_path = str(blob_dir / "03.png")
        cli_result = runner.invoke(main, ["--config", str(cfg_path), "search",
                                          "--mode", "image", "--seeds", seed_path, "-k", "6"],
                                   catch_exceptions=False)
        assert cli_result.exit_code == 0
        cli_body = json.loads(cli_result.output)

        cfg = CliConfig.load(cfg_path)
        state = ServiceState(index=VectorIndex.load(cfg.index_path), gateway=cfg.build_gateway(),
                             manifest=manifest)
        client = TestClient(create_app(state))
        import base64
        blob_b64 = base64.b64encode((blob_dir / "03.png").read_bytes()).decode()
        resp = client.post("/v1/search", json={"mode": "image", "seed_blobs_b64": [blob_b64], "k": 6})
        assert resp.status_code == 200
        http_body = resp.json()

        cli_ids = [e["record_id"] for e in cli_body["results"]]
        http_ids = [e["record_id"] for e in http_body["results"]]
        assert cli_ids == http_ids
        for a, b in zip(cli_body["results"], http_body["results"]):
            assert a["similarity"] == pytest.approx(b["similarity"], abs=1e-7)
