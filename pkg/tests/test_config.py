"""Key=value engine configuration files."""

import math

import pytest

from latentmatch.config import (DIRECTIONAL_MU_PI_TWELFTH, EngineConfig,
                                SigmoidParams)


class TestEngineConfig:
    def test_defaults(self):
        cfg = EngineConfig()
        assert cfg.top_n == 120
        assert cfg.texture_top_n == 200
        assert cfg.euclidean == SigmoidParams(15.0, -0.2, 40.0)
        assert cfg.directional.mu == 1.0 / 12.0
        assert cfg.directional.tau == -15.0
        assert cfg.directional.t == math.pi / 4.0
        assert cfg.weights == (1.0, 1.0, 2.0)

    def test_save_load_round_trip(self, tmp_path):
        cfg = EngineConfig(top_n=80, texture_top_n=150,
                           second_order_threshold=0.25,
                           directional=SigmoidParams(
                               DIRECTIONAL_MU_PI_TWELFTH, -15.0,
                               math.pi / 4),
                           patch_types=("c80", "t96"),
                           lambda_tt=3.5)
        path = tmp_path / "engine.cfg"
        cfg.save(path)
        loaded = EngineConfig.load(path)
        assert loaded == cfg

    def test_comments_and_defaults(self, tmp_path):
        path = tmp_path / "engine.cfg"
        path.write_text("# tuning\ntop_n = 64\n\nlambda_tt = 1.0\n")
        cfg = EngineConfig.load(path)
        assert cfg.top_n == 64
        assert cfg.lambda_tt == 1.0
        assert cfg.texture_top_n == 200  # untouched default

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "engine.cfg"
        path.write_text("nonsense = 12\n")
        with pytest.raises(ValueError):
            EngineConfig.load(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "engine.cfg"
        path.write_text("top_n 64\n")
        with pytest.raises(ValueError):
            EngineConfig.load(path)

    def test_directional_mu_switch(self, tmp_path):
        # the angular tolerance center can be read as pi/12 rad instead of
        # the literal 1/12 rad; both parse through the same key
        path = tmp_path / "engine.cfg"
        path.write_text(f"directional_mu = {DIRECTIONAL_MU_PI_TWELFTH!r}\n")
        cfg = EngineConfig.load(path)
        assert cfg.directional.mu == DIRECTIONAL_MU_PI_TWELFTH

    def test_nonpositive_truncation_rejected(self):
        with pytest.raises(ValueError):
            SigmoidParams(1.0, -1.0, 0.0)
