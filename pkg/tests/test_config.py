from pathlib import Path

import pytest

from memnet.circuit import PAPER_ARCH
from memnet.config import ConfigError, from_dict, load_config
from memnet.imaging import TEST_DIST, TRAIN_DIST

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {"arch": {"n_inputs": 1296, "fan_ins": [6, 6, 3]}}


def with_(**sections):
    return {**BASE, **sections}


class TestShippedConfigs:
    def test_paper(self):
        cfg = load_config(CONFIGS / "paper.cfg")
        assert cfg.arch == PAPER_ARCH
        assert cfg.value_range == (1.0, 1e4)
        assert cfg.selection.pool_target == 400 and cfg.selection.keep == 5
        assert cfg.selection.noise_p == 0.12
        assert cfg.genetic.offspring == 800 and cfg.genetic.keep == 5
        assert cfg.refine.train_dist == TRAIN_DIST
        assert cfg.test.dist == TEST_DIST and cfg.test.n_sets == 10_000

    def test_identity(self):
        cfg = load_config(CONFIGS / "identity.cfg")
        assert cfg.test.dist.is_identity and cfg.test.n_sets == 1

    def test_quick(self):
        assert load_config(CONFIGS / "quick.cfg").seed == 7


class TestValidation:
    def test_defaults(self):
        cfg = from_dict(BASE)
        assert cfg.seed == 0 and cfg.glyphs == "builtin" and cfg.fault_kind == "open"

    def test_missing_arch(self):
        with pytest.raises(ConfigError, match="config.arch"):
            from_dict({"seed": 1})

    def test_missing_fan_ins(self):
        with pytest.raises(ConfigError) as err:
            from_dict({"arch": {"n_inputs": 12}})
        assert err.value.key == "arch.fan_ins"

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as err:
            from_dict(with_(selection={"pool_targt": 3}))
        assert err.value.key == "selection.pool_targt"

    def test_indivisible_arch(self):
        with pytest.raises(ConfigError, match="arch"):
            from_dict({"arch": {"n_inputs": 100, "fan_ins": [6]}})

    def test_bad_value_names_section(self):
        with pytest.raises(ConfigError, match="genetic"):
            from_dict(with_(genetic={"keep": 0}))

    def test_bad_resistance(self):
        with pytest.raises(ConfigError, match="resistance"):
            from_dict(with_(resistance={"min": 10.0, "max": 1.0}))

    def test_bad_fault_kind(self):
        with pytest.raises(ConfigError, match="faults.kind"):
            from_dict(with_(faults={"kind": "melted"}))

    def test_negative_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            from_dict({**BASE, "seed": -1})

    def test_dist_overrides(self):
        cfg = from_dict(with_(test={"sigma_rot": 0.0, "mode": "uniform", "n_sets": 3},
                              train_dist={"order": ["noise", "shift", "rotate", "scale"]}))
        assert cfg.test.dist.sigma_rot == 0.0 and cfg.test.dist.sigma_noise == TEST_DIST.sigma_noise
        assert cfg.test.dist.mode == "uniform" and cfg.test.n_sets == 3
        assert cfg.refine.train_dist.order == ("noise", "shift", "rotate", "scale")

    def test_bad_order(self):
        with pytest.raises(ConfigError, match="train_dist"):
            from_dict(with_(train_dist={"order": ["noise"]}))

    def test_relative_glyph_path(self, tmp_path):
        (tmp_path / "run.cfg").write_text(
            '[arch]\nn_inputs = 1296\nfan_ins = [6, 6, 3]\n[glyphs]\nsource = "mine"\n')
        assert load_config(tmp_path / "run.cfg").glyphs == str(tmp_path / "mine")

    def test_toml_syntax_error(self, tmp_path):
        (tmp_path / "bad.cfg").write_text("[arch\n")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.cfg")
