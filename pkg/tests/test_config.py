import math
from pathlib import Path

import pytest

from array_model import MainlobePhaseModel
from config import apply_overrides, load_config, parse_bool, parse_regions
from tests.conftest import write_small_config
from utils import ConfigError


DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config.ini"


def test_shipped_config_is_the_broadside_example():
    config = load_config(str(DEFAULT_CONFIG))
    assert config.grid.count == 100
    assert config.grid.aperture == 10.0
    assert config.tdl.taps == 25
    assert config.sampling.omega_lo == pytest.approx(0.5 * math.pi)
    assert config.sampling.omega_step == pytest.approx(0.05 * math.pi)
    assert config.sampling.sidelobe_regions == ((0.0, 80.0), (100.0, 180.0))
    assert config.sampling.mainlobe_phase_model is MainlobePhaseModel.GROUP_DELAY
    assert config.design.alpha == 0.9
    assert config.design.sigma == 0.01
    assert config.design.epsilon == 9e-4
    assert config.use_rv
    assert config.ga.mutation_sigma is None
    assert config.ga_sensors == 11
    assert config.ga_aperture == 6.16
    assert config.mode == "reweighted"
    assert config.log_file is None


def test_small_config(tmp_path, problem):
    config = load_config(write_small_config(tmp_path, problem))
    assert config.grid.count == 8
    assert config.design.alpha == problem.spec().alpha
    assert config.ga.population == 6
    assert config.ga.seed == 7
    assert config.log_level == "WARNING"


def _edit(path, old, new):
    text = Path(path).read_text(encoding="utf-8")
    assert old in text
    Path(path).write_text(text.replace(old, new), encoding="utf-8")


@pytest.mark.parametrize("old, new", [
    ("schema_version = 1", "schema_version = 2"),
    ("schema_version = 1", ""),
    ("taps = 3", "taps = three"),
    ("taps = 3", "taps = 0"),
    ("[tdl]", "[filters]"),
    ("taps = 3", "taps = 3\nlength = 4"),
    ("mode = design", "mode = optimize"),
    ("mainlobe_phase = group_delay", "mainlobe_phase = linear"),
    ("sidelobe_regions = 0:60, 120:180", "sidelobe_regions = 0-60"),
    ("sidelobe_regions = 0:60, 120:180", "sidelobe_regions = 0:95"),
    ("use_rv = true", "use_rv = maybe"),
    ("level = WARNING", "level = LOUD"),
    ("n_sensors = 3", "n_sensors = 3\nmin_spacing = 1.0"),
])
def test_invalid_values_are_config_errors(tmp_path, problem, old, new):
    path = write_small_config(tmp_path, problem)
    _edit(path, old, new)
    with pytest.raises(ConfigError):
        load_config(path)


def test_rv_needs_sigma(tmp_path, problem):
    path = write_small_config(tmp_path, problem, sigma="")
    with pytest.raises(ConfigError):
        load_config(path)
    _edit(path, "use_rv = true", "use_rv = false")
    config = load_config(path)
    assert config.design.sigma is None
    assert not config.use_rv


def test_missing_and_unparsable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))
    broken = tmp_path / "broken.ini"
    broken.write_text("no section header\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(broken))


def test_parse_helpers():
    assert parse_regions("0:80, 100:180") == ((0.0, 80.0), (100.0, 180.0))
    assert parse_regions("") == ()
    assert parse_bool(" Yes ") is True
    assert parse_bool("off") is False
    with pytest.raises(ValueError):
        parse_bool("2")


def test_overrides(tmp_path, problem):
    config = load_config(write_small_config(tmp_path, problem))
    changed = apply_overrides(config, out="elsewhere", seed=42, dense=True, log_level="debug")
    assert changed.out_dir == "elsewhere"
    assert changed.ga.seed == 42
    assert changed.ga.population == 6
    assert changed.evaluation.dense
    assert changed.log_level == "DEBUG"
    assert config.ga.seed == 7
    assert apply_overrides(config).out_dir == config.out_dir
    with pytest.raises(ConfigError):
        apply_overrides(config, seed=-1)
    with pytest.raises(ConfigError):
        apply_overrides(config, log_level="verbose")
