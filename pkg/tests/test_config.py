import pytest

from etopt.config import (
    DEFAULT_CONFIG_TEXT,
    RunConfig,
    apply_overrides,
    check_basic,
    config_from_dict,
    config_to_dict,
    load_config,
    parse_config_text,
)
from etopt.errors import ConfigError


def test_default_text_parses_to_defaults():
    config = parse_config_text(DEFAULT_CONFIG_TEXT)
    assert config == RunConfig()


def test_parse_and_overrides():
    config = parse_config_text(
        "[problem]\nn = 7\n[schedule]\nschedule = thm1\nkappa = 0.25\n[run]\nhorizon = 99\n"
    )
    assert (config.n, config.schedule, config.kappa, config.horizon) == (7, "thm1", 0.25, 99)
    apply_overrides(config, [("schedule.tau0", "50"), ("run.record_decisions", "false")])
    assert config.tau0 == 50.0
    assert config.record_decisions is False


def test_unknown_key_and_bad_value():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config_text("[problem]\nsize = 3\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("[problem]\nn = many\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(RunConfig(), [("problem.nn", "3")])


def test_list_values():
    config = parse_config_text("[sweep]\ntau0_values = 0, 10, 20\nseeds = 3,4\n")
    assert config.sweep_tau0 == (0.0, 10.0, 20.0)
    assert config.sweep_seeds == (3, 4)
    config = parse_config_text("[benchmark]\nkinds = static, dynamic\n")
    assert config.benchmark_kinds == ("static", "dynamic")


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_check_basic_names_offender():
    with pytest.raises(ConfigError, match="schedule"):
        check_basic(RunConfig(schedule="thm9"))
    with pytest.raises(ConfigError, match="agents"):
        check_basic(RunConfig(n=1))
    with pytest.raises(ConfigError, match="benchmark"):
        check_basic(RunConfig(benchmark_kinds=("offline",)))
    with pytest.raises(ConfigError, match="family"):
        check_basic(RunConfig(family="logreg"))


def test_dict_roundtrip():
    config = RunConfig(n=9, tau0=25.0, benchmark_kinds=("static",))
    again = config_from_dict(config_to_dict(config))
    assert again == config
    with pytest.raises(ConfigError):
        config_from_dict({"unknown_field": 1})
