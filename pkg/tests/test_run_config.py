import pytest

from core.errors import ConfigError
from utils.run_config import RunConfig, format_config, load_config, merge


def _write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_defaults():
    cfg = RunConfig()
    assert cfg.p == 1.0
    assert cfg.schedule == [5, 9, 15]
    assert cfg.seeds == [0, 1, 2, 3, 4]


def test_load_values(tmp_path):
    cfg = load_config(_write(tmp_path, "# lab run\np = 2\n\nschedule = 5,9,15  # comment\nseeds = 3\n"))
    assert cfg.p == 2.0
    assert cfg.schedule == [5, 9, 15]
    assert cfg.seeds == [0, 1, 2]


def test_explicit_seed_list(tmp_path):
    assert load_config(_write(tmp_path, "seeds = 4,8\n")).seeds == [4, 8]
    assert load_config(_write(tmp_path, "seeds = 7,\n")).seeds == [7]


def test_unknown_key_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match="frobnicate"):
        load_config(_write(tmp_path, "p = 1\nfrobnicate = 1\n"))


def test_errors_carry_line_numbers(tmp_path):
    with pytest.raises(ConfigError, match=":2:"):
        load_config(_write(tmp_path, "p = 1\nT = many\n"))
    with pytest.raises(ConfigError, match=":1:"):
        load_config(_write(tmp_path, "just words\n"))


def test_flags_override_file(tmp_path):
    base = load_config(_write(tmp_path, "p = 2\nT = 500\n"))
    cfg = merge(base, {"T": 1000, "p": None})
    assert cfg.T == 1000
    assert cfg.p == 2.0


def test_printed_block_reads_back(tmp_path):
    cfg = merge(RunConfig(), {"seeds": "9,", "out": "r.csv", "slack": 0.25, "k": "3,5"})
    assert load_config(_write(tmp_path, format_config(cfg))) == cfg


def test_bad_merge_is_a_config_error():
    with pytest.raises(ConfigError):
        merge(RunConfig(), {"workers": 0})
