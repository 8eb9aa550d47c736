from __future__ import annotations

from gridloom.cli import main
from gridloom.config import Config, load_config
from gridloom.util.log import debug_enabled, make_debug


def test_fields_read_env_at_construction(monkeypatch):
    monkeypatch.setenv("GRIDLOOM_SEED", "17")
    monkeypatch.setenv("GRIDLOOM_CGRA_RESTARTS", "5")
    monkeypatch.setenv("GRIDLOOM_ENABLE_TRSM", "yes")
    cfg = load_config()
    assert (cfg.SEED, cfg.CGRA_RESTARTS, cfg.ENABLE_TRSM) == (17, 5, True)
    monkeypatch.setenv("GRIDLOOM_SEED", "3")
    assert load_config().SEED == 3
    assert cfg.SEED == 17


def test_unparsable_bool_falls_back(monkeypatch):
    monkeypatch.setenv("GRIDLOOM_ENABLE_TRSM", "maybe")
    assert Config().ENABLE_TRSM is False


def test_debug_flag_shared_with_logger(monkeypatch, capsys):
    monkeypatch.setattr("gridloom.util.log._FORCED", None)
    monkeypatch.setenv("GRIDLOOM_DEBUG", "on")
    assert load_config().DEBUG and debug_enabled()
    make_debug("cfg")("hello")
    assert "[cfg] hello" in capsys.readouterr().err
    monkeypatch.setenv("GRIDLOOM_DEBUG", "off")
    assert not load_config().DEBUG and not debug_enabled()


def test_cli_verbose_overrides_env(monkeypatch, capsys):
    monkeypatch.setattr("gridloom.util.log._FORCED", None)
    monkeypatch.setenv("GRIDLOOM_DEBUG", "0")
    assert main(["-v", "dfg-dump", "--bench", "GEMM", "-n", "2"]) == 0
    assert debug_enabled()
    main(["dfg-dump", "--bench", "GEMM", "-n", "2"])
    assert not debug_enabled()
    capsys.readouterr()
