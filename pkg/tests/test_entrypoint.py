from __future__ import annotations

import importlib
import runpy
import tomllib
from collections.abc import Sequence
from pathlib import Path

import pytest

import stgraphrl.cli as cli_module

_REPOSITORY_ROOT = Path(__file__).resolve().parents[1]


def test_console_script_points_at_the_cli_main() -> None:
    manifest = tomllib.loads((_REPOSITORY_ROOT / "pyproject.toml").read_text(encoding="utf-8"))

    target = manifest["project"]["scripts"]["stgraphrl"]
    module_name, _, attribute = target.partition(":")

    assert getattr(importlib.import_module(module_name), attribute) is cli_module.main


def test_python_m_stgraphrl_exits_with_the_command_status(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    observed: list[Sequence[str] | None] = []

    def fake_run(argv: Sequence[str] | None = None) -> int:
        observed.append(argv)
        return 3

    monkeypatch.setattr(cli_module, "run", fake_run)

    with pytest.raises(SystemExit) as caught:
        runpy.run_module("stgraphrl.__main__", run_name="__main__")

    assert caught.value.code == 3
    assert observed == [None]


def test_importing_the_main_module_runs_nothing(monkeypatch: pytest.MonkeyPatch) -> None:
    def fail(argv: Sequence[str] | None = None) -> int:
        raise AssertionError("importing stgraphrl.__main__ must not run a command")

    monkeypatch.setattr(cli_module, "run", fail)

    namespace = runpy.run_module("stgraphrl.__main__", run_name="stgraphrl.__main__")

    assert namespace["main"] is cli_module.main
