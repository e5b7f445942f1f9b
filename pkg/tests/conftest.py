import json
from pathlib import Path

import pytest

from lgholling import CoefficientBounds, InitialHistory, ModelSpec, compute_permanence_bounds_from_values, run_preset
from lgholling.presets import preset_config


def make_spec(name: str) -> ModelSpec:
    return ModelSpec.from_strings(preset_config(name)["model"])


def table_bounds(name: str) -> CoefficientBounds:
    return CoefficientBounds.from_table(preset_config(name)["table_bounds"])


def table_permanence(name: str):
    return compute_permanence_bounds_from_values(table_bounds(name))


@pytest.fixture(scope="session")
def example1_spec():
    return make_spec("example1")


@pytest.fixture(scope="session")
def example2_spec():
    return make_spec("example2")


@pytest.fixture(scope="session")
def example2_bounds():
    return table_permanence("example2")


@pytest.fixture(scope="session")
def example1_bounds():
    return table_permanence("example1")


@pytest.fixture(scope="session")
def unit_spec():
    consts = {s: "1" for s in ("a1", "a2", "b", "c1", "c2", "k1", "k2")}
    delays = {s: "0.5" for s in ("tau1", "tau2", "sigma1", "sigma2")}
    return ModelSpec.from_strings(consts | delays)


@pytest.fixture(scope="session")
def unit_coeff_bounds():
    return CoefficientBounds.from_table({f: 1.0 for f in CoefficientBounds.__dataclass_fields__})


@pytest.fixture
def half_history():
    return InitialHistory(0.5, 0.5)


@pytest.fixture(scope="session")
def example1_run(tmp_path_factory):
    """Full example1 pipeline, run once per session."""
    out = tmp_path_factory.mktemp("example1")
    report = run_preset("example1", out)
    return report, out


@pytest.fixture(scope="session")
def example2_run(tmp_path_factory):
    """Full example2 pipeline, run once per session."""
    out = tmp_path_factory.mktemp("example2")
    report = run_preset("example2", out)
    return report, out


def load_report(out_dir: Path) -> dict:
    return json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
