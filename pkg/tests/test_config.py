from pathlib import Path

import pytest

from saliency_flow.config import load_config, parse_config
from saliency_flow.errors import ConfigError, ParameterError
from saliency_flow.models import Convolution, FlowParams, Mode, PipelineOptions, Scheme

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"


def test_empty_config_gives_defaults() -> None:
    params, options = parse_config({})
    assert params == FlowParams()
    assert options == PipelineOptions()


def test_versioned_default_file_matches_defaults() -> None:
    params, options = load_config(DEFAULT_CONFIG)
    assert params == FlowParams()
    assert options == PipelineOptions()


def test_file_values_and_cli_precedence(tmp_path) -> None:
    path = tmp_path / "run.toml"
    path.write_text(
        '[flow]\np = 1\nlambda = 0.5\ndelta = 2.0\nQ = 64\nconvolution = "direct"\n'
        '[pipeline]\nscheme = "yosida"\nmode = "2d"\n',
        encoding="utf-8",
    )
    params, options = load_config(path)
    assert params.p == 1.0 and isinstance(params.p, float)
    assert params.lam == 0.5
    assert params.q_levels == 64
    assert params.convolution is Convolution.DIRECT
    assert options.scheme is Scheme.YOSIDA
    assert options.mode is Mode.SLICES

    params, options = load_config(path, {"p": 0.5, "rho": None}, {"mode": "3d"})
    assert params.p == 0.5
    assert params.rho == 2.0
    assert options.mode is Mode.VOLUME


def test_documented_model_defaults() -> None:
    params = FlowParams()
    assert params.epsilon == 1e-2
    assert (params.r0, params.inner_steps) == (0.5, 5)
    resolved = params.resolved(2.0)
    assert resolved.tau * resolved.reaction_a == pytest.approx(params.tau_safety)


def test_auto_values() -> None:
    params, _ = parse_config({"flow": {"delta": "auto", "tau": "auto", "early_stop_tol": "auto"}})
    assert params.delta is None and params.tau is None and params.early_stop_tol is None


def test_violated_reaction_constraint_names_inequality() -> None:
    with pytest.raises(ParameterError, match=r"delta\^2/alpha - lambda > 0"):
        parse_config({"flow": {"delta": 1.0, "alpha": 1.0, "lambda": 1.0}})


@pytest.mark.parametrize(
    "data",
    [
        {"flow": {"gamma": 1.0}},
        {"flow": {"max_inner": 40}},
        {"solver": {}},
        {"flow": {"n_steps": 2.5}},
        {"flow": {"p": "one"}},
        {"flow": {"p": True}},
        {"pipeline": {"global_delta": 1}},
        {"pipeline": {"scheme": 3}},
        {"flow": []},
    ],
)
def test_config_errors(data: dict) -> None:
    with pytest.raises(ConfigError):
        parse_config(data)


def test_config_error_is_parameter_category() -> None:
    assert ConfigError("x").exit_code == 4


def test_broken_toml(tmp_path) -> None:
    path = tmp_path / "broken.toml"
    path.write_text("[flow\np = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(path)
