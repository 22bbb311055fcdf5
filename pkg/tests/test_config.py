"""
tests.test_config
"""
import pytest
import traveling_observer as tom
from traveling_observer.config import (
    KEY_SECTIONS,
    PRESET_VALUES,
    apply_parsed,
    parse_key_values,
)


def test_defaults() -> None:
    """
    Test that the default run is the GP preset.
    """
    config = tom.resolve_config()

    assert config.preset == "gp"
    assert config.train.steps_total == 250_000
    assert config.train.dropout_rate == 0.5
    assert config.train.weight_decay == 1e-4
    assert config.train.batch_size is None
    assert config.seed == 0


@pytest.mark.parametrize("preset", sorted(PRESET_VALUES))
def test_presets_validate(preset: str) -> None:
    """
    Test that every preset resolves to a valid configuration.
    """
    config = tom.resolve_config(preset)
    assert config.preset == preset


def test_tabular_preset() -> None:
    """
    Test the settings of the large tabular benchmark.
    """
    train = tom.resolve_config("tabular").train

    assert train.ve_dim == 128
    assert train.num_blocks == 10
    assert train.tasks_per_step == 32
    assert train.lr_schedule == "plateau"
    assert train.finetune


def test_precedence(tmp_path) -> None:
    """
    Test that the file beats the preset and overrides beat the file.
    """
    path = tmp_path / "run.cfg"
    path.write_text(
        "# a comment\n"
        "[run]\n"
        "preset = hyperspheres\n"
        "[model]\n"
        "ve_dim = 4\n"
        "mode = tom-stl\n"
        "[trainer]\n"
        "steps_total = 500\n"
        "seed = 3\n"
    )
    config = tom.resolve_config(None, str(path), {"seed": "9", "learning_rate": None})

    assert config.preset == "hyperspheres"
    assert config.train.ve_dim == 4
    assert config.train.mode == "TOM-STL"
    assert config.train.steps_total == 500
    assert config.train.seed == 9
    assert config.train.learning_rate == 1e-3
    assert config.train.weight_decay == 1e-4


def test_parse_key_values() -> None:
    """
    Test sections, comments and keys before the first header.
    """
    parsed = parse_key_values("seed = 1\n\n; note\n[trainer]\nsteps_total = 1_000\n")

    assert parsed[""] == {"seed": ("1", 1)}
    assert parsed["trainer"] == {"steps_total": ("1_000", 5)}


@pytest.mark.parametrize(
    "text, line",
    [
        ("[trainer\n", 1),
        ("seed 1\n", 1),
        ("seed = 1\nseed = 2\n", 2),
        ("[trainer]\n = 3\n", 2),
    ],
)
def test_parse_errors(text: str, line: int) -> None:
    """
    Test that malformed lines report their line number.
    """
    with pytest.raises(tom.ConfigError) as error:
        parse_key_values(text, "run.cfg")
    assert error.value.line == line
    assert error.value.path == "run.cfg"


def test_unknown_and_misplaced_keys() -> None:
    """
    Test keys that do not exist or sit in the wrong section.
    """
    config = tom.RunConfig()
    with pytest.raises(tom.ConfigError) as error:
        apply_parsed(config, parse_key_values("[trainer]\nlearning_rat = 1\n"))
    assert error.value.key == "learning_rat"

    with pytest.raises(tom.ConfigError, match="belongs in section"):
        apply_parsed(config, parse_key_values("[model]\nseed = 1\n"))
    with pytest.raises(tom.ConfigError, match="unknown section"):
        apply_parsed(config, parse_key_values("[optimizer]\nseed = 1\n"))


@pytest.mark.parametrize(
    "key, raw, expected",
    [
        ("finetune", "yes", True),
        ("finetune", "Off", False),
        ("batch_size", "none", None),
        ("batch_size", "64", 64),
        ("steps_total", "1e5", 100_000),
        ("learning_rate", "5e-4", 5e-4),
        ("data_path", "data/gp", "data/gp"),
        ("seed", 7, 7),
    ],
)
def test_coercion(key: str, raw, expected) -> None:
    """
    Test that raw values take the type of their key.
    """
    config = tom.RunConfig()
    config.set(key, raw)
    assert config.to_dict()[KEY_SECTIONS[key]][key] == expected


def test_bad_values() -> None:
    """
    Test values that cannot be coerced or fail validation.
    """
    with pytest.raises(tom.ConfigError) as error:
        tom.RunConfig().set("finetune", "maybe", "run.cfg", 4)
    assert (error.value.key, error.value.line) == ("finetune", 4)

    for key, value in (("mode", "mlp"), ("dropout_rate", "1.0"), ("steps_total", "0"),
                       ("batch_size", "0"), ("weight_decay", "-1")):
        with pytest.raises(tom.ConfigError) as error:
            tom.resolve_config("micro", overrides={key: value})
        assert error.value.key == key


def test_unknown_preset() -> None:
    """
    Test that an unknown preset is refused.
    """
    with pytest.raises(tom.ConfigError):
        tom.resolve_config("imagenet")


def test_text_round_trip(tmp_path) -> None:
    """
    Test that the rendered config file resolves to the same settings.
    """
    config = tom.resolve_config("tabular", overrides={"data_path": "data/tabular", "seed": 5})
    path = tmp_path / "config.txt"
    path.write_text(config.to_text())

    assert tom.resolve_config(None, str(path)).to_dict() == config.to_dict()


def test_tables_are_immutable() -> None:
    """
    Test that the key table cannot be modified at runtime.
    """
    with pytest.raises(TypeError):
        KEY_SECTIONS["seed"] = "model"
