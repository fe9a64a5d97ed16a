"""Experiment config parsing: validation, overrides, canonical hash."""

import pytest

from fingergait.config import (ENV_PREFIX, canonical_text, config_hash,
                               load_experiment_config, parse_experiment_config)
from fingergait.errors import ConfigError

SAMPLE = """
[experiment]
object = lshape
planner = mrrt
reset = tree
seeds = 0, 1, 2
out = runs/demo

[sim]
friction = 0.6

[mrrt]
iterations = 500   # inline comment

[ppo]
updates = 3
normalize_advantages = no

[resets]
top_k = 5
cap = 100
"""


def test_defaults_parse_and_validate():
    cfg = parse_experiment_config("", environ={})
    assert cfg.object_name == "disc"
    assert cfg.planner == "grrt"
    assert cfg.reset == "fixed"
    assert cfg.seeds == (0,)
    assert cfg.sim.dt == pytest.approx(0.002)
    assert cfg.ppo.seed == 0


def test_values_map_onto_component_configs():
    cfg = parse_experiment_config(SAMPLE, environ={})
    assert cfg.object_name == "lshape"
    assert cfg.seeds == (0, 1, 2)
    assert cfg.sim.friction == pytest.approx(0.6)
    assert cfg.mrrt.iterations == 500
    assert cfg.ppo.updates == 3
    assert cfg.ppo.normalize_advantages is False
    assert cfg.reset_top_k == 5 and cfg.reset_cap == 100
    # Seeds are injected per run, not stored in the section configs.
    assert cfg.mrrt_config(7).seed == 7
    assert cfg.grrt_config(9).seed == 9
    assert cfg.ppo_config(11).seed == 11
    assert cfg.shape().name == "lshape"


@pytest.mark.parametrize("text", [
    "[experiment]\nobject = hexagon",
    "[experiment]\nplanner = prm",
    "[experiment]\nreset = warmstart",
    "[experiment]\nseeds = -1",
    "[experiment]\ncolour = red",
    "[mrrt]\nseed = 3",
    "[sim]\nfriction = sticky",
    "[typo]\nx = 1",
    "[env]\nlane_count = 9",
    "[ppo]\nnormalize_advantages = maybe",
    "not ini at all",
])
def test_unknown_or_invalid_input_is_rejected(text):
    with pytest.raises(ConfigError):
        parse_experiment_config(text, environ={})


def test_env_overrides_apply_after_file_and_are_validated():
    env = {ENV_PREFIX + "ENV__LANES": "16", ENV_PREFIX + "SIM__FRICTION": "0.9"}
    cfg = parse_experiment_config(SAMPLE, environ=env)
    assert cfg.env.lanes == 16
    assert cfg.sim.friction == pytest.approx(0.9)
    with pytest.raises(ConfigError):
        parse_experiment_config("", environ={ENV_PREFIX + "BADKEY": "1"})
    with pytest.raises(ConfigError):
        parse_experiment_config("", environ={ENV_PREFIX + "SIM__STICTION": "1"})


def test_hash_tracks_effective_values_not_formatting():
    base = parse_experiment_config(SAMPLE, environ={})
    reformatted = SAMPLE.replace("friction = 0.6", "friction=0.60") \
                        .replace("seeds = 0, 1, 2", "seeds = 0 1 2")
    assert config_hash(parse_experiment_config(reformatted, environ={})) \
        == config_hash(base)
    changed = parse_experiment_config(
        SAMPLE, environ={ENV_PREFIX + "ENV__LANES": "16"})
    assert config_hash(changed) != config_hash(base)
    assert len(config_hash(base)) == 64
    # Canonical text enumerates every effective key exactly once.
    lines = canonical_text(base).strip().splitlines()
    assert len(lines) == len(set(lines))
    assert "sim.friction = 0.6" in lines
    assert not any("seed =" in ln and not ln.startswith("experiment.seeds")
                   for ln in lines)


def test_load_from_file_and_missing_file(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(SAMPLE)
    cfg = load_experiment_config(str(path), environ={})
    assert cfg.object_name == "lshape"
    with pytest.raises(ConfigError):
        load_experiment_config(str(tmp_path / "absent.ini"), environ={})
