"""Run settings.

Values resolve in the order CLI flags > config file > ``REDLAB_*`` environment
> defaults. The config file is JSON; YAML is accepted too since every JSON
document is valid YAML.
"""
import pathlib
from typing import Any, Dict, Optional

import yaml
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from redlab.exceptions import BadValue


class Settings(BaseSettings):
    """Settings for a run."""

    model_config = SettingsConfigDict(env_prefix='REDLAB_', extra='forbid')

    seed: int = Field(0, ge=0, lt=2**64)
    out_dir: pathlib.Path = pathlib.Path('redlab-out')
    log_level: str = 'INFO'

    # desk scale
    train_size: int = Field(500, ge=1)
    test_size: int = Field(200, ge=1)
    hidden_units: int = Field(64, ge=1)

    # training
    learning_rate: float = Field(0.1, ge=0)
    batch_size: int = Field(32, ge=1)
    max_epochs: int = Field(30, ge=0)

    # attacks
    epsilon: float = Field(0.25, ge=0)
    max_iter: int = Field(50, ge=1)
    overshoot: float = 0.02
    cw_c: float = Field(1.0, gt=0)
    cw_steps: int = Field(200, ge=0)
    cw_step_size: float = Field(0.01, gt=0)
    cw_c_rounds: int = Field(4, ge=1)

    # capacity
    trials_per_size: int = Field(5, ge=1)
    budget_seconds: Optional[float] = Field(None, gt=0)

    # estimators
    jvhw_fallback: bool = False
    exact_rational: bool = False


def read_config_file(path) -> Dict[str, Any]:
    path = pathlib.Path(path)
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise BadValue(f'cannot read config file {path}: {e}') from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise BadValue(f'config file {path} must hold a mapping, got {type(data).__name__}')

    return data


def load_settings(config_path=None, overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """Resolve settings from a config file and CLI overrides.

    Parameters
    ----------
    config_path : path-like, optional
        JSON (or YAML) file with Settings fields.
    overrides : dict, optional
        Values from the command line. ``None`` entries are treated as unset.

    Returns
    -------
    Settings
    """
    values = read_config_file(config_path) if config_path is not None else {}
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    try:
        # init kwargs take precedence over the environment in pydantic-settings
        return Settings(**values)
    except ValidationError as e:
        raise BadValue(str(e)) from e
