"""Utility functions for loading configuration and adding constructors."""
import dataclasses
import logging
import os
from typing import Any

import yaml

from pairedit.interfaces.parameters import BackboneConfig, Config, DataParameter, SampleParameter, TrainParameter
from pairedit.utilities.atomic import atomic_write

log = logging.getLogger("Config")

SECTIONS: dict[str, type] = {
    "data": DataParameter,
    "model": BackboneConfig,
    "train": TrainParameter,
    "sample": SampleParameter,
}


class ConfigError(ValueError):
    """Unknown section or key, or invalid value in a configuration file."""


def _build(cls: type, values: dict[str, Any], where: str) -> Any:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid value in {where}: {exc}") from exc


def data_parameter_constructor(loader: yaml.SafeLoader, node: yaml.nodes.MappingNode) -> DataParameter:
    """Construct data generation parameters.

    Parameters
    ----------
    loader
        yaml loader
    node
        constructor mapping

    Returns
    -------
        DataParameter object
    """
    return _build(DataParameter, loader.construct_mapping(node, deep=True), "!DataParameter")  # type: ignore


def backbone_config_constructor(loader: yaml.SafeLoader, node: yaml.nodes.MappingNode) -> BackboneConfig:
    """Construct a backbone configuration.

    Parameters
    ----------
    loader
        yaml loader
    node
        constructor mapping

    Returns
    -------
        BackboneConfig object
    """
    return _build(BackboneConfig, loader.construct_mapping(node, deep=True), "!BackboneConfig")  # type: ignore


def train_parameter_constructor(loader: yaml.SafeLoader, node: yaml.nodes.MappingNode) -> TrainParameter:
    """Construct training parameters."""
    return _build(TrainParameter, loader.construct_mapping(node, deep=True), "!TrainParameter")  # type: ignore


def sample_parameter_constructor(loader: yaml.SafeLoader, node: yaml.nodes.MappingNode) -> SampleParameter:
    """Construct sampling parameters."""
    return _build(SampleParameter, loader.construct_mapping(node, deep=True), "!SampleParameter")  # type: ignore


def parse_config(text: str, source: str = "<string>") -> Config:
    """Parse a configuration document.

    Sections are plain mappings or tagged parameter objects; missing sections and keys keep their defaults.

    Raises
    ------
    ConfigError
        Malformed YAML, unknown section or key, or invalid value.
    """
    try:
        document = yaml.load(text, Loader=Loader)  # noqa: S506
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    unknown = sorted(set(document) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {', '.join(map(str, unknown))}")

    sections: dict[str, Any] = {}
    for name, cls in SECTIONS.items():
        value = document.get(name)
        if value is None:
            sections[name] = cls()
        elif isinstance(value, cls):
            sections[name] = value
        elif isinstance(value, dict):
            sections[name] = _build(cls, value, f"{source} section '{name}'")
        else:
            raise ConfigError(f"{source}: section '{name}' must be a mapping or !{cls.__name__}")
    return Config(**sections)


def load_config(path_to_config: str | os.PathLike | None) -> Config:
    """Load a configuration file, defaults if no path is given.

    Parameters
    ----------
    path_to_config
        Path to configuration yaml file

    Returns
    -------
        Configuration

    Raises
    ------
    FileNotFoundError
        File does not exist or is not a yaml file.
    ConfigError
        Invalid content.
    """
    if path_to_config is None:
        return Config()
    file_path = os.path.normpath(path_to_config)
    if not file_path.endswith((".yaml", ".yml")) or not os.path.exists(file_path):
        raise FileNotFoundError(f"Invalid configuration file, yaml file required: {file_path}")
    with open(file_path, encoding="utf-8") as file:
        config = parse_config(file.read(), file_path)
    log.info("Loaded configuration from %s", file_path)
    return config


def dump_config(config: Config, path: str | os.PathLike | None = None) -> str:
    """Serialize a configuration as plain yaml sections, optionally written to a file atomically."""
    text = yaml.safe_dump(config.dict(), sort_keys=False)
    if path is not None:
        with atomic_write(path, "w") as file:
            file.write(text)
    return text


# >> Create yaml loader object
class Loader(yaml.SafeLoader):
    """Safe loader with constructors for the parameter classes."""


# >> Add constructors to PyYAML loader
Loader.add_constructor("!DataParameter", data_parameter_constructor)
Loader.add_constructor("!BackboneConfig", backbone_config_constructor)
Loader.add_constructor("!TrainParameter", train_parameter_constructor)
Loader.add_constructor("!SampleParameter", sample_parameter_constructor)
