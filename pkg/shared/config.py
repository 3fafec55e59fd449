"""
Lectura de documentos JSON de configuración.

Un experimento tiene las secciones `topology`, `fault`, `mechanism` y
`latency` más `n_tx`, `k_rounds`, `repetitions` y `seed` en el nivel
superior. Un barrido es `{"base": <experimento>, "axes": {...}, "cap": n}`.
Las claves ausentes toman su valor por defecto; las desconocidas se
rechazan nombrando el campo.
"""
import json
from pathlib import Path
from typing import Any, Dict

from core.consensus import ConsensusMechanismConfig, LatencyConfig
from core.experiment import AXIS_NAMES, DEFAULT_SWEEP_CAP, ExperimentConfig, SweepSpec
from core.gossip import FaultConfig
from core.topology import TopologyConfig
from shared.errors import ConfigError

# clave JSON -> (atributo, tipo)
_SECTIONS = {
    "topology": (TopologyConfig, {
        "field_side": ("field_side", float),
        "lambda": ("lambda_", float),
        "comm_range": ("comm_range", float),
        "r_cls": ("r_cls", float),
        "cluster_side": ("cluster_side", float),
    }),
    "fault": (FaultConfig, {
        "p_fail": ("p_fail", float),
        "intermittent": ("intermittent", bool),
    }),
    "mechanism": (ConsensusMechanismConfig, {
        "kind": ("kind", str),
        "r_v": ("r_v", float),
        "n_w": ("n_w", int),
        "r_sfl": ("r_sfl", float),
        "delta_sfl": ("delta_sfl", int),
    }),
    "latency": (LatencyConfig, {
        "tau_round": ("tau_round", float),
        "c_agg": ("c_agg", float),
        "c_mech": ("c_mech", dict),
        "theta": ("theta", float),
        "quorum_scope": ("quorum_scope", str),
    }),
}
_TOP_LEVEL = {"n_tx": int, "k_rounds": int, "repetitions": int, "seed": int}
_AXIS_TYPES = {key: kind for _, fields in _SECTIONS.values() for key, (_, kind) in fields.items()}
_AXIS_TYPES.update(_TOP_LEVEL)


def coerce(value: Any, kind: type, field_name: str) -> Any:
    """Comprueba el tipo JSON de un campo y lo convierte."""
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(field_name, f"debe ser texto (recibido {value!r})")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(field_name, f"debe ser true o false (recibido {value!r})")
        return value
    if kind is dict:
        if not isinstance(value, dict):
            raise ConfigError(field_name, f"debe ser un objeto (recibido {value!r})")
        return {k: coerce(v, float, f"{field_name}.{k}") for k, v in value.items()}
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field_name, f"debe ser numérico (recibido {value!r})")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(field_name, f"debe ser entero (recibido {value!r})")
        return int(value)
    return float(value)


def load_json(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError("config", f"No se encontró el archivo de configuración '{path}'.") from None
    except OSError as exc:
        raise ConfigError("config", f"No se pudo leer '{path}': {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"JSON inválido en '{path}': {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", f"'{path}' debe contener un objeto JSON.")
    return data


def _section(data: Dict[str, Any], name: str):
    cls, fields = _SECTIONS[name]
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(name, "debe ser un objeto")
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"{name}.{key}", "campo desconocido")
        attr, kind = fields[key]
        kwargs[attr] = coerce(value, kind, f"{name}.{key}")
    return cls(**kwargs)


def experiment_config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    for key in data:
        if key not in _SECTIONS and key not in _TOP_LEVEL:
            raise ConfigError(key, "campo desconocido")
    kwargs = {name: _section(data, name) for name in _SECTIONS}
    for key, kind in _TOP_LEVEL.items():
        if key in data:
            kwargs[key] = coerce(data[key], kind, key)
    return ExperimentConfig(**kwargs).validate()


def _axis_value(name: str, value: Any, field_name: str) -> Any:
    if name == "variant":
        if not isinstance(value, dict):
            raise ConfigError(field_name, f"cada variante debe ser un objeto (recibido {value!r})")
        return {k: _axis_value(k, v, f"{field_name}.{k}") for k, v in value.items()}
    if name == "mechanism":
        if isinstance(value, dict):
            fields = _SECTIONS["mechanism"][1]
            for key in value:
                if key not in fields:
                    raise ConfigError(f"{field_name}.{key}", "campo desconocido")
            return {k: coerce(v, fields[k][1], f"{field_name}.{k}") for k, v in value.items()}
        return coerce(value, str, field_name)
    if name not in _AXIS_TYPES:
        raise ConfigError(field_name, "eje desconocido")
    return coerce(value, _AXIS_TYPES[name], field_name)


def sweep_spec_from_dict(data: Dict[str, Any], default_cap: int = DEFAULT_SWEEP_CAP) -> SweepSpec:
    for key in data:
        if key not in ("base", "axes", "cap"):
            raise ConfigError(key, "campo desconocido")
    base = experiment_config_from_dict(data.get("base", {}))
    raw_axes = data.get("axes", {})
    if not isinstance(raw_axes, dict):
        raise ConfigError("axes", "debe ser un objeto")
    axes = {}
    for name, values in raw_axes.items():
        if name not in AXIS_NAMES:
            raise ConfigError(f"axes.{name}", "eje desconocido")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axes.{name}", "debe ser una lista no vacía")
        axes[name] = [_axis_value(name, v, f"axes.{name}[{i}]") for i, v in enumerate(values)]
    cap = coerce(data.get("cap", default_cap), int, "cap")
    return SweepSpec(base=base, axes=axes, cap=cap)


def load_experiment_config(path) -> ExperimentConfig:
    return experiment_config_from_dict(load_json(path))


def load_sweep_spec(path, default_cap: int = DEFAULT_SWEEP_CAP) -> SweepSpec:
    return sweep_spec_from_dict(load_json(path), default_cap)
