"""
Ajustes de entorno (.env) y configuración del logging.
"""
import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass(frozen=True)
class Settings:
    workers: int = 1
    log_level: str = "WARNING"
    sweep_cap: int = 10_000


def _env_int(name, default):
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Valor no entero en %s=%r; se usa %d.", name, raw, default)
        return default


def load_settings(dotenv_path=None) -> Settings:
    """
    Carga el archivo .env (si existe) y devuelve los ajustes por defecto
    del simulador. Las variables ya definidas en el entorno tienen prioridad.
    """
    load_dotenv(dotenv_path=dotenv_path, override=False)
    return Settings(
        workers=max(1, _env_int("CONSENSO_WORKERS", 1)),
        log_level=os.environ.get("CONSENSO_LOG_LEVEL", "WARNING").upper(),
        sweep_cap=_env_int("CONSENSO_SWEEP_CAP", 10_000),
    )


def configure_logging(level="WARNING"):
    """Instala un único manejador en stderr con el formato del proyecto."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(getattr(logging, str(level).upper(), logging.WARNING))
