"""
Jerarquía de excepciones del simulador.
"""


class SimulationError(Exception):
    """Clase base de todos los errores del simulador."""


class ConfigError(SimulationError):
    """Configuración inválida. El mensaje siempre nombra el campo culpable."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DisseminationError(SimulationError):
    """El bloque no alcanzó el quórum de participantes elegibles."""


class RoundSkipError(SimulationError):
    """No hay candidatos para elegir líder; la ronda se registra como fallida."""


class UndefinedThroughputError(SimulationError):
    """Todas las rondas fallaron y R no está definido."""


class SweepCapError(SimulationError):
    """El barrido pide más puntos de los permitidos."""

    def __init__(self, count, cap):
        self.count = count
        self.cap = cap
        super().__init__(f"El barrido tiene {count} puntos y el límite es {cap}.")


class ResultsWriteError(SimulationError):
    """Fallo de E/S al escribir resultados."""

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"Error al escribir '{path}': {reason}")
