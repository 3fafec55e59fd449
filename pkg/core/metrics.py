"""
Métricas de rendimiento del consenso: escalabilidad R = n_tx / T_c,
coeficiente de Gini G sobre las participaciones de los nodos y la ley
universal de escalabilidad (USL) como curva de referencia.
"""
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from shared.errors import UndefinedThroughputError


class ParticipationLedger:
    """Cuenta por nodo x_i de participaciones exitosas y rondas observadas K."""

    def __init__(self, n: int):
        if n < 0:
            raise ValueError(f"Número de nodos inválido: {n}")
        self.counts = np.zeros(n, dtype=np.int64)
        self.rounds_observed = 0

    @classmethod
    def from_counts(cls, counts, rounds_observed=None):
        values = np.asarray(list(counts), dtype=np.int64)
        if (values < 0).any():
            raise ValueError("Las participaciones no pueden ser negativas.")
        ledger = cls(len(values))
        ledger.counts[:] = values
        if rounds_observed is None:
            rounds_observed = values.max(initial=0)
        ledger.rounds_observed = int(rounds_observed)
        return ledger

    def __len__(self):
        return len(self.counts)

    def record(self, participants: Iterable[int]):
        """Suma una participación a cada nodo de la ronda y avanza K."""
        ids = np.fromiter(participants, dtype=np.int64)
        np.add.at(self.counts, ids, 1)
        self.rounds_observed += 1

    def skip(self):
        """Ronda fallida: cuenta para K pero no suma participaciones."""
        self.rounds_observed += 1


@dataclass(frozen=True)
class ThroughputSample:
    n_tx: int
    t_c_values: Sequence[float] = field(default_factory=tuple)


@dataclass(frozen=True)
class UslParams:
    alpha: float = 0.0
    beta: float = 0.0

    def validate(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha y beta deben ser >= 0 (recibido {self.alpha}, {self.beta})")
        return self


def gini(ledger) -> float:
    """
    G = Σ_i Σ_j |x_i − x_j| / (2 n² x̄), por la forma ordenada
    Σ_i (2i − n − 1) x_(i) / (n Σ x) en aritmética entera. Si nadie
    participó nunca, G = 0.
    """
    counts = ledger.counts if isinstance(ledger, ParticipationLedger) else np.asarray(list(ledger))
    x = np.sort(np.asarray(counts, dtype=np.int64))
    n = len(x)
    if n == 0:
        raise ValueError("El registro de participaciones está vacío.")
    if x[0] < 0:
        raise ValueError("Las participaciones no pueden ser negativas.")
    total = int(x.sum())
    if total == 0:
        return 0.0
    weights = 2 * np.arange(1, n + 1, dtype=np.int64) - n - 1
    numerator = int(np.dot(weights, x))
    return numerator / (n * total)


def throughput(sample: ThroughputSample) -> float:
    """R = n_tx / media(T_c) sobre las rondas exitosas, en tx/s."""
    if sample.n_tx < 1:
        raise ValueError(f"n_tx debe ser >= 1 (recibido {sample.n_tx})")
    values = np.asarray(sample.t_c_values, dtype=float)
    if values.size == 0:
        raise UndefinedThroughputError("No hay rondas exitosas; R no está definido.")
    if (values <= 0).any():
        raise ValueError("Cada T_c debe ser > 0.")
    return sample.n_tx / float(values.mean())


def usl(n: int, params: UslParams) -> float:
    """S(n) = n / (1 + α(n−1) + β·n·(n−1))."""
    if n < 1:
        raise ValueError(f"n debe ser >= 1 (recibido {n})")
    return n / (1 + params.alpha * (n - 1) + params.beta * n * (n - 1))


def usl_curve(n_max: int, params: UslParams) -> pd.DataFrame:
    if n_max < 1:
        raise ValueError(f"n_max debe ser >= 1 (recibido {n_max})")
    ns = range(1, n_max + 1)
    return pd.DataFrame({"n": list(ns), "S": [usl(n, params) for n in ns]})


def usl_peak(params: UslParams):
    """Óptimo analítico ⌊√((1−α)/β)⌋; None cuando β = 0 (no hay máximo)."""
    if params.beta == 0 or params.alpha >= 1:
        return None
    return max(1, math.floor(math.sqrt((1 - params.alpha) / params.beta)))


def decentralization_order(ginis: Mapping) -> List:
    """Mecanismos de más a menos descentralizado (G ascendente, empate por nombre)."""
    return sorted(ginis, key=lambda name: (ginis[name], str(name)))


def relative_spread(values) -> float:
    """(max − min) / media, ignorando NaN."""
    data = np.asarray(values, dtype=float)
    data = data[~np.isnan(data)]
    if data.size == 0 or data.mean() == 0:
        return math.nan
    return float((data.max() - data.min()) / data.mean())


def trend(xs, ys) -> float:
    """Correlación de Spearman de ys frente a xs."""
    rho, _ = stats.spearmanr(xs, ys)
    return float(rho)


def standard_error(std: float, count: int) -> float:
    return std / math.sqrt(count) if count > 0 else math.nan
