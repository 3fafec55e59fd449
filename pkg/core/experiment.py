"""
Orquestación de simulaciones: una corrida (`run`) repite `repetitions`
veces el muestreo de topología, clusters y mecanismo y ejecuta `k_rounds`
rondas de consenso; un barrido (`sweep`) evalúa el producto cartesiano de
ejes de parámetros. Cada flujo aleatorio sale de (semilla maestra,
repetición, rol, ronda), así que el resultado no depende del orden ni del
número de procesos, y todos los puntos comparten los sorteos base.
"""
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.consensus import (ConsensusMechanismConfig, LatencyConfig, MechanismKind, RoundOutcome,
                            init_mechanism, run_consensus_round)
from core.gossip import FaultConfig
from core.metrics import ParticipationLedger, ThroughputSample, gini, standard_error, throughput
from core.topology import TopologyConfig, World, build_world, largest_component_fraction, place_clusters
from shared.errors import ConfigError, ResultsWriteError, SweepCapError
from shared.seeding import MAX_SEED, ROLE_CLUSTERS, ROLE_MECHANISM, ROLE_ROUND, ROLE_TOPOLOGY, stream

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_CAP = 10_000

RESULT_COLUMNS = [
    "mechanism", "lambda", "p_fail", "r_cls", "r_v", "n_w", "r_sfl", "delta_sfl",
    "n_tx", "k_rounds", "repetitions", "R_mean", "R_std", "G_mean", "G_std", "failure_rate",
]
_INT_COLUMNS = ["n_w", "delta_sfl", "n_tx", "k_rounds", "repetitions"]
_FLOAT_COLUMNS = ["lambda", "p_fail", "r_cls", "r_v", "r_sfl", "R_mean", "R_std", "G_mean", "G_std",
                  "failure_rate"]


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    fault: FaultConfig = field(default_factory=FaultConfig)
    mechanism: ConsensusMechanismConfig = field(default_factory=ConsensusMechanismConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    n_tx: int = 10
    k_rounds: int = 1000
    repetitions: int = 20
    seed: int = 0

    def validate(self):
        self.topology.validate()
        self.fault.validate()
        self.mechanism.validate()
        self.latency.validate()
        for name in ("n_tx", "k_rounds", "repetitions"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value >= 1):
                raise ConfigError(name, f"debe ser un entero >= 1 (recibido {value})")
        if not (isinstance(self.seed, int) and 0 <= self.seed < MAX_SEED):
            raise ConfigError("seed", f"debe ser un entero de 64 bits sin signo (recibido {self.seed})")
        if self.mechanism.kind is MechanismKind.POC and self.mechanism.n_w > self.topology.expected_nodes:
            raise ConfigError("mechanism.n_w", f"n_w={self.mechanism.n_w} supera el número esperado de nodos "
                                               f"({self.topology.expected_nodes:g})")
        return self


@dataclass(frozen=True)
class RepetitionResult:
    repetition: int
    n_nodes: int
    R: float
    G: float
    failure_rate: float
    mean_participants: float
    connectivity: float
    world: Optional[World] = field(default=None, compare=False, repr=False)
    outcomes: Optional[Tuple[RoundOutcome, ...]] = field(default=None, compare=False, repr=False)

    def row(self) -> Dict[str, float]:
        return {"repetition": self.repetition, "n_nodes": self.n_nodes, "R": self.R, "G": self.G,
                "failure_rate": self.failure_rate, "mean_participants": self.mean_participants,
                "connectivity": self.connectivity}


@dataclass(frozen=True)
class RunResult:
    point_index: int
    label: str
    config: ExperimentConfig
    R_mean: float
    R_std: float
    G_mean: float
    G_std: float
    failure_rate: float
    mean_participants: float
    mean_connectivity: float
    repetitions: Tuple[RepetitionResult, ...] = ()

    @property
    def G_sem(self) -> float:
        return standard_error(self.G_std, len(self.repetitions))

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([rep.row() for rep in self.repetitions])


def interference_snapshot(world: World, config: ExperimentConfig, repetition: int, round_index: int) -> World:
    """Mundo de la ronda: mismos nodos y grafo, clusters nuevos si la interferencia es intermitente."""
    redraw = config.fault.intermittent and config.fault.p_fail > 0 and config.topology.r_cls > 0
    if not redraw or round_index == 0:
        return world
    rng = stream(config.seed, repetition, ROLE_CLUSTERS, round_index)
    return world.with_clusters(place_clusters(config.topology, rng))


def simulate_repetition(config: ExperimentConfig, point_index: int, repetition: int,
                        keep_details: bool = False) -> RepetitionResult:
    """
    Muestrea un mundo, inicializa el mecanismo y ejecuta k_rounds rondas.
    Con interferencia intermitente cada ronda r > 0 usa su propia
    instantánea de clusters; la ronda 0 usa la del mundo.
    """
    seed = config.seed
    world = build_world(config.topology,
                        stream(seed, repetition, ROLE_TOPOLOGY),
                        stream(seed, repetition, ROLE_CLUSTERS))
    n = world.n
    if n == 0:
        logger.warning("Punto %d, repetición %d: la topología no tiene nodos.", point_index, repetition)
        return RepetitionResult(repetition, 0, math.nan, math.nan, 1.0, math.nan, 0.0,
                                world if keep_details else None, () if keep_details else None)

    mechanism = config.mechanism
    if mechanism.kind is MechanismKind.POC and mechanism.n_w > n:
        logger.warning("Punto %d, repetición %d: n_w=%d supera los %d nodos; todos serán testigos.",
                       point_index, repetition, mechanism.n_w, n)
        mechanism = replace(mechanism, n_w=n)

    state = init_mechanism(mechanism, world.nodes, stream(seed, repetition, ROLE_MECHANISM))
    ledger = ParticipationLedger(n)
    t_c_values, participant_counts, outcomes = [], [], []
    for r in range(config.k_rounds):
        round_world = interference_snapshot(world, config, repetition, r)
        rng = stream(seed, repetition, ROLE_ROUND, r)
        outcome, state = run_consensus_round(round_world, state, mechanism, config.latency, config.fault, rng,
                                             ledger)
        if outcome.success:
            t_c_values.append(outcome.t_c)
            participant_counts.append(len(outcome.participants))
        if keep_details:
            outcomes.append(outcome if r == 0 else replace(outcome, trace=None))

    if t_c_values:
        R = throughput(ThroughputSample(config.n_tx, t_c_values))
        mean_participants = float(np.mean(participant_counts))
    else:
        logger.warning("Punto %d, repetición %d: ninguna ronda alcanzó el quórum.", point_index, repetition)
        R = math.nan
        mean_participants = math.nan
    failure_rate = 1.0 - len(t_c_values) / config.k_rounds
    result = RepetitionResult(repetition, n, R, gini(ledger), failure_rate, mean_participants,
                              largest_component_fraction(world.graph),
                              world if keep_details else None,
                              tuple(outcomes) if keep_details else None)
    logger.debug("Punto %d, repetición %d: n=%d R=%.4g G=%.4g fallos=%.3f", point_index, repetition,
                 n, result.R, result.G, failure_rate)
    return result


def aggregate(config: ExperimentConfig, point_index: int, label: str,
              repetitions: Sequence[RepetitionResult]) -> RunResult:
    """Media y desviación típica (ddof=0) por repetición; los NaN se ignoran."""
    df = pd.DataFrame([rep.row() for rep in repetitions])
    means = df.mean()
    stds = df.std(ddof=0)
    return RunResult(
        point_index=point_index,
        label=label,
        config=config,
        R_mean=float(means["R"]),
        R_std=float(stds["R"]),
        G_mean=float(means["G"]),
        G_std=float(stds["G"]),
        failure_rate=float(means["failure_rate"]),
        mean_participants=float(means["mean_participants"]),
        mean_connectivity=float(means["connectivity"]),
        repetitions=tuple(repetitions),
    )


def _simulate_job(args):
    config, point_index, repetition = args
    return simulate_repetition(config, point_index, repetition)


def run(config: ExperimentConfig, point_index: int = 0, label: str = "base", workers: int = 1) -> RunResult:
    """
    Ejecuta todas las repeticiones de un punto. Con workers > 1 las
    repeticiones se reparten entre procesos sin cambiar el resultado.
    """
    config.validate()
    logger.info("Ejecutando punto %d (%s): %s, lambda=%g, p_fail=%g", point_index, label,
                config.mechanism.label, config.topology.lambda_, config.fault.p_fail)
    jobs = [(config, point_index, rep) for rep in range(config.repetitions)]
    if workers <= 1 or len(jobs) <= 1:
        repetitions = [_simulate_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            repetitions = list(pool.map(_simulate_job, jobs))
    result = aggregate(config, point_index, label, repetitions)
    logger.info("Punto %d finalizado: R=%.4g tx/s, G=%.4g, fallos=%.3f", point_index,
                result.R_mean, result.G_mean, result.failure_rate)
    return result


# --- Barridos -------------------------------------------------------------

_AXIS_FIELDS = {
    "lambda": ("topology", "lambda_"),
    "field_side": ("topology", "field_side"),
    "comm_range": ("topology", "comm_range"),
    "r_cls": ("topology", "r_cls"),
    "cluster_side": ("topology", "cluster_side"),
    "p_fail": ("fault", "p_fail"),
    "intermittent": ("fault", "intermittent"),
    "kind": ("mechanism", "kind"),
    "r_v": ("mechanism", "r_v"),
    "n_w": ("mechanism", "n_w"),
    "r_sfl": ("mechanism", "r_sfl"),
    "delta_sfl": ("mechanism", "delta_sfl"),
    "tau_round": ("latency", "tau_round"),
    "c_agg": ("latency", "c_agg"),
    "theta": ("latency", "theta"),
    "quorum_scope": ("latency", "quorum_scope"),
    "n_tx": (None, "n_tx"),
    "k_rounds": (None, "k_rounds"),
    "repetitions": (None, "repetitions"),
}
SPECIAL_AXES = ("mechanism", "variant")
AXIS_NAMES = tuple(_AXIS_FIELDS) + SPECIAL_AXES


@dataclass(frozen=True)
class SweepSpec:
    base: ExperimentConfig = field(default_factory=ExperimentConfig)
    axes: Mapping[str, Sequence[Any]] = field(default_factory=dict)
    cap: int = DEFAULT_SWEEP_CAP

    @property
    def size(self) -> int:
        return math.prod(len(values) for values in self.axes.values())

    def validate(self):
        for name, values in self.axes.items():
            if name not in AXIS_NAMES:
                raise ConfigError(f"axes.{name}", "eje desconocido")
            if isinstance(values, (str, bytes)) or not isinstance(values, Sequence) or len(values) == 0:
                raise ConfigError(f"axes.{name}", "debe ser una lista no vacía de valores")
        if self.size > self.cap:
            raise SweepCapError(self.size, self.cap)
        return self


def apply_override(config: ExperimentConfig, name: str, value: Any) -> ExperimentConfig:
    """Devuelve una copia de `config` con el parámetro del eje `name` cambiado."""
    if name == "variant":
        if not isinstance(value, Mapping):
            raise ConfigError("axes.variant", f"cada variante debe ser un objeto (recibido {value!r})")
        for key, item in value.items():
            if key == "variant":
                raise ConfigError("axes.variant", "las variantes no se pueden anidar")
            config = apply_override(config, key, item)
        return config
    if name == "mechanism":
        if isinstance(value, Mapping):
            unknown = set(value) - {"kind", "r_v", "n_w", "r_sfl", "delta_sfl"}
            if unknown:
                raise ConfigError(f"axes.mechanism.{sorted(unknown)[0]}", "campo desconocido")
            return replace(config, mechanism=replace(config.mechanism, **value))
        return replace(config, mechanism=replace(config.mechanism, kind=MechanismKind.parse(value)))
    if name not in _AXIS_FIELDS:
        raise ConfigError(f"axes.{name}", "eje desconocido")
    section, attr = _AXIS_FIELDS[name]
    if section is None:
        return replace(config, **{attr: value})
    return replace(config, **{section: replace(getattr(config, section), **{attr: value})})


def _describe(value) -> str:
    if isinstance(value, Mapping):
        return "{" + ",".join(f"{k}={_describe(v)}" for k, v in value.items()) + "}"
    return str(value)


def expand(spec: SweepSpec) -> List[Tuple[ExperimentConfig, str]]:
    """Lista de (configuración, etiqueta) en orden de índice de punto."""
    spec.validate()
    names = list(spec.axes)
    points = []
    for combo in itertools.product(*(spec.axes[name] for name in names)):
        config = spec.base
        for name, value in zip(names, combo):
            config = apply_override(config, name, value)
        label = " ".join(f"{name}={_describe(value)}" for name, value in zip(names, combo)) or "base"
        points.append((config.validate(), label))
    return points


def _run_point(args):
    config, index, label = args
    return run(config, index, label)


def sweep(spec: SweepSpec, workers: int = 1) -> List[RunResult]:
    """
    Evalúa todos los puntos del barrido. Las configuraciones se validan
    antes de simular; con workers > 1 los puntos se reparten entre procesos.
    """
    points = expand(spec)
    jobs = [(config, index, label) for index, (config, label) in enumerate(points)]
    logger.info("Barrido de %d puntos con %d proceso(s).", len(jobs), workers)
    if workers <= 1 or len(jobs) <= 1:
        results = [_run_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    return sorted(results, key=lambda result: result.point_index)


# --- Resultados -----------------------------------------------------------

def result_row(result: RunResult) -> Dict[str, Any]:
    config = result.config
    mech = config.mechanism
    is_pos = mech.kind is MechanismKind.POS
    is_poc = mech.kind is MechanismKind.POC
    return {
        "mechanism": str(mech.kind),
        "lambda": config.topology.lambda_,
        "p_fail": config.fault.p_fail,
        "r_cls": config.topology.r_cls,
        "r_v": mech.r_v if is_pos else math.nan,
        "n_w": mech.n_w if is_poc else None,
        "r_sfl": mech.r_sfl if is_poc else math.nan,
        "delta_sfl": mech.delta_sfl if is_poc else None,
        "n_tx": config.n_tx,
        "k_rounds": config.k_rounds,
        "repetitions": config.repetitions,
        "R_mean": result.R_mean,
        "R_std": result.R_std,
        "G_mean": result.G_mean,
        "G_std": result.G_std,
        "failure_rate": result.failure_rate,
    }


def results_frame(results: Sequence[RunResult]) -> pd.DataFrame:
    ordered = sorted(results, key=lambda result: result.point_index)
    df = pd.DataFrame([result_row(r) for r in ordered], columns=RESULT_COLUMNS)
    df[_INT_COLUMNS] = df[_INT_COLUMNS].astype("Int64")
    df[_FLOAT_COLUMNS] = df[_FLOAT_COLUMNS].astype(float)
    return df


def write_results(results: Sequence[RunResult], path) -> Path:
    """Escribe el CSV de resultados (6 cifras significativas, filas por índice de punto)."""
    path = Path(path)
    df = results_frame(results)
    try:
        df.to_csv(path, index=False, float_format="%.6g", lineterminator="\n")
    except OSError as exc:
        raise ResultsWriteError(path, exc) from exc
    logger.info("Resultados guardados en %s (%d filas).", path, len(df))
    return path
