"""
Mecanismos de consenso PoW, PoS y PoC sobre la red inalámbrica.

Los tres se modelan al nivel de selección de participantes: PoW admite a
todos los nodos, PoS solo a los validadores (adelgazamiento de Bernoulli
con tasa r_v) y PoC a un conjunto fijo de n_w testigos que se renueva en
una fracción r_sfl cada delta_sfl + 1 rondas. El líder de cada ronda se
sortea uniformemente entre los elegibles y es el origen del gossip.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, Mapping, Optional, Tuple

import numpy as np

from core.gossip import FaultConfig, GossipTrace, failed_receivers, propagate, rounds_to_quorum
from core.metrics import ParticipationLedger
from core.topology import NodeSet, World
from shared.errors import ConfigError, DisseminationError, RoundSkipError

logger = logging.getLogger(__name__)


class MechanismKind(str, Enum):
    POW = "PoW"
    POS = "PoS"
    POC = "PoC"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for kind in cls:
            if str(value).strip().lower() == kind.value.lower():
                return kind
        raise ConfigError("mechanism.kind", f"mecanismo desconocido '{value}' (use PoW, PoS o PoC)")


DEFAULT_C_MECH = {MechanismKind.POW: 1.0, MechanismKind.POS: 0.2, MechanismKind.POC: 0.2}


def _ceil(x: float) -> int:
    return math.ceil(round(x, 9))


@dataclass(frozen=True)
class ConsensusMechanismConfig:
    kind: MechanismKind = MechanismKind.POW
    r_v: float = 0.2
    n_w: int = 50
    r_sfl: float = 0.9
    delta_sfl: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", MechanismKind.parse(self.kind))

    def validate(self):
        if self.kind is MechanismKind.POS and not 0 <= self.r_v <= 1:
            raise ConfigError("mechanism.r_v", f"debe estar en [0, 1] (recibido {self.r_v})")
        if self.kind is MechanismKind.POC:
            if not (isinstance(self.n_w, int) and self.n_w >= 1):
                raise ConfigError("mechanism.n_w", f"debe ser un entero positivo (recibido {self.n_w})")
            if not 0 <= self.r_sfl <= 1:
                raise ConfigError("mechanism.r_sfl", f"debe estar en [0, 1] (recibido {self.r_sfl})")
            if not (isinstance(self.delta_sfl, int) and self.delta_sfl >= 0):
                raise ConfigError("mechanism.delta_sfl", f"debe ser un entero >= 0 (recibido {self.delta_sfl})")
        return self

    @property
    def label(self) -> str:
        if self.kind is MechanismKind.POS:
            return f"PoS(r_v={self.r_v:g})"
        if self.kind is MechanismKind.POC:
            return f"PoC(n_w={self.n_w}, r_sfl={self.r_sfl:g}, delta_sfl={self.delta_sfl})"
        return "PoW"


QUORUM_SCOPES = ("reachable", "eligible")


@dataclass(frozen=True)
class LatencyConfig:
    """
    Constantes de T_c y del quórum. Con quorum_scope="reachable" el quórum
    se calcula sobre los elegibles de la componente del líder; con
    "eligible", sobre todos los elegibles.
    """
    tau_round: float = 0.001
    c_agg: float = 0.01
    c_mech: Mapping[MechanismKind, float] = field(default_factory=lambda: dict(DEFAULT_C_MECH))
    theta: float = 2 / 3
    quorum_scope: str = "reachable"

    def __post_init__(self):
        merged = dict(DEFAULT_C_MECH)
        merged.update({MechanismKind.parse(k): float(v) for k, v in dict(self.c_mech).items()})
        object.__setattr__(self, "c_mech", merged)

    def overhead(self, kind: MechanismKind) -> float:
        return self.c_mech[MechanismKind.parse(kind)]

    def validate(self):
        if self.tau_round < 0:
            raise ConfigError("latency.tau_round", f"debe ser >= 0 (recibido {self.tau_round})")
        if self.c_agg < 0:
            raise ConfigError("latency.c_agg", f"debe ser >= 0 (recibido {self.c_agg})")
        for kind, value in self.c_mech.items():
            if value < 0:
                raise ConfigError(f"latency.c_mech.{kind}", f"debe ser >= 0 (recibido {value})")
        if not 0 < self.theta <= 1:
            raise ConfigError("latency.theta", f"debe estar en (0, 1] (recibido {self.theta})")
        if self.quorum_scope not in QUORUM_SCOPES:
            raise ConfigError("latency.quorum_scope",
                              f"debe ser uno de {QUORUM_SCOPES} (recibido {self.quorum_scope!r})")
        return self


@dataclass(frozen=True)
class MechanismState:
    validator_set: Tuple[int, ...] = ()
    witness_set: Tuple[int, ...] = ()
    round_index: int = 0


@dataclass(frozen=True)
class RoundOutcome:
    round_index: int
    mechanism: MechanismKind
    leader: Optional[int]
    eligible: FrozenSet[int]
    participants: FrozenSet[int]
    t_c: float
    success: bool
    quorum_round: Optional[int] = None
    failed_links: int = 0
    quorum_basis: int = 0
    trace: Optional[GossipTrace] = field(default=None, compare=False, repr=False)


def init_mechanism(config: ConsensusMechanismConfig, nodes: NodeSet,
                   rng: np.random.Generator) -> MechanismState:
    n = len(nodes)
    if n == 0:
        raise ValueError("No se puede inicializar un mecanismo sin nodos.")
    if config.kind is MechanismKind.POS:
        validators = np.flatnonzero(rng.random(n) < config.r_v)
        return MechanismState(validator_set=tuple(validators.tolist()))
    if config.kind is MechanismKind.POC:
        if config.n_w > n:
            raise ConfigError("mechanism.n_w", f"n_w={config.n_w} supera el número de nodos ({n})")
        witnesses = np.sort(rng.choice(n, size=config.n_w, replace=False))
        return MechanismState(witness_set=tuple(witnesses.tolist()))
    return MechanismState()


def eligible_participants(state: MechanismState, config: ConsensusMechanismConfig,
                          nodes: NodeSet) -> FrozenSet[int]:
    if config.kind is MechanismKind.POS:
        return frozenset(state.validator_set)
    if config.kind is MechanismKind.POC:
        return frozenset(state.witness_set)
    return frozenset(range(len(nodes)))


def shuffle_due(state: MechanismState, config: ConsensusMechanismConfig) -> bool:
    """Hay renovación antes de cada ronda múltiplo de delta_sfl + 1, salvo la primera."""
    if config.kind is not MechanismKind.POC or state.round_index == 0:
        return False
    return state.round_index % (config.delta_sfl + 1) == 0


def shuffle_witnesses(state: MechanismState, config: ConsensusMechanismConfig, nodes: NodeSet,
                      rng: np.random.Generator) -> MechanismState:
    """
    Sustituye ⌈r_sfl·n_w⌉ testigos elegidos al azar por no-testigos elegidos
    al azar, sin reemplazo. Si no hay suficientes no-testigos se sustituyen
    tantos como haya.
    """
    if config.kind is not MechanismKind.POC:
        raise ValueError(f"Solo PoC renueva testigos (mecanismo {config.kind}).")
    current = np.asarray(state.witness_set, dtype=np.int64)
    pool = np.setdiff1d(np.arange(len(nodes)), current)
    count = min(_ceil(config.r_sfl * len(current)), len(pool))
    if count == 0:
        return state
    removed = rng.choice(current, size=count, replace=False)
    added = rng.choice(pool, size=count, replace=False)
    witnesses = np.union1d(np.setdiff1d(current, removed), added)
    return replace(state, witness_set=tuple(witnesses.tolist()))


def select_leader(candidates, rng: np.random.Generator) -> int:
    """Sorteo uniforme del líder (ganador del puzle, proponente o retador)."""
    ordered = sorted(candidates)
    if not ordered:
        raise RoundSkipError("No hay candidatos a líder en esta ronda.")
    return ordered[int(rng.integers(len(ordered)))]


def run_consensus_round(world: World, state: MechanismState, config: ConsensusMechanismConfig,
                        latency: LatencyConfig, fault: FaultConfig, rng: np.random.Generator,
                        ledger: Optional[ParticipationLedger] = None):
    """
    Ejecuta una ronda de consenso y devuelve (RoundOutcome, nuevo estado).

    T_c = H·tau_round + c_agg·|elegibles| + c_mech, con H la ronda de gossip
    en la que se alcanza el quórum. El quórum es ⌈theta·|base|⌉, donde la
    base son los elegibles de la componente del líder (o todos, según
    latency.quorum_scope). Un elegible que sufrió una recepción fallida antes
    de recibir el bloque no suma al quórum, aunque participa si lo recibe
    hasta H. Si la base se reduce al líder habiendo más elegibles, o el
    quórum no se alcanza, la ronda es fallida y no suma participaciones.
    """
    if shuffle_due(state, config):
        state = shuffle_witnesses(state, config, world.nodes, rng)
    eligible = eligible_participants(state, config, world.nodes)
    overhead = latency.c_agg * len(eligible) + latency.overhead(config.kind)
    next_state = replace(state, round_index=state.round_index + 1)

    def failed(leader, t_c, failed_links=0, trace=None, basis=0):
        if ledger is not None:
            ledger.skip()
        return RoundOutcome(state.round_index, config.kind, leader, eligible, frozenset(),
                            t_c, False, None, failed_links, basis, trace), next_state

    try:
        leader = select_leader(eligible, rng)
    except RoundSkipError:
        logger.debug("Ronda %d sin líder: no hay elegibles.", state.round_index)
        return failed(None, overhead)

    ids = np.fromiter(sorted(eligible), dtype=np.int64)
    if latency.quorum_scope == "reachable":
        ids = ids[world.reachable_from(leader)[ids]]

    trace = propagate(world.graph, world.nodes, world.clusters, leader, fault, rng, faulty=world.faulty)
    if len(ids) == 1 and len(eligible) > 1:
        logger.debug("Ronda %d: el líder %d no alcanza a ningún otro elegible.", state.round_index, leader)
        return failed(leader, trace.rounds_executed * latency.tau_round + overhead,
                      len(trace.failed), trace, 1)
    faulted = failed_receivers(trace).intersection(ids.tolist())
    try:
        quorum_round = rounds_to_quorum(trace, ids.tolist(), latency.theta, faulted)
    except DisseminationError:
        return failed(leader, trace.rounds_executed * latency.tau_round + overhead,
                      len(trace.failed), trace, len(ids))

    reached = trace.rounds[ids]
    participants = frozenset(ids[(reached >= 0) & (reached <= quorum_round)].tolist())
    if ledger is not None:
        ledger.record(participants)
    t_c = quorum_round * latency.tau_round + overhead
    outcome = RoundOutcome(state.round_index, config.kind, leader, eligible, participants,
                           t_c, True, quorum_round, len(trace.failed), len(ids), trace)
    return outcome, next_state
