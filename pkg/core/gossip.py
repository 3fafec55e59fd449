"""
Difusión gossip síncrona por rondas con fallos bizantinos por enlace
dentro de los clusters.

En cada ronda todo nodo que tiene el bloque lo intenta entregar a cada
vecino que aún no lo tiene. Una entrega cuyo receptor está en un cluster
falla con probabilidad p_fail; fuera de los clusters nunca falla. Los
intentos simultáneos hacia un mismo receptor son ensayos independientes.
La difusión termina en la primera ronda sin entregas nuevas.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import numpy as np

from core.topology import ClusterSet, Graph, NodeSet, in_cluster_mask
from shared.errors import ConfigError, DisseminationError


@dataclass(frozen=True)
class FaultConfig:
    """
    `intermittent` sortea una instantánea de clusters nueva en cada ronda
    de consenso; si es False los clusters de la repetición son fijos.
    """
    p_fail: float = 0.05
    intermittent: bool = True

    def validate(self):
        if not 0 <= self.p_fail <= 1:
            raise ConfigError("fault.p_fail", f"debe estar en [0, 1] (recibido {self.p_fail})")
        if not isinstance(self.intermittent, bool):
            raise ConfigError("fault.intermittent", f"debe ser booleano (recibido {self.intermittent!r})")
        return self


@dataclass(frozen=True, eq=False)
class GossipTrace:
    """
    Registro de una difusión. `rounds[v]` es la ronda de primera recepción
    de v (-1 si nunca lo recibió); `failed` y `delivered` son arreglos
    (k, 3) de (emisor, receptor, ronda).
    """
    source: int
    rounds: np.ndarray = field(repr=False)
    failed: np.ndarray = field(repr=False)
    delivered: np.ndarray = field(repr=False)
    rounds_executed: int = 0

    @property
    def n(self) -> int:
        return len(self.rounds)

    @property
    def reached_at(self) -> Dict[int, int]:
        ids = np.flatnonzero(self.rounds >= 0)
        return {int(v): int(self.rounds[v]) for v in ids}

    @property
    def failed_links(self) -> List[Tuple[int, int, int]]:
        return [tuple(int(x) for x in row) for row in self.failed]

    @property
    def delivered_links(self) -> List[Tuple[int, int, int]]:
        return [tuple(int(x) for x in row) for row in self.delivered]

    def reached(self) -> set:
        return set(np.flatnonzero(self.rounds >= 0).tolist())


def _stack(parts):
    if not parts:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(parts).astype(np.int64)


def propagate(graph: Graph, nodes: NodeSet, clusters: ClusterSet, source: int,
              fault: FaultConfig, rng: np.random.Generator, faulty=None) -> GossipTrace:
    """
    Simula la difusión del bloque desde `source`.

    `faulty` permite pasar la máscara de nodos en cluster ya calculada.
    Los sorteos se hacen en el orden de las aristas (emisor, receptor).
    """
    n = graph.n
    if not 0 <= source < n:
        raise ValueError(f"Nodo origen inválido: {source} (hay {n} nodos).")
    if faulty is None:
        faulty = in_cluster_mask(nodes.positions, clusters)

    send, recv = graph.senders, graph.receivers
    rounds = np.full(n, -1, dtype=np.int64)
    rounds[source] = 0
    holding = np.zeros(n, dtype=bool)
    holding[source] = True
    failed_parts, delivered_parts = [], []
    executed = 0
    k = 0
    while True:
        k += 1
        attempts = np.flatnonzero(holding[send] & ~holding[recv])
        if attempts.size == 0:
            break
        executed = k
        s, r = send[attempts], recv[attempts]
        failed = faulty[r] & (rng.random(attempts.size) < fault.p_fail)
        if failed.any():
            failed_parts.append(np.column_stack((s[failed], r[failed], np.full(int(failed.sum()), k))))
        ok = ~failed
        if not ok.any():
            break
        delivered_parts.append(np.column_stack((s[ok], r[ok], np.full(int(ok.sum()), k))))
        new = np.unique(r[ok])
        rounds[new] = k
        holding[new] = True

    return GossipTrace(source=int(source), rounds=rounds, failed=_stack(failed_parts),
                       delivered=_stack(delivered_parts), rounds_executed=executed)


def quorum_size(theta: float, m: int) -> int:
    """⌈theta·m⌉ sin artefactos de coma flotante (0.7·10 no da 8)."""
    return max(1, math.ceil(round(theta * m, 9)))


def rounds_to_quorum(trace: GossipTrace, eligible: Iterable[int], theta: float,
                     faulted: Iterable[int] = ()) -> int:
    """
    Menor ronda k en la que al menos ⌈theta·|eligible|⌉ elegibles tienen el
    bloque. Los nodos de `faulted` cuentan en |eligible| pero su recepción
    no suma al quórum. Lanza DisseminationError si no se alcanza.
    """
    ids = np.fromiter(sorted(set(eligible)), dtype=np.int64)
    if ids.size == 0:
        raise ValueError("El conjunto de elegibles está vacío.")
    if not 0 < theta <= 1:
        raise ValueError(f"theta debe estar en (0, 1] (recibido {theta})")
    need = quorum_size(theta, ids.size)
    counted = np.setdiff1d(ids, np.fromiter(faulted, dtype=np.int64), assume_unique=True)
    received = np.sort(trace.rounds[counted])
    received = received[received >= 0]
    if received.size < need:
        raise DisseminationError(
            f"Solo {received.size} de {ids.size} elegibles recibieron el bloque; se necesitan {need}.")
    return int(received[need - 1])


def failed_receivers(trace: GossipTrace) -> set:
    """Nodos con alguna recepción fallida en una ronda en la que no quedaron alcanzados."""
    result = set()
    for _, receiver, k in trace.failed:
        if trace.rounds[receiver] != k:
            result.add(int(receiver))
    return result


def coverage(trace: GossipTrace) -> float:
    """Fracción de nodos que recibió el bloque."""
    if trace.n == 0:
        return 0.0
    return float(np.count_nonzero(trace.rounds >= 0) / trace.n)
