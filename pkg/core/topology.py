"""
Topología inalámbrica: nodos según un proceso de Poisson (PPP) sobre un
campo cuadrado, grafo de conectividad por alcance de radio y regiones
cuadradas donde ocurren los fallos (clusters).

Las posiciones se expresan en metros; el lado del campo en km.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Tuple

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from shared.errors import ConfigError

logger = logging.getLogger(__name__)

# Margen absoluto permitido por encima de r_cls al colocar clusters.
COVERAGE_TOLERANCE = 0.05
MAX_CLUSTER_ATTEMPTS = 5000
# Intentos seguidos sin ganar área tras los que se da la cobertura por saturada.
MAX_STALLED_ATTEMPTS = 200


@dataclass(frozen=True)
class TopologyConfig:
    field_side: float = 1.0
    lambda_: float = 400.0
    comm_range: float = 100.0
    r_cls: float = 0.5
    cluster_side: float = 200.0

    @property
    def field_m(self) -> float:
        """Lado del campo en metros."""
        return self.field_side * 1000.0

    @property
    def expected_nodes(self) -> float:
        return self.lambda_ * self.field_side ** 2

    def validate(self):
        if not self.field_side > 0:
            raise ConfigError("topology.field_side", f"debe ser > 0 (recibido {self.field_side})")
        if not self.lambda_ >= 0:
            raise ConfigError("topology.lambda", f"debe ser >= 0 (recibido {self.lambda_})")
        if not self.comm_range > 0:
            raise ConfigError("topology.comm_range", f"debe ser > 0 (recibido {self.comm_range})")
        if not 0 <= self.r_cls <= 1:
            raise ConfigError("topology.r_cls", f"debe estar en [0, 1] (recibido {self.r_cls})")
        if not 0 < self.cluster_side <= self.field_m:
            raise ConfigError("topology.cluster_side",
                              f"debe estar en (0, {self.field_m:g}] m (recibido {self.cluster_side})")
        return self


def _frozen(array):
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Posiciones (n, 2) en metros; el id de cada nodo es su índice."""
    positions: np.ndarray
    field_m: float = 1000.0

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "positions", _frozen(positions))

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    def position(self, node_id: int) -> Tuple[float, float]:
        x, y = self.positions[node_id]
        return float(x), float(y)


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Grafo no dirigido de conectividad. `adjacency[i]` es la tupla ordenada
    de vecinos de i. `senders`/`receivers` listan cada arista en ambos
    sentidos, ordenadas por (emisor, receptor).
    """
    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    senders: np.ndarray = field(repr=False)
    receivers: np.ndarray = field(repr=False)

    def neighbors(self, node_id: int) -> Tuple[int, ...]:
        return self.adjacency[node_id]

    @property
    def num_edges(self) -> int:
        return len(self.senders) // 2

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        mask = self.senders < self.receivers
        G.add_edges_from(zip(self.senders[mask].tolist(), self.receivers[mask].tolist()))
        return G


class Box(NamedTuple):
    x: float
    y: float
    side: float

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.side and self.y <= py <= self.y + self.side


@dataclass(frozen=True)
class ClusterSet:
    boxes: Tuple[Box, ...] = ()
    achieved_coverage: float = 0.0

    def __len__(self):
        return len(self.boxes)


def sample_ppp(config: TopologyConfig, rng: np.random.Generator) -> NodeSet:
    """
    Muestrea un PPP homogéneo: primero el número de nodos ~ Poisson(λ·área)
    y después las posiciones uniformes. El orden de extracción es fijo.
    """
    side = config.field_m
    count = int(rng.poisson(config.expected_nodes))
    positions = rng.uniform(0.0, side, size=(count, 2))
    return NodeSet(positions, field_m=side)


def build_graph(nodes: NodeSet, comm_range: float) -> Graph:
    """Une cada par de nodos a distancia <= comm_range (frontera incluida)."""
    if not comm_range > 0:
        raise ValueError(f"comm_range debe ser > 0 (recibido {comm_range})")
    n = len(nodes)
    if n > 1:
        pairs = cKDTree(nodes.positions).query_pairs(comm_range, output_type="ndarray").astype(np.int64)
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
    send = np.concatenate((pairs[:, 0], pairs[:, 1]))
    recv = np.concatenate((pairs[:, 1], pairs[:, 0]))
    order = np.lexsort((recv, send))
    send, recv = send[order], recv[order]

    counts = np.bincount(send, minlength=n)
    splits = np.split(recv, np.cumsum(counts)[:-1]) if n else []
    adjacency = tuple(tuple(int(v) for v in row) for row in splits)
    return Graph(n=n, adjacency=adjacency, senders=_frozen(send), receivers=_frozen(recv))


def union_coverage(boxes, field_m: float) -> float:
    """
    Fracción exacta del campo cubierta por la unión de cajas recortadas,
    por compresión de coordenadas.
    """
    rects = np.array([_clip(box, field_m) for box in boxes]).reshape(-1, 4)
    return _union_area(rects) / (field_m * field_m)


def _clip(box: Box, field_m: float) -> Tuple[float, float, float, float]:
    return (max(box.x, 0.0), max(box.y, 0.0), min(box.x + box.side, field_m), min(box.y + box.side, field_m))


def _union_area(rects: np.ndarray) -> float:
    """Área de la unión de rectángulos (x0, y0, x1, y1) por compresión de coordenadas."""
    rects = rects[(rects[:, 2] > rects[:, 0]) & (rects[:, 3] > rects[:, 1])]
    if len(rects) == 0:
        return 0.0
    xs = np.unique(rects[:, [0, 2]])
    ys = np.unique(rects[:, [1, 3]])
    covered = np.zeros((len(xs) - 1, len(ys) - 1), dtype=bool)
    for x0, y0, x1, y1 in rects:
        i0, i1 = np.searchsorted(xs, [x0, x1])
        j0, j1 = np.searchsorted(ys, [y0, y1])
        covered[i0:i1, j0:j1] = True
    cell_area = np.diff(xs)[:, None] * np.diff(ys)[None, :]
    return float(cell_area[covered].sum())


def _added_area(rect: np.ndarray, placed: np.ndarray) -> float:
    """Área de `rect` que aún no cubre ninguno de los rectángulos `placed`."""
    x0, y0, x1, y1 = rect
    area = (x1 - x0) * (y1 - y0)
    if len(placed) == 0 or area <= 0:
        return max(area, 0.0)
    overlap = np.column_stack((np.maximum(placed[:, 0], x0), np.maximum(placed[:, 1], y0),
                               np.minimum(placed[:, 2], x1), np.minimum(placed[:, 3], y1)))
    return area - _union_area(overlap)


def place_clusters(config: TopologyConfig, rng: np.random.Generator) -> ClusterSet:
    """
    Añade cajas de lado cluster_side con esquina inferior izquierda uniforme
    hasta que la cobertura alcanza r_cls. Se descarta cualquier caja que
    llevaría la cobertura por encima de r_cls + COVERAGE_TOLERANCE o que no
    añade área. La cobertura se acumula caja a caja; la colocación se
    detiene tras MAX_STALLED_ATTEMPTS intentos seguidos sin ganancia (el
    borde inferior izquierdo solo lo alcanzan esquinas muy próximas a 0).
    """
    if config.r_cls == 0:
        return ClusterSet()
    side_m = config.field_m
    field_area = side_m * side_m
    limit = (config.r_cls + COVERAGE_TOLERANCE) * field_area
    boxes = []
    placed = np.empty((0, 4))
    covered = 0.0
    attempts = stalled = 0
    while (covered < config.r_cls * field_area and attempts < MAX_CLUSTER_ATTEMPTS
           and stalled < MAX_STALLED_ATTEMPTS):
        attempts += 1
        x, y = rng.uniform(0.0, side_m, size=2)
        box = Box(float(x), float(y), float(config.cluster_side))
        rect = np.array(_clip(box, side_m))
        gain = _added_area(rect, placed)
        if gain <= 1e-12 * field_area or covered + gain > limit:
            stalled += 1
            continue
        stalled = 0
        boxes.append(box)
        placed = np.vstack((placed, rect))
        covered += gain
    coverage = covered / field_area
    if coverage < config.r_cls:
        log = logger.warning if coverage < config.r_cls - COVERAGE_TOLERANCE else logger.debug
        log("Cobertura de clusters %.3f por debajo de r_cls=%.3f tras %d intentos.",
            coverage, config.r_cls, attempts)
    return ClusterSet(tuple(boxes), coverage)


def in_cluster(point, clusters: ClusterSet) -> bool:
    px, py = point
    return any(box.contains(px, py) for box in clusters.boxes)


def in_cluster_mask(positions: np.ndarray, clusters: ClusterSet) -> np.ndarray:
    """Versión vectorizada de in_cluster sobre un arreglo (n, 2)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    mask = np.zeros(len(positions), dtype=bool)
    for box in clusters.boxes:
        mask |= ((positions[:, 0] >= box.x) & (positions[:, 0] <= box.x + box.side)
                 & (positions[:, 1] >= box.y) & (positions[:, 1] <= box.y + box.side))
    return mask


def component_labels(graph: Graph) -> np.ndarray:
    """Etiqueta de componente conexa de cada nodo."""
    if graph.n == 0:
        return np.empty(0, dtype=np.int64)
    matrix = coo_matrix((np.ones(len(graph.senders)), (graph.senders, graph.receivers)),
                        shape=(graph.n, graph.n))
    _, labels = connected_components(matrix, directed=False)
    return labels.astype(np.int64)


@dataclass(frozen=True, eq=False)
class World:
    """
    Nodos, grafo y clusters de una repetición, con la máscara de nodos en
    cluster y la etiqueta de componente de cada nodo.
    """
    nodes: NodeSet
    graph: Graph
    clusters: ClusterSet
    faulty: np.ndarray = field(default=None, repr=False)
    components: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.graph.n != len(self.nodes):
            raise ValueError(f"Grafo con {self.graph.n} nodos y NodeSet con {len(self.nodes)}.")
        if self.faulty is None:
            object.__setattr__(self, "faulty", _frozen(in_cluster_mask(self.nodes.positions, self.clusters)))
        if self.components is None:
            object.__setattr__(self, "components", _frozen(component_labels(self.graph)))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def with_clusters(self, clusters: ClusterSet) -> "World":
        """Mismo grafo con otra instantánea de interferencia."""
        return World(self.nodes, self.graph, clusters, components=self.components)

    def reachable_from(self, source: int) -> np.ndarray:
        """Máscara de los nodos de la componente de `source`."""
        return self.components == self.components[source]


def build_world(config: TopologyConfig, node_rng: np.random.Generator,
                cluster_rng: np.random.Generator) -> World:
    nodes = sample_ppp(config, node_rng)
    graph = build_graph(nodes, config.comm_range)
    clusters = place_clusters(config, cluster_rng)
    return World(nodes, graph, clusters)


def component_of(graph: Graph, source: int) -> set:
    return set(nx.node_connected_component(graph.to_networkx(), source))


def eccentricity(graph: Graph, source: int) -> int:
    """Máxima distancia BFS desde source dentro de su componente."""
    lengths = nx.single_source_shortest_path_length(graph.to_networkx(), source)
    return max(lengths.values())


def largest_component_fraction(graph: Graph) -> float:
    if graph.n == 0:
        return 0.0
    largest = max(nx.connected_components(graph.to_networkx()), key=len)
    return len(largest) / graph.n
