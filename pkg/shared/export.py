"""
Exportaciones CSV de depuración: nodos, clusters, traza de gossip y
resultados por ronda.
"""
import logging
from pathlib import Path

import pandas as pd

from shared.errors import ResultsWriteError

logger = logging.getLogger(__name__)


def nodes_frame(nodes) -> pd.DataFrame:
    return pd.DataFrame({
        "node_id": range(len(nodes)),
        "x_m": nodes.positions[:, 0],
        "y_m": nodes.positions[:, 1],
    })


def clusters_frame(clusters) -> pd.DataFrame:
    return pd.DataFrame(
        [(i, box.x, box.y, box.side) for i, box in enumerate(clusters.boxes)],
        columns=["box_id", "corner_x_m", "corner_y_m", "side_m"],
    )


def trace_frame(trace) -> pd.DataFrame:
    """Un renglón por intento de entrega, ordenado por (ronda, emisor, receptor)."""
    rows = [(k, s, r, "delivered") for s, r, k in trace.delivered_links]
    rows += [(k, s, r, "failed") for s, r, k in trace.failed_links]
    df = pd.DataFrame(rows, columns=["round", "sender", "receiver", "outcome"])
    return df.sort_values(["round", "sender", "receiver"], kind="stable").reset_index(drop=True)


def rounds_frame(outcomes) -> pd.DataFrame:
    rows = [{
        "round": o.round_index,
        "mechanism": str(o.mechanism),
        "leader": o.leader,
        "n_eligible": len(o.eligible),
        "n_participants": len(o.participants),
        "success": o.success,
        "t_c_seconds": o.t_c,
    } for o in outcomes]
    df = pd.DataFrame(rows, columns=["round", "mechanism", "leader", "n_eligible", "n_participants",
                                     "success", "t_c_seconds"])
    df["leader"] = df["leader"].astype("Int64")
    return df


def write_frame(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format="%.6g", lineterminator="\n")
    except OSError as exc:
        raise ResultsWriteError(path, exc) from exc
    logger.info("Exportado %s (%d filas).", path, len(df))
    return path


def export_repetition(repetition, directory) -> Path:
    """
    Escribe nodes.csv, clusters.csv, rounds.csv y trace.csv (gossip de la
    primera ronda) de una repetición simulada con detalles.
    """
    directory = Path(directory)
    world = repetition.world
    write_frame(nodes_frame(world.nodes), directory / "nodes.csv")
    write_frame(clusters_frame(world.clusters), directory / "clusters.csv")
    write_frame(rounds_frame(repetition.outcomes or ()), directory / "rounds.csv")
    trace = repetition.outcomes[0].trace if repetition.outcomes else None
    if trace is not None:
        write_frame(trace_frame(trace), directory / "trace.csv")
    return directory
