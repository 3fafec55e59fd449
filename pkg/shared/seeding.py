"""
Derivación de flujos aleatorios a partir de la semilla maestra.

Cada flujo se identifica por (semilla maestra, repetición, rol, ronda) y se
obtiene con un SeedSequence cuyo spawn_key es esa tupla. El índice del
punto de un barrido no interviene: la repetición r de todos los puntos ve
la misma topología base, el mismo sorteo de mecanismo y los mismos flujos
por ronda (números aleatorios comunes). El resultado no depende del orden
de evaluación ni del número de procesos.
"""
import numpy as np

ROLE_TOPOLOGY = 0
ROLE_CLUSTERS = 1
ROLE_MECHANISM = 2
ROLE_ROUND = 3

MAX_SEED = 2**64


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def stream(master_seed: int, repetition: int, role: int, round_index: int = 0) -> np.random.Generator:
    """Devuelve un generador independiente para la combinación de índices dada."""
    seq = seed_sequence(master_seed, repetition, role, round_index)
    return np.random.Generator(np.random.PCG64(seq))
