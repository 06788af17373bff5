from pathlib import Path
from typing import Dict, List

import numpy as np

from schemas.domain import CouplingSet
from services.lattice_service import compute_couplings, generate_graph, sample_disorder


def two_spin_couplings(b: float, fields=(0.0, 0.0)) -> CouplingSet:
    return CouplingSet(
        L=2,
        couplings=np.array([[0.0, b], [b, 0.0]]),
        median_coupling=abs(b),
        fields=np.array(fields, dtype=np.float64),
    )


def free_spins(L: int) -> CouplingSet:
    return CouplingSet(L=L, couplings=np.zeros((L, L)), median_coupling=0.0, fields=np.zeros(L))


def disordered(L: int, seed: int) -> CouplingSet:
    couplings = compute_couplings(generate_graph(L, 0.7, 0.8, seed))
    b = couplings.median_coupling
    return sample_disorder(couplings, b, 10.0 * b, seed + 1)


def data_files(root: Path) -> List[Path]:
    """Deterministic files of a run directory; the manifest carries wall time."""
    return sorted(p for p in Path(root).rglob("*") if p.is_file() and p.name != "manifest.json")


def read_key_values(path: Path) -> Dict[str, str]:
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            values[key] = value
    return values
