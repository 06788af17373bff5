"""
Output-directory layout and persistence of run artifacts.
"""

import logging
from pathlib import Path
from typing import Dict, Tuple

import orjson
import pandas as pd

from config import settings
from schemas.domain import CouplingSet, SpinGraph, TimeSeries
from schemas.request_schemas import RunConfig
from schemas.response_schemas import RunManifest
from utils.errors import ConfigError
from utils.file_utils import FileManager
from utils.naming import NamingUtils

logger = logging.getLogger(__name__)


class ArtifactStore:
    """Deterministic directory of data products for one run configuration.

    root/
      config.yaml          echoed configuration
      manifest.json        versions, wall time, per-cell status
      graphs/seed_<s>.txt  one file per graph seed
      series/cell_<i>.csv  one file per sweep cell
      heatmaps/, spectra/  one file per phase-diagram group
      lifetimes.csv, fits.txt
    """

    def __init__(self, root: Path):
        self.root = Path(root)

    def prepare(self) -> None:
        settings.create_directories(self.root)
        logger.info(f"Artifact store ready at {self.root}")

    @property
    def series_dir(self) -> Path:
        return self.root / "series"

    @property
    def config_path(self) -> Path:
        return self.root / "config.yaml"

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    @property
    def fits_path(self) -> Path:
        return self.root / "fits.txt"

    @property
    def lifetimes_path(self) -> Path:
        return self.root / "lifetimes.csv"

    def graph_path(self, seed: int) -> Path:
        return self.root / "graphs" / NamingUtils.graph_filename(seed)

    def heatmap_path(self, group: int) -> Path:
        return self.root / "heatmaps" / NamingUtils.group_filename(group)

    def spectra_path(self, group: int) -> Path:
        return self.root / "spectra" / NamingUtils.group_filename(group)

    def save_config(self, config: RunConfig) -> str:
        text = FileManager.dump_run_config(config)
        self.config_path.write_text(text, encoding="utf-8")
        return NamingUtils.content_hash(text)

    def load_config(self) -> RunConfig:
        if not self.config_path.exists():
            raise ConfigError(f"no echoed config in {self.root}")
        return FileManager.load_run_config(self.config_path)

    def save_graph(self, graph: SpinGraph, couplings: CouplingSet) -> Path:
        path = self.graph_path(graph.seed)
        FileManager.write_graph(path, graph, couplings)
        return path

    def load_graph(self, seed: int) -> Tuple[SpinGraph, CouplingSet]:
        return FileManager.read_graph(self.graph_path(seed))

    def save_series(self, index: int, series: TimeSeries) -> Tuple[str, str]:
        """Write one cell series; returns (relative path, content hash)."""
        path = self.series_dir / NamingUtils.cell_filename(index)
        text = FileManager.write_series(path, series)
        return str(path.relative_to(self.root)), NamingUtils.content_hash(text)

    def series_record(self, index: int) -> Tuple[str, str]:
        """(relative path, content hash) of an already written cell series."""
        path = self.series_dir / NamingUtils.cell_filename(index)
        return str(path.relative_to(self.root)), NamingUtils.content_hash(path.read_text(encoding="utf-8"))

    def load_series(self) -> Dict[int, TimeSeries]:
        series = {}
        for path in sorted(self.series_dir.glob("cell_*.csv")):
            series[NamingUtils.cell_index(path.name)] = FileManager.read_series(path)
        return series

    def save_heatmap(self, group: int, frame: pd.DataFrame) -> None:
        FileManager.write_frame(self.heatmap_path(group), frame, index=True)

    def save_spectra(self, group: int, frame: pd.DataFrame) -> None:
        FileManager.write_frame(self.spectra_path(group), frame)

    def save_lifetimes(self, frame: pd.DataFrame) -> None:
        FileManager.write_frame(self.lifetimes_path, frame)

    def save_fits(self, values: Dict[str, object]) -> None:
        FileManager.write_key_values(self.fits_path, values)

    def save_manifest(self, manifest: RunManifest) -> None:
        payload = orjson.dumps(manifest.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
        self.manifest_path.write_bytes(payload)

    def load_manifest(self) -> RunManifest:
        return RunManifest.model_validate(orjson.loads(self.manifest_path.read_bytes()))
