"""
Plain-text file formats for graphs, series, grids and manifests.
"""

import ast
import io
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from config import settings
from schemas.domain import SERIES_COLUMNS, CouplingSet, DriveProtocol, SpinGraph, TimeSeries
from schemas.request_schemas import RunConfig
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

GRAPH_FORMAT_VERSION = 1


class FileManager:
    """Readers and writers for every on-disk artifact."""

    @staticmethod
    def load_run_config(filepath: Path) -> RunConfig:
        """Parse and validate a YAML run configuration."""
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Failed to read config {filepath}: {e}")
            raise ConfigError(f"cannot read config {filepath}: {e}")

        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            logger.error(f"Invalid config {filepath}: {e}")
            raise ConfigError(f"invalid config: {e}")

    @staticmethod
    def dump_run_config(config: RunConfig) -> str:
        return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=True)

    @staticmethod
    def graph_to_text(graph: SpinGraph, couplings: CouplingSet) -> str:
        lines = [
            f"# pdtc-graph version {GRAPH_FORMAT_VERSION}",
            f"# L = {graph.L}",
            f"# r_min = {graph.r_min!r}",
            f"# r_max = {graph.r_max!r}",
            f"# seed = {graph.seed}",
            f"# field_axis = {' '.join(repr(c) for c in couplings.field_axis)}",
            f"# median_coupling = {couplings.median_coupling!r}",
            "# units: lengths in (mu0 hbar gamma_n^2)^(1/3), hbar = 1",
            "[positions]",
        ]
        lines += [" ".join(repr(float(c)) for c in row) for row in graph.positions]
        lines.append("[couplings]")
        for j in range(graph.L):
            for k in range(j + 1, graph.L):
                lines.append(f"{j} {k} {float(couplings.couplings[j, k])!r}")
        lines.append("[fields]")
        lines += [repr(float(c)) for c in couplings.fields]
        return "\n".join(lines) + "\n"

    @staticmethod
    def graph_from_text(text: str) -> Tuple[SpinGraph, CouplingSet]:
        header: Dict[str, str] = {}
        sections: Dict[str, List[str]] = {"positions": [], "couplings": [], "fields": []}
        current: Optional[str] = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line.lstrip("#").partition("=")
                if sep:
                    header[key.strip()] = value.strip()
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                continue
            if current is None:
                raise ValueError(f"graph data outside a section: '{line}'")
            sections[current].append(line)

        L = int(header["L"])
        positions = np.array([[float(v) for v in row.split()] for row in sections["positions"]])
        table = np.zeros((L, L))
        for row in sections["couplings"]:
            j, k, b = row.split()
            table[int(j), int(k)] = table[int(k), int(j)] = float(b)
        graph = SpinGraph(
            L=L,
            positions=positions.reshape(L, 3),
            r_min=float(header["r_min"]),
            r_max=float(header["r_max"]),
            seed=int(header["seed"]),
        )
        couplings = CouplingSet(
            L=L,
            couplings=table,
            field_axis=tuple(float(v) for v in header["field_axis"].split()),
            median_coupling=float(header["median_coupling"]),
            fields=np.array([float(v) for v in sections["fields"]]),
        )
        return graph, couplings

    @staticmethod
    def write_graph(filepath: Path, graph: SpinGraph, couplings: CouplingSet) -> None:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        filepath.write_text(FileManager.graph_to_text(graph, couplings), encoding="utf-8")

    @staticmethod
    def read_graph(filepath: Path) -> Tuple[SpinGraph, CouplingSet]:
        try:
            return FileManager.graph_from_text(filepath.read_text(encoding="utf-8"))
        except (OSError, KeyError, ValueError) as e:
            logger.error(f"Failed to read graph file {filepath}: {e}")
            raise ConfigError(f"cannot read graph file {filepath}: {e}")

    @staticmethod
    def series_to_csv(series: TimeSeries) -> str:
        buffer = io.StringIO()
        for key in sorted(series.provenance):
            buffer.write(f"# {key} = {series.provenance[key]}\n")
        for key, value in series.protocol.model_dump().items():
            buffer.write(f"# protocol.{key} = {value!r}\n")
        series.frame.to_csv(buffer, index=False, float_format=settings.FLOAT_FORMAT, lineterminator="\n")
        return buffer.getvalue()

    @staticmethod
    def write_series(filepath: Path, series: TimeSeries) -> str:
        """Write a series CSV and return its text."""
        text = FileManager.series_to_csv(series)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        filepath.write_text(text, encoding="utf-8")
        return text

    @staticmethod
    def read_series(filepath: Path) -> TimeSeries:
        provenance: Dict[str, str] = {}
        protocol: Dict[str, object] = {}
        with open(filepath, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].partition("=")
                key, value = key.strip(), value.strip()
                if key.startswith("protocol."):
                    protocol[key[len("protocol."):]] = ast.literal_eval(value)
                else:
                    provenance[key] = value
        frame = pd.read_csv(filepath, comment="#")
        return TimeSeries(frame=frame[SERIES_COLUMNS], protocol=DriveProtocol(**protocol), provenance=provenance)

    @staticmethod
    def write_frame(filepath: Path, frame: pd.DataFrame, index: bool = False) -> str:
        text = frame.to_csv(index=index, float_format=settings.FLOAT_FORMAT, lineterminator="\n")
        filepath.parent.mkdir(parents=True, exist_ok=True)
        filepath.write_text(text, encoding="utf-8")
        return text

    @staticmethod
    def write_key_values(filepath: Path, values: Dict[str, object]) -> None:
        """key = value manifest, keys sorted."""
        lines = [f"{key} = {FileManager._format_value(values[key])}" for key in sorted(values)]
        filepath.parent.mkdir(parents=True, exist_ok=True)
        filepath.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @staticmethod
    def _format_value(value: object) -> str:
        if isinstance(value, float):
            return repr(value)
        return str(value)
