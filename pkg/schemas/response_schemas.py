"""
Pydantic result schemas for analysis, verification and sweep outcomes.
"""

from typing import Any, Dict, List, Optional
from pydantic import BaseModel, Field


class Lifetime(BaseModel):
    """1/e heating lifetime in the three time units of a run."""

    kicks: float
    cycles: float
    time: float
    rectify: str = "absolute"


class HeatingFit(BaseModel):
    """Combined heating-rate fit Γ = g/N ε^λ + Γ_min."""

    g: float
    lam: float = Field(..., description="Fitted exponent λ")
    gamma_min: float = Field(..., ge=0.0, description="Residual rate in inverse kicks")
    residual_norm: float
    N: int
    points: int
    g_quadratic: Optional[float] = Field(None, description="g with λ fixed to 2")
    gamma_min_quadratic: Optional[float] = Field(None, description="Γ_min with λ fixed to 2")


class PowerLawFit(BaseModel):
    """Log-log least-squares line."""

    exponent: float
    stderr: float
    intercept: float
    points: int


class RigidityExtent(BaseModel):
    """γ-interval around π where the period-doubled peak survives."""

    half_width: float
    width: float
    lower: float
    upper: float
    peak_present: bool = True
    method: str = "interpolate"


class PairingReport(BaseModel):
    """Quasi-energy π/T pairing diagnostics."""

    L: int
    period: float
    eigenphases: List[float]
    max_defect: float
    sector_dim: int


class CheckResult(BaseModel):
    """Outcome of one invariant check."""

    name: str
    passed: bool
    defect: float
    tolerance: float
    detail: str = ""


class VerifyReport(BaseModel):
    """Outcome of the full invariant battery."""

    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_text(self) -> str:
        lines = []
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            line = f"{status} {check.name}: defect={check.defect:.3e} tol={check.tolerance:.1e}"
            if check.detail:
                line += f" ({check.detail})"
            lines.append(line)
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


class CellStatus(BaseModel):
    """Per-cell execution record of a sweep."""

    index: int
    parameters: Dict[str, Any]
    status: str = "ok"
    reason: Optional[str] = None
    series_file: Optional[str] = None
    series_hash: Optional[str] = None
    lifetime: Optional[Lifetime] = None
    lifetime_error: Optional[str] = None


class RunManifest(BaseModel):
    """Top-level manifest written next to the data products."""

    app: str
    version: str
    schema_version: int
    config_hash: str
    wall_time_seconds: float
    workers: int
    versions: Dict[str, str] = Field(default_factory=dict)
    cells: List[CellStatus] = Field(default_factory=list)

    @property
    def failed_cells(self) -> List[CellStatus]:
        return [cell for cell in self.cells if cell.status != "ok"]
