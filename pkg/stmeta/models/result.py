"""Scenario results shared by the CLI writers and the HTTP responses."""

from typing import Any, Dict, List, Sequence

from pydantic import BaseModel, ConfigDict, Field


class Table(BaseModel):
    """Rectangular numeric data destined for one CSV file."""

    header: List[str]
    rows: List[Sequence[Any]] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)


class Series(BaseModel):
    label: str
    x: List[float]
    y: List[float]


class Plot(BaseModel):
    """Line plot description rendered to SVG."""

    title: str
    x_label: str
    y_label: str
    series: List[Series] = Field(default_factory=list)
    log_x: bool = False


class ScenarioResult(BaseModel):
    """
    Everything a subcommand produced.

    `tables` become `<name>.csv`, `documents` become `<name>.json` and
    `plots` become `<name>.svg`; `summary` is the short JSON answer returned
    by the API and logged by the CLI.
    """

    subcommand: str
    summary: Dict[str, Any] = Field(default_factory=dict)
    tables: Dict[str, Table] = Field(default_factory=dict)
    documents: Dict[str, Any] = Field(default_factory=dict)
    plots: Dict[str, Plot] = Field(default_factory=dict)
