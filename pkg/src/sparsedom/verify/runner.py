"""Dispatch a configuration to its experiment and write the outputs."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig
from .experiments import RUNNERS
from .report import atomic_write, write_report


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list
    checks: dict
    plots: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def summary(self) -> dict:
        return {
            "experiment": self.config.experiment,
            "pass": self.passed,
            "checks": self.checks,
            "config": self.config.to_dict(),
        }


def run(config: ExperimentConfig, out: str | Path | None = None, plot: bool = False) -> RunResult:
    """Run one experiment; with ``out`` write ``report.csv``, ``summary.json`` and (``plot``) SVGs."""
    runner = RUNNERS[config.experiment]
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        rows, checks, plots = runner(config, pool)
    res = RunResult(config, rows, checks, plots)
    if out is not None:
        write_report(out, rows, res.summary())
        if plot:
            for name, svg in plots:
                atomic_write(Path(out) / name, svg)
    return res
