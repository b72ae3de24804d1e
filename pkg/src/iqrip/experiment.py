"""Grid runs: generate a batch of samples per (method, config) cell and
summarize each batch with a :class:`MetricsReport`."""

from __future__ import annotations

import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import ParameterError
from .iqr_ip import Method, SamplerConfig
from .metrics import MetricsReport, analyze
from .toy_lm import GenerationRecord, ToyModel, generate


@dataclass(frozen=True)
class Cell:
    method: Method
    config: SamplerConfig
    label: str = ""

    def to_json(self) -> dict:
        return {"method": self.method.value, "config": self.config.to_json(), "label": self.label}


@dataclass
class CellResult:
    cell: Cell
    report: MetricsReport
    records: list[GenerationRecord]

    def row(self) -> dict:
        cfg = self.cell.config
        rep = self.report
        return {
            "label": self.cell.label,
            "method": self.cell.method.value,
            "p": cfg.p,
            "k": cfg.k,
            "n": cfg.n,
            "rho": "inf" if math.isinf(cfg.rho) else cfg.rho,
            "perplexity": rep.perplexity,
            "self_bleu4": rep.self_bleu4,
            "self_bleu5": rep.self_bleu5,
            "zipf": rep.zipf,
            "h_rep": rep.h_rep,
            "loops": len(rep.loop_spans),
        }


def cell_samples(
    model: ToyModel, cell: Cell, count: int, prompt: Sequence[int], workers: int = 1, **gen_kwargs
) -> list[GenerationRecord]:
    """``count`` generations with seeds ``cell.config.seed + i``, in seed order."""
    cfgs = [cell.config.with_(seed=cell.config.seed + i) for i in range(count)]

    def one(cfg: SamplerConfig) -> GenerationRecord:
        return generate(model, cfg, cell.method, prompt, **gen_kwargs)

    if workers <= 1:
        return [one(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, cfgs))


def run_experiment(
    model: ToyModel,
    grid: Sequence[Cell | tuple[Method | str, SamplerConfig]],
    samples_per_cell: int,
    prompt: Sequence[int],
    *,
    window_len: int = 200,
    workers: int = 1,
    score_with_model: bool = True,
) -> list[CellResult]:
    """Run every cell of ``grid`` and return one result per cell, in grid order.

    Results depend only on the arguments; ``workers`` changes the schedule,
    never the output.
    """
    if not grid:
        raise ParameterError("grid must be nonempty")
    if samples_per_cell < 1:
        raise ParameterError(f"samples_per_cell must be >= 1, got {samples_per_cell}")
    cells = [c if isinstance(c, Cell) else Cell(Method(c[0]), c[1]) for c in grid]
    results = []
    for cell in cells:
        records = cell_samples(model, cell, samples_per_cell, prompt, workers)
        report = analyze(
            [r.sample for r in records],
            model if score_with_model else None,
            window_len=window_len,
            workers=workers,
        )
        results.append(CellResult(cell, report, records))
    return results


def sweep_grid(base: SamplerConfig, param: str, values: Sequence[float], method: Method | str = Method.IQR_IP) -> list[Cell]:
    """One cell per value of ``param`` (``rho`` or ``n``), other settings from ``base``."""
    if param not in ("rho", "n", "p", "k"):
        raise ParameterError(f"cannot sweep {param!r}")
    method = Method(method)
    return [Cell(method, base.with_(**{param: v}), f"{param}={v:g}") for v in values]
