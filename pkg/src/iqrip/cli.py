"""Command-line entry point: ``iqrip train|generate|analyze|bound|ablate|replay``.

Every command that writes files also writes ``<out>.manifest.json`` with the
argument vector, resolved configuration, input hashes and output paths.
``iqrip replay MANIFEST`` re-executes a recorded invocation.  Errors are
printed to stderr as one JSON object and the exit code is nonzero.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import click

from . import kernels
from .bounds import corollary_bound
from .dist import Distribution
from .errors import CorpusError, IqripError
from .experiment import Cell, cell_samples, run_experiment, sweep_grid
from .iqr_ip import Method, SamplerConfig, iqr_ip_trace
from .metrics import Sample, analyze, extract_trajectories, window_entropies
from .toy_lm import (
    DEFAULT_ALPHA,
    DEFAULT_LAMBDA,
    DEFAULT_ORDER,
    ToyModel,
    bundled_corpus_path,
    default_model,
    default_prompt,
    generate,
    load_corpus,
    load_model,
    save_model,
    tokenize,
    train_ngram,
)

MODEL_ENV = "IQRIP_MODEL"
EXIT_RUNTIME = 1
EXIT_USAGE = 2

log = logging.getLogger("iqrip")

# argument vector of the invocation being executed, recorded in manifests
_current_argv: list[str] = []


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


class Run:
    """Collects manifest fields while a command executes."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = {k: _jsonable(v) for k, v in config.items()}
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.started = time.time()

    def input(self, label: str, path: Path | None, digest: str | None = None):
        if path is None:
            self.inputs[label] = digest or "builtin"
        else:
            self.inputs[label] = digest or _sha256(path)

    def write(self, path: Path, text: str):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.outputs.append(str(path))

    def finish(self, manifest_path: Path):
        manifest = {
            "argv": list(_current_argv),
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "tool_version": _version(),
            "backend": kernels.BACKEND,
            "outputs": self.outputs,
            "wall_clock_s": round(time.time() - self.started, 3),
        }
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json") if out.suffix or not out.is_dir() else out / "manifest.json"


def _resolve_model(path: str | None, run: Run) -> ToyModel:
    path = path or os.environ.get(MODEL_ENV) or None
    if path is None:
        model = default_model()
        run.input("model", None, "builtin:" + model.digest())
        return model
    p = Path(path)
    model = load_model(p)
    run.input("model", p)
    return model


def _prompt_ids(model: ToyModel, prompt: str | None) -> list[int]:
    if prompt is None:
        return default_prompt(model)
    return model.encode(tokenize(prompt))


def _read_jsonl(path: Path) -> list[tuple[int, dict]]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
    if not rows:
        raise CorpusError(f"{path} contains no records")
    return rows


def _sampler_options(f):
    opts = [
        click.option("--method", type=click.Choice([m.value for m in Method]), default=Method.IQR_IP.value),
        click.option("--top-p", "p", type=float, default=0.8, show_default=True),
        click.option("--top-k", "k", type=int, default=640, show_default=True),
        click.option("--top1ctrl-n", "n", type=float, default=100.0, show_default=True),
        click.option("--rho", type=float, default=1.5, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--max-len", type=int, default=200, show_default=True),
        click.option("--repartition", is_flag=True, hidden=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="Log progress to stderr.")
def cli(verbose: int):
    """IQR-IP decoding toolkit on a bundled n-gram toy model."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="UTF-8 text; the bundled corpus by default.")
@click.option("--order", type=int, default=DEFAULT_ORDER, show_default=True)
@click.option("--alpha", type=float, default=DEFAULT_ALPHA, show_default=True)
@click.option("--lambda", "lam", type=float, default=DEFAULT_LAMBDA, show_default=True)
@click.option("--lowercase/--no-lowercase", default=True, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def train(corpus, order, alpha, lam, lowercase, out):
    """Train an interpolated n-gram model and save it as JSON."""
    run = Run("train", {"order": order, "alpha": alpha, "lambda": lam, "lowercase": lowercase})
    path = corpus or bundled_corpus_path()
    run.input("corpus", path)
    model = train_ngram(load_corpus(path, lowercase), order, alpha, lam)
    save_model(model, out)
    run.outputs.append(str(out))
    run.config["model_sha256"] = model.digest()
    run.finish(_manifest_path(out))
    click.echo(f"vocab={model.vocab_size} sha256={model.digest()}")


@cli.command(name="generate")
@click.option("--model", "model_path", default=None, help=f"Model file (default: ${MODEL_ENV} or the bundled model).")
@_sampler_options
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--prompt", default=None, help="Whitespace-tokenized prompt text.")
@click.option("--record-dists", is_flag=True, help="Store each step's model distribution.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def generate_cmd(model_path, method, p, k, n, rho, seed, max_len, repartition, count, prompt, record_dists, workers, out):
    """Sample --count sequences; sample i uses seed + i."""
    cfg = SamplerConfig(p=p, k=k, n=n, rho=rho, seed=seed, max_len=max_len)
    run = Run("generate", {"method": method, **cfg.to_json(), "count": count, "prompt": prompt,
                           "record_dists": record_dists, "repartition": repartition})
    model = _resolve_model(model_path, run)
    ids = _prompt_ids(model, prompt)
    records = cell_samples(model, Cell(Method(method), cfg), count, ids, workers,
                           record_dists=record_dists, repartition=repartition)
    run.write(out, "".join(_dump(r.to_json()) + "\n" for r in records))
    run.finish(_manifest_path(out))


@cli.command(name="analyze")
@click.argument("samples_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--model", "model_path", default=None,
              help="Score perplexity with this model; recorded log probabilities are used otherwise.")
@click.option("--window", type=int, default=200, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--emit-plot-data", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Directory for trajectory and windowed-entropy series.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def analyze_cmd(samples_path, model_path, window, workers, emit_plot_data, out):
    """Compute the metrics report of a samples file."""
    run = Run("analyze", {"window": window, "emit_plot_data": str(emit_plot_data) if emit_plot_data else None})
    run.input("samples", samples_path)
    samples = []
    for lineno, obj in _read_jsonl(samples_path):
        try:
            samples.append(Sample.from_json(obj))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{samples_path}:{lineno}: bad sample ({exc})") from None
    model = None
    if model_path is not None:
        model = load_model(model_path)
        run.input("model", Path(model_path))
    report = analyze(samples, model, window_len=window, workers=workers)
    run.write(out, _dump(report.to_json()) + "\n")
    if emit_plot_data is not None:
        _write_plot_data(run, emit_plot_data, samples, window)
    run.finish(_manifest_path(out))


def _write_plot_data(run: Run, folder: Path, samples: list[Sample], window: int):
    lines = []
    for i, s in enumerate(samples):
        ent = window_entropies(s.tokens, window).tolist()
        lines.append(_dump({"sample": i, "x": list(range(len(ent))), "h_rep": ent}))
    run.write(folder / "h_rep_windows.jsonl", "\n".join(lines) + "\n")
    if all(s.step_distributions is not None for s in samples):
        traj = [
            _dump({"sample": t.sample, "word": t.word, "x": [pt.appearance for pt in t.points],
                   "prob": t.series("prob"), "rank": t.series("rank"), "entropy": t.series("entropy")})
            for t in extract_trajectories(samples, window)
        ]
        run.write(folder / "trajectories.jsonl", "".join(line + "\n" for line in traj))


def _bound_inputs(path: Path):
    """Yield (label, raw distribution, reference or None) for every record."""
    for lineno, obj in _read_jsonl(path):
        try:
            if "dists" in obj:
                for j, d in enumerate(obj["dists"]):
                    yield f"{lineno}.{j}", Distribution.from_json(d), None
            else:
                ref = obj.get("ref")
                yield str(lineno), Distribution.from_json(obj), None if ref is None else Distribution.from_json(ref)
        except IqripError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None


@cli.command(name="bound")
@click.argument("dists_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--top-p", "p", type=float, default=0.8, show_default=True)
@click.option("--top-k", "k", type=int, default=640, show_default=True)
@click.option("--top1ctrl-n", "n", type=float, default=100.0, show_default=True)
@click.option("--rho", type=float, default=1.5, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def bound_cmd(dists_path, p, k, n, rho, out):
    """Check the total-variation bound on every distribution of a JSONL stream.

    Each line is a raw distribution {"ids", "probs"} with an optional "ref"
    distribution, or a sample record carrying "dists".  The pipeline's
    filtered distribution and VeryHigh band are computed from the raw one;
    the reference defaults to the filtered distribution itself.
    """
    cfg = SamplerConfig(p=p, k=k, n=n, rho=rho)
    run = Run("bound", {k_: v for k_, v in cfg.to_json().items() if k_ not in ("seed", "max_len")})
    run.input("dists", dists_path)
    lines, violations, sup_violations = [], 0, 0
    for label, raw, ref in _bound_inputs(dists_path):
        trace = iqr_ip_trace(raw, cfg)
        rep = corollary_bound(trace.filtered, trace.permuted_band, trace.filtered if ref is None else ref)
        violations += not rep.satisfied
        sup_violations += not rep.sup_satisfied
        lines.append(_dump({"record": label, "band_size": len(trace.permuted_band), **rep.to_json()}))
    summary = {"summary": {"count": len(lines), "violations": violations, "sup_violations": sup_violations}}
    lines.append(_dump(summary))
    run.write(out, "\n".join(lines) + "\n")
    run.finish(_manifest_path(out))
    click.echo(_dump(summary))


def _parse_sweep(spec: str) -> tuple[str, list[float]]:
    name, _, values = spec.partition("=")
    name = name.strip()
    if not values or name not in ("rho", "n", "p", "k"):
        raise click.BadParameter("expected PARAM=v1,v2,... with PARAM one of rho, n, p, k", param_hint="--sweep")
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"non-numeric value in {values!r}", param_hint="--sweep") from None
    if name == "k":
        parsed = [int(v) for v in parsed]
    return name, parsed


@cli.command(name="ablate")
@click.option("--model", "model_path", default=None, help=f"Model file (default: ${MODEL_ENV} or the bundled model).")
@_sampler_options
@click.option("--sweep", "sweeps", multiple=True, required=True,
              help="PARAM=v1,v2,... (repeatable), e.g. rho=1.5,3,5,10,50 or n=10,50,200,1000.")
@click.option("--count", type=int, default=100, show_default=True, help="Samples per cell.")
@click.option("--prompt", default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--emit-plot-data", is_flag=True, help="Also write metric-vs-parameter series.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
def ablate_cmd(model_path, method, p, k, n, rho, seed, max_len, repartition, sweeps, count, prompt, workers,
               emit_plot_data, out_dir):
    """Run one-parameter sweeps and write per-cell reports plus a table."""
    base = SamplerConfig(p=p, k=k, n=n, rho=rho, seed=seed, max_len=max_len)
    parsed = [_parse_sweep(s) for s in sweeps]
    run = Run("ablate", {"method": method, **base.to_json(), "count": count, "prompt": prompt,
                         "sweeps": [[name, [_jsonable(v) for v in vals]] for name, vals in parsed]})
    model = _resolve_model(model_path, run)
    ids = _prompt_ids(model, prompt)
    table = []
    for name, values in parsed:
        results = run_experiment(model, sweep_grid(base, name, values, method), count, ids, workers=workers)
        series = {"param": name, "x": [], "h_rep": [], "self_bleu4": [], "self_bleu5": [], "zipf": [], "perplexity": []}
        for res in results:
            row = {"sweep": name, **res.row()}
            table.append(row)
            run.write(out_dir / "cells" / f"{res.cell.label}.json",
                      _dump({"cell": res.cell.to_json(), "report": res.report.to_json()}) + "\n")
            series["x"].append(_jsonable(getattr(res.cell.config, name)))
            for key in ("h_rep", "self_bleu4", "self_bleu5", "zipf", "perplexity"):
                series[key].append(row[key])
        if emit_plot_data:
            run.write(out_dir / f"series_{name}.json", _dump(series) + "\n")
    run.write(out_dir / "table.jsonl", "".join(_dump(r) + "\n" for r in table))
    run.write(out_dir / "table.tsv", _tsv(table))
    run.finish(out_dir / "manifest.json")
    click.echo(_tsv(table), nl=False)


def _tsv(rows: list[dict]) -> str:
    cols = ["sweep", "label", "perplexity", "self_bleu4", "self_bleu5", "zipf", "h_rep", "loops"]

    def fmt(v):
        return f"{v:.6f}" if isinstance(v, float) else str(v)

    return "\t".join(cols) + "\n" + "".join("\t".join(fmt(r[c]) for c in cols) + "\n" for r in rows)


@cli.command(name="replay")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def replay_cmd(manifest_path):
    """Re-run the invocation recorded in a manifest."""
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    argv = manifest.get("argv")
    if not isinstance(argv, list) or not argv:
        raise CorpusError(f"{manifest_path} has no recorded argv")
    if argv[0] == "replay":
        raise CorpusError("refusing to replay a replay")
    global _current_argv
    _current_argv = list(argv)
    cli.main(args=argv, prog_name="iqrip", standalone_mode=False)


def _emit_error(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv: list[str] | None = None) -> int:
    """Console entry point; returns the process exit code."""
    global _current_argv
    argv = sys.argv[1:] if argv is None else list(argv)
    _current_argv = argv
    try:
        cli.main(args=argv, prog_name="iqrip", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        _emit_error("Aborted", "interrupted")
        return EXIT_RUNTIME
    except click.UsageError as exc:
        _emit_error("UsageError", exc.format_message())
        return EXIT_USAGE
    except click.ClickException as exc:
        _emit_error(type(exc).__name__, exc.format_message())
        return EXIT_RUNTIME
    except (IqripError, OSError, ValueError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_RUNTIME
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
