"""``pairweight`` command line: synth, train, eval, gradcheck, compare-ms, weight-curves.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .config import default_config, load_config, load_datasets, parse_config
from .data import gen_synthetic_clusters, load_csv_dataset, save_csv_dataset
from .errors import ConfigError, InvalidParams, PairWeightError, TrainingAborted
from .evaluation import recall_at_k
from .gradcheck import TOLERANCE, VARIANTS, run_suite, summarize
from .losses import LossConfig
from .model import MlpEmbedder
from .objective import Objective
from .trainer import build_model, embed_normalized, evaluate_model, train
from .weighting import WeightScheme, emit_weight_curves, weight_curves_csv

log = logging.getLogger("pairweight")


class CliFailure(click.ClickException):
    def __init__(self, message, exit_code=1):
        super().__init__(message)
        self.exit_code = exit_code


def _guarded(fn):
    """Map library errors onto exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            raise CliFailure(f"config error in {exc.field}: {exc.detail}", 2) from None
        except InvalidParams as exc:
            raise CliFailure(str(exc), 2) from None
        except (PairWeightError, OSError) as exc:
            raise CliFailure(str(exc), 1) from None
    return wrapper


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_ks(text):
    try:
        ks = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from None
    if not ks:
        raise click.BadParameter("need at least one K")
    return ks


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging to stderr.")
def cli(verbose):
    """Pair and triplet weighting losses for metric learning."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--classes", type=int, default=12, show_default=True)
@click.option("--per-class", type=int, default=20, show_default=True)
@click.option("--dim", type=int, default=32, show_default=True)
@click.option("--center-scale", type=float, default=1.0, show_default=True)
@click.option("--noise", type=float, default=0.5, show_default=True)
@click.option("--intrinsic-dim", type=int, default=None,
              help="Place class centres in a random subspace of this dimension.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--header/--no-header", default=False)
@_guarded
def synth(classes, per_class, dim, center_scale, noise, intrinsic_dim, seed, out, header):
    """Write Gaussian cluster data as label,f1,...,fd CSV."""
    ds = gen_synthetic_clusters(classes, per_class, dim, center_scale, noise, seed, intrinsic_dim)
    save_csv_dataset(ds, out, header=header)
    click.echo(f"wrote {len(ds)} rows to {out}")


def _run_training(run, out_dir: Path):
    train_set, test_set = load_datasets(run.data)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        model, history = train(run.train, train_set, eval_set=test_set)
    except TrainingAborted as exc:
        _dump_json({"error": str(exc), **exc.diagnostic}, out_dir / "diagnostic.json")
        raise CliFailure(f"training aborted: {exc} (diagnostic in {out_dir / 'diagnostic.json'})",
                         1) from None
    return model, history, test_set


@cli.command("train")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Overrides output_dir from the config.")
@_guarded
def train_cmd(config_path, out_dir):
    """Train an embedder from a JSON config.

    Writes model.json, history.csv, snapshots.json and report.json.
    """
    run = load_config(config_path)
    out = Path(out_dir) if out_dir else run.output_dir
    model, history, test_set = _run_training(run, out)
    report = evaluate_model(model, test_set, run.train.eval_ks).to_dict()
    report["steps"] = len(history.losses)
    report["final_loss"] = float(f"{history.losses[-1]:.12g}") if history.losses else None
    model.save(out / "model.json")
    (out / "history.csv").write_text(history.history_csv())
    _dump_json(history.snapshots, out / "snapshots.json")
    _dump_json(report, out / "report.json")
    click.echo(json.dumps(report["recall_at"], sort_keys=True))


@cli.command("eval")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--ks", default="1,2,4,8", show_default=True, callback=lambda c, p, v: _parse_ks(v))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guarded
def eval_cmd(checkpoint, dataset, ks, out):
    """Leave-one-out Recall@K of a checkpoint on a CSV dataset."""
    model = MlpEmbedder.load(checkpoint)
    ds = load_csv_dataset(dataset)
    if ds.features.shape[1] != model.input_dim:
        raise InvalidParams(f"dataset has {ds.features.shape[1]} features, "
                            f"checkpoint expects {model.input_dim}")
    report = recall_at_k(embed_normalized(model, ds.features), ds.labels, ks)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if report.num_excluded:
        click.echo(f"warning: {report.num_excluded} singleton-class queries excluded", err=True)
    if out:
        Path(out).write_text(text)
    click.echo(text, nl=False)


@cli.command()
@click.option("--variants", default=None, help="Comma-separated subset; default all.")
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--corrupt-gradient", is_flag=True, hidden=True)
@_guarded
def gradcheck(variants, trials, corrupt_gradient):
    """Compare analytic end-to-end gradients with central differences."""
    names = [v.strip() for v in variants.split(",")] if variants else list(VARIANTS)
    unknown = [n for n in names if n not in VARIANTS]
    if unknown:
        raise InvalidParams(f"unknown variant(s) {', '.join(unknown)}; known: {', '.join(VARIANTS)}")
    results, secs = run_suite(names, trials=trials, corrupt=corrupt_gradient)
    table = summarize(results)
    click.echo(f"{'variant':<20} {'max_rel_err':>12}  status")
    for name, (err, ok) in table.items():
        click.echo(f"{name:<20} {err:>12.3e}  {'ok' if ok else 'FAIL'}")
    n_fail = sum(not r.ok for r in results)
    click.echo(f"{len(results)} checks, {n_fail} failed, tolerance {TOLERANCE:g}, {secs:.1f}s")
    if n_fail:
        sys.exit(1)


def ms_comparison_objectives(base: Objective):
    """(ours, MS v1, MS v2) sharing alpha, beta, m and epsilon from ``base``."""
    sch, lo = base.scheme, base.loss
    ours = Objective("pair", "ms", WeightScheme("exponential", alpha=sch.alpha, beta=sch.beta,
                                                normalize=True), lo)
    ms = WeightScheme("exponential", alpha=sch.alpha, beta=sch.beta)
    v1 = Objective("ms", "ms", ms, LossConfig(lo.m1, lo.m2, lo.m, lo.epsilon, ms_plus_one=True))
    v2 = Objective("ms", "ms", ms, LossConfig(lo.m1, lo.m2, lo.m, lo.epsilon, ms_plus_one=False))
    return {"ours": ours, "msv1": v1, "msv2": v2}


def compare_ms_curves(run):
    """Train the three objectives with identical seeds; returns (epochs, {name: [R@1...]})."""
    train_set, test_set = load_datasets(run.data)
    curves = {}
    for name, obj in ms_comparison_objectives(run.train.objective).items():
        cfg = run.with_objective(obj).train
        model = build_model(cfg, train_set.features.shape[1])
        _, hist = train(cfg, train_set, eval_set=test_set, model=model)
        curves[name] = [float(s["recall_at"]["1"]) for s in hist.snapshots]
    epochs = list(range(run.train.epochs + 1))
    return epochs, curves


def comparison_csv(epochs, curves) -> str:
    rows = ["epoch,recall1_ours,recall1_msv1,recall1_msv2"]
    for i, e in enumerate(epochs):
        rows.append(f"{e}," + ",".join(f"{curves[k][i]:.4f}" for k in ("ours", "msv1", "msv2")))
    return "\n".join(rows) + "\n"


@cli.command("compare-ms")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="CSV path; default <output_dir>/compare_ms.csv.")
@_guarded
def compare_ms(config_path, out):
    """Recall@1 per epoch for the normalized exponential pair loss vs MS v1 and v2."""
    run = load_config(config_path) if config_path else parse_config(default_config())
    epochs, curves = compare_ms_curves(run)
    path = Path(out) if out else run.output_dir / "compare_ms.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(comparison_csv(epochs, curves))
    final = {k: v[-1] for k, v in curves.items()}
    mean = {k: float(np.mean(v[1:])) if len(v) > 1 else v[0] for k, v in curves.items()}
    order = sorted(final, key=lambda k: (-final[k], -mean[k]))
    click.echo(f"wrote {path}")
    click.echo("final R@1: " + ", ".join(f"{k}={final[k]:.4f}" for k in order))
    click.echo("mean R@1 after training: " + ", ".join(f"{k}={mean[k]:.4f}" for k in order))
    verdict = "above" if final["msv2"] > final["msv1"] else (
        "equal to" if final["msv2"] == final["msv1"] else "below")
    click.echo(f"MS v2 finishes {verdict} MS v1 on this run")


@cli.command("weight-curves")
@click.option("--variant", type=click.Choice(["constant", "power", "exponential"]),
              default="exponential", show_default=True)
@click.option("--p", "p", type=float, default=1.0, show_default=True)
@click.option("--q", "q", type=float, default=1.0, show_default=True)
@click.option("--alpha", type=float, default=2.0, show_default=True)
@click.option("--beta", type=float, default=2.0, show_default=True)
@click.option("--m1", type=float, default=0.0, show_default=True)
@click.option("--m2", type=float, default=0.8, show_default=True)
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_guarded
def weight_curves(variant, p, q, alpha, beta, m1, m2, points, out):
    """Unnormalized positive and negative weights over D in [0, 2]."""
    if points < 2:
        raise InvalidParams("--points must be >= 2")
    scheme = WeightScheme(variant, p=p, q=q, alpha=alpha, beta=beta, normalize=False)
    text = weight_curves_csv(emit_weight_curves(scheme, m1, m2, np.linspace(0.0, 2.0, points)))
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="pairweight", standalone_mode=True)
    except SystemExit as exc:
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
