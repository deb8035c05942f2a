"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 backend exhaustion,
4 validation failure.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from .canonical import dumps_canonical
from .core import ValidationError
from .evaluation import pointing_accuracy, read_eval_samples, write_report
from .gradcheck import run_gradcheck
from .pipeline import (
    ConfigError,
    PipelineConfig,
    read_inputs,
    read_pools,
    run_caption_pipeline,
    run_layout_selection,
    subsample,
    write_pools,
)
from .protocol import BackendError, BackendExhausted, ProtocolError
from .records import read_manifest
from .text_analysis import analyze_corpora, load_corpus, write_analysis_csvs

EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_VALIDATION = 4

_PHRASE_FLAG_MAP = {
    "short": "llm_short",
    "long": "llm_long",
    "both": "both",
    "comma": "comma",
    "period": "period",
}


def _with_exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except BackendExhausted as exc:
            click.echo(f"backend exhausted: {exc}", err=True)
            sys.exit(EXIT_BACKEND)
        except (ValidationError, ProtocolError) as exc:
            click.echo(f"validation failure: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except BackendError as exc:
            click.echo(f"backend error: {exc}", err=True)
            sys.exit(EXIT_BACKEND)

    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose):
    """Synthetic image-text-box pipeline and grounding evaluation tools."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--paradigm", type=click.Choice(["caption", "recaption"]), default=None)
@click.option("--purity", type=click.Choice(["lower", "higher"]), default=None)
@click.option("--phrases", type=click.Choice(sorted(_PHRASE_FLAG_MAP)), default=None)
@_with_exit_codes
def synth(config_path, seed, paradigm, purity, phrases):
    """Run the image-text-box synthesis pipeline over the configured inputs."""
    cfg = PipelineConfig.from_file(config_path)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    if paradigm is not None:
        cfg = cfg.replace(paradigm=paradigm)
    if purity is not None:
        cfg = cfg.replace(
            purity="lower_image2text" if purity == "lower" else "higher_concept2text"
        )
    if phrases is not None:
        cfg = cfg.replace(phrase_mode=_PHRASE_FLAG_MAP[phrases])
    if not cfg.inputs_path:
        raise ConfigError("config io.inputs is required for synth")
    result = run_caption_pipeline(cfg, read_inputs(cfg.inputs_path))
    stats = result.stats
    click.echo(
        f"records={stats.records} skipped={stats.skipped_inputs} "
        f"cache_hits={stats.cache_hits} cache_misses={stats.cache_misses} "
        f"digest={result.manifest.digest}"
    )


@main.command("select-boxes")
@click.option("--pools", "pools_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice(["all", "random", "text", "iou"]),
              default="all", show_default=True)
@click.option("--cap", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iou-threshold", type=float, default=0.5, show_default=True)
@_with_exit_codes
def select_boxes(pools_path, out_path, strategy, cap, seed, iou_threshold):
    """Thin per-image text-box pools with one of the selection strategies."""
    pools = read_pools(pools_path)
    selected, stats = run_layout_selection(
        pools, strategy, cap=cap, seed=seed, iou_threshold=iou_threshold
    )
    write_pools(out_path, selected)
    click.echo(dumps_canonical(stats))


@main.command("subsample")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--fraction", type=float, required=True)
@click.option("--repeats", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_with_exit_codes
def subsample_cmd(records_path, manifest_path, out_dir, fraction, repeats, seed):
    """Draw seeded record-level subsets for scaling studies."""
    manifest = read_manifest(manifest_path)
    manifests = subsample(records_path, manifest, fraction, repeats, seed, out_dir)
    for i, sub in enumerate(manifests):
        click.echo(f"subset_{i}: records={sub.records} digest={sub.digest}")


@main.command("eval")
@click.option("--records", "predictions_path", required=True, type=click.Path(exists=True),
              help="JSONL of {sample_id, heatmap} predictions.")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True),
              help="JSONL of {sample_id, image_h, image_w, boxes} ground truth.")
@click.option("--out", "json_path", default="eval_report.json", show_default=True)
@click.option("--csv", "csv_path", default="eval_report.csv", show_default=True)
@_with_exit_codes
def eval_cmd(predictions_path, gt_path, json_path, csv_path):
    """Pointing-game accuracy of heatmap predictions against box annotations."""
    report = pointing_accuracy(read_eval_samples(predictions_path, gt_path))
    write_report(report, json_path, csv_path)
    click.echo(f"hits={report.hits} total={report.total} accuracy={report.accuracy:.4f}")


@main.command("analyze")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", default=".", show_default=True)
@click.option("--embed-url", default="mock://0", show_default=True,
              help="Embedding backend: mock://SEED or an http(s) endpoint.")
@click.option("--bins", type=int, default=None,
              help="Also emit similarity histogram CSV with this many bins.")
@_with_exit_codes
def analyze(records_path, real_path, out_dir, embed_url, bins):
    """Similarity, diversity, and coverage statistics for two text corpora."""
    import numpy as np

    from .pipeline import build_backends
    from .protocol import BackendEndpoint
    from .text_analysis import histogram, write_histogram_csv

    cfg_endpoints = {
        role: BackendEndpoint(role=role, base_url=embed_url)
        for role in ("caption", "generate_image", "complete", "detect", "embed")
    }
    backend = build_backends(
        PipelineConfig(endpoints=cfg_endpoints, out_dir=out_dir)
    )["embed"]

    def embed(text: str) -> np.ndarray:
        return np.asarray(backend.call({"text": text})["embedding"], dtype=np.float64)

    rows = analyze_corpora(load_corpus(records_path), load_corpus(real_path), embed)
    paths = write_analysis_csvs(rows, out_dir)
    if bins is not None:
        counts = histogram([r["similarity"] for r in rows], -1.0, 1.0, bins)
        hist_path = Path(out_dir) / "similarity_hist.csv"
        write_histogram_csv(counts, -1.0, 1.0, hist_path)
        paths["similarity_hist"] = str(hist_path)
    click.echo(dumps_canonical({"images": len(rows), "outputs": paths}))


@main.command("gradcheck")
@click.option("--trials", type=int, default=210, show_default=True,
              help="Random instances per hinge loss.")
@click.option("--itc-trials", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tolerance", type=float, default=1e-5, show_default=True)
@_with_exit_codes
def gradcheck_cmd(trials, itc_trials, seed, tolerance):
    """Verify analytic gradients against central finite differences."""
    report = run_gradcheck(hinge_trials=trials, itc_trials=itc_trials, seed=seed)
    for name in sorted(report.max_rel_err):
        click.echo(
            f"{name}: trials={report.trials[name]} "
            f"max_rel_err={report.max_rel_err[name]:.3e}"
        )
    if report.worst >= tolerance:
        raise ValidationError(
            f"gradient check failed: max relative error {report.worst:.3e}"
        )
    click.echo(f"ok: worst relative error {report.worst:.3e} < {tolerance:g}")


if __name__ == "__main__":
    main()
