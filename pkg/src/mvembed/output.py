"""On-disk layout of a fit.

One directory per fit::

    view_<name>_embedding.csv   N x d, no header
    weights.csv                 one "<view name>,<alpha>" line per view, then "r,<r>"
    trace.csv                   header "iteration,objective,alpha_<name>..."
    result.json                 config echo, converged flag, iterations used
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .dataset import write_matrix_csv
from .embedding import AmsreConfig, EmbeddingResult


def _g17(x) -> str:
    return format(float(x), ".17g")


def write_result(result: EmbeddingResult, view_names, out_dir, config: AmsreConfig, method="amsre") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, emb in zip(view_names, result.embeddings):
        write_matrix_csv(out_dir / f"view_{name}_embedding.csv", emb.y_matrix)

    with open(out_dir / "weights.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for name, a in zip(view_names, result.weights.alphas):
            w.writerow([name, _g17(a)])
        w.writerow(["r", _g17(result.weights.r)])

    with open(out_dir / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"] + [f"alpha_{n}" for n in view_names])
        for it, f, alphas in result.objective_trace:
            w.writerow([it, _g17(f)] + [_g17(a) for a in alphas])

    summary = {
        "method": method,
        "config": config.to_dict(),
        "converged": bool(result.converged),
        "iterations_used": int(result.iterations_used),
        "views": list(view_names),
    }
    with open(out_dir / "result.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return out_dir


def read_trace(path):
    """Rows of ``trace.csv`` as ``(iteration, objective, [alphas])``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [(int(r[0]), float(r[1]), [float(x) for x in r[2:]]) for r in rows[1:]]


def read_weights(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    alphas = {r[0]: float(r[1]) for r in rows[:-1]}
    return alphas, float(rows[-1][1])
