from __future__ import annotations

import contextlib
import io
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path

from stgraphrl.cli import run
from stgraphrl.evaluation.reports import read_embeddings
from stgraphrl.graph.codec import read_graph_dir
from stgraphrl.model.checkpoint import load_checkpoint

SMOKE_SEED = 7
SMOKE_USERS_PER_PROFILE = 5
SMOKE_DAYS = 10

# Narrow model so the whole pipeline finishes in seconds.
_SMOKE_CONFIG = """\
node_dim = 8
embedding_dim = 6
attention_hidden = 4
decoder_dim = 16
attention_heads = 2
fusion_layers = 2
max_epochs = 2
batch_size = 8
"""


class SmokeFailure(RuntimeError):
    pass


def _invoke(label: str, argv: Sequence[str]) -> str:
    captured = io.StringIO()
    with contextlib.redirect_stdout(captured):
        code = run(list(argv))
    if code != 0:
        raise SmokeFailure(f"{label} exited with {code}")
    return captured.getvalue()


def run_smoke(workspace: Path) -> None:
    config = workspace / "smoke.conf"
    config.write_text(_SMOKE_CONFIG, encoding="utf-8")
    common = ["--config", str(config), "--log-level", "WARNING"]
    corpus, store, graphs = workspace / "corpus", workspace / "store", workspace / "graphs"
    model, reports = workspace / "model", workspace / "reports"

    _invoke(
        "synth",
        [
            "synth",
            "--out",
            str(corpus),
            "--users-per-profile",
            str(SMOKE_USERS_PER_PROFILE),
            "--days",
            str(SMOKE_DAYS),
            "--seed",
            str(SMOKE_SEED),
            *common,
        ],
    )
    print("PASS synth")

    _invoke("ingest", ["ingest", "--input", str(corpus / "checkins.csv"), "--out", str(store), *common])
    print("PASS ingest")

    _invoke(
        "build-graph",
        ["build-graph", "--input", str(store / "trajectories.csv"), "--out", str(graphs), *common],
    )
    built = read_graph_dir(graphs)
    if len(built) != 4 * SMOKE_USERS_PER_PROFILE:
        raise SmokeFailure(f"expected {4 * SMOKE_USERS_PER_PROFILE} graphs, found {len(built)}")
    print("PASS build-graph")

    _invoke("train", ["train", "--input", str(graphs), "--out", str(model), *common])
    load_checkpoint(model / "checkpoint.stp")
    print("PASS train")

    _invoke(
        "eval",
        [
            "eval",
            "--input",
            str(graphs),
            "--checkpoint",
            str(model / "checkpoint.stp"),
            "--out",
            str(reports),
            "--trajectories",
            str(store / "trajectories.csv"),
            "--labels",
            str(corpus / "labels.csv"),
            *common,
        ],
    )
    summary = (reports / "summary.txt").read_text(encoding="utf-8")
    if "r_st" not in summary:
        raise SmokeFailure("evaluation summary is missing the joint correlation")
    print("PASS eval")

    embeddings = workspace / "embeddings.csv"
    _invoke(
        "export-embeddings",
        [
            "export-embeddings",
            "--input",
            str(graphs),
            "--checkpoint",
            str(model / "checkpoint.stp"),
            "--out",
            str(embeddings),
            *common,
        ],
    )
    user_ids, matrix = read_embeddings(embeddings)
    if len(user_ids) != len(built) or matrix.shape[1] != 6:
        raise SmokeFailure(f"unexpected embedding table shape {matrix.shape}")
    print("PASS export-embeddings")
    print("stgraphrl smoke passed")


def _isolate_environment() -> None:
    for name in [name for name in os.environ if name.startswith("STGRAPHRL_")]:
        del os.environ[name]


def main() -> int:
    _isolate_environment()
    try:
        with tempfile.TemporaryDirectory(prefix="stgraphrl-smoke-") as directory:
            run_smoke(Path(directory))
    except Exception as error:
        print(f"stgraphrl smoke failed: {error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
