from __future__ import annotations

from pathlib import Path

import pytest

from stgraphrl.config import TrainConfig
from stgraphrl.graph.build import build_graphs
from stgraphrl.ingest.checkins import parse_checkins
from stgraphrl.ingest.sessions import build_histories
from stgraphrl.services.evaluation import EvaluationPipeline
from stgraphrl.services.training import carve_validation, split_dataset, train
from stgraphrl.synth.generator import generate, write_checkins
from stgraphrl.synth.profiles import default_profiles

# Reduced corpus and encoder widths; the embedding keeps all 24 dimensions.
_USERS_PER_PROFILE = 12
_DAYS = 10
_CONFIG = {
    "seed": 7,
    "node_dim": 16,
    "embedding_dim": 24,
    "attention_hidden": 8,
    "decoder_dim": 32,
    "attention_heads": 2,
    "batch_size": 8,
    "max_epochs": 60,
    "patience": 15,
    "learning_rate": 5e-3,
}


@pytest.mark.slow
def test_trained_embeddings_recover_the_synthetic_profiles(tmp_path: Path) -> None:
    corpus = generate(default_profiles(), users_per_profile=_USERS_PER_PROFILE, days=_DAYS, seed=7)
    path = tmp_path / "checkins.csv"
    write_checkins(corpus.records, path)
    with path.open("rb") as stream:
        histories = list(build_histories(parse_checkins(stream)).histories)
    graphs = build_graphs(histories)
    config = TrainConfig.model_validate(_CONFIG)

    train_pool, test_set = split_dataset(graphs, config.split_ratio, config.seed)
    fit_set, validation_set = carve_validation(train_pool, config.validation_ratio, config.seed)
    result = train(fit_set, validation_set, config)
    split = {graph.user_id: "train" for graph in train_pool}
    split.update({graph.user_id: "test" for graph in test_set})

    summary = EvaluationPipeline(result.params).run(
        graphs,
        tmp_path / "reports",
        split=split,
        histories=histories,
        labels=corpus.labels,
    )

    assert summary.metrics["joint"].f1 - summary.baseline.f1 >= 0.15
    assert summary.correlations["H"].r("joint") >= 0.5
    assert summary.group_means is not None
    same_profile, cross_profile = summary.group_means
    assert same_profile < cross_profile
