"""Role-play dialogue curation with seed-grounded personas.

Records are plain dicts and lists with the same shape as the JSONL files the
``roleplay-curate`` command reads and writes.
"""

from ._roleplay import (
    CacheMissError,
    ConfigError,
    MetricError,
    ParseError,
    RoleplayError,
    SamplingError,
    bleu,
    build_pair_tasks,
    client_view,
    curate,
    evaluate_predictions,
    fleiss_kappa,
    knowledge_f1,
    load_seeds,
    persona_f1,
    read_corpus,
    split,
    stats,
    target_success,
    tokenize,
    win_rates,
    write_corpus,
)

__all__ = [
    "CacheMissError",
    "ConfigError",
    "MetricError",
    "ParseError",
    "RoleplayError",
    "SamplingError",
    "bleu",
    "build_pair_tasks",
    "client_view",
    "curate",
    "evaluate_predictions",
    "fleiss_kappa",
    "knowledge_f1",
    "load_seeds",
    "persona_f1",
    "read_corpus",
    "split",
    "stats",
    "target_success",
    "tokenize",
    "win_rates",
    "write_corpus",
]
