"""Clean Up public-goods game, reputation agents and cooperation analysis."""

from ._cleanup import (
    ConfigError,
    Env,
    EpisodeLog,
    ParseError,
    action_names,
    analyze,
    apple_regrowth_probability,
    collect,
    config_hash,
    default_params,
    evaluate,
    fisher_combine,
    gini,
    jenks_breaks,
    pollution_accrual_probability,
    scripted_mixtures,
    summarize,
    train,
    turn_taking_score,
    welch_t_test,
)

__all__ = [
    "ConfigError",
    "Env",
    "EpisodeLog",
    "ParseError",
    "action_names",
    "analyze",
    "apple_regrowth_probability",
    "collect",
    "config_hash",
    "default_params",
    "evaluate",
    "fisher_combine",
    "gini",
    "jenks_breaks",
    "pollution_accrual_probability",
    "scripted_mixtures",
    "summarize",
    "train",
    "turn_taking_score",
    "welch_t_test",
]
