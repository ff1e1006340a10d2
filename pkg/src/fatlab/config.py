"""Run-config schema: strict keys, defaults, and dataclass construction.

Configs are JSON with keys mirroring the runtime types. Unknown keys are
errors, not warnings; value errors surface as ConfigError from the
dataclass constructors.
"""

from .errors import ConfigError
from .losses import LossConfig
from .mining import BatchSpec
from .model import ARCHITECTURES, EmbeddingModel
from .trainer import TrainConfig

LOSS_CONFIG_SCHEMA = {"margin": None, "hybrid_weight": None,
                      "normalized": None, "centroid_option": None,
                      "negative_strategy": None, "average_active_only": None}
BATCH_SCHEMA = {"identities_per_batch": None, "samples_per_identity": None,
                "seed": None}
TRAIN_SCHEMA = {"epochs": None, "learning_rate": None, "schedule": None,
                "loss": None, "loss_config": LOSS_CONFIG_SCHEMA,
                "batch": BATCH_SCHEMA}
MODEL_SCHEMA = {"architecture": None, "hidden_dim": None,
                "embedding_dim": None}
SELECTION_SCHEMA = {"mode": None, "threshold": None, "keep_fraction": None,
                    "statistic": None}
TEACHER_SCHEMA = {"epochs": None, "learning_rate": None, "schedule": None,
                  "cycle_length": None, "batch": BATCH_SCHEMA,
                  "selection": SELECTION_SCHEMA}
EVAL_SCHEMA = {"queries_per_identity": None}
DATA_SCHEMA = {"identities": None, "samples_per_identity": None,
               "input_dim": None, "separation": None}
NOISE_SCHEMA = {"flip_rate": None, "outlier_rate": None, "mixture_rate": None,
                "seed": None}
BENCH_SCHEMA = {"runs": None, "repeats": None, "k_per_identity": None,
                "dim": None, "margin": None, "backends": None}

COMMAND_SCHEMAS = {
    "gen-data": {"command": None, "seed": None, "out": None,
                 "data": DATA_SCHEMA, "noise": NOISE_SCHEMA},
    "train": {"command": None, "seed": None, "out": None, "dataset": None,
              "model": MODEL_SCHEMA, "train": TRAIN_SCHEMA,
              "eval": EVAL_SCHEMA},
    "distill": {"command": None, "seed": None, "out": None, "dataset": None,
                "model": MODEL_SCHEMA, "teacher": TEACHER_SCHEMA,
                "student": TRAIN_SCHEMA, "eval": EVAL_SCHEMA},
    "eval": {"command": None, "seed": None, "out": None, "dataset": None,
             "checkpoint": None, "transfer": None, "eval": EVAL_SCHEMA},
    "bench": {"command": None, "seed": None, "out": None,
              "bench": BENCH_SCHEMA},
}

BENCH_RUN_SCHEMA = {"loss": None, "sizes": None}


def validate_keys(config, schema, path=""):
    """Reject any key not in the schema, recursively."""
    if not isinstance(config, dict):
        raise ConfigError(f"expected a mapping at {path or 'top level'}")
    for key, value in config.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {where}")
        sub = schema[key]
        if sub is not None and value is not None:
            validate_keys(value, sub, where)


def validate_config(config):
    command = config.get("command")
    if command not in COMMAND_SCHEMAS:
        raise ConfigError(
            f"unknown or missing command {command!r}; expected one of "
            f"{sorted(COMMAND_SCHEMAS)}")
    validate_keys(config, COMMAND_SCHEMAS[command])
    for run in (config.get("bench") or {}).get("runs", []):
        validate_keys(run, BENCH_RUN_SCHEMA, "bench.runs[]")
    return command


def build_batch_spec(d, default_seed):
    d = dict(d or {})
    d.setdefault("seed", default_seed)
    return BatchSpec(**d)


def build_train_config(d, default_seed):
    d = dict(d or {})
    loss_cfg = d.pop("loss_config", None)
    batch = d.pop("batch", None)
    if loss_cfg is not None:
        loss_cfg = LossConfig(**loss_cfg)
    return TrainConfig(loss_config=loss_cfg,
                       batch=build_batch_spec(batch, default_seed),
                       seed=default_seed, **d)


def build_model(d, input_dim, seed):
    d = dict(d or {})
    arch = d.get("architecture", "one_hidden")
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}")
    hidden = d.get("hidden_dim", 32 if arch == "one_hidden" else 0)
    emb = d.get("embedding_dim", 16)
    return EmbeddingModel.create(arch, input_dim, emb, hidden_dim=hidden,
                                 seed=seed)


def loss_config_dict(cfg):
    return {"margin": cfg.margin, "hybrid_weight": cfg.hybrid_weight,
            "normalized": cfg.normalized,
            "centroid_option": cfg.centroid_option,
            "negative_strategy": cfg.negative_strategy,
            "average_active_only": cfg.average_active_only}


def batch_spec_dict(spec):
    return {"identities_per_batch": spec.identities_per_batch,
            "samples_per_identity": spec.samples_per_identity,
            "seed": spec.seed}


def train_config_dict(cfg):
    return {"epochs": cfg.epochs, "learning_rate": cfg.learning_rate,
            "schedule": cfg.schedule, "loss": cfg.loss,
            "loss_config": loss_config_dict(cfg.loss_config),
            "batch": batch_spec_dict(cfg.batch)}


def model_dict(model):
    return {"architecture": model.architecture,
            "hidden_dim": model.hidden_dim,
            "embedding_dim": model.embedding_dim}
