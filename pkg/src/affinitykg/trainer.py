"""Adam optimization, epoch orchestration, grid search, and checkpoints.

Training groups the (reciprocal-augmented) triples by (head, relation) query;
batch_size counts queries, not raw triples. One Adam update is applied per
batch with gradients summed in a fixed order, so a fixed seed reproduces the
parameter trajectory bit for bit.

RNG discipline: fit derives one generator per epoch as
default_rng([seed, epoch]); within an epoch that stream is consumed first by
the batch shuffle, then by the per-query dropout masks, in iteration order.

Checkpoint layout: a directory holding meta.json plus one raw little-endian
float64 array per parameter block (E.bin, R.bin, G.bin) and per Adam moment
(adam_m_E.bin, ...). meta.json records shapes, config, vocabulary hashes, the
epoch, and the validation metrics of the stored parameters.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from affinitykg import evaluator as evalmod
from affinitykg import models
from affinitykg.errors import ConsistencyError
from affinitykg.kg import KnowledgeGraph, add_reciprocals
from affinitykg.models import (
    BaselineParams,
    ClampStats,
    DropoutSpec,
    TuckerParams,
    init_baseline,
    init_params,
    loss_and_grads,
    sample_masks,
    smooth_labels,
)
from affinitykg.util import atomic_write_bytes, atomic_write_text, canonical_json


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 0.005
    decay_rate: float = 1.0
    seed: int = 0
    model: str = "tucker"
    d_e: int = 200
    d_r: int = 10
    dropout: DropoutSpec = field(default_factory=lambda: DropoutSpec(0.5, 0.2, 0.2))
    label_smoothing: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_every: int = 10
    patience: int = 20

    def __post_init__(self):
        if self.learning_rate <= 0 and self.learning_rate != 0.0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.decay_rate <= 1.0:
            raise ValueError("decay_rate must lie in (0, 1]")
        if self.model not in ("tucker",) + models.BASELINE_VARIANTS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.epochs < 0 or self.patience < 0:
            raise ValueError("epochs and patience must be non-negative")


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        blocks = params.param_blocks()
        return cls(
            m={name: np.zeros_like(arr) for name, arr in blocks.items()},
            v={name: np.zeros_like(arr) for name, arr in blocks.items()},
        )


def adam_step(params, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update, in place over the parameter blocks."""
    state.step += 1
    t = state.step
    for name, arr in params.param_blocks().items():
        g = grads[name]
        if g.shape != arr.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {arr.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        arr -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


def group_queries(train_triples: np.ndarray):
    """Collapse training triples into 1:N queries: [(h, r, tail ids), ...].

    Groups are sorted by (h, r) so iteration order never depends on input
    order; tails are sorted within each group.
    """
    grouped: dict = {}
    for h, r, t in train_triples:
        grouped.setdefault((int(h), int(r)), []).append(int(t))
    return [
        (h, r, np.array(sorted(tails), dtype=np.int64))
        for (h, r), tails in sorted(grouped.items())
    ]


def _init_for(config: TrainConfig, n_entities: int, n_relations: int):
    if config.model == "tucker":
        return init_params(n_entities, n_relations, config.d_e, config.d_r, config.seed)
    return init_baseline(config.model, n_entities, n_relations, config.d_e, config.seed)


def train_epoch(kg_train, params, state: AdamState, config: TrainConfig,
                rng: np.random.Generator, lr: float | None = None,
                groups=None, clamp_stats: ClampStats | None = None) -> float:
    """One pass over all (h, r) queries in shuffled batches; returns mean query loss.

    kg_train may be an augmented KnowledgeGraph or a raw (n, 3) triple array;
    reciprocals must already be applied.
    """
    triples = kg_train.train if isinstance(kg_train, KnowledgeGraph) else np.asarray(kg_train)
    if groups is None:
        groups = group_queries(triples)
    if not groups:
        raise ValueError("empty training set")
    if lr is None:
        lr = config.learning_rate
    n_e = params.n_entities
    order = rng.permutation(len(groups))
    use_dropout = config.model == "tucker" and config.dropout.active
    total_loss = 0.0
    for start in range(0, len(order), config.batch_size):
        batch = order[start:start + config.batch_size]
        summed: dict = {}
        for gi in batch:
            h, r, tails = groups[gi]
            y = np.zeros(n_e)
            y[tails] = 1.0
            y = smooth_labels(y, config.label_smoothing)
            masks = sample_masks(config.dropout, params.d_e, rng) if use_dropout else None
            loss, grads = loss_and_grads(params, h, r, y, masks, clamp_stats)
            total_loss += loss
            for name, g in grads.items():
                if name in summed:
                    summed[name] += g
                else:
                    summed[name] = g
        adam_step(params, summed, state, lr,
                  config.adam_beta1, config.adam_beta2, config.adam_eps)
    return total_loss / len(groups)


@dataclass
class TrainResult:
    params: object
    adam_state: AdamState
    log: list
    best_epoch: int
    best_val_mrr: float
    best_val_report: object | None
    epochs_run: int
    clamp_stats: ClampStats


def fit(kg: KnowledgeGraph, config: TrainConfig) -> TrainResult:
    """Train on the augmented training fold with periodic validation.

    Keeps the parameters with the best validation MRR (filtered); stops early
    once `patience` consecutive evaluations fail to improve it. The learning
    rate is multiplied by decay_rate after every epoch.
    """
    aug = kg if kg.has_reciprocals else add_reciprocals(kg)
    params = _init_for(config, aug.n_entities, aug.n_relations)
    state = AdamState.for_params(params)
    groups = group_queries(aug.train)
    clamp_stats = ClampStats()

    best_params = params.copy()
    best_epoch = -1
    best_mrr = -np.inf
    best_report = None
    bad_evals = 0
    log = []
    lr = config.learning_rate
    epochs_run = 0
    has_validation = len(kg.valid) > 0

    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed, epoch])
        loss = train_epoch(aug, params, state, config, rng, lr=lr,
                           groups=groups, clamp_stats=clamp_stats)
        record = {"epoch": epoch, "loss": loss, "lr": lr}
        epochs_run = epoch + 1
        if has_validation and (epoch + 1) % config.eval_every == 0:
            report = evalmod.evaluate(params, kg, fold="valid")
            record["val_mrr"] = report.mrr
            if report.mrr > best_mrr:
                best_mrr = report.mrr
                best_params = params.copy()
                best_epoch = epoch
                best_report = report
                bad_evals = 0
            else:
                bad_evals += 1
            log.append(record)
            if bad_evals > config.patience:
                break
        else:
            log.append(record)
        lr *= config.decay_rate

    if best_epoch < 0:
        best_params = params
        best_epoch = epochs_run - 1
        best_mrr = float("nan")
    return TrainResult(best_params, state, log, best_epoch,
                       float(best_mrr), best_report, epochs_run, clamp_stats)


@dataclass(frozen=True)
class GridSpec:
    d_r: tuple = (10, 20, 30)
    d_e: tuple = (100, 200, 500, 1000)
    dropout_input: tuple = (0.2, 0.3, 0.4, 0.5)
    dropout_relation: tuple = (0.2, 0.3, 0.4, 0.5)
    dropout_combination: tuple = (0.2, 0.3, 0.4, 0.5)

    def __post_init__(self):
        for name in ("d_r", "d_e", "dropout_input", "dropout_relation", "dropout_combination"):
            if not getattr(self, name):
                raise ValueError(f"grid axis {name} is empty")

    def cells(self):
        for d_r in self.d_r:
            for d_e in self.d_e:
                for p1 in self.dropout_input:
                    for p2 in self.dropout_relation:
                        for p3 in self.dropout_combination:
                            yield {"d_r": d_r, "d_e": d_e,
                                   "dropout": DropoutSpec(p1, p2, p3)}


@dataclass
class GridCell:
    config: TrainConfig
    val_mrr: float
    val_hits1: float
    best_epoch: int
    epochs_run: int


def grid_search(kg: KnowledgeGraph, grid: GridSpec, base: TrainConfig) -> list:
    """Full Cartesian sweep, every cell trained with the base seed.

    Returns cells sorted by validation MRR (descending), ties broken by
    hits@1 then by grid order.
    """
    results = []
    for cell in grid.cells():
        config = replace(base, d_r=cell["d_r"], d_e=cell["d_e"], dropout=cell["dropout"])
        outcome = fit(kg, config)
        hits1 = outcome.best_val_report.hits1 if outcome.best_val_report else 0.0
        mrr = outcome.best_val_mrr if np.isfinite(outcome.best_val_mrr) else 0.0
        results.append(GridCell(config, mrr, hits1, outcome.best_epoch, outcome.epochs_run))
    results.sort(key=lambda c: (-c.val_mrr, -c.val_hits1))
    return results


# --- checkpoints ---

META_FILE = "meta.json"


def _config_to_dict(config: TrainConfig) -> dict:
    d = dataclasses.asdict(config)
    d["dropout"] = config.dropout.rates()
    return d


def _config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    d["dropout"] = DropoutSpec(**d["dropout"])
    return TrainConfig(**d)


def save_checkpoint(directory: str, params, state: AdamState, config: TrainConfig,
                    epoch: int, metrics: dict | None, vocab_hashes: dict) -> None:
    os.makedirs(directory, exist_ok=True)
    blocks = params.param_blocks()
    meta = {
        "model": config.model,
        "blocks": {name: list(arr.shape) for name, arr in blocks.items()},
        "n_entities": params.n_entities,
        "n_relations": params.n_relations,
        "config": _config_to_dict(config),
        "epoch": epoch,
        "adam_step": state.step,
        "metrics": metrics or {},
        "vocab_hash": vocab_hashes,
    }
    atomic_write_text(os.path.join(directory, META_FILE), canonical_json(meta))
    for name, arr in blocks.items():
        atomic_write_bytes(os.path.join(directory, f"{name}.bin"),
                           arr.astype("<f8").tobytes())
        atomic_write_bytes(os.path.join(directory, f"adam_m_{name}.bin"),
                           state.m[name].astype("<f8").tobytes())
        atomic_write_bytes(os.path.join(directory, f"adam_v_{name}.bin"),
                           state.v[name].astype("<f8").tobytes())


def _read_block(directory: str, name: str, shape) -> np.ndarray:
    path = os.path.join(directory, f"{name}.bin")
    with open(path, "rb") as fh:
        data = np.frombuffer(fh.read(), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ConsistencyError(f"{path}: expected {expected} float64 values, found {data.size}")
    return data.reshape(shape).copy()


def load_checkpoint(directory: str):
    """Returns (params, adam_state, meta dict)."""
    with open(os.path.join(directory, META_FILE), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    shapes = {name: tuple(shape) for name, shape in meta["blocks"].items()}
    blocks = {name: _read_block(directory, name, shape) for name, shape in shapes.items()}
    if meta["model"] == "tucker":
        params = TuckerParams(blocks["E"], blocks["R"], blocks["G"])
    else:
        params = BaselineParams(meta["model"], blocks["E"], blocks["R"])
    state = AdamState(
        m={name: _read_block(directory, f"adam_m_{name}", shape) for name, shape in shapes.items()},
        v={name: _read_block(directory, f"adam_v_{name}", shape) for name, shape in shapes.items()},
        step=meta["adam_step"],
    )
    return params, state, meta


def load_train_config(meta: dict) -> TrainConfig:
    return _config_from_dict(meta["config"])
