from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..losses import pair_terms
from ..model import EncoderParams, embed, init, load_checkpoint, save_checkpoint
from .adam import AdamState, adam_step
from .config import TrainConfig
from .data import Dataset, epoch_batches, make_batch

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "L_NN", "L_comm", "L_total", "wall_ms")


@dataclass
class TrainResult:
    params: EncoderParams
    state: AdamState
    rows: list[dict] = field(default_factory=list)


def streams(seed: int) -> tuple[int, np.random.Generator]:
    """Split one run seed into an init seed and the data generator."""
    init_ss, data_ss = np.random.SeedSequence(seed).spawn(2)
    return int(init_ss.generate_state(1)[0]), np.random.default_rng(data_ss)


def batch_loss(params: EncoderParams, batch, cfg: TrainConfig):
    """Mean over the batch of each loss component; returns tensors keyed like ``pair_terms``."""
    sums: dict[str, ad.Tensor] = {}
    for item in batch:
        phi_x = embed(params, item.x)
        phi_y = embed(params, item.y)
        phi_xf = embed(params, item.xf) if item.xf is not None else None
        phi_yf = embed(params, item.yf) if item.yf is not None else None
        terms = pair_terms(cfg.loss, item.pair, phi_x, phi_y, phi_xf, phi_yf)
        for key, value in terms.items():
            sums[key] = value if key not in sums else ad.add(sums[key], value)
    return {key: ad.scale(value, 1.0 / len(batch)) for key, value in sums.items()}


def total_steps(cfg: TrainConfig, num_pairs: int) -> int:
    steps = cfg.epochs * math.ceil(num_pairs / cfg.batch_pairs)
    return steps if cfg.max_steps is None else min(steps, cfg.max_steps)


def _checkpoint(path, params, state, cfg):
    save_checkpoint(path, params, state.to_blobs(), meta={"adam_step": state.step, "seed": cfg.seed})


def train(
    ds: Dataset,
    cfg: TrainConfig,
    params: EncoderParams | None = None,
    state: AdamState | None = None,
    checkpoint_path=None,
    log_path=None,
    on_step=None,
) -> TrainResult:
    """Run ``cfg.epochs`` epochs (or ``cfg.max_steps`` steps) of Adam on the batch-mean loss.

    ``on_step(step, params, row)`` is called after every update, e.g. for validation.
    """
    init_seed, rng = streams(cfg.seed)
    if params is None:
        params = init(cfg.arch, init_seed)
    state = state or AdamState.zeros(params)
    result = TrainResult(params, state)
    limit = total_steps(cfg, len(ds.pairs))
    writer = None
    fh = open(log_path, "w", newline="", encoding="utf-8") if log_path else None
    try:
        if fh:
            writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
            writer.writeheader()
        step = 0
        while step < limit:
            for ids in epoch_batches(len(ds.pairs), cfg.batch_pairs, rng):
                if step >= limit:
                    break
                t0 = time.perf_counter()
                batch = make_batch(ds, ids, cfg, rng)
                params.zero_grad()
                with ad.Tape() as tape:
                    terms = batch_loss(params, batch, cfg)
                    ad.backward(terms["total"])
                tape.release()
                adam_step(params, state, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
                step += 1
                comm = terms.get("comm", terms.get("nn_sym"))
                row = {
                    "step": step,
                    "L_NN": float(terms["nn"].data),
                    "L_comm": float(comm.data) if comm is not None else 0.0,
                    "L_total": float(terms["total"].data),
                    "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3),
                }
                if not math.isfinite(row["L_total"]):
                    raise FloatingPointError(f"loss diverged at step {step}")
                result.rows.append(row)
                if writer:
                    writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
                if step % 50 == 0 or step == 1:
                    log.info("step %d  L_NN %.5g  L_comm %.5g", step, row["L_NN"], row["L_comm"])
                if on_step is not None:
                    on_step(step, params, row)
                if checkpoint_path and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                    _checkpoint(checkpoint_path, params, state, cfg)
    finally:
        if fh:
            fh.close()
    if checkpoint_path:
        _checkpoint(checkpoint_path, params, state, cfg)
    return result


def resume(path):
    """Load ``(params, AdamState)`` from a training checkpoint."""
    params, extra, meta = load_checkpoint(path)
    state = AdamState.from_blobs(extra, int(meta.get("adam_step", 0)))
    return params, state


def read_log(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return [
            {k: (int(v) if k == "step" else float(v)) for k, v in row.items()} for row in csv.DictReader(f)
        ]
