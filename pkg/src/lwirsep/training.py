"""Mixed two-phase training loop, Adam, and checkpoint I/O.

Every epoch first walks a freshly sampled set of simulated records (twice the
field-train count, drawn without replacement) under the five-term loss, then
all field-train records under the observed-total-only loss. The
``ill_posed_only`` mode skips the simulated phase entirely, which is the
ablation that demonstrates why the mixed schedule is needed.

Checkpoint file layout (little-endian):

    LWIRNN1\\n                      magic
    key = value\\n ...              manifest (version, arch_hash, grid,
                                    input_scale, epoch, stats.*, counts)
    \\n                             blank separator
    <float64 payload>               parameters + batch-norm running stats in
                                    declaration order, then optionally the
                                    Adam first/second moments
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import NormalizationStats
from .errors import DataFormatError, TrainingDivergedError
from .nn.losses import RecordBatch, loss1_with_grads, loss2_with_grads
from .nn.network import HybridNetwork
from .spectral import SpectralGrid

__all__ = [
    "TrainConfig",
    "TrainReport",
    "Adam",
    "epoch_plan",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

MODE_MIXED = "mixed"
MODE_ILL_POSED = "ill_posed_only"


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    mode: str = MODE_MIXED
    sim_to_field_ratio: int = 2
    input_scale: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if min(self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_eps) <= 0:
            raise ValueError("optimizer hyperparameters must be positive")
        if self.mode not in (MODE_MIXED, MODE_ILL_POSED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.sim_to_field_ratio < 1:
            raise ValueError("sim_to_field_ratio must be >= 1")


@dataclass
class EpochRow:
    epoch: int
    loss1_train: float
    loss2_train: float
    loss_val: float
    seconds: float


@dataclass
class TrainReport:
    rows: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = np.inf
    wall_time_s: float = 0.0

    def to_csv(self) -> str:
        lines = ["epoch,loss1_train,loss2_train,loss_val,seconds"]
        for r in self.rows:
            lines.append(f"{r.epoch},{r.loss1_train:.10e},{r.loss2_train:.10e},"
                         f"{r.loss_val:.10e},{r.seconds:.3f}")
        return "\n".join(lines) + "\n"


class Adam(object):
    """Plain Adam over the network's (name, array) parameter list."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in self.params}
        self.v = {name: np.zeros_like(arr) for name, arr in self.params}

    def step(self, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, arr in self.params:
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            arr -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_vector(self) -> np.ndarray:
        flats = [self.m[n].ravel() for n, _ in self.params]
        flats += [self.v[n].ravel() for n, _ in self.params]
        return np.concatenate(flats)

    def load_state(self, flat: np.ndarray, t: int) -> None:
        pos = 0
        for target in (self.m, self.v):
            for name, arr in self.params:
                target[name][...] = flat[pos:pos + arr.size].reshape(arr.shape)
                pos += arr.size
        if pos != flat.size:
            raise ValueError("optimizer state size mismatch")
        self.t = int(t)


def epoch_plan(sim_train, field_train, cfg: TrainConfig, epoch_index: int):
    """Ordered batch list for one epoch: ('sim'|'field', index array) pairs.

    Phase 1 draws ``ratio * len(field_train)`` simulated records without
    replacement (reshuffled each epoch); phase 2 covers every field record.
    """
    batches = []
    if cfg.mode == MODE_MIXED:
        if not len(field_train):
            raise ValueError("mixed mode needs a nonempty field training set")
        need = cfg.sim_to_field_ratio * len(field_train)
        if need > len(sim_train):
            raise ValueError(
                f"simulated pool too small: need {need} records for the "
                f"{cfg.sim_to_field_ratio}:1 schedule, have {len(sim_train)}")
        rng = np.random.default_rng([cfg.seed, epoch_index, 0])
        picked = rng.permutation(len(sim_train))[:need]
        for i in range(0, need, cfg.batch_size):
            batches.append(("sim", picked[i:i + cfg.batch_size]))
    rng = np.random.default_rng([cfg.seed, epoch_index, 1])
    order = rng.permutation(len(field_train))
    for i in range(0, len(field_train), cfg.batch_size):
        batches.append(("field", order[i:i + cfg.batch_size]))
    return batches


@dataclass
class TrainingData:
    """Record splits plus everything needed to resolve them into arrays."""

    sim_train: list
    sim_val: list
    field_train: list
    field_val: list
    stats: NormalizationStats
    library: list
    grid: SpectralGrid


class _Bundle:
    """Records pre-resolved into dense arrays for fast batch slicing."""

    def __init__(self, records, library, grid):
        self.n = len(records)
        if self.n == 0:
            self.batch = None
            return
        self.batch = RecordBatch.from_records(records, library, grid)

    def take(self, idx):
        b = self.batch
        sub = lambda arr: None if arr is None else arr[idx]
        return RecordBatch(
            wavelengths_um=b.wavelengths_um,
            ranges_m=b.ranges_m[idx], angles_deg=b.angles_deg[idx],
            eps=b.eps[idx], T=b.T[idx],
            tau=sub(b.tau), L_down=sub(b.L_down), L_up=sub(b.L_up),
            L_emit=sub(b.L_emit), L_total=b.L_total[idx],
        )


def _mean_loss(net, bundle, loss_fn, stats, batch_size):
    """Inference-mode mean loss over a bundle (batch-norm uses running stats)."""
    if bundle.n == 0:
        return 0.0
    total = 0.0
    for i in range(0, bundle.n, batch_size):
        idx = np.arange(i, min(i + batch_size, bundle.n))
        batch = bundle.take(idx)
        pred = net.forward(batch.ranges_m, batch.angles_deg, training=False)
        total += loss_fn(pred, batch, stats)[0] * len(idx)
    return total / bundle.n


def train(net: HybridNetwork, data: TrainingData, cfg: TrainConfig, *,
          start_epoch: int = 0, optimizer: Adam | None = None,
          log_every: int = 0):
    """Run the epoch loop; mutates ``net`` and returns the artifacts.

    Returns ``(report, best_state, optimizer)`` where ``best_state`` is the
    flat state vector of the best-validation epoch. Resuming with
    ``start_epoch=k`` and the saved optimizer reproduces an uninterrupted run
    bit-exactly (epoch shuffles are keyed by absolute epoch index).
    """
    sim = _Bundle(data.sim_train, data.library, data.grid)
    sim_val = _Bundle(data.sim_val, data.library, data.grid)
    fields = [r for r in data.field_train if r.labeled]
    if len(fields) != len(data.field_train):
        raise ValueError("field training records must be labeled (loss needs truth)")
    fld = _Bundle(fields, data.library, data.grid)
    fld_val = _Bundle([r for r in data.field_val if r.labeled], data.library, data.grid)

    opt = optimizer or Adam(net.parameters(), cfg.learning_rate,
                            cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    report = TrainReport()
    best_state = net.state_vector()
    t_start = time.perf_counter()

    for epoch in range(start_epoch, cfg.epochs):
        t_epoch = time.perf_counter()
        plan = epoch_plan(data.sim_train, fields, cfg, epoch)
        sums = {"sim": 0.0, "field": 0.0}
        counts = {"sim": 0, "field": 0}
        for batch_index, (kind, idx) in enumerate(plan):
            bundle, loss_fn = (sim, loss1_with_grads) if kind == "sim" else (fld, loss2_with_grads)
            batch = bundle.take(idx)
            net.zero_grads()
            pred = net.forward(batch.ranges_m, batch.angles_deg, training=True)
            value, (d_down, d_up, d_tau) = loss_fn(pred, batch, data.stats)
            if not np.isfinite(value):
                norms = {n: float(np.linalg.norm(a)) for n, a in net.parameters()[:3]}
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} batch {batch_index} "
                    f"(kind={kind}); parameter norms snapshot: {norms}")
            grads = net.backward(d_down, d_up, d_tau)
            opt.step(grads)
            sums[kind] += value * len(idx)
            counts[kind] += len(idx)

        val = (_mean_loss(net, sim_val, loss1_with_grads, data.stats, cfg.batch_size)
               + _mean_loss(net, fld_val, loss2_with_grads, data.stats, cfg.batch_size))
        row = EpochRow(
            epoch=epoch,
            loss1_train=sums["sim"] / counts["sim"] if counts["sim"] else 0.0,
            loss2_train=sums["field"] / counts["field"] if counts["field"] else 0.0,
            loss_val=val,
            seconds=time.perf_counter() - t_epoch,
        )
        report.rows.append(row)
        if val < report.best_val_loss:
            report.best_val_loss = val
            report.best_epoch = epoch
            best_state = net.state_vector()
        if log_every and (epoch % log_every == 0 or epoch == cfg.epochs - 1):
            print(f"epoch {epoch:4d}  loss1 {row.loss1_train:.5f}  "
                  f"loss2 {row.loss2_train:.6f}  val {val:.6f}  {row.seconds:.1f}s",
                  flush=True)

    report.wall_time_s = time.perf_counter() - t_start
    return report, best_state, opt


# -- checkpoints ---------------------------------------------------------------

_CKPT_MAGIC = b"LWIRNN1\n"
_CKPT_VERSION = 1


def save_checkpoint(path, net: HybridNetwork, stats: NormalizationStats, *,
                    optimizer: Adam | None = None, epoch: int = 0,
                    extra: dict | None = None) -> None:
    state = net.state_vector()
    lines = [
        f"version = {_CKPT_VERSION}",
        f"arch_hash = {net.architecture_hash()}",
        f"grid = {net.grid.definition()}",
        f"input_scale = {int(net.input_scale)}",
        f"seed = {net.seed}",
        f"epoch = {epoch}",
        f"state_count = {state.size}",
    ]
    for name, (lo, hi) in stats.to_dict().items():
        lines.append(f"stats.{name} = {lo!r}:{hi!r}")
    if optimizer is not None:
        lines.append(f"adam_t = {optimizer.t}")
        lines.append(f"adam_lr = {optimizer.lr!r}")
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    payload = [state.astype("<f8").tobytes()]
    if optimizer is not None:
        payload.append(optimizer.state_vector().astype("<f8").tobytes())
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC + ("\n".join(lines) + "\n\n").encode() + b"".join(payload))


def load_checkpoint(path, *, expected_grid: SpectralGrid | None = None):
    """Rebuild ``(net, stats, info)`` from a checkpoint file.

    ``info`` carries epoch, the manifest, and (when present) a restored-Adam
    factory under ``make_optimizer``.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(_CKPT_MAGIC):
        raise DataFormatError(f"{path}: not a checkpoint file (bad magic)")
    sep = blob.find(b"\n\n", len(_CKPT_MAGIC))
    if sep < 0:
        raise DataFormatError(f"{path}: missing manifest terminator")
    manifest = {}
    for ln in blob[len(_CKPT_MAGIC):sep].decode().splitlines():
        key, eq, val = ln.partition("=")
        if not eq:
            raise DataFormatError(f"{path}: malformed manifest line {ln!r}")
        manifest[key.strip()] = val.strip()
    if int(manifest.get("version", -1)) != _CKPT_VERSION:
        raise DataFormatError(f"{path}: unsupported version")

    grid = SpectralGrid.default()
    if manifest.get("grid") != grid.definition():
        raise DataFormatError(f"{path}: unknown grid {manifest.get('grid')!r}")
    if expected_grid is not None and manifest["grid"] != expected_grid.definition():
        raise DataFormatError(f"{path}: grid mismatch")

    net = HybridNetwork(seed=int(manifest.get("seed", 0)), grid=grid,
                        input_scale=bool(int(manifest.get("input_scale", 0))))
    if manifest.get("arch_hash") != net.architecture_hash():
        raise DataFormatError(f"{path}: architecture hash mismatch")

    state_count = int(manifest["state_count"])
    floats = np.frombuffer(blob, dtype="<f8", offset=sep + 2)
    if floats.size < state_count:
        raise DataFormatError(f"{path}: truncated parameter payload")
    net.load_state(floats[:state_count].copy())

    def parse_stats(key):
        lo, _, hi = manifest[f"stats.{key}"].partition(":")
        return float(lo), float(hi)

    stats = NormalizationStats(L_total=parse_stats("L_total"), L_down=parse_stats("L_down"),
                               L_up=parse_stats("L_up"), L_emit=parse_stats("L_emit"))

    info = {"epoch": int(manifest.get("epoch", 0)), "manifest": manifest}
    if "adam_t" in manifest:
        adam_floats = floats[state_count:]

        def make_optimizer(cfg: TrainConfig) -> Adam:
            opt = Adam(net.parameters(), cfg.learning_rate, cfg.adam_beta1,
                       cfg.adam_beta2, cfg.adam_eps)
            opt.load_state(adam_floats.copy(), int(manifest["adam_t"]))
            return opt

        info["make_optimizer"] = make_optimizer
    elif floats.size != state_count:
        raise DataFormatError(f"{path}: unexpected trailing payload")
    return net, stats, info
