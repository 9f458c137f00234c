"""Training loop, metrics, ablation variants, the MLP-fusion baseline, and
the lookback sweep."""

from __future__ import annotations

import enum
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .data import NormStats, RawDataset, WindowedSample, split, window
from .model import DagConfig, DagModel, VariantSpec
from .tensor import ContractError, Parameter, Tensor


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    patience: int = 5  # early stop on validation forecast loss
    seed: int = 0
    # desk-scale throttles; None means use everything
    max_train_windows_per_epoch: int | None = None
    max_val_windows: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if self.patience < 0:
            raise ContractError("patience must be >= 0")
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")


@dataclass
class EvalReport:
    mse: float
    mae: float
    per_step_mse: list
    per_step_mae: list
    n_windows: int
    wall_clock: float
    fingerprint: str
    train_losses: dict = field(default_factory=dict)

    def __post_init__(self):
        assert self.mse >= 0 and self.mae >= 0
        assert np.isfinite(self.mse) and np.isfinite(self.mae)


class AblationVariant(enum.Enum):
    G2_ONLY = "a"
    G4_ONLY = "b"
    G2_PLUS_G4 = "c"
    F1_G2_TEMPORAL = "d"
    F3_G4_CHANNEL = "e"
    FULL = "full"


def variant_spec(v: AblationVariant) -> VariantSpec:
    """Ablation wiring. Variants without a discovery net force the gate to 1
    (pure own-attention) so parameter counts stay comparable."""
    if v is AblationVariant.G2_ONLY:
        return VariantSpec(use_channel=False, temporal_discovery=False,
                           channel_discovery=False, alpha_override=1.0,
                           lambda1_override=1.0)
    if v is AblationVariant.G4_ONLY:
        return VariantSpec(use_temporal=False, temporal_discovery=False,
                           channel_discovery=False, alpha_override=1.0,
                           lambda1_override=0.0)
    if v is AblationVariant.G2_PLUS_G4:
        return VariantSpec(temporal_discovery=False, channel_discovery=False,
                           alpha_override=1.0)
    if v is AblationVariant.F1_G2_TEMPORAL:
        return VariantSpec(use_channel=False, channel_discovery=False,
                           lambda1_override=1.0)
    if v is AblationVariant.F3_G4_CHANNEL:
        return VariantSpec(use_temporal=False, temporal_discovery=False,
                           lambda1_override=0.0)
    return VariantSpec()


def config_fingerprint(*objs) -> str:
    blob = json.dumps([_jsonable(o) for o in objs], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _jsonable(o):
    if hasattr(o, "__dataclass_fields__"):
        return {k: _jsonable(v) for k, v in asdict(o).items()}
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, enum.Enum):
        return o.value
    return o


# ---------------------------------------------------------------------------
# trainables: a DagModel bound to a variant, or the baseline below


class DagTrainable:
    def __init__(self, model: DagModel, variant: VariantSpec = VariantSpec()):
        self.model = model
        self.variant = variant

    def parameters(self):
        return self.model.parameters()

    def sample_loss(self, sample: WindowedSample):
        out = self.model.forward(sample, self.variant)
        return out.total_loss, out.losses

    def val_loss(self, sample: WindowedSample) -> float:
        out = self.model.forward(sample, self.variant)
        return out.losses["l_f"]

    def predict(self, sample: WindowedSample) -> np.ndarray:
        return self.model.forward(sample, self.variant).y_endo_hat


@dataclass
class TrainTrace:
    rows: list  # per-epoch dicts of mean loss terms + validation loss
    best_val: float
    epochs_run: int


def _restore(params, snapshot):
    for p, v in zip(params, snapshot):
        p.data = v.copy()


def train(trainable, train_windows, val_windows, cfg: TrainConfig) -> TrainTrace:
    """Mini-batch Adam over shuffled windows with early stopping on the
    validation forecast loss; restores the best-validation parameters."""
    from .optim import Adam

    if not train_windows:
        raise ContractError("empty training window set")
    rng = np.random.default_rng(cfg.seed)
    # probe backward: optimize only parameters the wiring actually reaches
    # (ablation variants leave whole sub-networks untouched)
    probe_loss, _ = trainable.sample_loss(train_windows[0])
    T.backward(probe_loss)
    params = [p for p in trainable.parameters() if p.grad is not None]
    for p in params:
        p.grad = None
    opt = Adam(params, lr=cfg.lr)

    val_subset = list(val_windows)
    if cfg.max_val_windows is not None and len(val_subset) > cfg.max_val_windows:
        idx = np.linspace(0, len(val_subset) - 1, cfg.max_val_windows).astype(int)
        val_subset = [val_subset[i] for i in idx]

    best_val = np.inf
    best_snapshot = [p.data.copy() for p in params]
    bad_epochs = 0
    rows = []
    epochs_run = 0

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(train_windows))
        if cfg.max_train_windows_per_epoch is not None:
            order = order[: cfg.max_train_windows_per_epoch]
        term_sums, term_counts = {}, {}
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_windows[i] for i in order[start : start + cfg.batch_size]]
            losses = []
            for sample in batch:
                loss, terms = trainable.sample_loss(sample)
                if not np.isfinite(float(loss.data)):
                    raise ContractError("non-finite training loss")
                losses.append(loss)
                for k, v in terms.items():
                    term_sums[k] = term_sums.get(k, 0.0) + v
                    term_counts[k] = term_counts.get(k, 0) + 1
            total = losses[0] if len(losses) == 1 else T.scale(
                _sum_tensors(losses), 1.0 / len(losses)
            )
            T.backward(total)
            opt.step()
        epochs_run = epoch + 1

        row = {k: term_sums[k] / term_counts[k] for k in term_sums}
        if val_subset:
            with T.no_grad():
                val = float(np.mean([trainable.val_loss(s) for s in val_subset]))
            row["val_l_f"] = val
            if val < best_val - 1e-12:
                best_val = val
                best_snapshot = [p.data.copy() for p in params]
                bad_epochs = 0
            else:
                bad_epochs += 1
        rows.append(row)
        if val_subset and bad_epochs > cfg.patience:
            break

    if val_subset:
        _restore(params, best_snapshot)
    else:
        best_val = rows[-1].get("l_f", rows[-1].get("l_total", np.nan))
    return TrainTrace(rows=rows, best_val=float(best_val), epochs_run=epochs_run)


def _sum_tensors(ts):
    acc = ts[0]
    for t in ts[1:]:
        acc = T.add(acc, t)
    return acc


def evaluate(trainable, windows, fingerprint="", train_losses=None) -> EvalReport:
    """MSE / MAE over every (window, channel, step) entry, in the original
    (de-normalized) scale. All windows are consumed; no final-batch drop."""
    if not windows:
        raise ContractError("empty evaluation window set")
    t0 = time.perf_counter()
    sq_sum = None
    abs_sum = None
    count = 0
    with T.no_grad():
        for sample in windows:
            pred = trainable.predict(sample)
            err = pred - sample.y_endo
            if sq_sum is None:
                sq_sum = np.zeros(err.shape[1])
                abs_sum = np.zeros(err.shape[1])
            sq_sum += (err ** 2).sum(axis=0)
            abs_sum += np.abs(err).sum(axis=0)
            count += err.shape[0]
    per_step_mse = sq_sum / count
    per_step_mae = abs_sum / count
    return EvalReport(
        mse=float(per_step_mse.mean()),
        mae=float(per_step_mae.mean()),
        per_step_mse=per_step_mse.tolist(),
        per_step_mae=per_step_mae.tolist(),
        n_windows=len(windows),
        wall_clock=time.perf_counter() - t0,
        fingerprint=fingerprint,
        train_losses=train_losses or {},
    )


# ---------------------------------------------------------------------------
# dataset plumbing


@dataclass
class DatasetBundle:
    train: list
    val: list
    test: list


def make_bundle(dataset: RawDataset, ratios, lookback, horizon) -> DatasetBundle:
    parts = split(dataset, ratios)
    return DatasetBundle(*(window(dataset, r, lookback, horizon) for r in parts))


def train_and_eval(dag_cfg: DagConfig, bundle: DatasetBundle, train_cfg: TrainConfig,
                   variant: VariantSpec = VariantSpec(),
                   variant_name="full") -> tuple:
    model = DagModel(dag_cfg)
    trainable = DagTrainable(model, variant)
    trace = train(trainable, bundle.train, bundle.val, train_cfg)
    fp = config_fingerprint(dag_cfg, train_cfg, variant_name)
    report = evaluate(trainable, bundle.test, fingerprint=fp,
                      train_losses=trace.rows[-1] if trace.rows else {})
    return model, report, trace


def run_ablation(dataset: RawDataset, ratios, dag_cfg: DagConfig,
                 train_cfg: TrainConfig) -> dict:
    """Train all six ablation variants with identical seeds and data."""
    bundle = make_bundle(dataset, ratios, dag_cfg.lookback, dag_cfg.horizon)
    reports = {}
    for v in AblationVariant:
        _, report, _ = train_and_eval(
            dag_cfg, bundle, train_cfg, variant_spec(v), variant_name=v.value
        )
        reports[v] = report
    return reports


# ---------------------------------------------------------------------------
# MLP-fusion baseline


class MlpFusionBaseline:
    """Linear backbone over flattened history, fused with the flattened
    future exogenous matrix through an MLP head. The backbone and head are
    trained jointly; inference consumes the future exogenous input."""

    def __init__(self, n_endo, n_exo, lookback, horizon, z_dim=32, hidden=64,
                 seed=0, normalize=True):
        from .embedding import uniform_init

        rng = np.random.default_rng(seed)
        self.n_endo, self.n_exo = n_endo, n_exo
        self.lookback, self.horizon = lookback, horizon
        self.normalize = normalize
        in_dim = (n_endo + n_exo) * lookback
        fuse_dim = z_dim + n_exo * horizon
        out_dim = n_endo * horizon
        self.backbone_w = Parameter(uniform_init(rng, in_dim, (in_dim, z_dim)),
                                    "baseline.backbone.w")
        self.backbone_b = Parameter(np.zeros(z_dim), "baseline.backbone.b")
        self.fuse_w1 = Parameter(uniform_init(rng, fuse_dim, (fuse_dim, hidden)),
                                 "baseline.fuse.w1")
        self.fuse_b1 = Parameter(np.zeros(hidden), "baseline.fuse.b1")
        self.fuse_w2 = Parameter(uniform_init(rng, hidden, (hidden, out_dim)),
                                 "baseline.fuse.w2")
        self.fuse_b2 = Parameter(np.zeros(out_dim), "baseline.fuse.b2")

    def parameters(self):
        return [self.backbone_w, self.backbone_b,
                self.fuse_w1, self.fuse_b1, self.fuse_w2, self.fuse_b2]

    def _forward(self, sample: WindowedSample):
        if self.normalize:
            endo_stats = NormStats.from_lookback(sample.x_endo)
            exo_stats = NormStats.from_lookback(sample.x_exo)
            xn_endo = endo_stats.apply(sample.x_endo)
            xn_exo = exo_stats.apply(sample.x_exo)
            yn_exo = exo_stats.apply(sample.y_exo)
        else:
            endo_stats = None
            xn_endo, xn_exo, yn_exo = sample.x_endo, sample.x_exo, sample.y_exo
        hist = np.concatenate([xn_endo.ravel(), xn_exo.ravel()])[None, :]
        z = T.add(T.matmul(Tensor(hist), self.backbone_w), self.backbone_b)
        fuse_in = T.concat([z, Tensor(yn_exo.ravel()[None, :])], axis=1)
        h = T.relu(T.add(T.matmul(fuse_in, self.fuse_w1), self.fuse_b1))
        pred = T.add(T.matmul(h, self.fuse_w2), self.fuse_b2)
        pred = T.reshape(pred, (self.n_endo, self.horizon))
        return pred, endo_stats

    def sample_loss(self, sample: WindowedSample):
        pred, endo_stats = self._forward(sample)
        yn = endo_stats.apply(sample.y_endo) if endo_stats else sample.y_endo
        loss = T.l1_loss(pred, Tensor(yn))
        return loss, {"l_f": float(loss.data)}

    def val_loss(self, sample):
        return self.sample_loss(sample)[1]["l_f"]

    def predict(self, sample: WindowedSample) -> np.ndarray:
        pred, endo_stats = self._forward(sample)
        return endo_stats.invert(pred.data) if endo_stats else pred.data.copy()


def run_baseline_mlp_fusion(dataset: RawDataset, ratios, lookback, horizon,
                            train_cfg: TrainConfig, normalize=True,
                            seed=None) -> EvalReport:
    bundle = make_bundle(dataset, ratios, lookback, horizon)
    baseline = MlpFusionBaseline(
        dataset.endo_count, dataset.exo_count, lookback, horizon,
        seed=train_cfg.seed if seed is None else seed, normalize=normalize,
    )
    trace = train(baseline, bundle.train, bundle.val, train_cfg)
    fp = config_fingerprint(train_cfg, "mlp_fusion_baseline")
    return evaluate(baseline, bundle.test, fingerprint=fp,
                    train_losses=trace.rows[-1] if trace.rows else {})


# ---------------------------------------------------------------------------
# lookback sweep


def lookback_sweep(dataset: RawDataset, ratios, lookbacks, horizon,
                   dag_cfg_base: DagConfig, train_cfg: TrainConfig) -> list:
    """One (H, report-or-skip-reason) row per requested lookback."""
    rows = []
    for h in lookbacks:
        cfg = DagConfig(
            n_endo=dag_cfg_base.n_endo, n_exo=dag_cfg_base.n_exo,
            lookback=h, horizon=horizon,
            d_model=dag_cfg_base.d_model,
            patch_len=min(dag_cfg_base.patch_len, h),
            n_layers=dag_cfg_base.n_layers, n_heads=dag_cfg_base.n_heads,
            d_ff=dag_cfg_base.d_ff, d_gate=dag_cfg_base.d_gate,
            lambda1=dag_cfg_base.lambda1, lambda2=dag_cfg_base.lambda2,
            double_softmax=dag_cfg_base.double_softmax,
            normalize=dag_cfg_base.normalize, seed=dag_cfg_base.seed,
        )
        try:
            bundle = make_bundle(dataset, ratios, h, horizon)
            if not bundle.train or not bundle.test:
                rows.append({"lookback": h, "skipped": "split too short"})
                continue
            _, report, _ = train_and_eval(cfg, bundle, train_cfg,
                                          variant_name=f"H{h}")
            rows.append({"lookback": h, "report": report})
        except ContractError as exc:
            rows.append({"lookback": h, "skipped": str(exc)})
    return rows
