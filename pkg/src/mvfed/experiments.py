"""Experiment runner: run configs, splits, training modes and reports.

A RunConfig names one training mode, a data source (generator recipe or
a dataset directory), the hyperparameters and the repeat schedule.
run_experiment executes every repeat with seed + r (repeat r regenerates
the data with the shifted seed and trains with it too, so repeats vary
both the draw and the initialization) and collects one metrics row per
repeat into a MetricsReport.

Flat modes train on the train split and score the held-out test split.
Per-client modes (mv_local and the local sequential baselines) evaluate
every client's model on the same global test split and average the
per-client rows, which is what the federated variants are compared
against.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from .data import (
    GeneratorSpec,
    SeqGeneratorSpec,
    _float_rows,
    _parse_float,
    _parse_int,
    _read_csv,
    _read_manifest,
    _write_csv,
    _write_manifest,
    gen_complementary,
    gen_multiview,
    gen_sequences,
    load_dataset,
    load_sequences,
    partition_horizontal,
    partition_sequences,
)
from .errors import ConfigError, ShapeError
from .hfed import DEFAULT_MAX_LOCAL, DEFAULT_ROUNDS, hfed_train
from .metrics import MetricsReport, MetricsRow, average_rows, compute_metrics
from .mvl import (
    HyperParams,
    MultiViewDataset,
    argmax_decode,
    predict_mvl,
    train_mvl,
    train_single_view,
)
from .numerics import KEY_DATA, KEY_ENCODER, make_rng
from .sfed import (
    EncoderArch,
    SequenceClientData,
    SequenceDataset,
    TrainerConfig,
    extract_features,
    local_training,
    sfed_train,
)
from .vfed import vfed_predict, vfed_train

FLAT_MODES = ("mvl", "single_view", "pairwise", "vfed", "hfed", "mv_local")
SEQ_MODES = ("sfed", "local_seq_localmv", "local_seq_hfed", "central_seq_hfed")
MODES = FLAT_MODES + SEQ_MODES

# Modes whose coupling weights the validation grid may tune.  single_view
# has no zeta/eta, and the sequential pipelines bury the consensus stage
# behind encoder training, so the grid is rejected for them.
GRID_MODES = ("mvl", "pairwise", "vfed", "hfed", "mv_local")
GRID_EXPONENTS = tuple(range(6))

GENERATORS = ("multiview", "complementary")


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment run depends on."""

    mode: str
    hp: HyperParams
    trainer: TrainerConfig = TrainerConfig()
    spec: GeneratorSpec | None = None
    generator: str = "multiview"
    seq_spec: SeqGeneratorSpec | None = None
    data_dir: str | None = None
    n_clients: int = 4
    view_mask: tuple[int, ...] | None = None
    repeats: int = 10
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    positive_class: int = 1
    embed_dim: int = 8
    rounds: int = DEFAULT_ROUNDS
    max_local: int = DEFAULT_MAX_LOCAL
    grid: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: unknown mode {self.mode!r}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator: unknown generator {self.generator!r}")
        if self.repeats < 1:
            raise ConfigError(f"repeats: must be >= 1, got {self.repeats}")
        if self.n_clients < 1:
            raise ConfigError(f"n_clients: must be >= 1, got {self.n_clients}")
        if self.embed_dim < 1:
            raise ConfigError(f"embed_dim: must be >= 1, got {self.embed_dim}")
        if self.rounds < 1:
            raise ConfigError(f"rounds: must be >= 1, got {self.rounds}")
        if self.max_local < 1:
            raise ConfigError(f"max_local: must be >= 1, got {self.max_local}")
        if self.positive_class < 0:
            raise ConfigError("positive_class: must be a class index >= 0")
        split = tuple(float(f) for f in self.split)
        if len(split) != 3 or any(f <= 0 for f in split):
            raise ConfigError(f"split: need three positive fractions, got {split}")
        if abs(sum(split) - 1.0) > 1e-9:
            raise ConfigError(f"split: fractions sum to {sum(split)!r}, not 1")
        object.__setattr__(self, "split", split)
        if self.view_mask is not None:
            mask = tuple(int(k) for k in self.view_mask)
            if not mask or any(k < 0 for k in mask):
                raise ConfigError(f"view_mask: bad view indices {mask}")
            if len(set(mask)) != len(mask) or list(mask) != sorted(mask):
                raise ConfigError(
                    f"view_mask: indices must be strictly increasing, got {mask}"
                )
            object.__setattr__(self, "view_mask", mask)
        if self.grid and self.mode not in GRID_MODES:
            raise ConfigError(
                f"grid: mode {self.mode!r} has no coupling weights to tune"
            )
        sequential = self.mode in SEQ_MODES
        if sequential:
            if self.spec is not None:
                raise ConfigError(
                    f"spec: sequential mode {self.mode!r} takes seq_spec or data_dir"
                )
            sources = (self.seq_spec is not None) + (self.data_dir is not None)
        else:
            if self.seq_spec is not None:
                raise ConfigError(
                    f"seq_spec: flat mode {self.mode!r} takes spec or data_dir"
                )
            sources = (self.spec is not None) + (self.data_dir is not None)
        if sources != 1:
            raise ConfigError(
                "data source: exactly one of a generator spec and data_dir "
                f"is required, got {sources}"
            )

    @property
    def is_sequential(self) -> bool:
        return self.mode in SEQ_MODES


@dataclass
class ExperimentResult:
    """Report plus the provenance needed to reproduce it."""

    config: RunConfig
    report: MetricsReport
    seeds: list[int]
    data_seeds: list[int]
    grid_choices: list[tuple[float, float]] | None


def split_indices(
    classes: np.ndarray, n_classes: int, fractions, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stratified train/validation/test index split, each sorted.

    Cut points round per class, so each class lands in each part in
    proportion to the fractions (up to one sample).
    """
    rng = make_rng(seed, KEY_DATA, 6)
    parts: tuple[list, list, list] = ([], [], [])
    for c in range(n_classes):
        members = np.flatnonzero(np.asarray(classes) == c)
        rng.shuffle(members)
        n_c = members.shape[0]
        c1 = int(round(fractions[0] * n_c))
        c2 = int(round((fractions[0] + fractions[1]) * n_c))
        parts[0].extend(members[:c1].tolist())
        parts[1].extend(members[c1:c2].tolist())
        parts[2].extend(members[c2:].tolist())
    train, val, test = (np.array(sorted(p), dtype=np.int64) for p in parts)
    if train.size == 0 or test.size == 0:
        raise ConfigError(
            f"split: {fractions} leaves an empty train or test part "
            f"on {len(classes)} samples"
        )
    return train, val, test


def _resolve_mask(cfg: RunConfig, n_views: int) -> tuple[int, ...]:
    mask = cfg.view_mask if cfg.view_mask is not None else tuple(range(n_views))
    if any(k >= n_views for k in mask):
        raise ConfigError(f"view_mask: {mask} out of range for {n_views} views")
    if cfg.mode == "single_view" and len(mask) != 1:
        raise ConfigError(
            f"view_mask: single_view needs exactly one view, got {len(mask)}"
        )
    if cfg.mode == "pairwise" and len(mask) != 2:
        raise ConfigError(
            f"view_mask: pairwise needs exactly two views, got {len(mask)}"
        )
    return mask


def _mask_hp(hp: HyperParams, mask: tuple[int, ...], n_views: int) -> HyperParams:
    """Align the hyperparameters with the selected views.

    Accepts weights given for the full view set (subset along the mask)
    or already matching the masked width.
    """
    if hp.n_views == n_views:
        if mask == tuple(range(n_views)):
            return hp
        return dataclasses.replace(
            hp,
            beta=tuple(hp.beta[k] for k in mask),
            zeta=tuple(hp.zeta[k] for k in mask),
        )
    if hp.n_views == len(mask):
        return hp
    raise ConfigError(
        f"hp: covers {hp.n_views} views, data has {n_views} and the mask "
        f"keeps {len(mask)}"
    )


def _flat_data(cfg: RunConfig, provided, r: int) -> MultiViewDataset:
    if provided is not None:
        return provided
    spec_r = dataclasses.replace(cfg.spec, seed=cfg.spec.seed + r)
    if cfg.generator == "complementary":
        return gen_complementary(spec_r)
    return gen_multiview(spec_r)


def _seq_data(cfg: RunConfig, provided, r: int) -> SequenceClientData:
    if provided is not None:
        return provided
    spec_r = dataclasses.replace(cfg.seq_spec, seed=cfg.seq_spec.seed + r)
    return gen_sequences(spec_r)


def _score_transforms(
    mode: str, transforms, views, hp: HyperParams
) -> np.ndarray:
    if mode == "single_view":
        return views[0] @ transforms[0]
    if mode == "vfed":
        return vfed_predict(
            views, transforms, hp.zeta, tol=hp.tol, max_rounds=hp.max_outer
        )
    return predict_mvl(views, transforms, hp.zeta, tol=hp.tol, max_outer=hp.max_outer)


def _eval_transforms(
    mode: str, transforms, data: MultiViewDataset, hp: HyperParams, positive: int
) -> MetricsRow:
    scores = _score_transforms(mode, transforms, data.views, hp)
    pred = argmax_decode(scores)
    return compute_metrics(pred, data.class_indices(), positive_class=positive)


def _fit_flat(cfg: RunConfig, train: MultiViewDataset, hp: HyperParams, seed: int):
    """Global transforms for the single-model flat modes."""
    if cfg.mode in ("mvl", "pairwise"):
        state, _ = train_mvl(train, hp, seed)
        return state.W
    if cfg.mode == "single_view":
        w = train_single_view(
            train.views[0], train.labels, beta=hp.beta[0],
            epsilon=hp.epsilon, max_inner=hp.max_inner, tol=hp.tol,
        )
        return [w]
    if cfg.mode == "vfed":
        return vfed_train(train, hp, seed).transforms
    if cfg.mode == "hfed":
        shards = partition_horizontal(train, cfg.n_clients, stratified=True, seed=seed)
        return hfed_train(
            shards, hp, seed, rounds=cfg.rounds, max_local=cfg.max_local
        ).transforms
    raise ConfigError(f"mode: {cfg.mode!r} does not produce one global model")


def _run_flat(
    cfg: RunConfig,
    train: MultiViewDataset,
    eval_data: MultiViewDataset,
    hp: HyperParams,
    seed: int,
) -> MetricsRow:
    """Train one flat mode and score it on eval_data."""
    if cfg.mode == "mv_local":
        shards = partition_horizontal(train, cfg.n_clients, stratified=True, seed=seed)
        rows = []
        for shard in shards:
            local = hfed_train(
                [shard], hp, seed, rounds=cfg.rounds, max_local=cfg.max_local
            ).transforms
            rows.append(
                _eval_transforms("mv_local", local, eval_data, hp, cfg.positive_class)
            )
        return average_rows(rows)
    transforms = _fit_flat(cfg, train, hp, seed)
    return _eval_transforms(cfg.mode, transforms, eval_data, hp, cfg.positive_class)


def _grid_candidates(hp: HyperParams):
    for ze, ee in product(GRID_EXPONENTS, GRID_EXPONENTS):
        yield dataclasses.replace(
            hp, zeta=(2.0 ** ze,) * hp.n_views, eta=2.0 ** ee
        )


def _flat_repeat(
    cfg: RunConfig, data: MultiViewDataset, seed: int
) -> tuple[MetricsRow, tuple[float, float] | None]:
    mask = _resolve_mask(cfg, data.n_views)
    hp = _mask_hp(cfg.hp, mask, data.n_views)
    masked = data.select_views(mask)
    tr, va, te = split_indices(
        masked.class_indices(), masked.n_classes, cfg.split, seed
    )
    train, val, test = masked.subset(tr), masked.subset(va), masked.subset(te)
    if not cfg.grid:
        return _run_flat(cfg, train, test, hp, seed), None
    if val.n_samples == 0:
        raise ConfigError("split: the grid needs a non-empty validation part")
    best_hp, best_acc = None, -1.0
    for candidate in _grid_candidates(hp):
        row = _run_flat(cfg, train, val, candidate, seed)
        if row.accuracy > best_acc:
            best_hp, best_acc = candidate, row.accuracy
    chosen = (best_hp.zeta[0], best_hp.eta)
    return _run_flat(cfg, train, test, best_hp, seed), chosen


def _local_encoder(
    data: SequenceDataset,
    arch: EncoderArch,
    trainer: TrainerConfig,
    view: int,
    client: int,
) -> np.ndarray:
    """Train one encoder with no communication, matching the federated
    compute budget (rounds times local epochs) and initialization."""
    w = arch.init_params(trainer.seed, KEY_ENCODER, view)
    epochs = trainer.local_epochs * trainer.max_rounds
    if epochs == 0:
        return w
    solo = dataclasses.replace(trainer, local_epochs=epochs)
    return local_training(data, arch, w, solo, seed_key=(client, view, 0))


def _feature_dataset(
    bundle: SequenceClientData, archs, params, n_classes: int
) -> MultiViewDataset:
    views = [
        extract_features(archs[k], params[k], bundle.views[k])
        for k in range(len(archs))
    ]
    return MultiViewDataset.from_class_indices(views, bundle.y, n_classes=n_classes)


def _seq_repeat(cfg: RunConfig, bundle: SequenceClientData, seed: int) -> MetricsRow:
    mask = _resolve_mask(cfg, bundle.n_views)
    hp = _mask_hp(cfg.hp, mask, bundle.n_views)
    masked = bundle.select_views(mask)
    n_classes = masked.views[0].n_classes
    tr, _, te = split_indices(masked.y, n_classes, cfg.split, seed)
    train_b, test_b = masked.subset(tr), masked.subset(te)
    clients = partition_sequences(train_b, cfg.n_clients, stratified=True, seed=seed)
    trainer = dataclasses.replace(cfg.trainer, seed=seed)
    k_views = train_b.n_views
    archs = [
        EncoderArch(
            n_features=train_b.views[k].n_features,
            embed_dim=cfg.embed_dim,
            n_classes=n_classes,
        )
        for k in range(k_views)
    ]

    if cfg.mode == "sfed":
        res = sfed_train(clients, trainer, embed_dim=cfg.embed_dim)
        params = res.params
        per_client = [params] * len(clients)
    elif cfg.mode == "central_seq_hfed":
        pooled = [
            SequenceDataset(
                sequences=[s for c in clients for s in c.views[k].sequences],
                y=np.concatenate([c.y for c in clients]),
                n_classes=n_classes,
            )
            for k in range(k_views)
        ]
        params = [
            _local_encoder(pooled[k], archs[k], trainer, view=k, client=0)
            for k in range(k_views)
        ]
        per_client = [params] * len(clients)
    else:
        per_client = [
            [
                _local_encoder(c.views[k], archs[k], trainer, view=k, client=l)
                for k in range(k_views)
            ]
            for l, c in enumerate(clients)
        ]
        params = None

    feature_sets = [
        _feature_dataset(c, archs, per_client[l], n_classes)
        for l, c in enumerate(clients)
    ]

    if cfg.mode == "local_seq_localmv":
        rows = []
        for l in range(len(clients)):
            local_w = hfed_train(
                [feature_sets[l]], hp, seed,
                rounds=cfg.rounds, max_local=cfg.max_local,
            ).transforms
            test_feats = _feature_dataset(test_b, archs, per_client[l], n_classes)
            rows.append(
                _eval_transforms("mvl", local_w, test_feats, hp, cfg.positive_class)
            )
        return average_rows(rows)

    shared_w = hfed_train(
        feature_sets, hp, seed, rounds=cfg.rounds, max_local=cfg.max_local
    ).transforms
    if cfg.mode in ("sfed", "central_seq_hfed"):
        test_feats = _feature_dataset(test_b, archs, params, n_classes)
        return _eval_transforms("mvl", shared_w, test_feats, hp, cfg.positive_class)
    # local_seq_hfed: shared consensus transforms, but every client can
    # only embed the test rows with its own encoders.
    rows = []
    for l in range(len(clients)):
        test_feats = _feature_dataset(test_b, archs, per_client[l], n_classes)
        rows.append(
            _eval_transforms("mvl", shared_w, test_feats, hp, cfg.positive_class)
        )
    return average_rows(rows)


def run_experiment(
    cfg: RunConfig, dataset=None, sequences=None
) -> ExperimentResult:
    """Execute every repeat of the configured experiment.

    A dataset (or sequence bundle) passed in directly, or loaded from
    cfg.data_dir, is reused across repeats with varying splits; with a
    generator spec each repeat regenerates at the shifted seed.
    """
    generated = dataset is None and sequences is None and cfg.data_dir is None
    if cfg.data_dir is not None and dataset is None and sequences is None:
        if cfg.is_sequential:
            sequences = load_sequences(cfg.data_dir)
        else:
            dataset = load_dataset(cfg.data_dir)
    rows: list[MetricsRow] = []
    seeds: list[int] = []
    data_seeds: list[int] = []
    choices: list[tuple[float, float]] = []
    for r in range(cfg.repeats):
        seed_r = cfg.seed + r
        seeds.append(seed_r)
        if cfg.is_sequential:
            if dataset is not None:
                raise ConfigError(
                    f"data source: mode {cfg.mode!r} needs sequence data"
                )
            bundle = _seq_data(cfg, sequences, r)
            rows.append(_seq_repeat(cfg, bundle, seed_r))
        else:
            if sequences is not None:
                raise ConfigError(
                    f"data source: mode {cfg.mode!r} needs flat view matrices"
                )
            data = _flat_data(cfg, dataset, r)
            row, chosen = _flat_repeat(cfg, data, seed_r)
            rows.append(row)
            if chosen is not None:
                choices.append(chosen)
        if generated:
            base = cfg.spec.seed if cfg.spec is not None else cfg.seq_spec.seed
            data_seeds.append(base + r)
    report = MetricsReport(mode=cfg.mode, rows=rows)
    return ExperimentResult(
        config=cfg,
        report=report,
        seeds=seeds,
        data_seeds=data_seeds,
        grid_choices=choices if cfg.grid else None,
    )


@dataclass
class ModelBundle:
    """A trained set of view transforms plus what prediction needs."""

    transforms: list[np.ndarray]
    zeta: tuple[float, ...]
    single: bool
    positive_class: int = 1

    def __post_init__(self):
        self.zeta = tuple(float(z) for z in self.zeta)
        if len(self.transforms) != len(self.zeta):
            raise ConfigError(
                f"model: {len(self.transforms)} transforms vs "
                f"{len(self.zeta)} zeta entries"
            )
        if self.single and len(self.transforms) != 1:
            raise ConfigError("model: a single-view model holds one transform")

    def predict(self, views) -> np.ndarray:
        if self.single:
            scores = views[0] @ self.transforms[0]
        else:
            scores = predict_mvl(views, self.transforms, self.zeta)
        return argmax_decode(scores)


def train_once(cfg: RunConfig, dataset=None) -> tuple[ModelBundle, MetricsRow]:
    """One train/test repeat at cfg.seed, returning the fitted model.

    Only the flat modes that end in one global model support this; the
    per-client and sequential pipelines have no single artifact to save.
    """
    if cfg.mode not in ("mvl", "pairwise", "single_view", "vfed", "hfed"):
        raise ConfigError(f"mode: {cfg.mode!r} does not produce one global model")
    if dataset is None:
        if cfg.data_dir is not None:
            dataset = load_dataset(cfg.data_dir)
        else:
            dataset = _flat_data(cfg, None, 0)
    mask = _resolve_mask(cfg, dataset.n_views)
    hp = _mask_hp(cfg.hp, mask, dataset.n_views)
    masked = dataset.select_views(mask)
    tr, _, te = split_indices(masked.class_indices(), masked.n_classes, cfg.split, cfg.seed)
    train, test = masked.subset(tr), masked.subset(te)
    transforms = _fit_flat(cfg, train, hp, cfg.seed)
    model = ModelBundle(
        transforms=transforms,
        zeta=hp.zeta,
        single=cfg.mode == "single_view",
        positive_class=cfg.positive_class,
    )
    row = evaluate_model(model, test)
    return model, row


def evaluate_model(model: ModelBundle, data: MultiViewDataset) -> MetricsRow:
    pred = model.predict(data.views)
    return compute_metrics(pred, data.class_indices(), model.positive_class)


def save_model(model: ModelBundle, path: str) -> None:
    """Persist a model as one CSV per transform plus a manifest."""
    os.makedirs(path, exist_ok=True)
    k = len(model.transforms)
    classes = model.transforms[0].shape[1]
    entries = {"views": k, "classes": classes, "single": int(model.single),
               "positive_class": model.positive_class}
    for i, w in enumerate(model.transforms):
        if w.ndim != 2 or w.shape[1] != classes:
            raise ShapeError(f"transform {i} has shape {w.shape}")
        entries[f"dim_{i}"] = w.shape[0]
        header = [f"c{j}" for j in range(classes)]
        _write_csv(os.path.join(path, f"transform_{i}.csv"), header, _float_rows(w))
    _write_csv(
        os.path.join(path, "zeta.csv"),
        [f"z{i}" for i in range(k)],
        [[repr(float(z)) for z in model.zeta]],
    )
    _write_manifest(os.path.join(path, "manifest.txt"), entries)


def load_model(path: str) -> ModelBundle:
    manifest = _read_manifest(os.path.join(path, "manifest.txt"))
    k = manifest["views"]
    classes = manifest["classes"]
    transforms = []
    for i in range(k):
        name = os.path.join(path, f"transform_{i}.csv")
        header = [f"c{j}" for j in range(classes)]
        rows = _read_csv(name, header)
        dim = manifest[f"dim_{i}"]
        if len(rows) != dim:
            raise ShapeError(f"{name}: expected {dim} rows, found {len(rows)}")
        transforms.append(
            np.array(
                [
                    [_parse_float(name, r + 2, j, v) for j, v in enumerate(row)]
                    for r, row in enumerate(rows)
                ]
            )
        )
    zeta_path = os.path.join(path, "zeta.csv")
    zeta_rows = _read_csv(zeta_path, [f"z{i}" for i in range(k)])
    if len(zeta_rows) != 1:
        raise ShapeError(f"{zeta_path}: expected one row, found {len(zeta_rows)}")
    zeta = [_parse_float(zeta_path, 2, j, v) for j, v in enumerate(zeta_rows[0])]
    return ModelBundle(
        transforms=transforms,
        zeta=tuple(zeta),
        single=bool(manifest["single"]),
        positive_class=manifest["positive_class"],
    )


def export_embeddings(matrix: np.ndarray, y: np.ndarray, path: str) -> None:
    """Write per-sample embedding rows with a trailing class column."""
    matrix = np.asarray(matrix, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if matrix.ndim != 2 or y.ndim != 1 or matrix.shape[0] != y.shape[0]:
        raise ShapeError(
            f"embeddings {matrix.shape} do not align with labels {y.shape}"
        )
    header = [f"e{j}" for j in range(matrix.shape[1])] + ["class"]
    rows = (
        [repr(float(v)) for v in row] + [str(int(label))]
        for row, label in zip(matrix, y)
    )
    _write_csv(path, header, rows)


def load_embeddings(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of export_embeddings; exact for finite doubles."""
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
    header = first.split(",")
    if not header or header[-1] != "class":
        raise ShapeError(f"{path}: expected a trailing class column")
    dim = len(header) - 1
    expected = [f"e{j}" for j in range(dim)] + ["class"]
    rows = _read_csv(path, expected)
    matrix = np.zeros((len(rows), dim))
    y = np.zeros(len(rows), dtype=np.int64)
    for r, row in enumerate(rows):
        for j in range(dim):
            matrix[r, j] = _parse_float(path, r + 2, j, row[j])
        y[r] = _parse_int(path, r + 2, dim, row[dim])
    return matrix, y


def compute_embeddings(
    cfg: RunConfig, dataset=None, sequences=None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample embedding matrix and labels for the export command.

    mvl and vfed train on the full dataset and export the consensus
    rows; sfed trains the federated encoders and exports the per-view
    features side by side.
    """
    if cfg.mode in ("mvl", "vfed"):
        if dataset is None:
            dataset = (
                load_dataset(cfg.data_dir)
                if cfg.data_dir is not None
                else _flat_data(cfg, None, 0)
            )
        mask = _resolve_mask(cfg, dataset.n_views)
        hp = _mask_hp(cfg.hp, mask, dataset.n_views)
        masked = dataset.select_views(mask)
        if cfg.mode == "vfed":
            consensus = vfed_train(masked, hp, cfg.seed).consensus
        else:
            state, _ = train_mvl(masked, hp, cfg.seed)
            consensus = state.Z
        return consensus, masked.class_indices()
    if cfg.mode == "sfed":
        if sequences is None:
            sequences = (
                load_sequences(cfg.data_dir)
                if cfg.data_dir is not None
                else _seq_data(cfg, None, 0)
            )
        mask = _resolve_mask(cfg, sequences.n_views)
        masked = sequences.select_views(mask)
        clients = partition_sequences(
            masked, cfg.n_clients, stratified=True, seed=cfg.seed
        )
        trainer = dataclasses.replace(cfg.trainer, seed=cfg.seed)
        res = sfed_train(clients, trainer, embed_dim=cfg.embed_dim)
        feats = [
            extract_features(res.archs[k], res.params[k], masked.views[k])
            for k in range(masked.n_views)
        ]
        return np.hstack(feats), masked.y.copy()
    raise ConfigError(f"mode: {cfg.mode!r} has no per-sample embedding to export")
