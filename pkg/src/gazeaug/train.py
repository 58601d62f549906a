"""Desk-scale contrastive pre-training and linear-probe evaluation.

The loop is deliberately small and exactly reproducible: pairs come from
the augmentation engine under per-(image, epoch) derived seeds, parameter
updates are plain SGD with momentum under a linear-warmup + cosine-decay
schedule, and both objectives use the analytic gradients from
:mod:`gazeaug.losses` (validated by :func:`grad_check`).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentSpec, FocusConfig, generate_pair
from .encoder import (
    EncoderState,
    backward_encoder,
    backward_normalize,
    calibrate_features,
    encode_batch,
    forward_encoder,
    init_encoder,
    normalize_rows,
)
from .errors import GazeAugError, RejectionFailure
from .geometry import resize_bilinear
from .losses import byol_loss, ema_update, info_nce_loss
from .rng import derive_rng

TRAIN_MODES = ("infonce", "byol")


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "infonce"
    batch_size: int = 128
    epochs: int = 100
    temperature: float = 0.2
    ema_momentum: float = 0.99
    base_lr: float = 0.1
    weight_decay: float = 1.5e-6
    warmup_epochs: int = 10
    sgd_momentum: float = 0.9
    seed: int = 0
    input_px: int = 64
    channels: tuple = (8, 16)
    embed_dim: int = 32
    predictor_hidden: int = 64

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ValueError(f"unknown training mode '{self.mode}'")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0.0 < self.ema_momentum < 1.0:
            raise ValueError("ema_momentum must be in (0,1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        object.__setattr__(self, "channels", tuple(self.channels))


@dataclass
class PretrainResult:
    state: EncoderState
    log: list  # one dict per epoch: epoch, loss, lr, reject_rate, attempts_mean


@dataclass
class ProbeResult:
    accuracy: float
    mae: float
    per_class: np.ndarray  # confusion counts, rows = true grade


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Learning rate for a 1-based epoch index: linear warm-up to the peak
    at `warmup_epochs`, then cosine decay to zero at the final epoch."""
    warmup = min(config.warmup_epochs, config.epochs)
    if epoch <= warmup:
        return config.base_lr * epoch / warmup
    span = config.epochs - warmup
    progress = (epoch - warmup) / span
    return config.base_lr * 0.5 * (1.0 + np.cos(np.pi * progress))


def _prepare_sample(sample, input_px):
    image = np.asarray(sample.image, dtype=np.float64)
    saliency = np.asarray(sample.saliency, dtype=np.float64)
    if image.shape != (input_px, input_px):
        image = resize_bilinear(image, input_px, input_px)
        saliency = resize_bilinear(saliency, input_px, input_px)
        peak = saliency.max()
        if peak > 0:
            saliency = saliency / peak
    return sample.image_id, image, saliency


def _infonce_step(state, v1, v2, temperature):
    z1_raw, cache1 = forward_encoder(state, v1, batch_stats=True)
    z2_raw, cache2 = forward_encoder(state, v2, batch_stats=True)
    z1, n1, d1 = normalize_rows(z1_raw)
    z2, n2, d2 = normalize_rows(z2_raw)
    loss, dz1, dz2 = info_nce_loss(z1, z2, temperature)
    g1 = backward_encoder(state, cache1, backward_normalize(dz1, z1_raw, n1, d1))
    g2 = backward_encoder(state, cache2, backward_normalize(dz2, z2_raw, n2, d2))
    return loss, {k: g1[k] + g2[k] for k in g1}


def pretrain(config: TrainConfig, dataset, mode: str = "focus",
             spec: AugmentSpec = None, focus: FocusConfig = None,
             workers: int = 1) -> PretrainResult:
    """Contrastive pre-training over a dataset of (image, saliency) samples.

    `mode` selects the augmentation policy passed to generate_pair. Samples
    whose gated augmentation exhausts its retries are skipped and counted;
    an epoch whose rejection rate exceeds 50% aborts with a diagnostic,
    since that always indicates a saliency/config mismatch.

    Zero epochs returns the raw initialization untouched: the whitening
    calibration below is the first act of training, not of construction.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    spec = spec or AugmentSpec()
    focus = focus or FocusConfig()
    prepared = [_prepare_sample(s, config.input_px) for s in dataset]

    state = init_encoder(
        config.seed,
        input_px=config.input_px,
        channels=config.channels,
        embed_dim=config.embed_dim,
        predictor_hidden=config.predictor_hidden,
        with_predictor=(config.mode == "byol"),
    )
    if config.epochs == 0:
        return PretrainResult(state=state, log=[])
    # data-dependent init: whiten pooled features against the *augmented*
    # view distribution (clean-image statistics misfit masked/rotated views
    # badly enough to collapse every view embedding to one point)
    calib_views = []
    for i, (image_id, image, saliency) in enumerate(prepared[:128]):
        rng = derive_rng(config.seed, "calibration", image_id)
        try:
            pair = generate_pair(image, saliency, mode, spec, focus, rng)
            calib_views.append(pair.v1)
        except RejectionFailure:
            continue
    if not calib_views:
        raise GazeAugError("calibration failed: every augmentation attempt was rejected")
    calib_views = np.stack(calib_views)
    calibrate_features(state, calib_views)
    target_params = None
    if config.mode == "byol":
        target_params = {k: state.params[k].copy() for k in state.encoder_param_names()}

    velocity = {k: np.zeros_like(v) for k, v in state.params.items()}
    log = []

    def make_pair(args):
        image_id, image, saliency, epoch = args
        rng = derive_rng(config.seed, "pair", image_id, epoch)
        try:
            pair = generate_pair(image, saliency, mode, spec, focus, rng)
            return pair.v1, pair.v2, pair.attempts
        except RejectionFailure:
            return None

    for epoch in range(1, config.epochs + 1):
        order = derive_rng(config.seed, "epoch-shuffle", epoch).permutation(len(prepared))
        jobs = [(*prepared[i], epoch) for i in order]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(make_pair, jobs))
        else:
            results = [make_pair(j) for j in jobs]

        rejected = sum(1 for r in results if r is None)
        reject_rate = rejected / len(results)
        if reject_rate > 0.5:
            raise GazeAugError(
                f"epoch {epoch}: rejection rate {reject_rate:.0%} exceeds 50%; "
                "the saliency maps and gate thresholds are incompatible "
                "(e.g. near-uniform saliency with a zoom-in crop gate)"
            )
        kept = [r for r in results if r is not None]
        attempts_mean = float(np.mean([r[2] for r in kept])) if kept else 0.0

        lr = lr_at(config, epoch)
        losses = []
        for start in range(0, len(kept), config.batch_size):
            batch = kept[start : start + config.batch_size]
            if len(batch) < 2:
                continue
            v1 = np.stack([b[0] for b in batch])
            v2 = np.stack([b[1] for b in batch])
            if config.mode == "infonce":
                loss, grads = _infonce_step(state, v1, v2, config.temperature)
            else:
                loss, grads = byol_loss(state, target_params, v1, v2, batch_stats=True)
            losses.append(loss)
            for name, grad in grads.items():
                grad = grad + config.weight_decay * state.params[name]
                velocity[name] = config.sgd_momentum * velocity[name] + grad
                state.params[name] -= lr * velocity[name]
            if config.mode == "byol":
                target_params = ema_update(target_params, state, config.ema_momentum)

        log.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(losses)) if losses else float("nan"),
                "lr": float(lr),
                "reject_rate": float(reject_rate),
                "attempts_mean": attempts_mean,
            }
        )
    # refresh the running whitening statistics against the final weights so
    # evaluation-mode encoding matches what training converged to
    calibrate_features(state, calib_views)
    return PretrainResult(state=state, log=log)


# ---------------------------------------------------------------------------
# linear probing

def fit_linear_probe(features, labels, n_classes, l2: float = 1e-4,
                     iters: int = 500, lr: float = 2.0):
    """Multinomial logistic regression by full-batch gradient descent.

    Tiny feature dimensions make this exact enough without an external
    solver. Returns (weights, bias).
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n, d = x.shape
    w = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(iters):
        logits = x @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        delta = (p - onehot) / n
        gw = delta.T @ x + l2 * w
        gb = delta.sum(axis=0)
        w -= lr * gw
        b -= lr * gb
    return w, b


def _evaluate_probe(w, b, features, labels, n_classes) -> ProbeResult:
    logits = features @ w.T + b
    pred = logits.argmax(axis=1)
    labels = np.asarray(labels)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    return ProbeResult(
        accuracy=float((pred == labels).mean()),
        mae=float(np.abs(pred - labels).mean()),
        per_class=confusion,
    )


def _stratified_indices(labels, fraction, rng):
    labels = np.asarray(labels)
    picked = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        take = int(round(fraction * len(idx)))
        if take < 1:
            raise GazeAugError(
                f"label fraction {fraction} leaves class {cls} empty ({len(idx)} samples)"
            )
        picked.append(rng.permutation(idx)[:take])
    return np.sort(np.concatenate(picked))


def linear_probe(state: EncoderState, train_samples, test_samples,
                 label_fraction: float = 1.0, n_classes: int = None,
                 seed: int = 0) -> ProbeResult:
    """Freeze the encoder, fit a linear classifier on a stratified labeled
    subset, and report accuracy / mean absolute grade error on the test set."""
    if not 0.0 < label_fraction <= 1.0:
        raise ValueError("label_fraction must be in (0,1]")
    train_labels = np.array([s.label for s in train_samples])
    test_labels = np.array([s.label for s in test_samples])
    if n_classes is None:
        n_classes = int(max(train_labels.max(), test_labels.max())) + 1

    def embed(samples):
        images = np.stack([_prepare_sample(s, state.input_px)[1] for s in samples])
        return encode_batch(state, images)

    rng = derive_rng(seed, "probe-subsample")
    subset = _stratified_indices(train_labels, label_fraction, rng)
    train_feat = embed([train_samples[i] for i in subset])
    w, b = fit_linear_probe(train_feat, train_labels[subset], n_classes)
    return _evaluate_probe(w, b, embed(test_samples), test_labels, n_classes)


# ---------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckReport:
    loss_kind: str
    max_rel_err: float
    worst_param: str
    per_param: dict = field(default_factory=dict)
    online_only: bool = True

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_err < tolerance


def _rel_err(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return np.abs(analytic - numeric) / denom


def _fd_grads(loss_fn, params, h=1e-4):
    grads = {}
    for name, tensor in params.items():
        g = np.zeros_like(tensor)
        flat = tensor.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = loss_fn()
            flat[i] = orig - h
            lo = loss_fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * h)
        grads[name] = g
    return grads


def grad_check(state: EncoderState = None, loss_kind: str = "infonce",
               tolerance: float = 1e-4, batch: int = 4, seed: int = 0,
               h: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    loss_kind 'quadratic' checks the harness itself on a pure linear model,
    where central differences are exact; 'infonce' and 'byol' check the
    full encoder paths. Keep the state small (< 1e4 parameters). The
    encoder is smooth everywhere (tanh), so h=1e-4 on [0,1]-scaled inputs
    sits safely between truncation and float64 round-off error.
    """
    rng = derive_rng(seed, "grad-check", loss_kind)
    if loss_kind == "quadratic":
        w = rng.standard_normal((3, 5))
        b = rng.standard_normal(3)
        x = rng.standard_normal(5)
        t = rng.standard_normal(3)
        params = {"w": w, "b": b}

        def loss_fn():
            r = w @ x + b - t
            return float(0.5 * (r**2).sum())

        r = w @ x + b - t
        analytic = {"w": np.outer(r, x), "b": r}
        numeric = _fd_grads(loss_fn, params, h=1e-4)  # exact for quadratics at any h
    else:
        if state is None:
            state = init_encoder(seed, input_px=16, channels=(4, 8), embed_dim=8,
                                 predictor_hidden=8, with_predictor=True)
        n_params = sum(v.size for v in state.params.values())
        if n_params >= 10_000:
            raise ValueError(f"state too large for finite differences ({n_params} params)")
        v1 = rng.random((batch, state.input_px, state.input_px))
        v2 = rng.random((batch, state.input_px, state.input_px))
        if loss_kind == "infonce":
            params = {k: state.params[k] for k in state.trainable_param_names()}

            def loss_fn():
                loss, _ = _infonce_step(state, v1, v2, 0.2)
                return loss

            _, analytic = _infonce_step(state, v1, v2, 0.2)
            analytic = {k: analytic[k] for k in params}
        elif loss_kind == "byol":
            target_state = init_encoder(seed + 1, input_px=state.input_px,
                                        channels=state.channels, embed_dim=state.embed_dim,
                                        predictor_hidden=state.predictor_hidden)
            target_params = {k: target_state.params[k] for k in target_state.encoder_param_names()}
            params = {k: v for k, v in state.params.items() if not k.startswith("feat_")}

            def loss_fn():
                loss, _ = byol_loss(state, target_params, v1, v2, batch_stats=True)
                return loss

            _, analytic = byol_loss(state, target_params, v1, v2, batch_stats=True)
        else:
            raise ValueError(f"unknown loss kind '{loss_kind}'")
        numeric = _fd_grads(loss_fn, params, h=h)

    per_param = {}
    worst_name, worst = "", 0.0
    for name in params:
        err = float(_rel_err(analytic[name], numeric[name]).max())
        per_param[name] = err
        if err >= worst:
            worst_name, worst = name, err
    return GradCheckReport(loss_kind, worst, worst_name, per_param)
