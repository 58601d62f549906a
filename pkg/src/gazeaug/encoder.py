"""Small convolutional encoder with hand-written forward and backward passes.

Two stride-2 3x3 conv layers with tanh, global average pooling, per-sample
feature standardization, and a linear projector produce the embedding; an
optional one-hidden-layer predictor head supports the bootstrap
(EMA-target) objective. The activation is tanh rather than ReLU: it has no
dead-unit failure mode at desk scale, and it keeps the loss smooth so
central finite differences at the documented step size are a valid oracle
for every gradient. Everything is float64 numpy, so gradients check out to
tight tolerances and training is bit-reproducible.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .rng import derive_rng

_KERNEL = 3
_STRIDE = 2
_PAD = 1


@dataclass
class EncoderState:
    """Parameter container plus the architecture hyper-parameters."""

    input_px: int = 64
    channels: tuple = (8, 16)
    embed_dim: int = 32
    predictor_hidden: int = 64
    params: dict = field(default_factory=dict)

    def copy(self) -> "EncoderState":
        return dataclasses.replace(self, params={k: v.copy() for k, v in self.params.items()})

    def encoder_param_names(self):
        return [k for k in sorted(self.params) if not k.startswith("pred_")]

    def trainable_param_names(self):
        return [k for k in sorted(self.params)
                if not k.startswith("pred_") and not k.startswith("feat_")]

    def arch_config(self) -> dict:
        return {
            "input_px": self.input_px,
            "channels": list(self.channels),
            "embed_dim": self.embed_dim,
            "predictor_hidden": self.predictor_hidden,
        }


def init_encoder(
    seed: int,
    input_px: int = 64,
    channels: tuple = (8, 16),
    embed_dim: int = 32,
    predictor_hidden: int = 64,
    with_predictor: bool = False,
) -> EncoderState:
    """Xavier-initialized encoder; predictor weights are added only when asked."""
    rng = derive_rng(seed, "encoder-init")
    c1, c2 = channels
    params = {
        "conv1_w": rng.standard_normal((c1, 1, _KERNEL, _KERNEL)) / np.sqrt(_KERNEL * _KERNEL),
        "conv1_b": np.zeros(c1),
        "conv2_w": rng.standard_normal((c2, c1, _KERNEL, _KERNEL)) / np.sqrt(c1 * _KERNEL * _KERNEL),
        "conv2_b": np.zeros(c2),
        "proj_w": rng.standard_normal((embed_dim, c2)) / np.sqrt(c2),
        "proj_b": np.zeros(embed_dim),
        # whitening buffers, constants during training; see calibrate_features
        "feat_mu": np.zeros(c2),
        "feat_sigma": np.ones(c2),
    }
    if with_predictor:
        params.update(
            {
                "pred_w1": rng.standard_normal((predictor_hidden, embed_dim)) / np.sqrt(embed_dim),
                "pred_b1": np.zeros(predictor_hidden),
                "pred_w2": rng.standard_normal((embed_dim, predictor_hidden)) / np.sqrt(predictor_hidden),
                "pred_b2": np.zeros(embed_dim),
            }
        )
    return EncoderState(input_px, tuple(channels), embed_dim, predictor_hidden, params)


# ---------------------------------------------------------------------------
# conv primitives (3x3, stride 2, pad 1)

def _out_size(n):
    return (n + 2 * _PAD - _KERNEL) // _STRIDE + 1


def _im2col(x):
    b, c, h, w = x.shape
    ho, wo = _out_size(h), _out_size(w)
    xp = np.zeros((b, c, h + 2 * _PAD, w + 2 * _PAD))
    xp[:, :, _PAD : _PAD + h, _PAD : _PAD + w] = x
    cols = np.empty((b, c, _KERNEL, _KERNEL, ho, wo))
    for ki in range(_KERNEL):
        for kj in range(_KERNEL):
            cols[:, :, ki, kj] = xp[:, :, ki : ki + _STRIDE * ho : _STRIDE, kj : kj + _STRIDE * wo : _STRIDE]
    return cols, (h, w)


def _col2im(dcols, in_shape):
    b, c, _, _, ho, wo = dcols.shape
    h, w = in_shape
    dxp = np.zeros((b, c, h + 2 * _PAD, w + 2 * _PAD))
    for ki in range(_KERNEL):
        for kj in range(_KERNEL):
            dxp[:, :, ki : ki + _STRIDE * ho : _STRIDE, kj : kj + _STRIDE * wo : _STRIDE] += dcols[:, :, ki, kj]
    return dxp[:, :, _PAD : _PAD + h, _PAD : _PAD + w]


def _conv_forward(x, w, b):
    cols, in_shape = _im2col(x)
    nb, c, _, _, ho, wo = cols.shape
    f = w.shape[0]
    flat = cols.reshape(nb, c * _KERNEL * _KERNEL, ho * wo)
    out = np.einsum("fk,bkp->bfp", w.reshape(f, -1), flat) + b[None, :, None]
    return out.reshape(nb, f, ho, wo), (cols, in_shape, flat)


def _conv_backward(dout, w, cache):
    cols, in_shape, flat = cache
    nb, c, _, _, ho, wo = cols.shape
    f = w.shape[0]
    dflat_out = dout.reshape(nb, f, ho * wo)
    dw = np.einsum("bfp,bkp->fk", dflat_out, flat).reshape(w.shape)
    db = dout.sum(axis=(0, 2, 3))
    dcols_flat = np.einsum("fk,bfp->bkp", w.reshape(f, -1), dflat_out)
    dcols = dcols_flat.reshape(nb, c, _KERNEL, _KERNEL, ho, wo)
    return _col2im(dcols, in_shape), dw, db


# ---------------------------------------------------------------------------
# encoder forward/backward (raw projector output, no normalization)

def calibrate_features(state: EncoderState, images: np.ndarray) -> None:
    """Initialize the running whitening statistics of the pooled features.

    Pooled conv features of different images share almost the same vector
    (spatial averaging wipes the texture), so without whitening every
    normalized embedding starts collapsed near one point on the sphere and
    the contrastive gradient has nothing to work with. Training forwards
    whiten with batch statistics (parameter-free batch normalization, the
    same role it plays in the usual Siamese stacks); evaluation uses the
    running statistics stored as `feat_mu` / `feat_sigma` buffers, seeded
    here and updated during training. Buffers persist in checkpoints.
    """
    feat = _pooled_features(state.params, np.asarray(images, dtype=np.float64))
    state.params["feat_mu"] = feat.mean(axis=0)
    # additive eps, not a hard floor: a near-constant (saturated) channel
    # must whiten towards zero, or the tiny divisor amplifies its noise far
    # above the informative channels on out-of-calibration inputs
    state.params["feat_sigma"] = np.sqrt(feat.var(axis=0) + 1e-6)


def _pooled_features(p, x):
    x4 = x[:, None, :, :]
    a1, _ = _conv_forward(x4, p["conv1_w"], p["conv1_b"])
    a2, _ = _conv_forward(np.tanh(a1), p["conv2_w"], p["conv2_b"])
    return np.tanh(a2).mean(axis=(2, 3))


def forward_encoder(state: EncoderState, x: np.ndarray, params: dict = None,
                    batch_stats: bool = False):
    """Batch forward pass. x is (B, H, W) in [0,1]; returns (z_raw, cache).

    With batch_stats=True (training), features are whitened by the batch's
    own per-channel mean/std; otherwise by the stored running statistics,
    so single-image encoding never depends on batch composition.
    """
    p = state.params if params is None else params
    x4 = x[:, None, :, :].astype(np.float64)
    a1, cache1 = _conv_forward(x4, p["conv1_w"], p["conv1_b"])
    t1 = np.tanh(a1)
    a2, cache2 = _conv_forward(t1, p["conv2_w"], p["conv2_b"])
    t2 = np.tanh(a2)
    feat = t2.mean(axis=(2, 3))
    if batch_stats and feat.shape[0] >= 2:
        mu = feat.mean(axis=0)
        sigma = np.sqrt(feat.var(axis=0) + 1e-8)
    else:
        batch_stats = False
        mu, sigma = p["feat_mu"], p["feat_sigma"]
    fhat = (feat - mu) / sigma
    z_raw = fhat @ p["proj_w"].T + p["proj_b"]
    cache = (cache1, t1, cache2, t2, fhat, sigma, batch_stats, mu, p)
    return z_raw, cache


def batch_stats_of(cache):
    """(mu, sigma) the forward pass actually used; for running-stat updates."""
    _, _, _, _, _, sigma, _, mu, _ = cache
    return mu, sigma


def backward_encoder(state: EncoderState, cache, dz_raw: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. encoder parameters given dL/dz_raw."""
    cache1, t1, cache2, t2, fhat, sigma, used_batch_stats, _, p = cache
    grads = {}
    grads["proj_w"] = dz_raw.T @ fhat
    grads["proj_b"] = dz_raw.sum(axis=0)
    dfhat = dz_raw @ p["proj_w"]
    if used_batch_stats:
        # whitening used the batch's own statistics, so gradients flow
        # through mu and sigma as well (standard affine-free BN backward)
        mean_d = dfhat.mean(axis=0)
        mean_df = (dfhat * fhat).mean(axis=0)
        dfeat = (dfhat - mean_d - fhat * mean_df) / sigma
    else:
        dfeat = dfhat / sigma
    shape2 = t2.shape
    dt2 = np.broadcast_to(dfeat[:, :, None, None], shape2) / (shape2[2] * shape2[3])
    da2 = dt2 * (1.0 - t2**2)
    dt1, grads["conv2_w"], grads["conv2_b"] = _conv_backward(da2, p["conv2_w"], cache2)
    da1 = dt1 * (1.0 - t1**2)
    _, grads["conv1_w"], grads["conv1_b"] = _conv_backward(da1, p["conv1_w"], cache1)
    return grads


# ---------------------------------------------------------------------------
# normalization and predictor

def normalize_rows(z: np.ndarray, fallback_axis: int = 0):
    """L2-normalize rows; zero rows map to the first basis vector."""
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    degenerate = norms[:, 0] < 1e-12
    safe = np.where(norms < 1e-12, 1.0, norms)
    out = z / safe
    if degenerate.any():
        out[degenerate] = 0.0
        out[degenerate, fallback_axis] = 1.0
    return out, norms, degenerate


def backward_normalize(dz_unit, z, norms, degenerate):
    """Chain rule through row normalization (zero for degenerate rows)."""
    safe = np.where(norms < 1e-12, 1.0, norms)
    unit = z / safe
    dot = (dz_unit * unit).sum(axis=1, keepdims=True)
    dz = (dz_unit - unit * dot) / safe
    dz[degenerate] = 0.0
    return dz


def forward_predictor(state: EncoderState, z: np.ndarray, params: dict = None):
    p = state.params if params is None else params
    h = np.tanh(z @ p["pred_w1"].T + p["pred_b1"])
    q = h @ p["pred_w2"].T + p["pred_b2"]
    return q, (z, h, p)


def backward_predictor(cache, dq: np.ndarray):
    z, h, p = cache
    grads = {
        "pred_w2": dq.T @ h,
        "pred_b2": dq.sum(axis=0),
    }
    dh_pre = (dq @ p["pred_w2"]) * (1.0 - h**2)
    grads["pred_w1"] = dh_pre.T @ z
    grads["pred_b1"] = dh_pre.sum(axis=0)
    dz = dh_pre @ p["pred_w1"]
    return dz, grads


def encode_batch(state: EncoderState, images: np.ndarray) -> np.ndarray:
    """Unit-norm embeddings for a batch of images (deterministic)."""
    z_raw, _ = forward_encoder(state, np.asarray(images, dtype=np.float64))
    unit, _, _ = normalize_rows(z_raw)
    return unit


def encode(state: EncoderState, image: np.ndarray) -> np.ndarray:
    """Embed one image. Output has unit L2 norm; an exactly-zero pre-norm
    embedding falls back to the first basis vector."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    if img.shape != (state.input_px, state.input_px):
        raise ValueError(f"image {img.shape} does not match input size {state.input_px}")
    for name, value in state.params.items():
        if not np.isfinite(value).all():
            raise ValueError(f"non-finite parameters in '{name}'")
    return encode_batch(state, img[None])[0]
