"""Contrastive objectives with exact analytic gradients.

info_nce_loss works directly on (already unit-norm) embedding batches and
returns gradients w.r.t. both batches. byol_loss runs the full online
branch (encoder, projector, predictor) against a frozen EMA target branch;
gradients flow only through the online parameters.
"""

import numpy as np

from .encoder import (
    EncoderState,
    backward_encoder,
    backward_normalize,
    backward_predictor,
    forward_encoder,
    forward_predictor,
    normalize_rows,
)


def info_nce_loss(z1: np.ndarray, z2: np.ndarray, temperature: float = 0.2):
    """Symmetric InfoNCE over a batch of positive pairs.

    Row i of z1 pairs with row i of z2; all other rows in the opposite
    batch are negatives. Returns (loss, dloss/dz1, dloss/dz2), the loss
    being the mean cross-entropy over both softmax directions.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape:
        raise ValueError(f"batch shapes differ: {z1.shape} vs {z2.shape}")
    n = z1.shape[0]
    if n < 2:
        raise ValueError("InfoNCE needs a batch of at least 2 pairs")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")

    sim = z1 @ z2.T / temperature
    diag = np.diag(sim)

    # rows: anchor z1_i against all z2; columns: anchor z2_j against all z1
    row_max = sim.max(axis=1, keepdims=True)
    row_lse = row_max[:, 0] + np.log(np.exp(sim - row_max).sum(axis=1))
    col_max = sim.max(axis=0, keepdims=True)
    col_lse = col_max[0, :] + np.log(np.exp(sim - col_max).sum(axis=0))
    loss = 0.5 * ((row_lse - diag).mean() + (col_lse - diag).mean())

    p_row = np.exp(sim - row_lse[:, None])
    p_col = np.exp(sim - col_lse[None, :])
    eye = np.eye(n)
    dsim = ((p_row - eye) + (p_col - eye)) / (2.0 * n)
    dz1 = dsim @ z2 / temperature
    dz2 = dsim.T @ z1 / temperature
    return float(loss), dz1, dz2


def _byol_direction(online: EncoderState, target_params: dict, v_online, v_target,
                    batch_stats: bool):
    """One direction: predictor(online(v_online)) chases target(v_target)."""
    z_raw, enc_cache = forward_encoder(online, v_online, batch_stats=batch_stats)
    q, pred_cache = forward_predictor(online, z_raw)
    q_unit, q_norms, q_deg = normalize_rows(q)

    t_raw, _ = forward_encoder(online, v_target, params=target_params,
                               batch_stats=batch_stats)
    t_unit, _, _ = normalize_rows(t_raw)

    n = v_online.shape[0]
    cos = (q_unit * t_unit).sum(axis=1)
    loss = float(np.mean(2.0 - 2.0 * cos))

    dq_unit = -2.0 * t_unit / n
    dq = backward_normalize(dq_unit, q, q_norms, q_deg)
    dz_raw, pred_grads = backward_predictor(pred_cache, dq)
    enc_grads = backward_encoder(online, enc_cache, dz_raw)
    enc_grads.update(pred_grads)
    return loss, enc_grads


def byol_loss(online: EncoderState, target_params: dict, v1: np.ndarray, v2: np.ndarray,
              batch_stats: bool = False):
    """Symmetrized bootstrap loss: mean over both view directions of
    2 - 2 cos(predictor(online(v)), stopgrad(target(v'))).

    Returns (loss, grads); grads covers online parameters only, the target
    branch receives none by construction. batch_stats selects training-mode
    feature whitening (see forward_encoder).
    """
    if "pred_w1" not in online.params:
        raise ValueError("online encoder has no predictor head (required for the EMA-target mode)")
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    loss_a, grads_a = _byol_direction(online, target_params, v1, v2, batch_stats)
    loss_b, grads_b = _byol_direction(online, target_params, v2, v1, batch_stats)
    grads = {k: 0.5 * (grads_a[k] + grads_b[k]) for k in grads_a}
    return 0.5 * (loss_a + loss_b), grads


def ema_update(target_params: dict, online: EncoderState, momentum: float) -> dict:
    """target <- m * target + (1 - m) * online, elementwise over the shared
    (non-predictor) parameters."""
    if not 0.0 < momentum < 1.0:
        raise ValueError("ema momentum must be in (0,1)")
    return {
        k: momentum * target_params[k] + (1.0 - momentum) * online.params[k]
        for k in target_params
    }
