"""Training objectives: class-balanced cross-entropy for the score map,
IoU + angle losses for rotated-box geometry, normalized smoothed-L1 for
quad offsets, and a finite-difference gradient verifier.

Every loss returns its analytic gradient alongside the value; min-branch
ties are broken toward the prediction so subgradients are defined
everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateGt, ShapeMismatch
from .geometry import as_quad
from .labelgen import QuadTargetMaps, RBoxTargetMaps


@dataclass(frozen=True)
class LossConfig:
    lambda_g: float = 1.0
    lambda_theta: float = 10.0
    clamp_eps: float = 1e-7
    reduction: str = "mean_over_positives"  # for the geometry losses

    def __post_init__(self):
        if self.lambda_g <= 0 or self.lambda_theta <= 0:
            raise ValueError("loss weights must be positive")
        if not 0.0 < self.clamp_eps < 1e-3:
            raise ValueError("clamp_eps out of range")


@dataclass
class BalancedXentResult:
    loss: float
    beta: float
    grad: np.ndarray


@dataclass
class IoUBreakdown:
    w_i: float
    h_i: float
    intersect: float
    union: float
    loss: float
    grad_d: np.ndarray  # (4,) d(loss)/d(d_hat)


def balanced_xent(pred, gt, clamp_eps: float = 1e-7) -> BalancedXentResult:
    """Class-balanced cross-entropy, averaged over all map cells.

    beta = 1 - (positive fraction of gt); predictions are clamped into
    [eps, 1 - eps] and the gradient is that of the clamped function.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    n = gt.size
    beta = 1.0 - float(gt.sum()) / n
    clamped = np.clip(pred, clamp_eps, 1.0 - clamp_eps)
    per_pixel = -beta * gt * np.log(clamped) - (1.0 - beta) * (1.0 - gt) * np.log(
        1.0 - clamped
    )
    grad = (-beta * gt / clamped + (1.0 - beta) * (1.0 - gt) / (1.0 - clamped)) / n
    grad = np.where((pred > clamp_eps) & (pred < 1.0 - clamp_eps), grad, 0.0)
    return BalancedXentResult(loss=float(per_pixel.mean()), beta=beta, grad=grad)


def iou_loss(d_hat, d_star, clamp_eps: float = 1e-7) -> IoUBreakdown:
    """-log IoU of two axis-aligned boxes given as (top, right, bottom,
    left) boundary distances from a shared pixel."""
    d_hat = np.asarray(d_hat, dtype=np.float64).reshape(4)
    d_star = np.asarray(d_star, dtype=np.float64).reshape(4)
    if np.any(d_star <= 0.0):
        raise DegenerateGt(f"ground-truth distances must be positive: {d_star.tolist()}")
    loss, grad, w, h, inter, union = _iou_loss_core(d_hat, d_star, clamp_eps)
    return IoUBreakdown(
        w_i=float(w), h_i=float(h), intersect=float(inter), union=float(union),
        loss=float(loss), grad_d=grad,
    )


def _iou_loss_core(d_hat, d_star, eps):
    """Vectorized over any leading shape; d arrays are (..., 4)."""
    d1h, d2h, d3h, d4h = (d_hat[..., i] for i in range(4))
    d1s, d2s, d3s, d4s = (d_star[..., i] for i in range(4))
    # min-branch indicator: ties go to the prediction
    t1, t2, t3, t4 = (d_hat[..., i] <= d_star[..., i] for i in range(4))
    w = np.minimum(d2h, d2s) + np.minimum(d4h, d4s)
    h = np.minimum(d1h, d1s) + np.minimum(d3h, d3s)
    inter = w * h
    area_hat = (d1h + d3h) * (d2h + d4h)
    area_star = (d1s + d3s) * (d2s + d4s)
    union = area_hat + area_star - inter
    inter_c = np.maximum(inter, eps)
    union_c = np.maximum(union, eps)
    loss = np.log(union_c) - np.log(inter_c)

    di = np.empty(d_hat.shape, dtype=np.float64)
    di[..., 0] = np.where(t1, w, 0.0)
    di[..., 2] = np.where(t3, w, 0.0)
    di[..., 1] = np.where(t2, h, 0.0)
    di[..., 3] = np.where(t4, h, 0.0)
    da = np.empty_like(di)
    da[..., 0] = d2h + d4h
    da[..., 2] = d2h + d4h
    da[..., 1] = d1h + d3h
    da[..., 3] = d1h + d3h
    grad = (da - di) / union_c[..., None] - di / inter_c[..., None]
    return loss, grad, w, h, inter, union


def angle_loss(theta_hat: float, theta_star: float) -> tuple[float, float]:
    """1 - cos(angle error); gradient sin(angle error)."""
    diff = theta_hat - theta_star
    return 1.0 - np.cos(diff), np.sin(diff)


def rbox_geometry_loss(
    pred: RBoxTargetMaps, target: RBoxTargetMaps, cfg: LossConfig = LossConfig()
):
    """Mean over valid cells of IoU loss + lambda_theta * angle loss.

    Returns (loss, (grad_d, grad_theta)) with gradients shaped like the
    prediction maps and zero off the valid mask.
    """
    if pred.d.shape != target.d.shape or pred.theta.shape != target.theta.shape:
        raise ShapeMismatch("prediction/target map shapes differ")
    mask = target.valid_mask
    n = int(mask.sum())
    grad_d = np.zeros_like(pred.d)
    grad_theta = np.zeros_like(pred.theta)
    if n == 0:
        return 0.0, (grad_d, grad_theta)
    dh = np.moveaxis(pred.d, 0, -1)[mask]  # (n, 4)
    ds = np.moveaxis(target.d, 0, -1)[mask]
    aabb_loss, aabb_grad, *_ = _iou_loss_core(dh, ds, cfg.clamp_eps)
    diff = pred.theta[mask] - target.theta[mask]
    total = float(aabb_loss.mean() + cfg.lambda_theta * (1.0 - np.cos(diff)).mean())
    gd = np.zeros(pred.d.shape[1:] + (4,))
    gd[mask] = aabb_grad / n
    grad_d[:] = np.moveaxis(gd, -1, 0)
    grad_theta[mask] = cfg.lambda_theta * np.sin(diff) / n
    return total, (grad_d, grad_theta)


def smoothed_l1(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative of the unit-transition smoothed L1."""
    ax = np.abs(x)
    val = np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)
    grad = np.where(ax < 1.0, x, np.sign(x))
    return val, grad


def quad_loss(q_hat, q_star, n_star: float) -> tuple[float, np.ndarray]:
    """Short-edge-normalized smoothed L1 over quad coordinates, minimized
    over the 4 cyclic vertex orderings of the ground truth.

    q_hat is the flat coordinate list (x1, y1, ..., x4, y4); gradient flows
    through the argmin ordering only.
    """
    if n_star <= 0.0:
        raise DegenerateGt("normalizer must be positive")
    q_hat = np.asarray(q_hat, dtype=np.float64).reshape(8)
    coords = as_quad(q_star).reshape(8)
    best_loss, best_grad = np.inf, None
    for k in range(4):
        ref = np.roll(coords, -2 * k)
        val, grad = smoothed_l1(q_hat - ref)
        loss = float(val.sum() / (8.0 * n_star))
        if loss < best_loss:
            best_loss = loss
            best_grad = grad / (8.0 * n_star)
    return best_loss, best_grad


def quad_geometry_loss(pred_offsets: np.ndarray, target: QuadTargetMaps):
    """Mean over valid cells of the permutation-minimum quad loss, applied
    to offset maps.  Returns (loss, grad) with grad shaped (8, H, W)."""
    if pred_offsets.shape != target.offsets.shape:
        raise ShapeMismatch("offset map shapes differ")
    mask = target.valid_mask
    n = int(mask.sum())
    grad = np.zeros_like(pred_offsets)
    if n == 0:
        return 0.0, grad
    ph = np.moveaxis(pred_offsets, 0, -1)[mask]  # (n, 8)
    ps = np.moveaxis(target.offsets, 0, -1)[mask]
    norm = 8.0 * target.shortest_edge[mask][:, None]
    if np.any(norm <= 0.0):
        raise DegenerateGt("shortest_edge must be positive at valid cells")
    losses, grads = [], []
    for k in range(4):
        val, g = smoothed_l1(ph - np.roll(ps, -2 * k, axis=1))
        losses.append(val.sum(axis=1, keepdims=True) / norm)
        grads.append(g / norm)
    losses = np.concatenate(losses, axis=1)  # (n, 4)
    pick = losses.argmin(axis=1)
    total = float(losses[np.arange(len(pick)), pick].mean())
    gsel = np.stack(grads, axis=1)[np.arange(len(pick)), pick] / n
    gmap = np.zeros(pred_offsets.shape[1:] + (8,))
    gmap[mask] = gsel
    grad[:] = np.moveaxis(gmap, -1, 0)
    return total, grad


def total_loss(score_part: float, geom_part: float, cfg: LossConfig = LossConfig()) -> float:
    """Combined objective: score loss plus weighted geometry loss."""
    return score_part + cfg.lambda_g * geom_part


def finite_difference_check(
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    inputs: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn`` maps a flat parameter vector to (loss, gradient).
    """
    x = np.asarray(inputs, dtype=np.float64).ravel().copy()
    _, analytic = loss_fn(x)
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        fd = (loss_fn(xp)[0] - loss_fn(xm)[0]) / (2.0 * step)
        err = abs(analytic[i] - fd) / max(1e-8, abs(analytic[i]) + abs(fd))
        worst = max(worst, err)
    return worst
