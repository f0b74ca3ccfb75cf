"""Scikit-learn style front end: fit a detector on images plus quad
annotations, predict scored quads, score with the F-measure."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .decode import DecodeConfig, decode
from .labelgen import LabelConfig
from .losses import LossConfig
from .metrics import evaluate
from .net import NetConfig, TinyTextNet
from .nms import MergeConfig, locality_aware_nms
from .training import AdamState, train


def check_images(X) -> list[np.ndarray]:
    """Validate and normalize input images to a list of (1, H, W) float32
    arrays with dims divisible by 32."""
    if isinstance(X, np.ndarray) and X.ndim == 4:
        imgs = list(X)
    else:
        imgs = [np.asarray(x) for x in X]
    out = []
    for i, img in enumerate(imgs):
        img = np.asarray(img, dtype=np.float32)
        if img.ndim == 2:
            img = img[None]
        if img.ndim != 3 or img.shape[0] != 1:
            raise ValueError(f"image {i}: expected (H, W) or (1, H, W), got {img.shape}")
        if img.shape[1] % 32 or img.shape[2] % 32:
            raise ValueError(f"image {i}: dims must be divisible by 32, got {img.shape}")
        if not np.all(np.isfinite(img)):
            raise ValueError(f"image {i}: non-finite pixels")
        out.append(img)
    if not out:
        raise ValueError("at least one image is required")
    return out


class TextDetector(BaseEstimator):
    """Dense rotated-text detector with a fit/predict interface.

    Parameters mirror the pipeline knobs: network head and size, training
    budget, decode threshold and NMS thresholds.  ``predict`` returns one
    list of Detection per input image.
    """

    def __init__(
        self,
        head: str = "rbox",
        steps: int = 1000,
        batch_size: int = 8,
        learning_rate: float = 1e-3,
        seed: int = 42,
        shrink_ratio: float = 0.3,
        d_max: float = 64.0,
        score_threshold: float = 0.8,
        merge_iou_threshold: float = 0.3,
        final_nms_iou_threshold: float = 0.2,
        lambda_theta: float = 10.0,
    ):
        self.head = head
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed
        self.shrink_ratio = shrink_ratio
        self.d_max = d_max
        self.score_threshold = score_threshold
        self.merge_iou_threshold = merge_iou_threshold
        self.final_nms_iou_threshold = final_nms_iou_threshold
        self.lambda_theta = lambda_theta

    def fit(self, X, y):
        """X: images; y: per-image lists of clockwise (4, 2) quads."""
        images = check_images(X)
        if len(images) != len(y):
            raise ValueError("X and y must have the same length")
        h, w = images[0].shape[1:]
        net_cfg = NetConfig(head=self.head, d_max=self.d_max, input_size=w)
        label_cfg = LabelConfig(
            image_height=h, image_width=w, shrink_ratio=self.shrink_ratio
        )
        self.net_, self.train_log_ = train(
            list(zip(images, y)),
            net_cfg=net_cfg,
            loss_cfg=LossConfig(lambda_theta=self.lambda_theta),
            adam=AdamState(lr=self.learning_rate),
            steps=self.steps,
            batch_size=self.batch_size,
            seed=self.seed,
            label_cfg=label_cfg,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("call fit() before predict()")

    def predict(self, X):
        """Decode + locality-aware NMS per image."""
        self._check_fitted()
        images = check_images(X)
        decode_cfg = DecodeConfig(score_threshold=self.score_threshold)
        merge_cfg = MergeConfig(
            merge_iou_threshold=self.merge_iou_threshold,
            final_nms_iou_threshold=self.final_nms_iou_threshold,
        )
        results = []
        for img in images:
            score, geo = self.net_.forward(img[None])
            dets = decode(self.net_.dense_outputs(score, geo), decode_cfg)
            kept, _ = locality_aware_nms(dets, merge_cfg)
            results.append(kept)
        return results

    def score(self, X, y, iou_threshold: float = 0.5):
        """Pooled F-score over all images at the given match IoU."""
        preds = self.predict(X)
        tp = fp = fn = 0
        for dets, gts in zip(preds, y):
            res = evaluate(dets, gts, iou_threshold)
            tp += len(res.matches)
            fp += len(dets) - len(res.matches)
            fn += len(gts) - len(res.matches)
        precision = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
        recall = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
        if precision + recall == 0:
            return 0.0
        return 2 * precision * recall / (precision + recall)
