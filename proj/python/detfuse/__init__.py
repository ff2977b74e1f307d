# Copyright 2026 The detfuse Authors
# SPDX-License-Identifier: Apache-2.0
"""Late fusion of multimodal object detections."""

import json as _json

from ._detfuse import *  # noqa: F401,F403
from ._detfuse import evaluate as _evaluate


def evaluate(detections, ground_truth, iou_threshold=0.5):
    """Day/night breakdown report as a dict."""
    return _json.loads(_evaluate(detections, ground_truth, iou_threshold))
