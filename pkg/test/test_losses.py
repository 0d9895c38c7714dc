# Copyright 2026 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import pytest
import torch

from rgbs_track.boxgeom import BBox
from rgbs_track.config import LossWeights
from rgbs_track.errors import NumericError
from rgbs_track.losses import (
    BranchLoss,
    box_losses,
    branch_loss,
    focal_loss,
    gaussian_radius,
    gaussian_target,
    giou_tensor,
    total_loss,
)
from rgbs_track.model.heads import ScoreMapBundle

WEIGHTS = LossWeights()


def scalar(value: float) -> torch.Tensor:
    return torch.tensor(value, dtype=torch.float64)


def test_focal_loss_scalar_cases():
    half = torch.full((1, 1), 0.5, dtype=torch.float64)
    expected = -(0.5**2) * math.log(0.5)
    assert float(focal_loss(half, torch.ones(1, 1, dtype=torch.float64))) == pytest.approx(expected, rel=1e-9)
    assert float(focal_loss(half, torch.zeros(1, 1, dtype=torch.float64))) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(0.1733, abs=1e-4)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_focal_loss_perfect_prediction_vanishes(eps):
    target = torch.zeros(1, 1, 4, 4, dtype=torch.float64)
    target[0, 0, 1, 2] = 1.0
    loss = float(focal_loss(target.clone(), target, eps=eps))
    assert 0.0 <= loss < 20 * eps**2


def test_focal_loss_monotone_in_prediction():
    ps = torch.linspace(0.05, 0.95, 19, dtype=torch.float64)
    positive = [float(focal_loss(p.view(1, 1), torch.ones(1, 1, dtype=torch.float64))) for p in ps]
    negative = [float(focal_loss(p.view(1, 1), torch.zeros(1, 1, dtype=torch.float64))) for p in ps]
    assert all(a > b for a, b in zip(positive, positive[1:]))
    assert all(a < b for a, b in zip(negative, negative[1:]))
    assert min(positive + negative) >= 0.0


def test_focal_loss_shape_mismatch():
    with pytest.raises(ValueError):
        focal_loss(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 4, 3))


def test_box_losses_examples():
    same = torch.tensor([[0.1, 0.2, 0.3, 0.4]], dtype=torch.float64)
    giou_loss, l1_loss = box_losses(same, same)
    assert float(giou_loss) == pytest.approx(0.0, abs=1e-12) and float(l1_loss) == 0.0

    unit = torch.tensor([[0.0, 0.0, 1.0, 1.0]], dtype=torch.float64)
    giou_loss, _ = box_losses(unit, torch.tensor([[2.0, 0.0, 1.0, 1.0]], dtype=torch.float64))
    assert float(giou_loss) == pytest.approx(4 / 3)
    _, l1_loss = box_losses(unit, torch.tensor([[0.0, 0.0, 1.0, 0.5]], dtype=torch.float64))
    assert float(l1_loss) == pytest.approx(0.125)


def test_giou_tensor_degenerate_enclosing_is_zero():
    point = torch.tensor([[0.5, 0.5, 0.0, 0.0]], dtype=torch.float64)
    assert float(giou_tensor(point, point)[0]) == 0.0


def terms(cls: float, iou: float | None, l1: float | None) -> BranchLoss:
    return BranchLoss(
        cls=scalar(cls), iou=None if iou is None else scalar(iou), l1=None if l1 is None else scalar(l1)
    )


def test_total_loss_examples():
    assert float(total_loss(terms(0, 0, 0), terms(0, 0, 0), WEIGHTS)) == 0.0
    assert float(total_loss(terms(1, 1, 1), terms(1, 1, 1), WEIGHTS)) == 16.0
    absent_sonar = total_loss(terms(0.3, 0.2, 0.1), terms(0.4, None, None), WEIGHTS)
    assert float(absent_sonar) == pytest.approx(0.3 + 0.4 + 2 * 0.2 + 5 * 0.1)


def test_total_loss_coefficients():
    expected = [1.0, 2.0, 5.0, 1.0, 2.0, 5.0]
    for position, coefficient in enumerate(expected):
        basis = [0.0] * 6
        basis[position] = 1.0
        loss = total_loss(terms(*basis[:3]), terms(*basis[3:]), WEIGHTS)
        assert float(loss) == coefficient


def test_total_loss_rejects_non_finite():
    with pytest.raises(NumericError, match="sonar.l1"):
        total_loss(terms(0, 0, 0), terms(0, 0, float("nan")), WEIGHTS)
    with pytest.raises(NumericError, match="rgb.cls"):
        total_loss(terms(float("inf"), 0, 0), terms(0, 0, 0), WEIGHTS)


def test_loss_gradcheck():
    target = torch.zeros(1, 1, 3, 3, dtype=torch.float64)
    target[0, 0, 1, 1] = 1.0
    target[0, 0, 0, 1] = 0.4
    pred = torch.rand(1, 1, 3, 3, dtype=torch.float64).mul(0.8).add(0.1).requires_grad_()
    assert torch.autograd.gradcheck(lambda p: focal_loss(p, target), (pred,), eps=1e-6, rtol=1e-5)

    gt = torch.tensor([[0.2, 0.3, 0.4, 0.3]], dtype=torch.float64)
    box = torch.tensor([[0.25, 0.2, 0.3, 0.35]], dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda b: box_losses(b, gt)[0], (box,), eps=1e-6, rtol=1e-5)
    assert torch.autograd.gradcheck(lambda b: box_losses(b, gt)[1], (box,), eps=1e-6, rtol=1e-5)


def test_gaussian_target():
    heat = gaussian_target(BBox(x=0.4, y=0.4, w=0.2, h=0.2), 16)
    assert heat.shape == (16, 16)
    assert heat[7, 7] == 1.0
    assert int(heat.eq(1.0).sum()) == 1
    assert float(heat.min()) == 0.0 and float(heat.max()) == 1.0
    assert torch.count_nonzero(gaussian_target(BBox.absent(), 16)) == 0


def test_gaussian_radius_grows_with_size():
    assert gaussian_radius(4, 4) < gaussian_radius(8, 8) < gaussian_radius(16, 16)


def make_bundle(batch: int, grid: int = 4) -> ScoreMapBundle:
    return ScoreMapBundle(
        cls=torch.full((batch, 1, grid, grid), 0.2, dtype=torch.float64, requires_grad=True),
        offset=torch.full((batch, 2, grid, grid), 0.5, dtype=torch.float64, requires_grad=True),
        size=torch.full((batch, 2, grid, grid), 0.25, dtype=torch.float64, requires_grad=True),
    )


def test_branch_loss_excludes_absent_targets_from_regression():
    boxes = [BBox(x=0.375, y=0.375, w=0.25, h=0.25), BBox.absent()]
    loss = branch_loss(make_bundle(2), boxes, WEIGHTS)
    assert loss.iou is not None and loss.l1 is not None
    # peak cell (1, 1) decodes to center 0.5 with size 0.25: exactly the target
    assert float(loss.l1) == pytest.approx(0.0, abs=1e-12)
    assert float(loss.iou) == pytest.approx(0.0, abs=1e-12)

    absent_only = branch_loss(make_bundle(1), [BBox.absent()], WEIGHTS)
    assert absent_only.iou is None and absent_only.l1 is None
    assert float(absent_only.cls) > 0.0


def test_gaussian_target_spreads_for_large_boxes():
    heat = gaussian_target(BBox(x=0.0, y=0.0, w=1.0, h=1.0), 16)
    assert heat[7, 7] == 1.0
    assert float(heat[7, 8]) == pytest.approx(math.exp(-2.0), rel=1e-6)
    assert float(heat[6, 6]) == pytest.approx(math.exp(-4.0), rel=1e-6)
    assert float(heat[7, 9]) == 0.0
