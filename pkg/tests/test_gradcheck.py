import json
from dataclasses import replace

import pytest
import torch
import torch.nn as nn

from tools.config_loader import RunConfig
from tools.gradcheck_tool import GradcheckTool
from training.gradcheck import (
    GROUPS,
    GradCheckReport,
    finite_difference_check,
    parameter_group,
    relative_error,
    small_instance,
)
from utils.errors import ContractError


class TestRelativeError:

    def test_exact_match(self):
        assert relative_error(0.5, 0.5) == 0.0

    def test_scaled_by_larger_magnitude(self):
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)

    def test_small_values_compare_absolutely(self):
        assert relative_error(1e-9, 0.0) == pytest.approx(1e-6)


class TestParameterGroups:

    def test_every_group_present_in_small_instance(self):
        instance = small_instance(RunConfig())
        groups = {parameter_group(name) for name, _ in instance.model.named_parameters()}
        assert groups == set(GROUPS)

    def test_frame_only_model_has_no_object_groups(self):
        instance = small_instance(RunConfig(use_objects=False))
        groups = {parameter_group(name) for name, _ in instance.model.named_parameters()}
        assert groups == set(GROUPS) - {"object_attention", "object_temporal_attention"}


class TestFiniteDifferenceCheck:

    def test_no_parameters(self):
        report = finite_difference_check(nn.Module(), lambda: torch.tensor(1.0, dtype=torch.float64))
        assert report.passed
        assert report.max_errors == {}

    def test_constant_loss(self):
        model = nn.Linear(2, 2).double()
        report = finite_difference_check(model, lambda: torch.tensor(3.0, dtype=torch.float64), group_of=lambda name: "all")
        assert report.passed
        assert report.max_errors["all"] == 0.0
        assert report.checked["all"] == 6

    def test_quadratic(self):
        weight = nn.Parameter(torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64))
        holder = nn.Module()
        holder.weight = weight
        report = finite_difference_check(holder, lambda: (weight ** 2).sum() * 3.0, group_of=lambda name: "quadratic")
        assert report.passed
        assert report.max_errors["quadratic"] < 1e-8

    @pytest.mark.parametrize("overrides", [
        {},
        {"use_objects": False},
        {"assignment_softmax": True},
        {"share_direction_params": True},
        {"direction": "backward"},
    ])
    def test_small_instance_passes(self, overrides):
        instance = small_instance(RunConfig(**overrides))
        report = finite_difference_check(instance.model, instance.loss, eps=1e-6, tolerance=1e-4)
        assert report.passed, report.to_dict()
        assert all(count > 0 for count in report.checked.values())

    def test_wrong_gradient_is_reported(self):
        class Broken(torch.autograd.Function):
            @staticmethod
            def forward(ctx, x):
                return x * 2.0

            @staticmethod
            def backward(ctx, grad):
                return grad * 3.0

        holder = nn.Module()
        holder.weight = nn.Parameter(torch.tensor([0.3, 0.7], dtype=torch.float64))
        report = finite_difference_check(holder, lambda: Broken.apply(holder.weight).sum(), group_of=lambda name: "broken")
        assert report.offenders == ["broken"]
        assert report.max_errors["broken"] == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_report_layout(self):
        report = GradCheckReport(tolerance=1e-4, eps=1e-6, max_errors={"codebook": 2e-4, "embedding": 1e-7},
                                 checked={"codebook": 6, "embedding": 15})
        payload = report.to_dict()
        assert payload["passed"] is False
        assert payload["offenders"] == ["codebook"]
        assert payload["groups"]["embedding"] == {"max_relative_error": 1e-7, "entries": 15}


class TestGradcheckTool:

    def test_passes_and_writes_report(self, tmp_path):
        output = tmp_path / "gradcheck.json"
        report = GradcheckTool("gradcheck", RunConfig(output=str(output))).run()
        assert report.passed
        with open(output, encoding="utf-8") as f:
            payload = json.load(f)
        assert set(payload["groups"]) == set(GROUPS)

    def test_impossible_tolerance_raises(self, tmp_path):
        config = replace(RunConfig(output=str(tmp_path / "gradcheck.json")), gradcheck_tolerance=1e-300)
        with pytest.raises(ContractError) as excinfo:
            GradcheckTool("gradcheck", config).run()
        assert excinfo.value.offenders
