from tools.base_tool import BaseTool
from training.gradcheck import finite_difference_check, small_instance
from training.trainer import seed_everything
from utils.errors import ContractError


class GradcheckTool(BaseTool):
    """Finite-difference verification of every parameter group on the small double-precision instance."""

    def run(self):
        seed_everything(self.config.seed)
        instance = small_instance(self.config)
        report = finite_difference_check(
            instance.model,
            instance.loss,
            eps=self.config.gradcheck_eps,
            tolerance=self.config.gradcheck_tolerance,
        )
        self.write_json(report.to_dict())
        for group, error in report.max_errors.items():
            self.logger.info(f"🧮 {group}: max relative error {error:.3e}")
        if not report.passed:
            raise ContractError(
                f"Gradient check failed for {', '.join(report.offenders)} (tolerance {report.tolerance:g})",
                offenders=report.offenders,
            )
        return report
