"""Cross-modal knowledge distillation in a jointly Gaussian linear model."""

from .asymptotics import (
    AsymptoticContext,
    RiskBreakdown,
    asymptotic_risk,
    asymptotic_risk_over,
    asymptotic_risk_under,
    cch_correlations,
    cch_mi_gap,
    cch_verdict,
    optimal_teacher_weight,
    sigma_bar_sq,
    small_lambda_condition,
    solve_tau,
    w_bar,
)
from .gaussian_model import (
    CorrelationSpec,
    Dataset,
    InfeasibleSpecError,
    PopulationModel,
    apply_teacher_noise,
    derive_population_model,
    sample_dataset,
    validate_feasibility,
)
from .harness import SweepConfig, SweepRecord, run_lambda_sweep, run_noise_sweep, run_sigma12_sweep
from .kd_losses import DistillationConfig, kd_loss, kd_loss_gradient, softened_softmax
from .mi import MiEstimate, gaussian_mi, ksg_mi, ross_mi
from .regression import (
    StudentEstimate,
    TeacherWeights,
    effective_labels,
    excess_risk_empirical,
    excess_risk_population,
    fit_student_ls,
    fit_student_minnorm,
    fit_teacher_empirical,
    fit_teacher_population,
)
from .special import digamma

__version__ = "0.1.0"
