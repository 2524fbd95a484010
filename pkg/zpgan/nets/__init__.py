from zpgan.nets.schemas import ArchitectureConfig, GradCheckReport
from zpgan.nets.services import (
    ModelParams,
    discriminator_forward,
    generator_forward,
    grad_check,
    init_params,
    regressor_forward,
)
