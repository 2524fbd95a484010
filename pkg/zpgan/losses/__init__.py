from zpgan.losses.schemas import LossBreakdown, LossWeights
from zpgan.losses.services import (
    DIVERSITY_EPS,
    LOG_EPS,
    adversarial_d_loss,
    adversarial_g_loss,
    aux_loss,
    diversity_loss,
    intensity_loss,
    intensity_loss_to_target,
    total_generator_loss,
    weighted_total,
)
