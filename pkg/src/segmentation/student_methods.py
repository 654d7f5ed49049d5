from typing import Callable, NamedTuple

from src.schemas.inference_schema import McConfig
from src.schemas.loss_schema import LossConfig
from src.schemas.run_schema import RunConfig
from src.utils.enums import StudentMethod


class StudentSetup(NamedTuple):
    mc: McConfig
    loss: LossConfig
    uses_unlabeled: bool


def uncertainty_guided(config: RunConfig) -> StudentSetup:
    """Soft labels weighted by the configured confidence exp(-alpha * u)."""
    return StudentSetup(config.mc, config.loss, True)


def plain_soft_labels(config: RunConfig) -> StudentSetup:
    """Same objective with alpha = 0: every soft-label pixel has weight 1."""
    return StudentSetup(
        config.mc.model_copy(update={"alpha": 0.0}),
        config.loss.model_copy(update={"alpha": 0.0}),
        True,
    )


def fully_supervised(config: RunConfig) -> StudentSetup:
    """Student trained on the labeled set only."""
    return StudentSetup(config.mc, config.loss, False)


method_options: dict[StudentMethod, Callable[[RunConfig], StudentSetup]] = {
    StudentMethod.U_SLS: uncertainty_guided,
    StudentMethod.PLAIN_SLS: plain_soft_labels,
    StudentMethod.FS_DU: fully_supervised,
}
