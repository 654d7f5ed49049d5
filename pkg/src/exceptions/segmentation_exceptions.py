class SegmentationError(Exception):
    """Base class for every error this package raises on purpose."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigurationError(SegmentationError):
    pass


class ShapeError(SegmentationError):
    pass


class LabelError(SegmentationError):
    pass


class BoundaryError(SegmentationError):
    pass


class DatasetError(SegmentationError):
    pass


class EvaluationError(SegmentationError):
    pass


class CheckpointError(SegmentationError):
    pass


class SoftLabelStoreError(SegmentationError):
    pass


class DivergenceError(SegmentationError):
    def __init__(self, detail: str, iteration: int | None = None):
        if iteration is not None:
            detail = (
                f"{detail} (iteration {iteration}). "
                "Lower the learning rate or check the input data and try again."
            )
        super().__init__(detail)
        self.iteration = iteration
