from typing import List, Optional

import pandas as pd
from pydantic import BaseModel

from src.utils.enums import ConfidenceSource


class DiceReport(BaseModel):
    """
    Per-class Dice averaged over test images (mean and standard deviation).

    `mean_dice` averages the foreground classes only; background is listed
    for completeness. Both-empty class masks score 1.0 and exactly-one-empty
    masks score 0.0.
    """

    class_names: List[str]
    per_class_dice: List[float]
    per_class_std: List[float]
    per_class_support: List[int]
    mean_dice: float
    mean_dice_std: float
    num_images: int
    checkpoint_id: Optional[str] = None
    confidence_source: Optional[ConfidenceSource] = None
    confidence_threshold: Optional[float] = None
    confident_fraction: Optional[float] = None
    degenerate: bool = False

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "class_id": class_id,
                "class_name": name,
                "dice_mean": dice,
                "dice_std": std,
                "support": support,
            }
            for class_id, (name, dice, std, support) in enumerate(
                zip(
                    self.class_names,
                    self.per_class_dice,
                    self.per_class_std,
                    self.per_class_support,
                )
            )
        ]
        rows.append(
            {
                "class_id": -1,
                "class_name": "average",
                "dice_mean": self.mean_dice,
                "dice_std": self.mean_dice_std,
                "support": sum(self.per_class_support[1:]),
            }
        )
        frame = pd.DataFrame(rows)
        frame["checkpoint_id"] = self.checkpoint_id
        frame["confidence_source"] = (
            None if self.confidence_source is None else str(self.confidence_source)
        )
        frame["confident_fraction"] = self.confident_fraction
        return frame


class PrCurve(BaseModel):
    class_id: int
    thresholds: List[float]
    precision: List[float]
    recall: List[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "threshold": self.thresholds,
                "precision": self.precision,
                "recall": self.recall,
            }
        )
