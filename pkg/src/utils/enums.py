from enum import StrEnum, auto


class ModelRole(StrEnum):
    """
    Which network of the student-teacher pair a checkpoint belongs to.
    """

    TEACHER = auto()
    STUDENT = auto()


class StudentMethod(StrEnum):
    """
    Ways of training the student network.
    """

    U_SLS = auto()
    PLAIN_SLS = auto()
    FS_DU = auto()


class DatasetSplit(StrEnum):
    """
    Splits listed in a dataset manifest.
    """

    TRAIN = auto()
    VALIDATION = auto()
    TEST = auto()
    UNLABELED = auto()


class ConfidenceSource(StrEnum):
    """
    Whose confidence gates a confident-subset evaluation: MC dropout on the
    student or the teacher, or maps handed in by the caller.
    """

    STUDENT = auto()
    TEACHER = auto()
    PROVIDED = auto()
