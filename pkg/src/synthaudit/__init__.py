"""Privacy, diversity and transfer-utility audits for synthetic image datasets."""

__version__ = "0.1.0"

from .tensor_io import (  # noqa: F401
    CandidateSet,
    ImageSample,
    Label,
    LabeledDataset,
    Origin,
)
