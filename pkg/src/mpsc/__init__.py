"""mpsc: a multi-policy statement checker.

Classifies text statements as credible or suspicious with a recurrent
network over lexical features fused with syntactic structure counts.
The statement policy analyzes the text alone; the search policy first
retrieves related news articles and feeds their aggregated contents
into the lexical branch as extra context.
"""

__version__ = "0.1.0"

from .corpus import DataSplits, Label, LabeledStatement, Source
from .features import FeaturePipeline, HashTextEncoder
from .neural import ModelConfig, NetworkParams, Prediction, TrainConfig
from .synfeat import ScalerParams, SyntacticVector

__all__ = [
    "DataSplits",
    "FeaturePipeline",
    "HashTextEncoder",
    "Label",
    "LabeledStatement",
    "ModelConfig",
    "NetworkParams",
    "Prediction",
    "ScalerParams",
    "Source",
    "SyntacticVector",
    "TrainConfig",
    "__version__",
]
