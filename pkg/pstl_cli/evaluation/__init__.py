"""
Downstream evaluation of pretrained encoders and the reports they produce.
"""
from .report import EvalReport, write_reports, write_rows
from .classifier import LinearClassifier, fit_classifier
from .protocols import EvalResult, extract_features, linear_eval, partial_body_eval, finetune_eval, \
    semi_supervised_eval, stratified_subset
from .fuse import fuse_streams, softmax
