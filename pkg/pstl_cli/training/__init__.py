"""
Self-supervised pretraining: learning rate schedule, training loops and loss telemetry.
"""
from .schedule import lr_at, cosine_lr
from .pretrain import Pretrainer, TrainRun, StepLoss, Views, training_sequences, write_telemetry, read_telemetry
