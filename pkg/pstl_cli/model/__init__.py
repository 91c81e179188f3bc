"""
The encoder, its projector and their checkpoints.
"""
from .encoder import EncoderState, normalize_adjacency, encode, project
from .checkpoint import save_checkpoint, load_checkpoint, check_compatible
