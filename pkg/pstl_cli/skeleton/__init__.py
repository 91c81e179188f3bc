"""
Skeleton sequences, graph topologies and labelled datasets of them.
"""
from .topology import GraphTopology, BODY_PARTS, LAYOUTS, degree_vector, compact10, ntu25
from .sequence import SkeletonSequence, Modality, to_motion_stream, to_bone_stream, resize_temporal, to_modality
from .dataset import Dataset, Split, load_dataset, save_dataset
