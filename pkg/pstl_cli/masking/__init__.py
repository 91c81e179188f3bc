"""
Spatial and temporal masking of skeleton sequences.
"""
from .spatial import SpatialMaskPlan, csm_probabilities, degree_probabilities, uniform_probabilities, \
    mask_probabilities, sample_spatial_mask, sample_part_mask, restrict_topology, apply_spatial_mask, kept_joints
from .temporal import TemporalMaskPlan, motion_energy, motion_attention, sample_temporal_mask, apply_temporal_mask
