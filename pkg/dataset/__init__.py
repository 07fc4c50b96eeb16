"""
Data sources: synthetic multi-view subjects, image directories, manifests and
the test-matrix sampling protocol
"""

from .records import LabeledVector, as_training_pairs, first_per_class, restrict_classes
from .synthetic import SyntheticDataset, SyntheticSpec, generate_synthetic
from .images import ImageCollection, load_image_directory, load_image_vector, write_pgm
from .protocol import ExperimentSpec, group_by_subject, sample_test_matrices

__all__ = [
    'LabeledVector',
    'as_training_pairs',
    'first_per_class',
    'restrict_classes',
    'SyntheticDataset',
    'SyntheticSpec',
    'generate_synthetic',
    'ImageCollection',
    'load_image_directory',
    'load_image_vector',
    'write_pgm',
    'ExperimentSpec',
    'group_by_subject',
    'sample_test_matrices',
]
